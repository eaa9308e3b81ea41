"""Deterministic discrete-event engine for stream scheduling episodes.

One episode: Poisson client arrivals per scheduler site, stream binding
through the active policy, per-worker FIFO queues with batching, sampled
network/processing delays, and per-second success/failure/rejection
accounting over a sliding window.

Internal clock is in seconds; all configured delays (ms) are converted at
the event boundaries.  Every random draw comes from one seeded generator in
event order, so an episode is bit-reproducible from (config, seed).
"""

from __future__ import annotations

import hashlib
import heapq
import json
import random
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .catalog import DELAY_SIZE_FLOOR, Catalog, fractional_load
from .policies import Assignment, PolicyKind, SystemView, apply_policy
from .topology import Topology, Worker, deploy_workers
from .workload import (
    DEFAULT_APP_MIX,
    ClientGenerator,
    LambdaSchedule,
    Stream,
    app_table,
    next_arrival,
    spawn_stream,
)

# Event kinds, processed FIFO among equal timestamps (heap sequence number).
_ARRIVAL = 0      # next client reaches a site
_EMIT = 1         # a bound stream emits its next query
_QUERY = 2        # a query reaches its worker's queue
_BATCH_DONE = 3   # a worker finishes a batch
_RESPONSE = 4     # a response reaches the client
_STREAM_END = 5   # a bound stream stops emitting
_TICK = 6         # metrics second boundary

# State-feature partition defaults: delay bins (ms) and rate bins (fps)
# chosen to separate the reference application clusters.
DEFAULT_DELAY_BINS = (0.0, 50.0, 150.0, 400.0)
DEFAULT_RATE_BINS = (0.0, 5.0, 15.0, 25.0)

N_BASE_FEATURES = 3  # per worker: bound streams, responses/s, load


@dataclass(frozen=True)
class MetricsWindow:
    """Ratios over queries submitted (and resolved) within a trailing window."""

    t: float
    q_success: float
    q_fail: float
    q_reject: float
    n_success: int
    n_fail: int
    n_reject: int
    offered_qps: float
    per_app_success: tuple[float, ...]


@dataclass(frozen=True)
class BindDecision:
    """One scheduling decision, with enough context to re-check feasibility."""

    time: float
    stream: Stream
    policy: PolicyKind
    worker_id: str | None      # None = rejected
    load_before: float | None  # chosen worker's load ledger before binding


@dataclass
class EpisodeConfig:
    topology: Topology
    catalog: Catalog
    workers: list[Worker] | None = None   # deployed on demand when None
    schedule: LambdaSchedule = field(default_factory=lambda: LambdaSchedule.constant(60.0))
    app_mix: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_APP_MIX))
    horizon: float = 480.0                # s
    window: float = 25.0                  # s, metrics/action window
    metrics_period: float = 1.0           # s
    early_stop_success: float | None = None
    seed: int = 0
    delay_bins: Sequence[float] = DEFAULT_DELAY_BINS
    rate_bins: Sequence[float] = DEFAULT_RATE_BINS

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.window % self.metrics_period != 0:
            raise ValueError("metrics period must divide the window length")
        if self.metrics_period != 1.0:
            raise ValueError("only 1 Hz metrics sampling is supported")

    def fingerprint(self) -> str:
        doc = {
            "clusters": sorted(self.topology.clusters),
            "sites": [s.id for s in self.topology.sites],
            "variants": sorted(self.catalog.variants),
            "schedule": self.schedule.steps,
            "app_mix": self.app_mix,
            "horizon": self.horizon,
            "window": self.window,
            "early_stop": self.early_stop_success,
            "seed": self.seed,
            "delay_bins": list(self.delay_bins),
            "rate_bins": list(self.rate_bins),
        }
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class MetricsRow:
    t: float
    policy: str
    window: MetricsWindow


class WorkerRuntime:
    """Live per-worker state: FIFO queue, busy flag, and the load ledger."""

    __slots__ = ("worker", "idx", "queue", "busy", "load", "n_streams",
                 "batch_size", "base_delay", "jitter", "max_input", "capacity")

    def __init__(self, worker: Worker, idx: int):
        self.worker = worker
        self.idx = idx
        self.queue: deque = deque()
        self.busy = False
        self.load = 0.0
        self.n_streams = 0
        v = worker.variant
        self.batch_size = v.batch_size
        self.base_delay = v.base_delay
        self.jitter = v.delay_jitter
        self.max_input = v.max_input_size
        self.capacity = v.base_capacity


class _BoundStream:
    __slots__ = ("stream", "rt", "app_idx", "deadline_s", "eta_rho",
                 "path", "trans_s", "n_queries", "next_k")

    def __init__(self, stream, rt, app_idx, eta_rho, path, trans_s, n_queries):
        self.stream = stream
        self.rt = rt
        self.app_idx = app_idx
        self.deadline_s = stream.tolerated_delay / 1000.0
        self.eta_rho = eta_rho
        self.path = path
        self.trans_s = trans_s
        self.n_queries = n_queries
        self.next_k = 0


def classify_response(query_emit_time: float, tolerated_delay_ms: float,
                      delivered_at: float) -> bool:
    """True when the response met the stream's end-to-end deadline (closed bound)."""
    return delivered_at - query_emit_time <= tolerated_delay_ms / 1000.0 + 1e-12


class PolicyProvider(Protocol):
    """Supplies the active policy at episode start and at every window boundary."""

    def start(self, engine: "Engine") -> PolicyKind: ...

    def tick(self, engine: "Engine", t: float, window: MetricsWindow) -> PolicyKind: ...

    def finish(self, engine: "Engine", t: float, window: MetricsWindow) -> None: ...


class FixedPolicy:
    """A static policy: the same action at every window."""

    def __init__(self, kind: PolicyKind):
        self.kind = PolicyKind(kind)

    def start(self, engine):
        return self.kind

    def tick(self, engine, t, window):
        return self.kind

    def finish(self, engine, t, window):
        pass


class Engine:
    """Single-episode event-driven simulator; single-threaded and deterministic."""

    def __init__(self, config: EpisodeConfig, provider: PolicyProvider):
        self.config = config
        self.provider = provider
        self.topology = config.topology
        self.catalog = config.catalog
        workers = config.workers
        if workers is None:
            workers = deploy_workers(config.topology, config.catalog)
        if not workers:
            raise ValueError("no workers deployed; nothing to schedule on")
        self.workers = workers
        self.rts = [WorkerRuntime(w, i) for i, w in enumerate(workers)]
        self._rt_by_id = {rt.worker.id: rt for rt in self.rts}

        self.horizon = float(config.horizon)
        self.window_s = int(config.window)
        n_secs = int(self.horizon) + 2
        self._n_secs = n_secs
        napps = len(app_table())
        self._app_idx = {a.name: i for i, a in enumerate(app_table())}
        self.emitted = np.zeros(n_secs, dtype=np.int64)
        self.success = np.zeros(n_secs, dtype=np.int64)
        self.failed = np.zeros(n_secs, dtype=np.int64)
        self.rejected = np.zeros(n_secs, dtype=np.int64)
        self.app_emitted = np.zeros((napps, n_secs), dtype=np.int64)
        self.app_success = np.zeros((napps, n_secs), dtype=np.int64)
        self.app_failed = np.zeros((napps, n_secs), dtype=np.int64)
        self.app_rejected = np.zeros((napps, n_secs), dtype=np.int64)

        nw = len(self.rts)
        self.rw = np.zeros((nw, n_secs), dtype=np.int32)  # responses per worker-second
        self.delay_bins = tuple(config.delay_bins)
        self.rate_bins = tuple(config.rate_bins)
        self._n_cells = len(self.delay_bins) * len(self.rate_bins)
        self.qsum = np.zeros((nw, self._n_cells), dtype=np.float64)
        self.n_features = N_BASE_FEATURES + self._n_cells
        # state_history[s] = per-worker features sampled at second s
        self.state_history = np.zeros((n_secs, nw, self.n_features), dtype=np.float64)

        self.rng = random.Random(config.seed * 1_000_003 + 17)
        self.gens = [
            ClientGenerator(
                schedule=config.schedule,
                app_mix=dict(config.app_mix),
                access_delay_range=config.topology.access_delay_range,
                rng_seed=config.seed * 1_000_003 + 1000 + i,
                site_id=site.id,
            )
            for i, site in enumerate(config.topology.sites)
        ]
        self.views = [
            SystemView(
                workers=self.rts,
                paths={cid: config.topology.path(site.id, cid) for cid in config.topology.clusters},
                uplink_rate=config.topology.uplink_rate,
            )
            for site in config.topology.sites
        ]

        self.heap: list = []
        self._seq = 0
        self.ended = False
        self.end_time = self.horizon
        self.active_policy: PolicyKind | None = None
        self.decisions: list[BindDecision] = []
        self.switches: list[tuple[float, str]] = []
        self.rows: list[MetricsRow] = []
        self._bound: dict[int, _BoundStream] = {}
        self.min_response_delay = float("inf")  # smallest end-to-end time observed

    # -- event plumbing ----------------------------------------------------

    def _push(self, t: float, kind: int, payload) -> None:
        heapq.heappush(self.heap, (t, self._seq, kind, payload))
        self._seq += 1

    def _cell_index(self, tolerated_delay: float, rate: float) -> int:
        d = bisect_right(self.delay_bins, tolerated_delay) - 1
        r = bisect_right(self.rate_bins, rate) - 1
        return d * len(self.rate_bins) + r

    # -- stream binding ----------------------------------------------------

    def _bind(self, stream: Stream, site_idx: int, now: float) -> None:
        view = self.views[site_idx]
        assignment: Assignment | None = apply_policy(self.active_policy, stream, view, self.rng)
        app_idx = self._app_idx[stream.app.name]
        n_queries = stream.query_count()
        if assignment is None:
            self.decisions.append(BindDecision(now, stream, self.active_policy, None, None))
            ks = np.arange(n_queries, dtype=np.float64)
            ts = now + ks / stream.rate
            secs = ts[ts <= self.horizon].astype(np.int64)
            np.add.at(self.rejected, secs, 1)
            np.add.at(self.app_rejected[app_idx], secs, 1)
            return
        rt = self._rt_by_id[assignment.worker.id]
        self.decisions.append(
            BindDecision(now, stream, self.active_policy, rt.worker.id, rt.load)
        )
        eta_rho = fractional_load(rt.worker.variant, stream.input_size) * stream.rate
        bs = _BoundStream(
            stream,
            rt,
            app_idx,
            eta_rho,
            path=view.paths[rt.worker.cluster.id],
            trans_s=stream.input_size / view.uplink_rate,
            n_queries=n_queries,
        )
        rt.load += eta_rho
        rt.n_streams += 1
        self.qsum[rt.idx, self._cell_index(stream.tolerated_delay, stream.rate)] += stream.rate
        self._bound[stream.id] = bs
        self._push(now, _EMIT, bs)
        self._push(now + stream.duration, _STREAM_END, bs)

    def _unbind(self, bs: _BoundStream) -> None:
        rt = bs.rt
        rt.load -= bs.eta_rho
        rt.n_streams -= 1
        s = bs.stream
        self.qsum[rt.idx, self._cell_index(s.tolerated_delay, s.rate)] -= s.rate
        self._bound.pop(s.id, None)

    # -- worker pipeline ---------------------------------------------------

    def _start_batch(self, rt: WorkerRuntime, now: float) -> None:
        q = rt.queue
        n = min(rt.batch_size, len(q))
        batch = [q.popleft() for _ in range(n)]
        max_size = max(item[1].stream.input_size for item in batch)
        d_ms = rt.base_delay * (DELAY_SIZE_FLOOR + (1.0 - DELAY_SIZE_FLOOR) * max_size / rt.max_input)
        if rt.jitter > 0.0:
            d_ms += self.rng.gauss(0.0, rt.jitter)
        rt.busy = True
        self._push(now + max(0.0, d_ms) / 1000.0, _BATCH_DONE, (rt, batch))

    # -- metrics -----------------------------------------------------------

    def window_metrics(self, t: float, window_s: int | None = None) -> MetricsWindow:
        """Ratios over queries submitted in (t - window, t] and resolved by t."""
        w = self.window_s if window_s is None else int(window_s)
        hi = int(t)
        lo = max(0, hi - w)
        n_s = int(self.success[lo:hi].sum())
        n_f = int(self.failed[lo:hi].sum())
        n_r = int(self.rejected[lo:hi].sum())
        denom = n_s + n_f + n_r
        if denom == 0:
            q_f = q_r = 0.0
        else:
            q_f = n_f / denom
            q_r = n_r / denom
        per_app = []
        for a in range(self.app_success.shape[0]):
            s = int(self.app_success[a, lo:hi].sum())
            f = int(self.app_failed[a, lo:hi].sum())
            r = int(self.app_rejected[a, lo:hi].sum())
            d = s + f + r
            per_app.append(1.0 if d == 0 else s / d)
        offered = float(self.emitted[lo:hi].sum() + self.rejected[lo:hi].sum()) / max(w, 1)
        return MetricsWindow(
            t=t,
            q_success=1.0 - q_f - q_r,
            q_fail=q_f,
            q_reject=q_r,
            n_success=n_s,
            n_fail=n_f,
            n_reject=n_r,
            offered_qps=offered,
            per_app_success=tuple(per_app),
        )

    def _snapshot(self, sec: int) -> None:
        snap = self.state_history[sec]
        for rt in self.rts:
            row = snap[rt.idx]
            row[0] = rt.n_streams
            row[1] = self.rw[rt.idx, sec - 1] if sec >= 1 else 0.0
            row[2] = rt.load
        snap[:, N_BASE_FEATURES:] = self.qsum

    def _end_episode(self, t: float) -> None:
        self.ended = True
        self.end_time = t

    # -- main loop ----------------------------------------------------------

    def run(self) -> "EpisodeResult":
        cfg = self.config
        pol = self.provider.start(self)
        self.active_policy = PolicyKind(pol)
        self.switches.append((0.0, self.active_policy.key))

        for i, gen in enumerate(self.gens):
            self._push(next_arrival(gen, 0.0), _ARRIVAL, i)
        for t in range(1, int(self.horizon) + 1):
            self._push(float(t), _TICK, None)

        policy_period = int(cfg.window)
        heap = self.heap
        while heap:
            now, _, kind, payload = heapq.heappop(heap)

            if kind == _EMIT:
                if self.ended:
                    continue
                bs = payload
                s = bs.stream
                k = bs.next_k
                emit = s.arrival_time + k / s.rate
                if emit > self.horizon:
                    continue
                sec = int(emit)
                self.emitted[sec] += 1
                self.app_emitted[bs.app_idx, sec] += 1
                net1 = self.rng.gauss(bs.path.mean_delay, bs.path.delay_std)
                if net1 < 0.0:
                    net1 = 0.0
                join = emit + (s.access_delay + net1) / 1000.0 + bs.trans_s
                self._push(join, _QUERY, (emit, bs))
                bs.next_k = k + 1
                if bs.next_k < bs.n_queries:
                    nxt = s.arrival_time + bs.next_k / s.rate
                    if nxt <= self.horizon:
                        self._push(nxt, _EMIT, bs)

            elif kind == _QUERY:
                _, bs = payload
                rt = bs.rt
                rt.queue.append(payload)
                if not rt.busy:
                    self._start_batch(rt, now)

            elif kind == _BATCH_DONE:
                rt, batch = payload
                rt.busy = False
                for item in batch:
                    bs = item[1]
                    net2 = self.rng.gauss(bs.path.mean_delay, bs.path.delay_std)
                    if net2 < 0.0:
                        net2 = 0.0
                    delivered = now + (net2 + bs.stream.access_delay) / 1000.0
                    self._push(delivered, _RESPONSE, item)
                if rt.queue:
                    self._start_batch(rt, now)

            elif kind == _RESPONSE:
                emit, bs = payload
                sec = int(emit)
                if now - emit < self.min_response_delay:
                    self.min_response_delay = now - emit
                if now - emit <= bs.deadline_s + 1e-12:
                    self.success[sec] += 1
                    self.app_success[bs.app_idx, sec] += 1
                else:
                    self.failed[sec] += 1
                    self.app_failed[bs.app_idx, sec] += 1
                wsec = int(now)
                if wsec >= self._n_secs:
                    wsec = self._n_secs - 1
                self.rw[bs.rt.idx, wsec] += 1

            elif kind == _ARRIVAL:
                if self.ended or now > self.horizon:
                    continue
                site_idx = payload
                gen = self.gens[site_idx]
                stream = spawn_stream(gen, now)
                self._push(next_arrival(gen, now), _ARRIVAL, site_idx)
                self._bind(stream, site_idx, now)

            elif kind == _STREAM_END:
                if payload.stream.id in self._bound:
                    self._unbind(payload)

            elif kind == _TICK:
                if self.ended:
                    continue
                t = now
                sec = int(t)
                self._snapshot(sec)
                window = self.window_metrics(t)
                self.rows.append(MetricsRow(t=t, policy=self.active_policy.key, window=window))
                if sec % policy_period == 0:
                    stop = (
                        cfg.early_stop_success is not None
                        and window.q_success <= cfg.early_stop_success
                    )
                    if stop or t >= self.horizon:
                        self._end_episode(t)
                        self.provider.finish(self, t, window)
                    else:
                        new_pol = PolicyKind(self.provider.tick(self, t, window))
                        if new_pol != self.active_policy:
                            self.switches.append((t, new_pol.key))
                        self.active_policy = new_pol
                elif t >= self.horizon:
                    self._end_episode(t)
                    self.provider.finish(self, t, window)

        return self._result()

    # -- results -------------------------------------------------------------

    def _result(self) -> "EpisodeResult":
        end_sec = int(self.end_time)
        sl = slice(0, end_sec + 1)
        totals = {
            "emitted": int(self.emitted[sl].sum()),
            "success": int(self.success[sl].sum()),
            "failed": int(self.failed[sl].sum()),
            "rejected": int(self.rejected[sl].sum()),
        }
        served = totals["success"] + totals["failed"] + totals["rejected"]
        ratio = totals["success"] / served if served else 1.0
        return EpisodeResult(
            config=self.config,
            rows=self.rows,
            decisions=self.decisions,
            switches=self.switches,
            totals=totals,
            success_ratio=ratio,
            end_time=self.end_time,
            state_history=self.state_history[: end_sec + 1],
            workers=self.workers,
            engine=self,
        )


@dataclass
class EpisodeResult:
    config: EpisodeConfig
    rows: list[MetricsRow]
    decisions: list[BindDecision]
    switches: list[tuple[float, str]]
    totals: dict[str, int]
    success_ratio: float
    end_time: float
    state_history: np.ndarray  # (seconds, workers, features)
    workers: list[Worker]
    engine: Engine

    def window_at(self, t: float, window_s: int | None = None) -> MetricsWindow:
        return self.engine.window_metrics(t, window_s)


def run_episode(config: EpisodeConfig, policy_provider) -> EpisodeResult:
    """Run one episode to completion under the given policy source."""
    if isinstance(policy_provider, (PolicyKind, int)):
        policy_provider = FixedPolicy(PolicyKind(policy_provider))
    return Engine(config, policy_provider).run()


# -- CSV output --------------------------------------------------------------

CSV_FIXED_COLUMNS = ("time_s", "policy", "q_success", "q_fail", "q_reject", "offered_qps")


def csv_columns() -> list[str]:
    return list(CSV_FIXED_COLUMNS) + [f"app_{a.name}_success" for a in app_table()]


def metrics_csv_lines(result: EpisodeResult, policy_label: str) -> list[str]:
    """Render the per-tick metrics table; stable formatting for byte-level replay."""
    steps = result.config.schedule.steps
    lam_tag = f"{steps[0][1]:g}" if len(steps) == 1 else "dynamic"
    lines = [
        f"# config={result.config.fingerprint()} seed={result.config.seed} lambda={lam_tag}",
        ",".join(csv_columns()),
    ]
    for row in result.rows:
        w = row.window
        vals = [
            repr(float(row.t)),
            policy_label,
            repr(float(w.q_success)),
            repr(float(w.q_fail)),
            repr(float(w.q_reject)),
            repr(float(w.offered_qps)),
        ]
        vals += [repr(float(x)) for x in w.per_app_success]
        lines.append(",".join(vals))
    return lines


def write_metrics_csv(result: EpisodeResult, path, policy_label: str) -> None:
    """Write the run CSV atomically, creating parent directories as needed."""
    import os
    import tempfile
    from pathlib import Path

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as f:
        f.write("\n".join(metrics_csv_lines(result, policy_label)) + "\n")
    os.replace(tmp, path)
