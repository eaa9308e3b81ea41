"""Feasibility filter and the seven static stream-binding policies.

A policy maps an arriving stream to one feasible worker (variant instance on
a cluster) or rejects it.  Feasibility requires, against the deciding site's
view of the system: a variant that implements the stream's task, spare load
capacity, a pessimistic end-to-end delay bound within the stream's tolerated
delay, and sufficient model accuracy.

All argmin/argmax policies break ties deterministically (worker load, then
path mean delay, then worker id) so runs are reproducible.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from typing import Iterable, Mapping, Protocol

from .catalog import fractional_load, processing_delay
from .topology import PathStats, Worker
from .workload import Stream

# Zero-load stand-in for the inverse-load sampling weight, which is singular
# at an idle worker.
EPSILON_LOAD = 1e-3


class PolicyKind(enum.IntEnum):
    """Stable integer encoding of the static policies (the RL action space)."""

    CLOSEST = 0
    LOAD_BALANCING = 1
    FARTHEST = 2
    CHEAPER = 3
    RP_LATENCY = 4
    RP_LOAD = 5
    LEAST_IMPEDANCE = 6

    @property
    def key(self) -> str:
        return self.name.lower()

    @classmethod
    def from_key(cls, key: str) -> "PolicyKind":
        try:
            return cls[key.upper()]
        except KeyError:
            raise ValueError(f"unknown policy {key!r}; expected one of {policy_names()}") from None


def policy_names() -> list[str]:
    return [k.key for k in PolicyKind]


class WorkerState(Protocol):
    """What a policy needs to know about one worker at decision time."""

    worker: Worker
    load: float  # current load in max-size-queries/s


@dataclass
class SystemView:
    """Consistent decision-time snapshot seen from one scheduler site."""

    workers: list[WorkerState]
    paths: Mapping[str, PathStats]  # cluster id -> stats from the deciding site
    uplink_rate: float              # bytes/s


@dataclass(frozen=True)
class Assignment:
    stream: Stream
    worker: Worker
    decision_time: float


def transmission_delay_ms(input_size: float, uplink_rate: float) -> float:
    return 1000.0 * input_size / uplink_rate


def feasible_set(stream: Stream, view: SystemView) -> list[WorkerState]:
    """Workers that can serve `stream` without violating any constraint."""
    out = []
    for ws in view.workers:
        v = ws.worker.variant
        if v.model.task.id != stream.task:
            continue
        if stream.input_size > v.max_input_size:
            continue
        if v.model.accuracy < stream.required_accuracy:
            continue
        if ws.load + fractional_load(v, stream.input_size) * stream.rate > v.base_capacity:
            continue
        path = view.paths[ws.worker.cluster.id]
        rtt = 2.0 * (stream.access_delay + path.mean_delay + 2.0 * path.delay_std)
        e2e = (
            rtt
            + transmission_delay_ms(stream.input_size, view.uplink_rate)
            + processing_delay(v, stream.input_size)
        )
        if e2e > stream.tolerated_delay:
            continue
        out.append(ws)
    return out


def _pick(stream: Stream, view: SystemView, candidates: Iterable[WorkerState], key) -> Assignment | None:
    best = min(candidates, key=key, default=None)
    if best is None:
        return None
    return Assignment(stream=stream, worker=best.worker, decision_time=stream.arrival_time)


def _path_spread(view: SystemView, ws: WorkerState) -> float:
    p = view.paths[ws.worker.cluster.id]
    return p.mean_delay + 2.0 * p.delay_std


def _expected_e2e(stream: Stream, view: SystemView, ws: WorkerState) -> float:
    p = view.paths[ws.worker.cluster.id]
    return 2.0 * (p.mean_delay + 2.0 * p.delay_std) + processing_delay(ws.worker.variant, stream.input_size)


def select_closest(stream: Stream, view: SystemView, rng: random.Random) -> Assignment | None:
    feas = feasible_set(stream, view)
    return _pick(stream, view, feas,
                 key=lambda ws: (_path_spread(view, ws), ws.load, ws.worker.id))


def select_load_balancing(stream: Stream, view: SystemView, rng: random.Random) -> Assignment | None:
    feas = feasible_set(stream, view)
    return _pick(stream, view, feas,
                 key=lambda ws: (ws.load, view.paths[ws.worker.cluster.id].mean_delay, ws.worker.id))


def select_farthest(stream: Stream, view: SystemView, rng: random.Random) -> Assignment | None:
    feas = feasible_set(stream, view)
    return _pick(stream, view, feas,
                 key=lambda ws: (-_path_spread(view, ws), ws.load, ws.worker.id))


def select_cheaper(stream: Stream, view: SystemView, rng: random.Random) -> Assignment | None:
    # Keeps the best-performing variants free by taking the slowest expected
    # end-to-end delay that is still feasible.
    feas = feasible_set(stream, view)
    return _pick(stream, view, feas,
                 key=lambda ws: (-_expected_e2e(stream, view, ws), ws.load, ws.worker.id))


def select_least_impedance(stream: Stream, view: SystemView, rng: random.Random) -> Assignment | None:
    feas = feasible_set(stream, view)
    return _pick(stream, view, feas,
                 key=lambda ws: (_expected_e2e(stream, view, ws), ws.load, ws.worker.id))


def _weighted_choice(stream: Stream, feas: list[WorkerState], weights: list[float],
                     rng: random.Random) -> Assignment | None:
    if not feas:
        return None
    total = sum(weights)
    x = rng.random() * total
    acc = 0.0
    chosen = feas[-1]
    for ws, w in zip(feas, weights):
        acc += w
        if x < acc:
            chosen = ws
            break
    return Assignment(stream=stream, worker=chosen.worker, decision_time=stream.arrival_time)


def select_rp_latency(stream: Stream, view: SystemView, rng: random.Random) -> Assignment | None:
    feas = feasible_set(stream, view)
    weights = [1.0 / _expected_e2e(stream, view, ws) for ws in feas]
    return _weighted_choice(stream, feas, weights, rng)


def select_rp_load(stream: Stream, view: SystemView, rng: random.Random) -> Assignment | None:
    feas = feasible_set(stream, view)
    weights = [ws.worker.variant.base_capacity / max(ws.load, EPSILON_LOAD) for ws in feas]
    return _weighted_choice(stream, feas, weights, rng)


_SELECTORS = {
    PolicyKind.CLOSEST: select_closest,
    PolicyKind.LOAD_BALANCING: select_load_balancing,
    PolicyKind.FARTHEST: select_farthest,
    PolicyKind.CHEAPER: select_cheaper,
    PolicyKind.RP_LATENCY: select_rp_latency,
    PolicyKind.RP_LOAD: select_rp_load,
    PolicyKind.LEAST_IMPEDANCE: select_least_impedance,
}


def apply_policy(kind: PolicyKind, stream: Stream, view: SystemView,
                 rng: random.Random) -> Assignment | None:
    """Dispatch to the selected policy; None means the stream is rejected."""
    return _SELECTORS[PolicyKind(kind)](stream, view, rng)
