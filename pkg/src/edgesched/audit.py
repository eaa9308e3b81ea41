"""Post-hoc audit of an episode's scheduling decisions.

Replays the decision trace with an independently reconstructed load ledger
and re-checks every constraint a binding must satisfy at its decision time:
task compatibility, spare variant capacity, the pessimistic delay bound, and
model accuracy.  Rejections are checked for completeness (no feasible worker
existed).  The checks are written out explicitly rather than routed through
the policy code so the audit does not inherit its bugs.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from .simulator import EpisodeResult

LOAD_TOL = 1e-9
DELAY_TOL = 1e-9


@dataclass(frozen=True)
class AuditViolation:
    time: float
    stream_id: int
    worker_id: str | None
    kind: str
    detail: str


def _worker_feasible(worker, load, stream, path, uplink_rate) -> tuple[bool, str]:
    v = worker.variant
    if v.model.task.id != stream.task:
        return False, "task"
    if stream.input_size > v.max_input_size:
        return False, "input-size"
    if v.model.accuracy < stream.required_accuracy:
        return False, "accuracy"
    eta = stream.input_size / v.max_input_size
    if load + eta * stream.rate > v.base_capacity + LOAD_TOL:
        return False, "capacity"
    rtt = 2.0 * (stream.access_delay + path.mean_delay + 2.0 * path.delay_std)
    trans = 1000.0 * stream.input_size / uplink_rate
    proc = v.base_delay * (0.2 + 0.8 * stream.input_size / v.max_input_size)
    if rtt + trans + proc > stream.tolerated_delay + DELAY_TOL:
        return False, "delay"
    return True, ""


def audit_decisions(result: EpisodeResult) -> list[AuditViolation]:
    """Return every constraint violation found in the episode's decision trace."""
    topo = result.config.topology
    uplink = topo.uplink_rate
    workers = {w.id: w for w in result.workers}
    loads = {wid: 0.0 for wid in workers}
    expiries: list[tuple[float, str, float]] = []  # (end_time, worker id, eta*rho)
    violations: list[AuditViolation] = []

    for d in sorted(result.decisions, key=lambda d: d.time):
        while expiries and expiries[0][0] <= d.time:
            _, wid, eta_rho = heapq.heappop(expiries)
            loads[wid] -= eta_rho
        s = d.stream

        if d.worker_id is None:
            for wid, w in workers.items():
                path = topo.path(s.site_id, w.cluster.id)
                ok, _ = _worker_feasible(w, loads[wid], s, path, uplink)
                if ok:
                    violations.append(AuditViolation(
                        d.time, s.id, None, "incomplete-reject",
                        f"worker {wid} was feasible but stream was rejected"))
            continue

        w = workers[d.worker_id]
        if d.load_before is None or abs(loads[d.worker_id] - d.load_before) > 1e-6:
            violations.append(AuditViolation(
                d.time, s.id, d.worker_id, "ledger",
                f"recorded load {d.load_before} vs replayed {loads[d.worker_id]}"))
        path = topo.path(s.site_id, w.cluster.id)
        ok, why = _worker_feasible(w, loads[d.worker_id], s, path, uplink)
        if not ok:
            violations.append(AuditViolation(
                d.time, s.id, d.worker_id, f"constraint-{why}",
                f"binding violates the {why} constraint"))
        eta_rho = (s.input_size / w.variant.max_input_size) * s.rate
        loads[d.worker_id] += eta_rho
        heapq.heappush(expiries, (d.time + s.duration, d.worker_id, eta_rho))

    return violations
