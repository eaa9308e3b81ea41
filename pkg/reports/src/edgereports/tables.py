"""Loading and schema validation for simulator CSV artifacts.

Four artifact kinds are recognized by their headers:

* run metrics:     time_s,policy,q_success,q_fail,q_reject,offered_qps,app_*_success
* switch log:      time_s,policy,latency_ms
* learning curve:  episode,return,mean_success,epsilon
* summary:         policy,n_runs,mean_success,std_success

Run and switch files carry a provenance comment line
``# config=<hash> seed=<n> [lambda=<tag>]``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

RUN_PREFIX = ["time_s", "policy", "q_success", "q_fail", "q_reject", "offered_qps"]
SWITCH_HEADER = ["time_s", "policy", "latency_ms"]
CURVE_HEADER = ["episode", "return", "mean_success", "epsilon"]
SUMMARY_HEADER = ["policy", "n_runs", "mean_success", "std_success"]


class SchemaError(ValueError):
    pass


@dataclass
class RunTable:
    """One run's per-tick metrics plus identifying metadata."""

    path: Path
    policy: str
    seed: int | None
    lam: str | None
    config: str | None
    time_s: np.ndarray
    q_success: np.ndarray
    q_fail: np.ndarray
    q_reject: np.ndarray
    offered_qps: np.ndarray
    app_success: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def mean_success(self) -> float:
        return float(self.q_success.mean())


@dataclass
class SwitchLog:
    path: Path
    seed: int | None
    time_s: np.ndarray
    policy: list[str]
    latency_ms: np.ndarray


@dataclass
class LearningCurve:
    path: Path
    episode: np.ndarray
    ep_return: np.ndarray
    mean_success: np.ndarray
    epsilon: np.ndarray


def _parse_provenance(line: str) -> dict[str, str]:
    if not line.startswith("#"):
        return {}
    return dict(re.findall(r"(\w+)=(\S+)", line))


def _read_lines(path: Path) -> tuple[dict[str, str], list[str], list[list[str]]]:
    raw = path.read_text().splitlines()
    meta: dict[str, str] = {}
    while raw and raw[0].startswith("#"):
        meta.update(_parse_provenance(raw.pop(0)))
    if not raw:
        raise SchemaError(f"{path}: no header row")
    header = raw[0].split(",")
    rows = [line.split(",") for line in raw[1:] if line]
    return meta, header, rows


def classify(path: Path) -> str:
    """One of 'run', 'switch', 'curve', 'summary', or 'unknown'."""
    try:
        _, header, _ = _read_lines(path)
    except (SchemaError, UnicodeDecodeError):
        return "unknown"
    if header[: len(RUN_PREFIX)] == RUN_PREFIX:
        return "run"
    if header == SWITCH_HEADER:
        return "switch"
    if header == CURVE_HEADER:
        return "curve"
    if header == SUMMARY_HEADER:
        return "summary"
    return "unknown"


def load_run(path: Path) -> RunTable:
    meta, header, rows = _read_lines(path)
    if header[: len(RUN_PREFIX)] != RUN_PREFIX:
        raise SchemaError(f"{path}: not a run metrics file (header {header[:6]})")
    if not rows:
        raise SchemaError(f"{path}: empty run table")
    cols = {name: i for i, name in enumerate(header)}
    data = np.array([[r[i] for i in range(len(header))] for r in rows], dtype=object)

    def fcol(name: str) -> np.ndarray:
        return data[:, cols[name]].astype(float)

    app_cols = [h for h in header if h.startswith("app_") and h.endswith("_success")]
    return RunTable(
        path=path,
        policy=str(data[0, cols["policy"]]),
        seed=int(meta["seed"]) if "seed" in meta else None,
        lam=meta.get("lambda"),
        config=meta.get("config"),
        time_s=fcol("time_s"),
        q_success=fcol("q_success"),
        q_fail=fcol("q_fail"),
        q_reject=fcol("q_reject"),
        offered_qps=fcol("offered_qps"),
        app_success={h[len("app_"):-len("_success")]: fcol(h) for h in app_cols},
    )


def load_switches(path: Path) -> SwitchLog:
    meta, header, rows = _read_lines(path)
    if header != SWITCH_HEADER:
        raise SchemaError(f"{path}: not a switch log")
    if not rows:
        raise SchemaError(f"{path}: empty switch log")
    return SwitchLog(
        path=path,
        seed=int(meta["seed"]) if "seed" in meta else None,
        time_s=np.array([float(r[0]) for r in rows]),
        policy=[r[1] for r in rows],
        latency_ms=np.array([float(r[2]) for r in rows]),
    )


def load_curve(path: Path) -> LearningCurve:
    _, header, rows = _read_lines(path)
    if header != CURVE_HEADER:
        raise SchemaError(f"{path}: not a learning curve")
    if not rows:
        raise SchemaError(f"{path}: empty learning curve")
    arr = np.array(rows, dtype=float)
    return LearningCurve(path, arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])


@dataclass
class ArtifactSet:
    runs: list[RunTable]
    switches: list[SwitchLog]
    curves: list[LearningCurve]

    def runs_by_policy(self) -> dict[str, list[RunTable]]:
        out: dict[str, list[RunTable]] = {}
        for r in self.runs:
            out.setdefault(r.policy, []).append(r)
        return out

    def runs_by_lambda(self) -> dict[str, list[RunTable]]:
        out: dict[str, list[RunTable]] = {}
        for r in self.runs:
            out.setdefault(r.lam or "na", []).append(r)
        return out


def scan_directory(root: Path) -> ArtifactSet:
    """Recursively collect every recognizable CSV artifact under `root`."""
    runs, switches, curves = [], [], []
    for path in sorted(root.rglob("*.csv")):
        kind = classify(path)
        if kind == "run":
            runs.append(load_run(path))
        elif kind == "switch":
            switches.append(load_switches(path))
        elif kind == "curve":
            curves.append(load_curve(path))
    return ArtifactSet(runs=runs, switches=switches, curves=curves)
