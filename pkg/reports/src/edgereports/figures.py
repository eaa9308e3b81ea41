"""Figure regeneration from simulator CSV artifacts.

All figures are written as deterministic SVG (fixed hash salt, no embedded
date), so regenerating from identical inputs yields identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "edgereports"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .tables import ArtifactSet, RunTable, SchemaError, SwitchLog  # noqa: E402

POLICY_ORDER = ["closest", "load_balancing", "farthest", "cheaper",
                "rp_latency", "rp_load", "least_impedance", "agent"]
_SAVE_KW = {"metadata": {"Date": None}, "bbox_inches": "tight"}


def _policy_sort(names) -> list[str]:
    known = [p for p in POLICY_ORDER if p in names]
    return known + sorted(set(names) - set(known))


def _save(fig, out_path: Path) -> Path:
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)
    return out_path


def plot_success_over_time(runs: list[RunTable], out_path: Path) -> Path:
    """Mean success ratio per policy over simulation time, with a seed band."""
    if not runs:
        raise SchemaError("no run tables to plot")
    by_policy: dict[str, list[RunTable]] = {}
    for r in runs:
        by_policy.setdefault(r.policy, []).append(r)
    fig, ax = plt.subplots(figsize=(6, 3.2))
    for name in _policy_sort(by_policy):
        group = by_policy[name]
        n = min(len(r.time_s) for r in group)
        t = group[0].time_s[:n]
        ys = np.stack([r.q_success[:n] for r in group])
        mean = ys.mean(axis=0)
        ax.plot(t, 100 * mean, label=name, linewidth=1.4)
        if len(group) > 1:
            std = ys.std(axis=0)
            ax.fill_between(t, 100 * (mean - std), 100 * (mean + std), alpha=0.15)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("success (%)")
    ax.set_ylim(0, 102)
    ax.legend(fontsize=7, ncol=2)
    ax.grid(alpha=0.3)
    return _save(fig, out_path)


def plot_lambda_boxes(runs: list[RunTable], out_path: Path) -> Path:
    """One success-ratio box per (policy, client rate) across seeds."""
    if not runs:
        raise SchemaError("no run tables to plot")
    if any(r.lam is None for r in runs):
        raise SchemaError("run tables missing the lambda tag")
    lams = sorted({r.lam for r in runs}, key=lambda s: (len(s), s))
    policies = _policy_sort({r.policy for r in runs})
    fig, ax = plt.subplots(figsize=(7, 3.2))
    width = 0.8 / max(len(policies), 1)
    for j, pol in enumerate(policies):
        positions, values = [], []
        for i, lam in enumerate(lams):
            vals = [100 * r.mean_success for r in runs if r.policy == pol and r.lam == lam]
            if vals:
                positions.append(i + j * width)
                values.append(vals)
        if values:
            bp = ax.boxplot(values, positions=positions, widths=width * 0.9,
                            patch_artist=True, showfliers=False,
                            medianprops={"color": "black"})
            color = plt.get_cmap("tab10")(j % 10)
            for box in bp["boxes"]:
                box.set_facecolor(color)
                box.set_alpha(0.6)
            ax.plot([], [], color=color, label=pol)
    ax.set_xticks([i + 0.4 for i in range(len(lams))])
    ax.set_xticklabels([f"lambda={lam}" for lam in lams])
    ax.set_ylabel("success (%)")
    ax.legend(fontsize=7, ncol=2)
    ax.grid(alpha=0.3, axis="y")
    return _save(fig, out_path)


def plot_latency_cdf(switches: list[SwitchLog], out_path: Path,
                     arrival_lambdas: tuple[float, ...] = (20.0, 60.0, 100.0)) -> Path:
    """CDF of policy-switch decision latency vs client inter-arrival scales."""
    if not switches:
        raise SchemaError("no switch logs to plot")
    lat = np.sort(np.concatenate([s.latency_ms for s in switches]))
    lat = lat[np.isfinite(lat)]
    if lat.size == 0:
        raise SchemaError("switch logs carry no latency samples")
    fig, ax = plt.subplots(figsize=(5, 3.2))
    cdf = np.arange(1, lat.size + 1) / lat.size
    ax.plot(lat, cdf, label="policy switch", linewidth=1.6)
    grid = np.logspace(-1, 5, 400)
    for lam in arrival_lambdas:
        rate_per_ms = lam / 60.0 / 1000.0
        ax.plot(grid, 1.0 - np.exp(-rate_per_ms * grid), "--", linewidth=1.0,
                label=f"arrival gap (lambda={lam:g})")
    ax.set_xscale("log")
    ax.set_xlabel("delay (ms)")
    ax.set_ylabel("CDF")
    ax.set_ylim(0, 1.02)
    ax.legend(fontsize=7)
    ax.grid(alpha=0.3, which="both")
    return _save(fig, out_path)


def plot_app_success(runs: list[RunTable], out_path: Path) -> Path:
    """Time-averaged per-application success, grouped by policy."""
    if not runs:
        raise SchemaError("no run tables to plot")
    apps = sorted({a for r in runs for a in r.app_success})
    policies = _policy_sort({r.policy for r in runs})
    fig, ax = plt.subplots(figsize=(7, 3.2))
    width = 0.8 / max(len(policies), 1)
    for j, pol in enumerate(policies):
        group = [r for r in runs if r.policy == pol]
        means = []
        for app in apps:
            vals = [100 * float(r.app_success[app].mean()) for r in group if app in r.app_success]
            means.append(np.mean(vals) if vals else np.nan)
        ax.bar(np.arange(len(apps)) + j * width, means, width=width * 0.95, label=pol)
    ax.set_xticks(np.arange(len(apps)) + 0.4)
    ax.set_xticklabels(apps, rotation=20, ha="right", fontsize=7)
    ax.set_ylabel("success (%)")
    ax.legend(fontsize=7, ncol=2)
    ax.grid(alpha=0.3, axis="y")
    return _save(fig, out_path)


def plot_policy_timeline(switches: list[SwitchLog], out_path: Path) -> Path:
    """Step plot of switch-log policy choices over time (one line per seed)."""
    if not switches:
        raise SchemaError("no switch logs to plot")
    names = _policy_sort({p for s in switches for p in s.policy})
    index = {n: i for i, n in enumerate(names)}
    fig, ax = plt.subplots(figsize=(6, 2.8))
    for s in switches:
        ax.step(s.time_s, [index[p] for p in s.policy], where="post",
                alpha=0.8, linewidth=1.2,
                label=f"seed {s.seed}" if s.seed is not None else None)
    ax.set_yticks(range(len(names)))
    ax.set_yticklabels(names, fontsize=7)
    ax.set_xlabel("time (s)")
    if len(switches) > 1:
        ax.legend(fontsize=6)
    ax.grid(alpha=0.3)
    return _save(fig, out_path)


def plot_learning_curves(curves, out_path: Path) -> Path:
    """Per-episode return and mean success over training."""
    if not curves:
        raise SchemaError("no learning curves to plot")
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7, 2.8))
    for c in curves:
        ax1.plot(c.episode, c.ep_return, linewidth=1.2)
        ax2.plot(c.episode, 100 * c.mean_success, linewidth=1.2)
    ax1.set_xlabel("episode")
    ax1.set_ylabel("return")
    ax2.set_xlabel("episode")
    ax2.set_ylabel("episode success (%)")
    for ax in (ax1, ax2):
        ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, out_path)


def regenerate_all(artifacts: ArtifactSet, out_dir: Path) -> list[Path]:
    """Emit every figure whose inputs exist; returns the paths written."""
    written = []
    by_lam = artifacts.runs_by_lambda()
    if artifacts.runs:
        for lam, runs in sorted(by_lam.items()):
            written.append(plot_success_over_time(
                runs, out_dir / f"success_over_time_lam{lam}.svg"))
        written.append(plot_app_success(artifacts.runs, out_dir / "app_success.svg"))
        if len(by_lam) >= 1 and all(r.lam is not None for r in artifacts.runs):
            written.append(plot_lambda_boxes(artifacts.runs, out_dir / "success_boxes.svg"))
    if artifacts.switches:
        written.append(plot_latency_cdf(artifacts.switches, out_dir / "latency_cdf.svg"))
        written.append(plot_policy_timeline(artifacts.switches, out_dir / "policy_timeline.svg"))
    if artifacts.curves:
        written.append(plot_learning_curves(artifacts.curves, out_dir / "learning_curve.svg"))
    return written
