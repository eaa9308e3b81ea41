"""Experiment front-end: policy comparisons, agent training, agent evaluation.

Subcommands write one metrics CSV per run plus aggregate summaries; every
output carries a provenance comment (config hash + seed) and is written
atomically.  A JSON config file given with --config overrides the flags.
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
import tempfile
from pathlib import Path

from .agent import (
    AgentPolicy,
    FeaturePartition,
    Hyperparams,
    SimEpisodeRunner,
    feature_scale_vector,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .catalog import default_catalog, load_catalog
from .policies import PolicyKind, policy_names
from .simulator import EpisodeConfig, run_episode, write_metrics_csv
from .topology import PRESET_NAMES, build_preset, deploy_workers, load_topology
from .workload import DEFAULT_APP_MIX, LambdaSchedule


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as f:
        f.write(text)
    os.replace(tmp, path)


def _parse_topology(spec: str, seed: int):
    if spec.endswith(".json"):
        with open(spec) as f:
            return load_topology(json.load(f))
    name, _, scale = spec.partition(":")
    return build_preset(name, int(scale) if scale else 1, rng_seed=seed)


def _parse_mix(spec: str | None) -> dict[str, float]:
    if not spec:
        return dict(DEFAULT_APP_MIX)
    mix = {}
    for part in spec.split(","):
        name, _, w = part.partition("=")
        mix[name.strip()] = float(w)
    return mix


def _parse_schedule(args) -> LambdaSchedule:
    if getattr(args, "lambda_schedule", None):
        steps = []
        for part in args.lambda_schedule.split(","):
            t, _, lam = part.partition(":")
            steps.append((float(t), float(lam)))
        return LambdaSchedule(steps)
    return LambdaSchedule.constant(args.lam[0])


def _parse_seeds(spec: str) -> list[int]:
    return [int(s) for s in spec.split(",")]


def _episode_config(args, topology, catalog, workers, schedule, seed) -> EpisodeConfig:
    return EpisodeConfig(
        topology=topology,
        catalog=catalog,
        workers=workers,
        schedule=schedule,
        app_mix=_parse_mix(args.mix),
        horizon=args.duration,
        window=args.window,
        seed=seed,
        early_stop_success=None,
    )


def _apply_config_file(args: argparse.Namespace) -> argparse.Namespace:
    if getattr(args, "config", None):
        with open(args.config) as f:
            overrides = json.load(f)
        for key, value in overrides.items():
            setattr(args, key.replace("-", "_"), value)
    return args


def _load_inputs(args):
    catalog = default_catalog()
    if args.catalog:
        with open(args.catalog) as f:
            catalog = load_catalog(json.load(f))
    topology = _parse_topology(args.topology, args.topology_seed)
    workers = deploy_workers(topology, catalog)
    return catalog, topology, workers


def _summary_lines(rows: list[tuple[str, list[float]]], config_tag: str) -> list[str]:
    lines = [f"# config={config_tag}", "policy,n_runs,mean_success,std_success"]
    for name, vals in rows:
        std = statistics.pstdev(vals) if len(vals) > 1 else 0.0
        lines.append(f"{name},{len(vals)},{statistics.fmean(vals)!r},{std!r}")
    return lines


def cmd_compare(args) -> int:
    args = _apply_config_file(args)
    catalog, topology, workers = _load_inputs(args)
    schedule = _parse_schedule(args)
    out = Path(args.out)
    seeds = _parse_seeds(args.seeds)
    if args.policy == "all":
        kinds = list(PolicyKind)
    else:
        kinds = [PolicyKind.from_key(p) for p in args.policy.split(",")]

    summary: list[tuple[str, list[float]]] = []
    config_tag = None
    for kind in kinds:
        vals = []
        for seed in seeds:
            cfg = _episode_config(args, topology, catalog, workers, schedule, seed)
            config_tag = config_tag or cfg.fingerprint()
            res = run_episode(cfg, kind)
            write_metrics_csv(res, out / f"{kind.key}_seed{seed}.csv", kind.key)
            vals.append(res.success_ratio)
        summary.append((kind.key, vals))

    if args.agent:
        qnet, partition, extra = load_checkpoint(args.agent)
        scale = feature_scale_vector(partition, extra.get("state_gain", 1.0))
        vals = []
        for seed in seeds:
            cfg = _episode_config(args, topology, catalog, workers, schedule, seed)
            provider = AgentPolicy(qnet, partition, scale=scale)
            res = run_episode(cfg, provider)
            write_metrics_csv(res, out / f"agent_seed{seed}.csv", "agent")
            _write_switch_log(out / f"switches_agent_seed{seed}.csv", res, provider, cfg)
            vals.append(res.success_ratio)
        summary.append(("agent", vals))

    _atomic_write(out / "summary.csv", "\n".join(_summary_lines(summary, config_tag)) + "\n")
    return 0


def _write_switch_log(path: Path, res, provider: AgentPolicy, cfg) -> None:
    lines = [f"# config={cfg.fingerprint()} seed={cfg.seed}",
             "time_s,policy,latency_ms"]
    lat = provider.latencies
    for i, (t, pol) in enumerate(res.switches):
        ms = lat[i] * 1000.0 if i < len(lat) else float("nan")
        lines.append(f"{float(t)!r},{pol},{ms!r}")
    _atomic_write(path, "\n".join(lines) + "\n")


def cmd_train(args) -> int:
    args = _apply_config_file(args)
    catalog, topology, workers = _load_inputs(args)
    out = Path(args.out)
    lam_pool = [float(x) for x in args.lam]
    mix = _parse_mix(args.mix)

    hp = Hyperparams(
        gamma=args.gamma,
        alpha=args.alpha,
        episodes=args.episodes,
        grad_steps=args.grad_steps,
        batch_size=args.batch_size,
        buffer_size=args.buffer_size,
        horizon=args.duration,
        window=args.window,
        early_stop_success=args.theta,
        success_threshold=args.phi_thresh,
        seed=args.seed,
        seed_pool=args.seed_pool,
        eps_end=args.eps_end,
        state_gain=args.state_gain,
    )

    def factory(seed: int) -> EpisodeConfig:
        lam = lam_pool[seed % len(lam_pool)]
        return EpisodeConfig(
            topology=topology, catalog=catalog, workers=workers,
            schedule=LambdaSchedule.constant(lam), app_mix=mix,
            horizon=hp.horizon, window=hp.window, seed=seed,
            early_stop_success=hp.early_stop_success,
        )

    runner = SimEpisodeRunner(factory, hp)
    start_episode = 0
    qnet = None
    if args.resume:
        qnet, _, extra = load_checkpoint(args.resume)
        start_episode = int(extra.get("episodes_trained", 0))

    def progress(point):
        if args.verbose:
            print(f"episode {start_episode + point.episode}: return={point.ep_return:.3f} "
                  f"success={point.mean_success:.3f} eps={point.epsilon:.2f}")

    qnet, curve = train(runner, hp, qnet=qnet, progress=progress)

    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out / "checkpoint.npz", qnet, runner.partition,
                    extra={"episodes_trained": start_episode + hp.episodes,
                           "lambda_pool": lam_pool,
                           "state_gain": hp.state_gain})
    lines = [f"# seed={hp.seed} episodes={hp.episodes}",
             "episode,return,mean_success,epsilon"]
    for c in curve:
        lines.append(f"{start_episode + c.episode},{c.ep_return!r},{c.mean_success!r},{c.epsilon!r}")
    _atomic_write(out / "learning_curve.csv", "\n".join(lines) + "\n")
    return 0


def cmd_eval(args) -> int:
    args = _apply_config_file(args)
    catalog, topology, workers = _load_inputs(args)
    out = Path(args.out)
    qnet, partition, extra = load_checkpoint(args.agent)
    scale = feature_scale_vector(partition, extra.get("state_gain", 1.0))
    seeds = _parse_seeds(args.seeds)

    vals = []
    for lam in args.lam:
        schedule = (
            _parse_schedule(args) if args.lambda_schedule else LambdaSchedule.constant(lam)
        )
        tag = "sched" if args.lambda_schedule else f"lam{lam:g}"
        for seed in seeds:
            cfg = _episode_config(args, topology, catalog, workers, schedule, seed)
            provider = AgentPolicy(qnet, partition, scale=scale)
            res = run_episode(cfg, provider)
            write_metrics_csv(res, out / f"agent_{tag}_seed{seed}.csv", "agent")
            _write_switch_log(out / f"switches_{tag}_seed{seed}.csv", res, provider, cfg)
            vals.append(res.success_ratio)
        if args.lambda_schedule:
            break
    _atomic_write(out / "eval_summary.csv",
                  "\n".join(_summary_lines([("agent", vals)], "eval")) + "\n")
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--topology", default="full-edge",
                   help=f"preset name[:scale] from {PRESET_NAMES} or a topology JSON path")
    p.add_argument("--topology-seed", type=int, default=0)
    p.add_argument("--catalog", default=None, help="catalog JSON path (default: bundled)")
    p.add_argument("--lambda", dest="lam", type=float, nargs="+", default=[60.0],
                   help="clients per minute (train: pool sampled per episode)")
    p.add_argument("--lambda-schedule", default=None,
                   help="step schedule 't:lam,t:lam,...' overriding --lambda")
    p.add_argument("--mix", default=None, help="app mix 'name=w,name=w,...'")
    p.add_argument("--duration", type=float, default=480.0, help="episode horizon H (s)")
    p.add_argument("--window", type=float, default=25.0, help="decision/metrics window T (s)")
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None, help="JSON file overriding flags")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="edgesched")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compare", help="run static policies (and optionally an agent)")
    _add_common(p)
    p.add_argument("--policy", default="all",
                   help=f"comma list from {policy_names()} or 'all'")
    p.add_argument("--seeds", default="0", help="comma list of workload seeds")
    p.add_argument("--agent", default=None, help="checkpoint to include as 'agent'")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("train", help="train the adaptive scheduler")
    _add_common(p)
    p.add_argument("--episodes", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seed-pool", type=int, default=16)
    p.add_argument("--alpha", type=float, default=1e-3)
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("--grad-steps", type=int, default=64)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--buffer-size", type=int, default=10_000)
    p.add_argument("--eps-end", type=float, default=0.05)
    p.add_argument("--state-gain", type=float, default=1.0,
                   help="input conditioning gain; small values favor the "
                        "across-state action ranking")
    p.add_argument("--theta", type=float, default=0.2,
                   help="early-stop success threshold during training episodes")
    p.add_argument("--phi-thresh", type=float, default=0.9,
                   help="reward switch between miss mass and active-time penalty")
    p.add_argument("--resume", default=None, help="checkpoint to continue from")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="greedy evaluation of a trained agent")
    _add_common(p)
    p.add_argument("--agent", required=True)
    p.add_argument("--seeds", default="0")
    p.set_defaults(func=cmd_eval)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
