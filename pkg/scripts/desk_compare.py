#!/usr/bin/env python3
"""Static-policy comparison on a desk-scale preset; optionally includes an agent.

Writes one metrics CSV per (policy, seed) plus a summary, ready for the
report scripts:

    python scripts/desk_compare.py --preset full-edge --seeds 10 \
        --agent results/full-edge/train/checkpoint.npz --out results/full-edge/compare
"""

import argparse
import statistics
import sys
from pathlib import Path

from edgesched.agent import AgentPolicy, load_checkpoint
from edgesched.experiments import DESK_HORIZON, DESK_LAMBDA, DeskWorld, eval_seeds
from edgesched.policies import PolicyKind
from edgesched.simulator import run_episode, write_metrics_csv
from edgesched.workload import LambdaSchedule


def main(argv=None) -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--preset", default="full-edge")
    ap.add_argument("--lambda", dest="lam", type=float, default=DESK_LAMBDA)
    ap.add_argument("--seeds", type=int, default=10, help="number of evaluation seeds")
    ap.add_argument("--duration", type=float, default=DESK_HORIZON)
    ap.add_argument("--agent", default=None, help="checkpoint to include as 'agent'")
    ap.add_argument("--out", required=True)
    args = ap.parse_args(argv)

    world = DeskWorld.build(args.preset)
    out = Path(args.out)
    seeds = eval_seeds(args.seeds)
    schedule = LambdaSchedule.constant(args.lam)
    summary = []

    for kind in PolicyKind:
        vals = []
        for seed in seeds:
            cfg = world.episode_config(seed, schedule=schedule, horizon=args.duration)
            res = run_episode(cfg, kind)
            write_metrics_csv(res, out / f"{kind.key}_seed{seed}.csv", kind.key)
            vals.append(res.success_ratio)
        summary.append((kind.key, vals))
        print(f"{kind.key:16s} mean success {statistics.fmean(vals):.3f}")

    if args.agent:
        qnet, partition, _ = load_checkpoint(args.agent)
        vals = []
        for seed in seeds:
            cfg = world.episode_config(seed, schedule=schedule, horizon=args.duration)
            provider = AgentPolicy(qnet, partition)
            res = run_episode(cfg, provider)
            write_metrics_csv(res, out / f"agent_seed{seed}.csv", "agent")
            vals.append(res.success_ratio)
        summary.append(("agent", vals))
        print(f"{'agent':16s} mean success {statistics.fmean(vals):.3f}")

    lines = ["policy,n_runs,mean_success,std_success"]
    for name, vals in summary:
        std = statistics.pstdev(vals) if len(vals) > 1 else 0.0
        lines.append(f"{name},{len(vals)},{statistics.fmean(vals)!r},{std!r}")
    (out / "summary.csv").write_text("\n".join(lines) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
