#!/usr/bin/env python3
"""Dynamic client-rate comparison: the rate steps 20 -> 60 -> 100 every 150 s.

    python scripts/desk_dynamic.py --agent results/full-edge/dynamic/checkpoint.npz \
        --out results/full-edge/dynamic
"""

import argparse
import statistics
import sys
from pathlib import Path

from edgesched.agent import AgentPolicy, load_checkpoint
from edgesched.experiments import DYNAMIC_HORIZON, DeskWorld, dynamic_schedule, eval_seeds
from edgesched.policies import PolicyKind
from edgesched.simulator import run_episode, write_metrics_csv


def main(argv=None) -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--preset", default="full-edge")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--agent", default=None)
    ap.add_argument("--out", required=True)
    args = ap.parse_args(argv)

    world = DeskWorld.build(args.preset)
    out = Path(args.out)
    seeds = eval_seeds(args.seeds)
    sched = dynamic_schedule()

    for kind in PolicyKind:
        vals = []
        for seed in seeds:
            cfg = world.episode_config(seed, schedule=sched, horizon=DYNAMIC_HORIZON)
            res = run_episode(cfg, kind)
            write_metrics_csv(res, out / f"{kind.key}_seed{seed}.csv", kind.key)
            vals.append(res.success_ratio)
        print(f"{kind.key:16s} mean success {statistics.fmean(vals):.3f}")

    if args.agent:
        qnet, partition, _ = load_checkpoint(args.agent)
        vals = []
        for seed in seeds:
            cfg = world.episode_config(seed, schedule=sched, horizon=DYNAMIC_HORIZON)
            provider = AgentPolicy(qnet, partition)
            res = run_episode(cfg, provider)
            write_metrics_csv(res, out / f"agent_seed{seed}.csv", "agent")
            lines = [f"# config={cfg.fingerprint()} seed={seed}", "time_s,policy,latency_ms"]
            for i, (t, pol) in enumerate(res.switches):
                ms = provider.latencies[i] * 1000.0 if i < len(provider.latencies) else float("nan")
                lines.append(f"{float(t)!r},{pol},{ms!r}")
            (out / f"switches_seed{seed}.csv").write_text("\n".join(lines) + "\n")
            vals.append(res.success_ratio)
        print(f"{'agent':16s} mean success {statistics.fmean(vals):.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
