#!/usr/bin/env python3
"""Train the adaptive meta-scheduler on a desk-scale preset.

    python scripts/desk_train.py --preset full-edge --episodes 120 \
        --out results/full-edge/train
"""

import argparse
import sys
from pathlib import Path

from edgesched.agent import save_checkpoint
from edgesched.experiments import (
    DESK_TRAIN_LAMBDAS,
    DeskWorld,
    desk_hyperparams,
    train_desk_agent,
)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--preset", default="full-edge")
    ap.add_argument("--episodes", type=int, default=120)
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--lambdas", type=float, nargs="+", default=list(DESK_TRAIN_LAMBDAS),
                    help="per-episode client-rate pool")
    ap.add_argument("--out", required=True)
    args = ap.parse_args(argv)

    world = DeskWorld.build(args.preset)
    hp = desk_hyperparams(episodes=args.episodes, seed=args.seed)

    def progress(point):
        print(f"episode {point.episode:3d}  return {point.ep_return:7.3f}  "
              f"success {point.mean_success:.3f}  eps {point.epsilon:.2f}")

    qnet, partition, curve = train_desk_agent(
        world, hp, lambda_pool=tuple(args.lambdas), progress=progress)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out / "checkpoint.npz", qnet, partition,
                    extra={"episodes_trained": hp.episodes, "preset": args.preset})
    lines = [f"# seed={hp.seed} episodes={hp.episodes}",
             "episode,return,mean_success,epsilon"]
    for c in curve:
        lines.append(f"{c.episode},{c.ep_return!r},{c.mean_success!r},{c.epsilon!r}")
    (out / "learning_curve.csv").write_text("\n".join(lines) + "\n")
    print(f"checkpoint and learning curve written to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
