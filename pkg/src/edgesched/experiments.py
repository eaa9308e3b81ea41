"""Desk-scale experiment recipes: comparison, training, and evaluation protocols.

These pin the configurations used by the bundled experiment scripts and the
acceptance suite: preset topologies at scale 1, a six-app client mix, short
episodes, and training/evaluation seed pools that never overlap.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field

from .agent import (
    AgentPolicy,
    FeaturePartition,
    Hyperparams,
    SimEpisodeRunner,
    feature_scale_vector,
    train,
)
from .catalog import default_catalog
from .policies import PolicyKind
from .simulator import EpisodeConfig, EpisodeResult, run_episode
from .topology import build_preset, deploy_workers
from .workload import LambdaSchedule

# Interactive-heavy client mix for the comparison experiments.
DESK_MIX: dict[str, float] = {
    "pool": 0.10,
    "ping-pong": 0.30,
    "face-assistant": 0.05,
    "lego-draw-sandwich": 0.30,
    "workout-assistant": 0.10,
    "interactive-ar-vr": 0.15,
}

DESK_LAMBDA = 20.0          # clients/minute at the single site
DESK_HORIZON = 300.0        # s
DESK_WINDOW = 25.0          # s
DESK_TRAIN_LAMBDAS = (10.0, 15.0, 20.0)
DYNAMIC_STEPS = ((0.0, 20.0), (150.0, 60.0), (300.0, 100.0))
DYNAMIC_HORIZON = 450.0
TRAIN_EARLY_STOP = 0.2      # desk success levels sit well below the paper's regime

EVAL_SEED_BASE = 10_000     # disjoint from training pool seeds by construction


@dataclass
class DeskWorld:
    preset: str
    topology: object
    catalog: object
    workers: list

    @classmethod
    def build(cls, preset: str, scale: int = 1, topology_seed: int = 0) -> "DeskWorld":
        catalog = default_catalog()
        topology = build_preset(preset, scale, rng_seed=topology_seed)
        workers = deploy_workers(topology, catalog)
        return cls(preset=preset, topology=topology, catalog=catalog, workers=workers)

    def episode_config(self, seed: int, schedule: LambdaSchedule | None = None,
                       horizon: float = DESK_HORIZON, mix: dict | None = None,
                       early_stop: float | None = None) -> EpisodeConfig:
        return EpisodeConfig(
            topology=self.topology,
            catalog=self.catalog,
            workers=self.workers,
            schedule=schedule or LambdaSchedule.constant(DESK_LAMBDA),
            app_mix=dict(mix or DESK_MIX),
            horizon=horizon,
            window=DESK_WINDOW,
            seed=seed,
            early_stop_success=early_stop,
        )


def desk_hyperparams(**overrides) -> Hyperparams:
    import numpy as np

    hp = Hyperparams(
        gamma=0.6,
        alpha=1e-3,
        episodes=200,
        grad_steps=48,
        batch_size=32,
        buffer_size=10_000,
        horizon=DESK_HORIZON,
        window=DESK_WINDOW,
        early_stop_success=TRAIN_EARLY_STOP,
        seed_pool=12,
        eps_end=0.05,
        eps_decay_frac=0.7,
        dtype=np.float32,
        tail_average_frac=0.25,
    )
    for k, v in overrides.items():
        setattr(hp, k, v)
    return hp


def _desk_runner(world: DeskWorld, hp: Hyperparams,
                 lambda_pool: tuple[float, ...],
                 schedule: LambdaSchedule | None,
                 mix: dict | None) -> SimEpisodeRunner:
    def factory(seed: int) -> EpisodeConfig:
        sched = schedule or LambdaSchedule.constant(lambda_pool[seed % len(lambda_pool)])
        return world.episode_config(
            seed, schedule=sched, horizon=hp.horizon,
            mix=mix, early_stop=hp.early_stop_success,
        )

    return SimEpisodeRunner(factory, hp)


def train_desk_agent(world: DeskWorld, hp: Hyperparams,
                     lambda_pool: tuple[float, ...] = DESK_TRAIN_LAMBDAS,
                     schedule: LambdaSchedule | None = None,
                     mix: dict | None = None, progress=None, on_episode_end=None):
    """Train an agent on the world.

    Episodes run either a fixed step `schedule` or a constant client rate
    drawn from `lambda_pool` by episode seed.
    """
    runner = _desk_runner(world, hp, lambda_pool, schedule, mix)
    qnet, curve = train(runner, hp, progress=progress, on_episode_end=on_episode_end)
    return qnet, runner.partition, curve


@dataclass
class ComparisonOutcome:
    per_policy: dict[str, list[float]]          # success ratio per seed
    agent: list[float] = field(default_factory=list)
    agent_results: list[EpisodeResult] = field(default_factory=list)
    agent_latencies: list[float] = field(default_factory=list)
    static_results: dict[str, list[EpisodeResult]] = field(default_factory=dict)

    def mean(self, key: str) -> float:
        return statistics.fmean(self.per_policy[key])

    @property
    def static_means(self) -> dict[str, float]:
        return {k: statistics.fmean(v) for k, v in self.per_policy.items()}

    @property
    def best_static(self) -> float:
        return max(self.static_means.values())

    @property
    def mean_static(self) -> float:
        return statistics.fmean(self.static_means.values())

    @property
    def agent_mean(self) -> float:
        return statistics.fmean(self.agent)


def run_comparison(world: DeskWorld, seeds: list[int],
                   schedule: LambdaSchedule | None = None,
                   horizon: float = DESK_HORIZON,
                   mix: dict | None = None,
                   agent: tuple | None = None,
                   keep_results: bool = False) -> ComparisonOutcome:
    """Static policies (and optionally a trained agent) over shared seeds."""
    outcome = ComparisonOutcome(per_policy={k.key: [] for k in PolicyKind})
    for kind in PolicyKind:
        results = []
        for seed in seeds:
            cfg = world.episode_config(seed, schedule=schedule, horizon=horizon, mix=mix)
            res = run_episode(cfg, kind)
            outcome.per_policy[kind.key].append(res.success_ratio)
            if keep_results:
                results.append(res)
        if keep_results:
            outcome.static_results[kind.key] = results
    if agent is not None:
        qnet, partition, *rest = agent
        scale = rest[0] if rest else None
        for seed in seeds:
            cfg = world.episode_config(seed, schedule=schedule, horizon=horizon, mix=mix)
            provider = AgentPolicy(qnet, partition, scale=scale)
            res = run_episode(cfg, provider)
            outcome.agent.append(res.success_ratio)
            outcome.agent_results.append(res)
            outcome.agent_latencies.extend(provider.latencies)
    return outcome


def eval_seeds(n: int) -> list[int]:
    return [EVAL_SEED_BASE + i for i in range(n)]


VALIDATION_SEED_BASE = 5_000  # disjoint from both training pools and eval seeds


def validation_seeds(n: int) -> list[int]:
    return [VALIDATION_SEED_BASE + i for i in range(n)]


def dynamic_schedule() -> LambdaSchedule:
    return LambdaSchedule([list(s) for s in DYNAMIC_STEPS])


def train_validated_agent(world: DeskWorld, hp_base: Hyperparams,
                          train_seeds: tuple[int, ...] = (21, 22, 23),
                          lambda_pool: tuple[float, ...] = (DESK_LAMBDA,),
                          train_schedule: LambdaSchedule | None = None,
                          eval_schedule: LambdaSchedule | None = None,
                          eval_horizon: float = DESK_HORIZON,
                          mix: dict | None = None,
                          n_validation: int = 6,
                          snapshot_every: int = 25,
                          progress=None):
    """Train candidate agents and keep the best snapshot on held-out validation
    seeds.

    Fitted Q-learning at this data scale oscillates between near-tied actions,
    so each training run is checkpointed every `snapshot_every` episodes and
    the snapshot (or final tail-averaged net) scoring highest on validation
    wins.  Validation seeds are disjoint from both the training pool and the
    evaluation seeds, so downstream evaluations stay honest.  Training stops
    at the first candidate that matches the best static policy on validation.
    """
    val = validation_seeds(n_validation)
    static = run_comparison(world, val, schedule=eval_schedule, horizon=eval_horizon, mix=mix)
    bar = static.best_static
    scale = feature_scale_vector(
        FeaturePartition(), gain=getattr(hp_base, "state_gain", 1.0)
    )

    def score(qnet, partition) -> float:
        vals = []
        for vs in val:
            cfg = world.episode_config(vs, schedule=eval_schedule, horizon=eval_horizon, mix=mix)
            vals.append(run_episode(cfg, AgentPolicy(qnet, partition, scale=scale)).success_ratio)
        return statistics.fmean(vals)

    best = None
    for seed in train_seeds:
        hp = desk_hyperparams(**{**hp_base.__dict__, "seed": seed})
        snapshots: list = []

        def keep(k: int, qnet) -> None:
            if (k + 1) % snapshot_every == 0 and (k + 1) < hp.episodes:
                snapshots.append(qnet.clone())

        qnet, partition, curve = train_desk_agent(
            world, hp, lambda_pool=lambda_pool, schedule=train_schedule,
            mix=mix, progress=progress, on_episode_end=keep)
        snapshots.append(qnet)
        for cand in snapshots:
            s = score(cand, partition)
            if best is None or s > best[0]:
                best = (s, cand, partition, curve)
        if best[0] >= bar - 0.005:
            break
    return best[1], best[2], best[3]
