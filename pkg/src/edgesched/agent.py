"""Adaptive meta-scheduler: a DQN that picks the active static policy.

Every `window` seconds the agent encodes the recent per-worker history into a
(features x workers x time) tensor, scores the seven static policies with its
Q-network, and installs the chosen one for the next window.  Training runs
whole episodes with a frozen epsilon-greedy policy, stores window transitions
in a replay ring, then takes a block of Adam steps on the squared Bellman
error after each episode.
"""

from __future__ import annotations

import json
import random
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from .policies import PolicyKind
from .qnet import AdamState, QNetwork, adam_step
from .simulator import (
    DEFAULT_DELAY_BINS,
    DEFAULT_RATE_BINS,
    N_BASE_FEATURES,
    Engine,
    EpisodeConfig,
    MetricsWindow,
    run_episode,
)

REWARD_KAPPA = 5.0  # s; scales the inverse-active-time penalty on good windows


@dataclass(frozen=True)
class FeaturePartition:
    """Delay/rate interval boundaries for the instant-query state features."""

    delay_bins: tuple[float, ...] = DEFAULT_DELAY_BINS
    rate_bins: tuple[float, ...] = DEFAULT_RATE_BINS

    def __post_init__(self):
        for bins in (self.delay_bins, self.rate_bins):
            if bins[0] != 0.0:
                raise ValueError("first bin boundary must be 0")
            if any(a >= b for a, b in zip(bins, bins[1:])):
                raise ValueError("bin boundaries must be strictly increasing")

    @property
    def n_cells(self) -> int:
        return len(self.delay_bins) * len(self.rate_bins)

    @property
    def n_features(self) -> int:
        return N_BASE_FEATURES + self.n_cells


# Fixed input conditioning applied between the raw state tensor and the
# network: per-feature inverse scales keeping typical magnitudes near one.
# `gain` shrinks the whole state below unit scale; small gains regularize the
# value function toward the across-state action ranking, which is far easier
# to estimate from a few thousand window transitions.
def feature_scale_vector(partition: FeaturePartition, gain: float = 1.0) -> np.ndarray:
    scale = np.full(partition.n_features, 1.0 / 32.0)
    scale[0] = 1.0 / 8.0   # bound streams
    scale[1] = 1.0 / 32.0  # responses per second
    scale[2] = 1.0 / 16.0  # load ledger
    return gain * scale


def encode_state(history: np.ndarray, partition: FeaturePartition,
                 t_slots: int) -> np.ndarray:
    """Stack the last `t_slots` per-second feature rows into (F, W, T).

    `history` holds one row per elapsed second, shaped (seconds, workers,
    features); missing leading history is zero-filled so slot tau always maps
    to time t - t_slots + 1 + tau.
    """
    if history.ndim != 3 or history.shape[2] != partition.n_features:
        raise ValueError(
            f"history features {history.shape} do not match partition ({partition.n_features})"
        )
    n_workers = history.shape[1]
    window = history[-t_slots:]
    out = np.zeros((t_slots, n_workers, partition.n_features), dtype=np.float64)
    out[t_slots - window.shape[0]:] = window
    return out.transpose(2, 1, 0)


def compute_reward(window: MetricsWindow, t_active: float,
                   success_threshold: float = 0.9,
                   kappa: float = REWARD_KAPPA) -> float:
    """Window reward in [-1, 0]: bad windows score their miss mass, good ones
    a penalty that decays with episode active time."""
    miss = window.q_fail + window.q_reject
    if 1.0 - miss < success_threshold:
        return -miss
    return -min(1.0, kappa / max(t_active, 1e-9))


def select_action(qnet: QNetwork, state: np.ndarray, eps: float,
                  rng: random.Random) -> int:
    """Epsilon-greedy over the policy set; greedy ties go to the lowest index."""
    if eps > 0.0 and rng.random() < eps:
        return rng.randrange(qnet.n_actions)
    return int(np.argmax(qnet.q_values(state)))


def td_target(reward: float, next_q: np.ndarray, gamma: float,
              terminal: bool) -> float:
    """Bootstrapped target r + gamma * max_a' Q(s', a'); bare r on terminals."""
    if terminal:
        return float(reward)
    return float(reward + gamma * np.max(next_q))


def discounted_return(rewards: Sequence[float], gamma: float) -> float:
    return float(sum(r * gamma ** tau for tau, r in enumerate(rewards)))


@dataclass
class Transition:
    state: np.ndarray
    action: int
    next_state: np.ndarray
    reward: float
    terminal: bool


class ReplayBuffer:
    """Fixed-capacity ring with circular replacement of the oldest entry."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._cursor = 0

    def add(self, tr: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(tr)
        else:
            self._items[self._cursor] = tr
        self._cursor = (self._cursor + 1) % self.capacity

    def sample(self, n: int, rng: random.Random) -> list[Transition]:
        if not self._items:
            raise ValueError("cannot sample from an empty buffer")
        return [self._items[rng.randrange(len(self._items))] for _ in range(n)]

    def __len__(self) -> int:
        return len(self._items)


@dataclass
class Hyperparams:
    gamma: float = 0.95
    alpha: float = 1e-4
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_frac: float = 0.6      # fraction of episodes over which eps anneals
    window: float = 25.0             # s between policy decisions
    horizon: float = 480.0           # s episode timeout
    early_stop_success: float = 0.7  # end an episode when success drops this low
    success_threshold: float = 0.9   # reward switch between miss mass and decay penalty
    penalty_kappa: float = REWARD_KAPPA
    buffer_size: int = 10_000
    grad_steps: int = 64             # Adam steps after each episode
    batch_size: int = 32
    episodes: int = 200
    seed_pool: int = 16              # distinct workload seeds sampled during training
    seed: int = 0
    conv_channels: tuple[int, ...] = (8, 16, 32)
    hidden: int = 256
    dtype: type = np.float64         # float32 roughly halves training wall-clock
    tail_average_frac: float = 0.0   # >0: average params over the last fraction of episodes
    state_gain: float = 1.0          # input conditioning gain (see feature_scale_vector)

    def epsilon_at(self, episode: int) -> float:
        span = max(1, int(self.episodes * self.eps_decay_frac))
        frac = min(1.0, episode / span)
        return self.eps_start + (self.eps_end - self.eps_start) * frac


@dataclass
class Rollout:
    transitions: list[Transition]
    rewards: list[float]
    success_ratio: float


class EpisodeRunner(Protocol):
    """One training environment: rolls out a full episode under a fixed policy."""

    state_shape: tuple[int, int, int]
    n_actions: int

    def rollout(self, policy_fn: Callable[[np.ndarray], int], seed: int) -> Rollout: ...


class _CollectingPolicy:
    """Engine policy provider that records window transitions as it acts."""

    def __init__(self, policy_fn, partition, t_slots, scale, hp: Hyperparams):
        self.policy_fn = policy_fn
        self.partition = partition
        self.t_slots = t_slots
        self.scale = scale
        self.hp = hp
        self.transitions: list[Transition] = []
        self.rewards: list[float] = []
        self._prev_state: np.ndarray | None = None
        self._prev_action: int | None = None

    def _state(self, engine: Engine, t: float) -> np.ndarray:
        sec = int(t)
        raw = encode_state(engine.state_history[: sec + 1], self.partition, self.t_slots)
        return raw * self.scale[:, None, None]

    def _close_transition(self, state, t, window, terminal):
        r = compute_reward(window, t, self.hp.success_threshold, self.hp.penalty_kappa)
        self.rewards.append(r)
        self.transitions.append(
            Transition(self._prev_state, self._prev_action, state, r, terminal)
        )

    def start(self, engine: Engine) -> PolicyKind:
        state = np.zeros(
            (self.partition.n_features, len(engine.rts), self.t_slots), dtype=np.float64
        )
        action = self.policy_fn(state)
        self._prev_state = state
        self._prev_action = action
        return PolicyKind(action)

    def tick(self, engine: Engine, t: float, window: MetricsWindow) -> PolicyKind:
        state = self._state(engine, t)
        self._close_transition(state, t, window, terminal=False)
        action = self.policy_fn(state)
        self._prev_state = state
        self._prev_action = action
        return PolicyKind(action)

    def finish(self, engine: Engine, t: float, window: MetricsWindow) -> None:
        state = self._state(engine, t)
        self._close_transition(state, t, window, terminal=True)


class SimEpisodeRunner:
    """Adapts the simulator to the training loop; one episode per seed."""

    def __init__(self, config_factory: Callable[[int], EpisodeConfig],
                 hp: Hyperparams, partition: FeaturePartition | None = None):
        self.config_factory = config_factory
        self.hp = hp
        probe = config_factory(0)
        self.partition = partition or FeaturePartition(
            tuple(probe.delay_bins), tuple(probe.rate_bins)
        )
        self.t_slots = int(probe.window)
        self.n_workers = len(probe.workers) if probe.workers is not None else None
        if self.n_workers is None:
            from .topology import deploy_workers
            self.n_workers = len(deploy_workers(probe.topology, probe.catalog))
        self.scale = feature_scale_vector(self.partition, hp.state_gain)
        self.state_shape = (self.partition.n_features, self.n_workers, self.t_slots)
        self.n_actions = len(PolicyKind)
        self.last_result = None

    def rollout(self, policy_fn, seed: int) -> Rollout:
        config = self.config_factory(seed)
        provider = _CollectingPolicy(policy_fn, self.partition, self.t_slots, self.scale, self.hp)
        self.last_result = run_episode(config, provider)
        return Rollout(
            transitions=provider.transitions,
            rewards=provider.rewards,
            success_ratio=self.last_result.success_ratio,
        )


@dataclass
class CurvePoint:
    episode: int
    ep_return: float
    mean_success: float
    epsilon: float


def train(runner: EpisodeRunner, hp: Hyperparams,
          qnet: QNetwork | None = None,
          progress: Callable[[CurvePoint], None] | None = None,
          on_episode_end: Callable[[int, QNetwork], None] | None = None,
          ) -> tuple[QNetwork, list[CurvePoint]]:
    """Episode-wise DQN training; returns the network and the learning curve.

    Each episode: freeze an epsilon-greedy policy on the current parameters,
    roll it out (the runner stops early on success collapse), append every
    window transition to the replay ring, then take `grad_steps` Adam steps
    on minibatches sampled uniformly from the ring.  Targets within a block
    come from the parameters frozen at the episode boundary.
    """
    rng = random.Random(hp.seed)
    if qnet is None:
        qnet = QNetwork(runner.state_shape, runner.n_actions,
                        conv_channels=hp.conv_channels, hidden=hp.hidden,
                        seed=hp.seed, dtype=hp.dtype)
    adam = AdamState(qnet.params)
    buffer = ReplayBuffer(hp.buffer_size)
    # Workload seeds reused across episodes; offset well clear of the small
    # seed ranges evaluation protocols tend to use.
    seeds = [50_000 + hp.seed * 1_000 + i for i in range(hp.seed_pool)]
    curve: list[CurvePoint] = []
    tail_avg: dict[str, np.ndarray] | None = None
    tail_n = 0

    for k in range(hp.episodes):
        eps = hp.epsilon_at(k)
        ep_seed = seeds[rng.randrange(len(seeds))]
        out = runner.rollout(lambda s: select_action(qnet, s, eps, rng), ep_seed)
        for tr in out.transitions:
            buffer.add(tr)

        if len(buffer) >= hp.batch_size:
            frozen = qnet.clone()
            for _ in range(hp.grad_steps):
                batch = buffer.sample(hp.batch_size, rng)
                next_states = np.stack([tr.next_state for tr in batch])
                next_q = frozen.forward(next_states)
                targets = np.array([
                    td_target(tr.reward, next_q[i], hp.gamma, tr.terminal)
                    for i, tr in enumerate(batch)
                ])
                states = np.stack([tr.state for tr in batch])
                actions = np.array([tr.action for tr in batch])
                _, grads = qnet.loss_and_gradient(states, actions, targets)
                adam_step(qnet.params, grads, hp.alpha, adam)

        point = CurvePoint(
            episode=k,
            ep_return=discounted_return(out.rewards, hp.gamma),
            mean_success=out.success_ratio,
            epsilon=eps,
        )
        curve.append(point)
        if progress is not None:
            progress(point)
        if on_episode_end is not None:
            on_episode_end(k, qnet)

        if hp.tail_average_frac > 0.0 and k >= hp.episodes * (1.0 - hp.tail_average_frac):
            if tail_avg is None:
                tail_avg = {key: v.copy() for key, v in qnet.params.items()}
                tail_n = 1
            else:
                tail_n += 1
                for key, v in qnet.params.items():
                    tail_avg[key] += (v - tail_avg[key]) / tail_n

    if hp.tail_average_frac > 0.0 and tail_avg is not None:
        # Averaging the parameter trajectory tail damps oscillation of the
        # greedy argmax between near-tied actions.
        for key in qnet.params:
            qnet.params[key][...] = tail_avg[key]
    return qnet, curve


class AgentPolicy:
    """Serving-time provider: greedy (or epsilon-greedy) policy selection each window.

    Records per-decision latency (state encoding + forward pass + switch).
    """

    def __init__(self, qnet: QNetwork, partition: FeaturePartition,
                 t_slots: int | None = None, eps: float = 0.0, seed: int = 0,
                 scale: np.ndarray | None = None):
        self.qnet = qnet
        self.partition = partition
        self.t_slots = t_slots if t_slots is not None else qnet.input_shape[2]
        self.eps = eps
        self.rng = random.Random(seed)
        self.scale = scale if scale is not None else feature_scale_vector(partition)
        self.latencies: list[float] = []

    def _act(self, engine: Engine, t: float) -> PolicyKind:
        t0 = time.perf_counter()
        sec = int(t)
        raw = encode_state(engine.state_history[: sec + 1], self.partition, self.t_slots)
        state = raw * self.scale[:, None, None]
        action = select_action(self.qnet, state, self.eps, self.rng)
        self.latencies.append(time.perf_counter() - t0)
        return PolicyKind(action)

    def start(self, engine: Engine) -> PolicyKind:
        state = np.zeros((self.partition.n_features, len(engine.rts), self.t_slots))
        t0 = time.perf_counter()
        action = select_action(self.qnet, state, self.eps, self.rng)
        self.latencies.append(time.perf_counter() - t0)
        return PolicyKind(action)

    def tick(self, engine: Engine, t: float, window: MetricsWindow) -> PolicyKind:
        return self._act(engine, t)

    def finish(self, engine: Engine, t: float, window: MetricsWindow) -> None:
        pass


# -- checkpoints ---------------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_checkpoint(path, qnet: QNetwork, partition: FeaturePartition,
                    extra: dict | None = None) -> None:
    meta = {
        "version": CHECKPOINT_VERSION,
        "input_shape": list(qnet.input_shape),
        "n_actions": qnet.n_actions,
        "conv_channels": list(qnet.conv_channels),
        "hidden": qnet.hidden,
        "delay_bins": list(partition.delay_bins),
        "rate_bins": list(partition.rate_bins),
        "extra": extra or {},
    }
    arrays = {f"param__{k}": v for k, v in qnet.params.items()}
    np.savez(path, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)


def load_checkpoint(path) -> tuple[QNetwork, FeaturePartition, dict]:
    with np.load(path) as data:
        try:
            meta = json.loads(bytes(data["meta"].tobytes()).decode())
        except Exception as exc:
            raise ValueError(f"corrupt checkpoint {path}: {exc}") from exc
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version in {path}")
        qnet = QNetwork(
            tuple(meta["input_shape"]),
            n_actions=meta["n_actions"],
            conv_channels=tuple(meta["conv_channels"]),
            hidden=meta["hidden"],
        )
        for k in qnet.params:
            qnet.params[k] = np.array(data[f"param__{k}"])
    partition = FeaturePartition(tuple(meta["delay_bins"]), tuple(meta["rate_bins"]))
    return qnet, partition, meta.get("extra", {})
