"""Tiny MDP environments used to pit the DQN against the tabular oracle."""

import random

import numpy as np

from edgesched.agent import Rollout, Transition
from edgesched.tabular import FiniteMDP


class ToyMDPRunner:
    """Episode runner over a FiniteMDP with one-hot state tensors.

    Horizon-truncated episodes are marked non-terminal so the learned Q
    bootstraps toward the infinite-horizon fixed point the oracle computes.
    """

    def __init__(self, mdp: FiniteMDP, horizon: int = 10, start_state: int = 0):
        self.mdp = mdp
        self.horizon = horizon
        self.start_state = start_state
        self.state_shape = (1, 1, mdp.n_states)
        self.n_actions = mdp.n_actions

    def encode(self, s: int) -> np.ndarray:
        x = np.zeros(self.state_shape)
        x[0, 0, s] = 1.0
        return x

    def rollout(self, policy_fn, seed: int) -> Rollout:
        rng = random.Random(seed)
        s = self.start_state
        transitions, rewards = [], []
        states = list(range(self.mdp.n_states))
        for _ in range(self.horizon):
            a = policy_fn(self.encode(s))
            s2 = rng.choices(states, weights=self.mdp.transitions[s, a])[0]
            r = float(self.mdp.rewards[s, a, s2])
            transitions.append(Transition(self.encode(s), a, self.encode(s2), r, False))
            rewards.append(r)
            s = s2
        return Rollout(transitions=transitions, rewards=rewards, success_ratio=float("nan"))


def constant_reward_mdp(reward: float = -0.1) -> FiniteMDP:
    return FiniteMDP(np.ones((1, 1, 1)), np.full((1, 1, 1), reward))


def two_action_bandit(r0: float = -0.1, r1: float = -0.5) -> FiniteMDP:
    """One state, two actions with distinct constant rewards."""
    P = np.ones((1, 2, 1))
    R = np.zeros((1, 2, 1))
    R[0, 0, 0] = r0
    R[0, 1, 0] = r1
    return FiniteMDP(P, R)


def two_action_chain() -> FiniteMDP:
    """Two states, two actions; action 1 is optimal everywhere (see oracle tests)."""
    P = np.zeros((2, 2, 2))
    R = np.zeros((2, 2, 2))
    P[0, 0, 0] = 1.0
    P[0, 1, 1] = 1.0
    P[1, 0, 0] = 1.0
    P[1, 1, 1] = 1.0
    R[1, 0, :] = 1.0
    R[1, 1, :] = 1.0
    return FiniteMDP(P, R)


def toy_hyperparams(**overrides):
    from edgesched.agent import Hyperparams

    hp = Hyperparams(
        gamma=0.9,
        alpha=5e-3,
        episodes=60,
        grad_steps=40,
        batch_size=16,
        buffer_size=512,
        seed_pool=4,
        eps_start=1.0,
        eps_end=0.1,
        eps_decay_frac=0.5,
        conv_channels=(2, 2, 2),
        hidden=8,
    )
    for k, v in overrides.items():
        setattr(hp, k, v)
    return hp
