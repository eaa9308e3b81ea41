"""Tabular value iteration on finite MDPs; the testing oracle for the DQN."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FiniteMDP:
    """Finite MDP with dense transition and reward tensors.

    transitions[s, a, s'] is the probability of landing in s'; rewards[s, a, s']
    is the reward collected on that transition.
    """

    transitions: np.ndarray  # (S, A, S)
    rewards: np.ndarray      # (S, A, S)

    def __post_init__(self):
        S, A, S2 = self.transitions.shape
        if S != S2 or self.rewards.shape != (S, A, S):
            raise ValueError("transition/reward tensor shapes disagree")
        row_sums = self.transitions.sum(axis=2)
        if not np.allclose(row_sums, 1.0, atol=1e-9):
            raise ValueError("transition probabilities must sum to 1 per (s, a)")

    @property
    def n_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transitions.shape[1]


def tabular_value_iteration(mdp: FiniteMDP, gamma: float, tol: float = 1e-12,
                            max_iter: int = 1_000_000) -> np.ndarray:
    """Iterate the Bellman optimality update until the sup-norm change is < tol.

    Returns Q* of shape (S, A).  Raises RuntimeError if the cap is hit first
    (can happen for gamma == 1 on non-episodic chains).
    """
    if not (0.0 <= gamma <= 1.0):
        raise ValueError("gamma must lie in [0, 1]")
    P, R = mdp.transitions, mdp.rewards
    q = np.zeros((mdp.n_states, mdp.n_actions))
    for _ in range(max_iter):
        v = q.max(axis=1)                       # (S,)
        q_next = np.einsum("sat,sat->sa", P, R + gamma * v[None, None, :])
        delta = np.max(np.abs(q_next - q))
        q = q_next
        if delta < tol:
            return q
    raise RuntimeError(f"value iteration did not converge within {max_iter} iterations")


def greedy_policy(q: np.ndarray) -> np.ndarray:
    """Lowest-index argmax per state."""
    return q.argmax(axis=1)
