"""Finite CMDPs with known dynamics, plus a sampling env for training on them."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .base import StepResult

RIGHT, STAY = 0, 1


@dataclass
class TabularCMDP:
    P: np.ndarray  # (S, A, S)
    r: np.ndarray  # (S, A)
    c: np.ndarray  # (S, A)
    mu: np.ndarray  # (S,)
    gamma: float

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=float)
        self.r = np.asarray(self.r, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        self.mu = np.asarray(self.mu, dtype=float)
        S, A = self.r.shape
        if self.P.shape != (S, A, S) or self.c.shape != (S, A) or self.mu.shape != (S,):
            raise ValueError("inconsistent CMDP shapes")
        if np.any(self.P < 0) or np.max(np.abs(self.P.sum(axis=2) - 1)) > 1e-12:
            raise ValueError("transition rows must be stochastic")
        if np.any(self.mu < 0) or abs(self.mu.sum() - 1) > 1e-12:
            raise ValueError("initial distribution must sum to 1")
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if np.any(self.r < 0) or np.any(self.c < 0):
            raise ValueError("rewards and costs must be nonnegative")

    @property
    def n_states(self) -> int:
        return self.r.shape[0]

    @property
    def n_actions(self) -> int:
        return self.r.shape[1]


def chain_cmdp(n: int = 5, p_slip: float = 0.0, gamma: float = 0.9) -> TabularCMDP:
    """A line of ``n`` states. RIGHT advances (slips in place w.p. ``p_slip``), STAY stays.

    State ``n-2`` is the safe goal (r=0.5, c=0); state ``n-1`` is the risky,
    absorbing goal (r=1, c=1). The episode starts in state 0.
    """
    if n < 3:
        raise ValueError("chain needs n >= 3")
    if not 0 <= p_slip < 0.5:
        raise ValueError("p_slip must lie in [0, 0.5)")
    P = np.zeros((n, 2, n))
    for s in range(n):
        nxt = min(s + 1, n - 1)
        P[s, RIGHT, nxt] += 1 - p_slip
        P[s, RIGHT, s] += p_slip
        P[s, STAY, s] = 1.0
    r = np.zeros((n, 2))
    c = np.zeros((n, 2))
    r[n - 2] = 0.5
    r[n - 1] = 1.0
    c[n - 1] = 1.0
    mu = np.zeros(n)
    mu[0] = 1.0
    return TabularCMDP(P, r, c, mu, gamma)


def random_cmdp(rng: np.random.Generator, n_states: int = 3, n_actions: int = 2, gamma: float = 0.9) -> TabularCMDP:
    P = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    P /= P.sum(axis=2, keepdims=True)
    return TabularCMDP(
        P=P,
        r=rng.uniform(0, 1, (n_states, n_actions)),
        c=rng.uniform(0, 1, (n_states, n_actions)),
        mu=rng.dirichlet(np.ones(n_states)),
        gamma=gamma,
    )


class TabularEnv:
    """Samples a TabularCMDP; observations are one-hot states, one cost channel."""

    discrete = True

    def __init__(self, M: TabularCMDP, max_steps: int = 100, seed: int = 0, spec_id: str = "cost"):
        self.M = M
        self.max_steps = max_steps
        self.rng = np.random.default_rng(seed)
        self.spec_ids = [spec_id]
        self.s = 0
        self.t = 0
        self._cdf = np.cumsum(M.P, axis=2)
        self._mu_cdf = np.cumsum(M.mu)

    n_costs = 1

    @property
    def obs_size(self) -> int:
        return self.M.n_states

    @property
    def n_actions(self) -> int:
        return self.M.n_actions

    def _obs(self) -> np.ndarray:
        o = np.zeros(self.M.n_states)
        o[self.s] = 1.0
        return o

    def reset(self) -> np.ndarray:
        self.s = int(min(np.searchsorted(self._mu_cdf, self.rng.random(), side="right"), self.M.n_states - 1))
        self.t = 0
        return self._obs()

    def step(self, action) -> StepResult:
        a = int(action)
        r = float(self.M.r[self.s, a])
        c = float(self.M.c[self.s, a])
        u = self.rng.random()
        self.s = int(min(np.searchsorted(self._cdf[self.s, a], u, side="right"), self.M.n_states - 1))
        self.t += 1
        truncated = self.t >= self.max_steps
        info = {
            "truncated": truncated,
            "hit_wall": False,
            "violation": c > 0,
            "violations": np.array([c > 0]),
            "success": False,
        }
        return StepResult(self._obs(), r, np.array([c]), truncated, info)
