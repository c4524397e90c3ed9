"""Exact-gradient diagnostics for tabular softmax policies on small CMDPs.

Values are normalized by ``1 - gamma`` so that ``J = sum_{s,a} d(s,a) x(s,a)``
with ``d`` the discounted occupancy measure (a probability distribution).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .envs.tabular import TabularCMDP, chain_cmdp, random_cmdp


class SingularSystem(ArithmeticError):
    pass


class NoFeasiblePolicy(ValueError):
    pass


def softmax(theta: np.ndarray) -> np.ndarray:
    z = theta - theta.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class ExactEval:
    pi: np.ndarray
    V_r: np.ndarray
    V_c: np.ndarray
    Q_r: np.ndarray
    Q_c: np.ndarray
    d_state: np.ndarray
    occupancy: np.ndarray  # (S, A)
    J_R: float
    J_C: float


def evaluate_policy(M: TabularCMDP, pi: np.ndarray) -> ExactEval:
    """Exact values and occupancy of a stochastic policy table ``pi`` (S, A)."""
    S = M.n_states
    g = M.gamma
    P_pi = np.einsum("sa,sat->st", pi, M.P)
    A = np.eye(S) - g * P_pi
    if np.linalg.cond(A) > 1e12:
        raise SingularSystem("I - gamma P_pi is numerically singular")
    r_pi = (pi * M.r).sum(axis=1)
    c_pi = (pi * M.c).sum(axis=1)
    V = np.linalg.solve(A, np.stack([r_pi, c_pi], axis=1))
    V_r, V_c = V[:, 0], V[:, 1]
    Q_r = M.r + g * M.P @ V_r
    Q_c = M.c + g * M.P @ V_c
    d_state = (1 - g) * np.linalg.solve(A.T, M.mu)
    occ = d_state[:, None] * pi
    return ExactEval(
        pi=pi,
        V_r=V_r,
        V_c=V_c,
        Q_r=Q_r,
        Q_c=Q_c,
        d_state=d_state,
        occupancy=occ,
        J_R=float((1 - g) * M.mu @ V_r),
        J_C=float((1 - g) * M.mu @ V_c),
    )


def exact_policy_eval(M: TabularCMDP, theta: np.ndarray) -> ExactEval:
    return evaluate_policy(M, softmax(np.asarray(theta, dtype=float)))


def exact_grads(M: TabularCMDP, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray, ExactEval]:
    """Policy gradients of J_R and J_C w.r.t. the logits (softmax policy gradient theorem)."""
    ev = exact_policy_eval(M, theta)
    w = ev.d_state[:, None] * ev.pi
    g_r = w * (ev.Q_r - ev.V_r[:, None])
    g_c = w * (ev.Q_c - ev.V_c[:, None])
    return g_r, g_c, ev


def exact_lagrangian_grad(M: TabularCMDP, theta: np.ndarray, lam: float) -> np.ndarray:
    g_r, g_c, _ = exact_grads(M, theta)
    return g_r - lam * g_c


def lagrangian(M: TabularCMDP, theta: np.ndarray, lam: float, d: float) -> float:
    ev = exact_policy_eval(M, theta)
    return ev.J_R - lam * (ev.J_C - d)


def project_ball(x: np.ndarray, radius: float) -> np.ndarray:
    n = np.linalg.norm(x)
    return x if n <= radius else x * (radius / n)


def grad_maps(
    M: TabularCMDP,
    theta: np.ndarray,
    lam: float,
    alpha: float,
    beta: float,
    radius: float,
    cap: float,
    d: float,
) -> Tuple[float, float]:
    """Norms of the primal and dual projected gradient mappings."""
    if alpha <= 0 or beta <= 0:
        raise ValueError("step sizes must be positive")
    g_r, g_c, ev = exact_grads(M, theta)
    g = g_r - lam * g_c
    G = (project_ball(theta + alpha * g, radius) - theta) / alpha
    H = (np.clip(lam + beta * (ev.J_C - d), 0.0, cap) - lam) / beta
    return float(np.linalg.norm(G)), float(abs(H))


@dataclass
class GradMapSample:
    t: int
    G: float
    H: float
    lam: float
    J_R: float
    J_C: float
    grad_norm: float
    L: float
    G_mean: float
    H_mean: float


def run_primal_dual_exact(
    M: TabularCMDP,
    theta0: np.ndarray,
    lam0: float,
    alpha: float,
    beta: float,
    T: int,
    d: float,
    radius: float = 1e3,
    cap: float = 100.0,
) -> List[GradMapSample]:
    """Projected primal-dual iteration with exact gradients and residuals."""
    if alpha <= 0 or beta <= 0:
        raise ValueError("step sizes must be positive")
    theta = np.array(theta0, dtype=float)
    lam = float(lam0)
    out: List[GradMapSample] = []
    g_sum = h_sum = 0.0
    for t in range(T):
        g_r, g_c, ev = exact_grads(M, theta)
        g = g_r - lam * g_c
        u = ev.J_C - d
        theta_next = project_ball(theta + alpha * g, radius)
        lam_next = float(np.clip(lam + beta * u, 0.0, cap))
        G = float(np.linalg.norm((theta_next - theta) / alpha))
        H = abs(lam_next - lam) / beta
        g_sum += G
        h_sum += H
        out.append(
            GradMapSample(
                t=t,
                G=G,
                H=H,
                lam=lam,
                J_R=ev.J_R,
                J_C=ev.J_C,
                grad_norm=float(np.linalg.norm(g)),
                L=ev.J_R - lam * u,
                G_mean=g_sum / (t + 1),
                H_mean=h_sum / (t + 1),
            )
        )
        theta, lam = theta_next, lam_next
    return out


def estimate_smoothness(
    M: TabularCMDP,
    cap: float,
    rng: np.random.Generator,
    n_probes: int = 100,
    h: float = 1e-4,
    scale: float = 3.0,
    safety: float = 2.0,
) -> float:
    """Empirical Lipschitz constant of the Lagrangian gradient over lambda in [0, cap].

    Probes random logits and unit directions with central differences of the
    exact gradients of J_R and J_C separately, then combines them as
    ``L_R + cap * L_C`` times a safety factor.
    """
    S, A = M.n_states, M.n_actions
    L_r = L_c = 0.0
    for _ in range(n_probes):
        th = rng.normal(0.0, scale, (S, A))
        v = rng.normal(size=(S, A))
        v /= np.linalg.norm(v)
        gr_p, gc_p, _ = exact_grads(M, th + h * v)
        gr_m, gc_m, _ = exact_grads(M, th - h * v)
        L_r = max(L_r, np.linalg.norm(gr_p - gr_m) / (2 * h))
        L_c = max(L_c, np.linalg.norm(gc_p - gc_m) / (2 * h))
    return safety * (L_r + cap * L_c)


def dual_floor(samples: Sequence[GradMapSample], alpha: float, beta: float, d: float) -> float:
    """Convergence-rate bound on the ergodic mean of |H| with unit constants and
    exact oracles (no variance, no bias), using run-derived surrogates for the
    Lagrangian range, the residual bound and the gradient bound."""
    T = len(samples)
    Ls = np.array([s.L for s in samples])
    delta = float(Ls.max() - Ls.min())
    u_max = max(abs(s.J_C - d) for s in samples)
    g_max = max(s.grad_norm for s in samples)
    return float(
        np.sqrt(delta / (beta * T))
        + np.sqrt(u_max**2 + alpha**2 + g_max**2 / beta)
        + alpha / np.sqrt(beta) * g_max
    )


def quarter_means(values: Sequence[float]) -> Tuple[float, float]:
    v = np.asarray(values, dtype=float)
    q = max(len(v) // 4, 1)
    return float(v[:q].mean()), float(v[-q:].mean())


@dataclass
class OracleResult:
    J_R: float
    J_C: float
    pi: np.ndarray
    description: str


def deterministic_policies(M: TabularCMDP):
    S, A = M.n_states, M.n_actions
    for choice in itertools.product(range(A), repeat=S):
        pi = np.zeros((S, A))
        pi[np.arange(S), choice] = 1.0
        yield choice, pi


def cmdp_oracle(M: TabularCMDP, d: float, resolution: int = 1000, top_k: int = 8) -> OracleResult:
    """Best feasible value found by deterministic enumeration plus a mixing-weight grid.

    The grid mixes the best feasible deterministic policy state-wise with each
    of the ``top_k`` highest-reward infeasible ones. The result is a lower
    bound on the constrained optimum.
    """
    if M.n_states * M.n_actions > 12:
        raise ValueError("oracle limited to 12 state-action pairs")
    if resolution < 1000:
        raise ValueError("resolution must be >= 1000")
    evals = []
    for choice, pi in deterministic_policies(M):
        ev = evaluate_policy(M, pi)
        evals.append((ev.J_R, ev.J_C, choice, pi))
    feasible = [e for e in evals if e[1] <= d + 1e-12]
    if not feasible:
        raise NoFeasiblePolicy(f"every deterministic policy has J_C > {d}")
    best = max(feasible, key=lambda e: (e[0], -e[1]))
    result = OracleResult(best[0], best[1], best[3], f"deterministic {best[2]}")
    if np.isinf(d):
        return result
    better = sorted([e for e in evals if e[1] > d and e[0] > best[0]], key=lambda e: -e[0])[:top_k]
    ws = np.linspace(0.0, 1.0, resolution + 1)
    for jr, jc, choice, pi_i in better:
        for w in ws[1:]:
            pi = (1 - w) * best[3] + w * pi_i
            ev = evaluate_policy(M, pi)
            if ev.J_C <= d and ev.J_R > result.J_R:
                result = OracleResult(ev.J_R, ev.J_C, pi, f"mix {best[2]} / {choice} w={w:.4f}")
    return result


@dataclass
class Instance:
    name: str
    M: TabularCMDP
    d: float


def _midpoint_budget(M: TabularCMDP) -> float:
    costs = [evaluate_policy(M, pi).J_C for _, pi in deterministic_policies(M)]
    return 0.5 * (min(costs) + max(costs))


def shipped_instances() -> List[Instance]:
    """The fixed diagnostic instances: the slippery chain and two random CMDPs
    whose budget sits halfway between the cheapest and the costliest
    deterministic policy."""
    out = [Instance("chain", chain_cmdp(5, 0.1, 0.9), 0.05)]
    for name, seed, S, A in (("random3x2", 1, 3, 2), ("random4x3", 2, 4, 3)):
        M = random_cmdp(np.random.default_rng(seed), S, A, 0.9)
        out.append(Instance(name, M, _midpoint_budget(M)))
    return out


def get_instance(name: str) -> Instance:
    for inst in shipped_instances():
        if inst.name == name:
            return inst
    raise KeyError(f"unknown instance {name!r}")


@dataclass
class DiagResult:
    instance: str
    seed: int
    alpha: float
    beta: float
    samples: List[GradMapSample]
    G_first: float
    G_last: float
    H_mean: float
    floor: float

    @property
    def primal_ok(self) -> bool:
        return self.G_last <= 0.5 * self.G_first

    @property
    def dual_ok(self) -> bool:
        return self.H_mean <= self.floor


def diagnose(inst: Instance, seed: int, T: int = 5000, cap: float = 100.0, dual_ratio: float = 0.01) -> DiagResult:
    """Exact primal-dual run from random logits with alpha = 1 / (4 L_hat) and a
    slower dual step beta = dual_ratio * alpha."""
    M = inst.M
    L = estimate_smoothness(M, cap, np.random.default_rng(0))
    alpha = 1.0 / (4.0 * L)
    beta = dual_ratio * alpha
    theta0 = np.random.default_rng(seed).normal(size=(M.n_states, M.n_actions))
    samples = run_primal_dual_exact(M, theta0, 0.0, alpha, beta, T, inst.d, cap=cap)
    g1, g4 = quarter_means([s.G for s in samples])
    return DiagResult(
        inst.name, seed, alpha, beta, samples, g1, g4,
        samples[-1].H_mean, dual_floor(samples, alpha, beta, inst.d),
    )
