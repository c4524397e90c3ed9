import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ltlppo.envs import RIGHT, TabularCMDP, chain_cmdp, random_cmdp
from ltlppo.theory import (
    NoFeasiblePolicy,
    cmdp_oracle,
    diagnose,
    dual_floor,
    evaluate_policy,
    exact_grads,
    exact_lagrangian_grad,
    exact_policy_eval,
    grad_maps,
    lagrangian,
    quarter_means,
    run_primal_dual_exact,
    shipped_instances,
)


def fd_grad(fn, theta, h):
    g = np.zeros_like(theta)
    for idx in np.ndindex(theta.shape):
        e = np.zeros_like(theta)
        e[idx] = h
        g[idx] = (fn(theta + e) - fn(theta - e)) / (2 * h)
    return g


def test_single_state_value():
    M = TabularCMDP(np.ones((1, 1, 1)), np.ones((1, 1)), np.zeros((1, 1)), np.ones(1), 0.5)
    assert exact_policy_eval(M, np.zeros((1, 1))).J_R == pytest.approx(1.0)


def test_symmetric_two_state_occupancy():
    P = np.zeros((2, 2, 2))
    P[0, 0, 1] = P[0, 1, 0] = P[1, 0, 0] = P[1, 1, 1] = 1.0
    M = TabularCMDP(P, np.zeros((2, 2)), np.zeros((2, 2)), np.array([0.5, 0.5]), 0.9)
    ev = exact_policy_eval(M, np.zeros((2, 2)))
    assert np.allclose(ev.d_state, [0.5, 0.5])


@given(st.integers(0, 10_000))
def test_occupancy_identities(seed):
    rng = np.random.default_rng(seed)
    M = random_cmdp(rng, 4, 3, 0.9)
    ev = exact_policy_eval(M, rng.normal(size=(4, 3)))
    assert np.all(ev.occupancy >= 0)
    assert ev.occupancy.sum() == pytest.approx(1.0, abs=1e-12)
    assert (ev.occupancy * M.r).sum() == pytest.approx(ev.J_R, abs=1e-10)
    assert (ev.occupancy * M.c).sum() == pytest.approx(ev.J_C, abs=1e-10)


def test_occupancy_matches_monte_carlo():
    M = chain_cmdp(3, 0.2, 0.9)
    pi = np.zeros((3, 2))
    pi[:, RIGHT] = 1.0
    ev = evaluate_policy(M, pi)
    rng = np.random.default_rng(0)
    n, horizon = 200_000, 160
    s = np.zeros(n, dtype=int)
    est = np.zeros(3)
    w = 1 - M.gamma
    for t in range(horizon):
        est += w * np.bincount(s, minlength=3) / n
        w *= M.gamma
        move = rng.random(n) >= 0.2
        s = np.where(move, np.minimum(s + 1, 2), s)
    assert np.allclose(est, ev.d_state, atol=1e-3)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(100):
        S, A = int(rng.integers(2, 5)), int(rng.integers(2, 4))
        M = random_cmdp(rng, S, A, 0.9)
        theta = rng.normal(size=(S, A))
        lam = float(rng.uniform(0, 5))
        g = exact_lagrangian_grad(M, theta, lam)
        fd = fd_grad(lambda th: lagrangian(M, th, lam, 0.0), theta, 1e-6)
        worst = max(worst, np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12))
    assert worst < 1e-6


def test_lambda_zero_is_reward_gradient():
    M = random_cmdp(np.random.default_rng(2), 3, 2)
    th = np.random.default_rng(3).normal(size=(3, 2))
    g_r, _, _ = exact_grads(M, th)
    assert np.array_equal(exact_lagrangian_grad(M, th, 0.0), g_r)


def test_constant_reward_has_zero_gradient():
    M = random_cmdp(np.random.default_rng(4), 3, 2)
    M = TabularCMDP(M.P, np.full((3, 2), 0.7), M.c, M.mu, M.gamma)
    g_r, _, _ = exact_grads(M, np.random.default_rng(5).normal(size=(3, 2)))
    assert np.allclose(g_r, 0.0, atol=1e-14)


def test_grad_map_projection_laws():
    M = random_cmdp(np.random.default_rng(6), 3, 2)
    th = np.random.default_rng(7).normal(size=(3, 2))
    G, H = grad_maps(M, th, 0.5, 0.1, 0.1, 1e3, 100.0, 0.3)
    assert G == pytest.approx(np.linalg.norm(exact_lagrangian_grad(M, th, 0.5)))
    J_C = exact_policy_eval(M, th).J_C
    _, H = grad_maps(M, th, 0.5, 0.1, 0.1, 1e3, 100.0, J_C)
    assert H == 0.0
    _, H = grad_maps(M, th, 0.0, 0.1, 0.1, 1e3, 100.0, J_C + 0.1)
    assert H == 0.0
    with pytest.raises(ValueError):
        grad_maps(M, th, 0.0, 0.1, 0.0, 1e3, 100.0, 0.1)


def test_fixed_point_is_stationary():
    M = random_cmdp(np.random.default_rng(8), 3, 2)
    M = TabularCMDP(M.P, np.full((3, 2), 0.2), np.full((3, 2), 0.1), M.mu, M.gamma)
    th = np.random.default_rng(9).normal(size=(3, 2))
    samples = run_primal_dual_exact(M, th, 0.0, 0.1, 0.1, 20, d=0.5)
    assert all(s.G < 1e-12 and s.H == 0.0 and s.lam == 0.0 for s in samples)


def test_chain_oracle_values():
    M = chain_cmdp(5, 0.0, 0.9)
    # parking at the safe goal collects 0.5 from step 3 on
    assert cmdp_oracle(M, 0.0).J_R == pytest.approx(0.5 * 0.9**3)
    # unconstrained: head for the risky goal, reward 0.5 at step 3 then 1 forever
    best = (1 - 0.9) * (0.5 * 0.9**3) + 0.9**4
    assert cmdp_oracle(M, np.inf).J_R == pytest.approx(best)


def test_oracle_mixes_to_budget():
    M = chain_cmdp(5, 0.1, 0.9)
    res = cmdp_oracle(M, 0.05)
    assert res.J_C <= 0.05
    assert res.J_R > cmdp_oracle(M, 0.0).J_R
    assert evaluate_policy(M, res.pi).J_R == pytest.approx(res.J_R)


def test_oracle_infeasible():
    M = random_cmdp(np.random.default_rng(10), 2, 2)
    M = TabularCMDP(M.P, M.r, M.c + 1.0, M.mu, M.gamma)
    with pytest.raises(NoFeasiblePolicy):
        cmdp_oracle(M, 0.5)


def test_oracle_size_limit():
    with pytest.raises(ValueError):
        cmdp_oracle(random_cmdp(np.random.default_rng(0), 5, 3), 0.1)


def test_quarter_means():
    assert quarter_means([4, 4, 3, 3, 2, 2, 1, 1]) == (4.0, 1.0)


def test_dual_floor_dominates_residual():
    inst = shipped_instances()[0]
    th = np.random.default_rng(0).normal(size=(inst.M.n_states, inst.M.n_actions))
    samples = run_primal_dual_exact(inst.M, th, 0.0, 0.01, 0.001, 200, inst.d)
    assert samples[-1].H_mean <= dual_floor(samples, 0.01, 0.001, inst.d)


def test_ergodic_mean_decays_on_chain():
    r = diagnose(shipped_instances()[0], seed=0)
    G_mean = np.array([s.G_mean for s in r.samples])
    burn = len(G_mean) // 10
    assert np.all(np.diff(G_mean[burn:]) <= 0.0)
    assert r.primal_ok and r.dual_ok


@pytest.mark.parametrize("name", ["random3x2", "random4x3"])
def test_ergodic_mean_nearly_monotone(name):
    # small upticks (relative size below 1e-4) occur while lambda oscillates
    inst = [i for i in shipped_instances() if i.name == name][0]
    r = diagnose(inst, seed=3)
    G_mean = np.array([s.G_mean for s in r.samples])
    burn = len(G_mean) // 10
    rel = np.diff(G_mean[burn:]) / G_mean[burn + 1:]
    assert rel.max() < 1e-4
    assert G_mean[-1] < G_mean[burn]
