import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from ltlppo.config import ConfigError, validate_config
from ltlppo.rl.core import (
    LengthMismatch,
    NaNGradient,
    NonPositiveRatio,
    discounted_sum,
    dual_update,
    gae,
    mixed_advantage,
    ppo_loss,
    tabular_surrogate,
    tabular_surrogate_grad,
)
from ltlppo.rl.trainer import Trainer, evaluate, train


def brute_gae(x, v, nv, dones, gamma, lam):
    # sum over l of (gamma lam)^l delta_{t+l}, stopping at the end of the episode
    T = len(x)
    delta = [x[t] + gamma * nv[t] * (1 - dones[t]) - v[t] for t in range(T)]
    out = []
    for t in range(T):
        acc, w = 0.0, 1.0
        for k in range(t, T):
            acc += w * delta[k]
            if dones[k]:
                break
            w *= gamma * lam
        out.append(acc)
    return np.array(out)


# --------------------------------------------------------------------- GAE
def test_gae_single_step():
    assert gae([1.0], [0.5], [2.0], [False], 0.9, 0.95)[0] == pytest.approx(1 + 0.9 * 2 - 0.5)
    assert gae([1.0], [0.5], [2.0], [True], 0.9, 0.95)[0] == pytest.approx(0.5)


def test_gae_lambda_one_is_return_minus_baseline():
    x = np.array([1.0, 0.0, 2.0, 1.0])
    v = np.array([0.3, -0.2, 0.7, 0.1])
    nv = np.append(v[1:], 0.0)
    adv = gae(x, v, nv, [0, 0, 0, 1], 0.9, 1.0)
    returns = np.array([discounted_sum(x[t:], 0.9) for t in range(4)])
    assert np.allclose(adv, returns - v)


def test_gae_lambda_zero_is_td_error():
    x, v, nv = np.array([1.0, 2.0]), np.array([0.5, 0.1]), np.array([0.4, 3.0])
    assert np.allclose(gae(x, v, nv, [0, 0], 0.9, 0.0), x + 0.9 * nv - v)


@given(st.integers(0, 10_000), st.floats(0.5, 0.999), st.floats(0, 1))
def test_gae_matches_brute_force(seed, gamma, lam):
    rng = np.random.default_rng(seed)
    T = int(rng.integers(1, 12))
    x, v, nv = rng.normal(size=(3, T))
    dones = rng.random(T) < 0.25
    assert np.allclose(gae(x, v, nv, dones, gamma, lam), brute_gae(x, v, nv, dones, gamma, lam))


def test_gae_truncation_bootstraps_but_cuts():
    # a time-limit end keeps the bootstrap value but does not leak into the previous episode
    x, v, nv = np.array([1.0, 1.0]), np.array([0.0, 0.0]), np.array([5.0, 7.0])
    adv = gae(x, v, nv, [False, False], 0.5, 1.0, ends=[True, False])
    assert adv.tolist() == [1 + 0.5 * 5.0, 1 + 0.5 * 7.0]


def test_gae_vectorized_columns_independent():
    rng = np.random.default_rng(0)
    x, v, nv = rng.normal(size=(3, 6, 3))
    dones = rng.random((6, 3)) < 0.3
    adv = gae(x, v, nv, dones, 0.99, 0.95)
    for j in range(3):
        assert np.allclose(adv[:, j], gae(x[:, j], v[:, j], nv[:, j], dones[:, j], 0.99, 0.95))


def test_gae_shape_mismatch():
    with pytest.raises(LengthMismatch):
        gae([1.0, 2.0], [0.0], [0.0, 0.0], [0, 0], 0.9, 0.9)


# -------------------------------------------------------------- advantages
def test_mixed_advantage_raw():
    mix = mixed_advantage([1.0, 2.0], [[1.0, 0.0], [0.0, 2.0]], [0.5, 2.0], normalize=False)
    assert mix.tolist() == [0.5, -2.0]


def test_mixed_advantage_normalized():
    mix = mixed_advantage([1.0, 2.0, 3.0], np.zeros((0, 3)), [])
    assert mix.mean() == pytest.approx(0.0, abs=1e-12)
    assert mix.std() == pytest.approx(1.0, abs=1e-6)


def test_mixed_advantage_lambda_zero_is_reward_only():
    rng = np.random.default_rng(1)
    a_r, a_c = rng.normal(size=8), rng.normal(size=(2, 8))
    assert np.array_equal(mixed_advantage(a_r, a_c, [0.0, 0.0]), mixed_advantage(a_r, np.zeros((0, 8)), []))


# --------------------------------------------------------------- surrogate
def test_ppo_loss_examples():
    assert ppo_loss([1.5], [1.0], 0.2) == pytest.approx(1.2)
    assert ppo_loss([0.5], [1.0], 0.2) == pytest.approx(0.5)
    assert ppo_loss([0.5], [-1.0], 0.2) == pytest.approx(-0.8)
    assert ppo_loss([1.5], [-1.0], 0.2) == pytest.approx(-1.5)
    with pytest.raises(NonPositiveRatio):
        ppo_loss([0.0], [1.0], 0.2)


def test_ppo_loss_gradient_vanishes_in_clip_region():
    r = torch.tensor([1.5, 1.1, 0.5, 0.7], dtype=torch.float64, requires_grad=True)
    adv = torch.tensor([1.0, 1.0, -1.0, 1.0], dtype=torch.float64)
    ppo_loss(r, adv, 0.2).backward()
    assert r.grad.tolist() == [0.0, 0.25, 0.0, 0.25]


@given(st.integers(0, 10_000))
def test_ppo_loss_torch_matches_numpy(seed):
    rng = np.random.default_rng(seed)
    r, a = rng.uniform(0.1, 3, 10), rng.normal(size=10)
    assert float(ppo_loss(torch.from_numpy(r), torch.from_numpy(a), 0.2)) == pytest.approx(ppo_loss(r, a, 0.2))


def test_tabular_surrogate_grad_fd():
    rng = np.random.default_rng(2)
    theta = rng.normal(size=(3, 4))
    s, a = rng.integers(0, 3, 20), rng.integers(0, 4, 20)
    old, adv = rng.uniform(0.1, 1, 20), rng.normal(size=20)
    g = tabular_surrogate_grad(theta, s, a, old, adv)
    fd = np.zeros_like(theta)
    h = 1e-6
    for idx in np.ndindex(theta.shape):
        e = np.zeros_like(theta)
        e[idx] = h
        fd[idx] = (tabular_surrogate(theta + e, s, a, old, adv) - tabular_surrogate(theta - e, s, a, old, adv)) / (2 * h)
    assert np.abs(g - fd).max() < 1e-6


# --------------------------------------------------------------------- dual
def test_dual_update_examples():
    assert dual_update(1.0, 0.5, 0.3, 0.1, 100) == pytest.approx(1.1)
    assert dual_update(0.0, 0.5, 0.0, 0.1, 100) == 0.0
    assert dual_update(99.9, 10.0, 1.0, 0.0, 100) == 100.0


@given(st.floats(0, 100), st.floats(0, 5), st.floats(0, 10), st.floats(0, 10))
def test_dual_update_properties(lam, lr, jc, d):
    new = dual_update(lam, lr, jc, d, 100.0)
    assert 0.0 <= new <= 100.0
    if jc > d:
        assert new >= lam
    if jc < d:
        assert new <= lam


# ------------------------------------------------------------------ trainer
def chain_cfg(**kw):
    data = {
        "name": "t",
        "env": {"kind": "chain", "n": 5, "p_slip": 0.1, "max_steps": 20},
        "ppo": {"lr": 0.01, "gamma": 0.9, "epochs": 2, "minibatch": 40, "horizon": 20, "n_envs": 2},
        "dual": {"lr": 1.0, "cost_limit": 0.05},
        "total_steps": 400,
    }
    for k, v in kw.items():
        data[k] = {**data.get(k, {}), **v} if isinstance(v, dict) else v
    return validate_config(data)


def zones_cfg(**kw):
    data = {
        "name": "z",
        "env": {"kind": "zones", "max_steps": 30, "zones": [
            {"color": "blue", "x": 1.3, "y": 0.0, "radius": 0.6},
            {"color": "green", "x": 2.6, "y": 0.0, "radius": 0.6},
        ]},
        "specs": [{"id": "avoid_blue", "formula": "!blue U green", "weight": 1.0, "budget": 0.05}],
        "ppo": {"horizon": 32, "n_envs": 2, "minibatch": 32, "epochs": 2, "hidden": [8, 8]},
        "total_steps": 128,
    }
    data.update(kw)
    return validate_config(data)


def test_ppo_ltl_with_zero_lambda_equals_ppo():
    a = train(zones_cfg(method="ppo"), seed=3)
    b = train(zones_cfg(method="ppo_ltl", dual={"lr": 0.0}), seed=3)
    for ra, rb in zip(a.history, b.history):
        assert ra["reward"] == rb["reward"] or (np.isnan(ra["reward"]) and np.isnan(rb["reward"]))
        assert ra["policy_loss"] == rb["policy_loss"]
    for pa, pb in zip(a.policy.parameters(), b.policy.parameters()):
        assert torch.equal(pa, pb)


def test_first_epoch_ratio_is_one():
    tr = Trainer(zones_cfg(), seed=0)
    batch = tr.collect()
    obs = torch.from_numpy(batch["obs"].reshape(-1, tr.problem.obs_size))
    act = torch.from_numpy(batch["act"].reshape(-1, 2))
    logp = tr.policy.log_prob(obs, act).detach().numpy()
    assert np.allclose(logp, batch["logp"].reshape(-1), atol=1e-12)


def test_zero_advantage_and_entropy_leaves_policy():
    tr = Trainer(chain_cfg(ppo={"ent_coef": 0.0}), seed=0)
    batch = tr.collect()
    batch["rew"][:] = 0.0
    batch["cost"][:] = 0.0
    for c in [tr.critic_r, *tr.critics_c]:
        for p in c.parameters():
            p.data.zero_()
    before = [p.detach().clone() for p in tr.policy.parameters()]
    tr.update(batch)
    assert all(torch.equal(b, p) for b, p in zip(before, tr.policy.parameters()))


def test_lambda_rises_when_over_budget():
    tr = Trainer(chain_cfg(dual={"lr": 1.0, "cost_limit": 0.0}), seed=0)
    tr.dual_step(np.array([0.3]))
    assert tr.lambdas[0] == pytest.approx(0.3)
    tr.dual_step(np.array([0.0]))
    assert tr.lambdas[0] == pytest.approx(0.3)


def test_same_seed_same_run():
    a, b = train(chain_cfg(), 5), train(chain_cfg(), 5)
    assert a.history == b.history


def test_checkpoint_round_trip(tmp_path):
    tr = train(chain_cfg(), 1, out_dir=tmp_path)
    fresh = Trainer(chain_cfg(), 1)
    fresh.load_checkpoint(tmp_path / "checkpoint.npz")
    for k, v in tr.state_arrays().items():
        assert np.array_equal(v, fresh.state_arrays()[k])
    assert evaluate(fresh, 3)["report"] == evaluate(tr, 3)["report"]
    other = Trainer(zones_cfg(), 1)
    with pytest.raises(ValueError):
        other.load_checkpoint(tmp_path / "checkpoint.npz")


def test_chain_summary_reports_exact_values():
    s = train(chain_cfg(), 0).summary()
    assert 0.0 <= s["J_C"] <= 1.0 and s["budget"] == 0.05
    assert s["feasible"] == float(s["J_C"] <= 0.05)


def test_nan_gradient_raises_and_dumps(tmp_path):
    tr = Trainer(chain_cfg(), 0, out_dir=tmp_path)
    batch = tr.collect()
    batch["rew"][:] = np.nan
    with pytest.raises(NaNGradient):
        tr.update(batch)
    assert (tmp_path / "nan_dump.npz").exists()


@pytest.mark.parametrize(
    "patch",
    [
        {"ppo": {"gamma": 1.0}},
        {"dual": {"lr": -1}},
        {"dual": {"init": 200.0}},
        {"seeds": []},
        {"method": "trpo"},
        {"colour": "red"},
    ],
)
def test_config_rejects(patch):
    data = {"env": {"kind": "chain"}}
    data.update(patch)
    with pytest.raises(ConfigError):
        validate_config(data)


def test_chain_rejects_specs():
    with pytest.raises(ConfigError):
        validate_config({"env": {"kind": "chain"}, "specs": [{"id": "a", "formula": "F x"}]})
