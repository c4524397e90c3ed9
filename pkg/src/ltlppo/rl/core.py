"""Estimators and update rules shared by the trainer: GAE, advantage mixing,
the clipped surrogate and the projected dual step."""
from __future__ import annotations

from typing import Sequence

import numpy as np
import torch


class LengthMismatch(ValueError):
    pass


class NonPositiveRatio(ValueError):
    pass


class NaNGradient(FloatingPointError):
    pass


def gae(x, values, next_values, dones, gamma: float, lam: float, ends=None) -> np.ndarray:
    """Generalized advantage estimates along the first axis.

    ``x`` are rewards or costs, ``values`` V(s_t), ``next_values`` V(s_{t+1})
    (the bootstrap). ``dones`` mark true terminations (no bootstrap); ``ends``
    mark every episode boundary, including time-limit truncations, and cut the
    recursion (defaults to ``dones``). Extra trailing axes (parallel envs) are
    handled elementwise.
    """
    x = np.asarray(x, dtype=float)
    values = np.asarray(values, dtype=float)
    next_values = np.asarray(next_values, dtype=float)
    dones = np.asarray(dones, dtype=float)
    ends = dones if ends is None else np.maximum(np.asarray(ends, dtype=float), dones)
    if not (x.shape == values.shape == next_values.shape == dones.shape == ends.shape):
        raise LengthMismatch(f"shapes {x.shape}, {values.shape}, {next_values.shape}, {dones.shape}")
    delta = x + gamma * next_values * (1.0 - dones) - values
    cont = 1.0 - ends
    adv = np.zeros_like(x)
    acc = np.zeros_like(x[0]) if x.ndim > 1 else 0.0
    for t in range(len(x) - 1, -1, -1):
        acc = delta[t] + gamma * lam * cont[t] * acc
        adv[t] = acc
    return adv


def mixed_advantage(adv_r, adv_c, lambdas, normalize: bool = True, eps: float = 1e-8) -> np.ndarray:
    """``adv_r - sum_k lambda_k adv_c[k]``, then standardized over the batch.

    ``adv_c`` has shape (K, N) (or (K, ...) matching ``adv_r``).
    """
    adv_r = np.asarray(adv_r, dtype=float)
    lambdas = np.asarray(lambdas, dtype=float).reshape(-1)
    adv_c = np.asarray(adv_c, dtype=float).reshape((len(lambdas),) + adv_r.shape) if len(lambdas) else None
    if adv_c is not None and adv_c.shape[1:] != adv_r.shape:
        raise LengthMismatch("cost advantages do not align with reward advantages")
    mix = adv_r.copy()
    for k, lk in enumerate(lambdas):
        mix = mix - lk * adv_c[k]
    if normalize:
        mix = (mix - mix.mean()) / (mix.std() + eps)
    return mix


def ppo_loss(ratio, adv, clip: float):
    """Clipped surrogate (to maximize): mean of min(r A, clip(r, 1-e, 1+e) A).

    Works on numpy arrays or torch tensors.
    """
    if isinstance(ratio, torch.Tensor):
        if bool((ratio <= 0).any()):
            raise NonPositiveRatio("probability ratios must be positive")
        clipped = torch.clamp(ratio, 1 - clip, 1 + clip)
        return torch.minimum(ratio * adv, clipped * adv).mean()
    ratio = np.asarray(ratio, dtype=float)
    adv = np.asarray(adv, dtype=float)
    if np.any(ratio <= 0):
        raise NonPositiveRatio("probability ratios must be positive")
    return float(np.mean(np.minimum(ratio * adv, np.clip(ratio, 1 - clip, 1 + clip) * adv)))


def dual_update(lam, lr: float, J_c, d, cap: float):
    """Projected ascent: clip(lambda + lr (J_c - d), 0, cap), elementwise."""
    out = np.clip(np.asarray(lam, dtype=float) + lr * (np.asarray(J_c, dtype=float) - np.asarray(d, dtype=float)), 0.0, cap)
    return float(out) if out.ndim == 0 else out


def discounted_sum(x: Sequence[float], gamma: float) -> float:
    x = np.asarray(x, dtype=float)
    return float((gamma ** np.arange(len(x))) @ x)


def tabular_surrogate(theta: np.ndarray, states, actions, old_probs, adv) -> float:
    """Unclipped surrogate mean(pi_theta(a|s) / pi_old(a|s) * A) for softmax logits."""
    z = theta - theta.max(axis=1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=1, keepdims=True)
    return float(np.mean(p[states, actions] / old_probs * adv))


def tabular_surrogate_grad(theta: np.ndarray, states, actions, old_probs, adv) -> np.ndarray:
    """Analytic gradient of :func:`tabular_surrogate` w.r.t. the logits."""
    z = theta - theta.max(axis=1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=1, keepdims=True)
    states = np.asarray(states)
    actions = np.asarray(actions)
    w = p[states, actions] / old_probs * np.asarray(adv, dtype=float) / len(states)
    grad = np.zeros_like(theta)
    # d pi(a|s) / d theta(s, b) = pi(a|s) (1[a=b] - pi(b|s))
    np.add.at(grad, (states, actions), w)
    np.add.at(grad, states, -w[:, None] * p[states])
    return grad
