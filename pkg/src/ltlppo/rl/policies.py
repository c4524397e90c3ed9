"""Policies and critics. Parameters are initialized from numpy generators so
that each network owns its randomness."""
from __future__ import annotations

import math
from typing import Sequence, Tuple

import numpy as np
import torch
from torch import nn

DTYPE = torch.float64
LOG_STD_MIN, LOG_STD_MAX = -5.0, 2.0


def _linear(n_in: int, n_out: int, rng: np.random.Generator, gain: float) -> nn.Linear:
    layer = nn.Linear(n_in, n_out).to(DTYPE)
    with torch.no_grad():
        layer.weight.copy_(torch.from_numpy(rng.normal(0.0, gain / math.sqrt(n_in), (n_out, n_in))))
        layer.bias.zero_()
    return layer


def mlp(n_in: int, hidden: Sequence[int], n_out: int, rng: np.random.Generator, out_gain: float = 1.0) -> nn.Sequential:
    layers = []
    last = n_in
    for h in hidden:
        layers += [_linear(last, h, rng, 1.0), nn.Tanh()]
        last = h
    layers.append(_linear(last, n_out, rng, out_gain))
    return nn.Sequential(*layers)


def as_tensor(x) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x
    return torch.as_tensor(np.asarray(x, dtype=np.float64))


class GaussianPolicy(nn.Module):
    """tanh MLP mean with a state-independent log-std vector."""

    discrete = False

    def __init__(self, obs_size: int, act_dim: int, hidden=(64, 64), init_log_std: float = -0.5, rng=None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.net = mlp(obs_size, hidden, act_dim, rng, out_gain=0.01)
        self.log_std = nn.Parameter(torch.full((act_dim,), float(init_log_std), dtype=DTYPE))

    def clamp_(self):
        with torch.no_grad():
            self.log_std.clamp_(LOG_STD_MIN, LOG_STD_MAX)

    def dist(self, obs):
        mean = self.net(as_tensor(obs))
        std = torch.exp(self.log_std.clamp(LOG_STD_MIN, LOG_STD_MAX)).expand_as(mean)
        return torch.distributions.Normal(mean, std)

    def log_prob(self, obs, act):
        return self.dist(obs).log_prob(as_tensor(act)).sum(-1)

    def entropy(self, obs):
        return self.dist(obs).entropy().sum(-1)

    @torch.no_grad()
    def act(self, obs: np.ndarray, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        d = self.dist(obs)
        noise = torch.from_numpy(rng.standard_normal(d.mean.shape))
        a = d.mean + d.stddev * noise
        return a.numpy(), d.log_prob(a).sum(-1).numpy()

    @torch.no_grad()
    def mode(self, obs: np.ndarray) -> np.ndarray:
        return self.net(as_tensor(obs)).numpy()


class SoftmaxTablePolicy(nn.Module):
    """Per-state logits; observations are one-hot state vectors."""

    discrete = True

    def __init__(self, n_states: int, n_actions: int):
        super().__init__()
        self.logits = nn.Parameter(torch.zeros((n_states, n_actions), dtype=DTYPE))

    def clamp_(self):
        pass

    def dist(self, obs):
        return torch.distributions.Categorical(logits=as_tensor(obs) @ self.logits)

    def log_prob(self, obs, act):
        return self.dist(obs).log_prob(as_tensor(act).long())

    def entropy(self, obs):
        return self.dist(obs).entropy()

    @torch.no_grad()
    def probs(self) -> np.ndarray:
        return torch.softmax(self.logits, dim=1).numpy()

    @torch.no_grad()
    def act(self, obs: np.ndarray, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        p = self.dist(obs).probs.numpy()
        u = rng.random(len(p))
        a = np.minimum((p.cumsum(axis=1) < u[:, None]).sum(axis=1), p.shape[1] - 1)
        return a, np.log(p[np.arange(len(p)), a])

    @torch.no_grad()
    def mode(self, obs: np.ndarray) -> np.ndarray:
        return self.dist(obs).probs.argmax(-1).numpy()


class MLPCritic(nn.Module):
    def __init__(self, obs_size: int, hidden=(64, 64), rng=None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.net = mlp(obs_size, hidden, 1, rng, out_gain=1.0)

    def forward(self, obs):
        return self.net(as_tensor(obs)).squeeze(-1)


class TableCritic(nn.Module):
    def __init__(self, n_states: int):
        super().__init__()
        self.values = nn.Parameter(torch.zeros(n_states, dtype=DTYPE))

    def forward(self, obs):
        return as_tensor(obs) @ self.values


def flat_params(module: nn.Module) -> np.ndarray:
    ps = [p.detach().reshape(-1).numpy() for p in module.parameters()]
    return np.concatenate(ps) if ps else np.zeros(0)


def load_flat_params(module: nn.Module, flat: np.ndarray) -> None:
    flat = np.asarray(flat, dtype=np.float64)
    n = sum(p.numel() for p in module.parameters())
    if flat.size != n:
        raise ValueError(f"parameter count mismatch: expected {n}, got {flat.size}")
    i = 0
    with torch.no_grad():
        for p in module.parameters():
            k = p.numel()
            p.copy_(torch.from_numpy(flat[i:i + k].reshape(p.shape)))
            i += k


def project_params_(module: nn.Module, radius: float) -> bool:
    """Scale all parameters onto the ball of the given radius; True if it was active."""
    with torch.no_grad():
        sq = sum(float((p * p).sum()) for p in module.parameters())
        norm = math.sqrt(sq)
        if norm <= radius:
            return False
        for p in module.parameters():
            p.mul_(radius / norm)
    return True
