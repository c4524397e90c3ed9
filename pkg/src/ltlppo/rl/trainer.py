"""PPO-Lagrangian training loop on the monitor-augmented process."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
import torch

from ..config import RunConfig
from ..envs import TabularCMDP, TabularEnv, VecEnv, Zone, ZonesConfig, ZonesEnv, chain_cmdp
from ..monitor import Spec, load_specs, specs_from_data
from .core import NaNGradient, dual_update, gae, mixed_advantage, ppo_loss
from .policies import (
    GaussianPolicy,
    MLPCritic,
    SoftmaxTablePolicy,
    TableCritic,
    flat_params,
    load_flat_params,
    project_params_,
)

CHECKPOINT_VERSION = 1

# independent random streams per run seed
_ENV, _POLICY, _CRITIC, _ACT, _SHUFFLE = range(5)


def _stream(seed: int, which: int, *extra: int) -> np.random.Generator:
    return np.random.default_rng([seed, which, *extra])


def _env_seed(seed: int, i: int) -> int:
    return int(np.random.SeedSequence([seed, _ENV, i]).generate_state(1)[0])


@dataclass
class Problem:
    vec: VecEnv
    spec_ids: List[str]
    weights: np.ndarray
    budgets: np.ndarray  # raw units; the weighted channel is compared with weights * budgets
    discrete: bool
    obs_size: int
    act_size: int
    cmdp: Optional[TabularCMDP] = None


def resolve_specs(cfg: RunConfig) -> List[Spec]:
    if cfg.env.kind != "zones":
        return []
    alphabet = _zones_config(cfg).alphabet
    if cfg.spec_file:
        return load_specs(cfg.spec_file, alphabet)
    return specs_from_data([s.model_dump() for s in cfg.specs], alphabet)


def _zones_config(cfg: RunConfig) -> ZonesConfig:
    e = cfg.env
    zones = [Zone(z.color, z.x, z.y, z.radius) for z in e.zones] if e.zones else None
    return ZonesConfig(
        half_width=e.half_width,
        colors=tuple(e.colors),
        per_color=e.per_color,
        radius=e.radius,
        zones=zones,
        max_steps=e.max_steps,
        dt=e.dt,
        speed_cap=e.speed_cap,
        damping=e.damping,
        action_scale=e.action_scale,
        step_penalty=e.step_penalty,
        reach_reward=e.reach_reward,
        wall_penalty=e.wall_penalty,
        terminate_on_violation=e.terminate_on_violation,
        task=e.task,
        sort_by_distance=e.sort_by_distance,
        shaping=e.shaping,
    )


def build_problem(cfg: RunConfig, seed: int, n_envs: Optional[int] = None, seed_offset: int = 0) -> Problem:
    n = cfg.ppo.n_envs if n_envs is None else n_envs
    seeds = [_env_seed(seed, seed_offset + i) for i in range(n)]
    if cfg.env.kind == "chain":
        M = chain_cmdp(cfg.env.n, cfg.env.p_slip, cfg.ppo.gamma)
        envs = [TabularEnv(M, cfg.env.max_steps, seed=s) for s in seeds]
        d = cfg.dual.cost_limit if cfg.dual.cost_limit is not None else 0.0
        return Problem(VecEnv(envs), ["cost"], np.ones(1), np.array([d]), True, M.n_states, M.n_actions, M)
    zcfg = _zones_config(cfg)
    specs = resolve_specs(cfg)
    envs = [ZonesEnv(zcfg, specs, seed=s) for s in seeds]
    budgets = np.array([cfg.dual.cost_limit if cfg.dual.cost_limit is not None else s.budget for s in specs])
    weights = np.array([s.weight for s in specs])
    return Problem(VecEnv(envs), [s.id for s in specs], weights, budgets, False, envs[0].obs_size, 2)


def episode_cost_estimate(disc: np.ndarray, total: np.ndarray, length: int, gamma: float, mode: str) -> np.ndarray:
    if mode == "discounted":
        return disc
    if mode == "normalized":
        return (1 - gamma) * disc
    if mode == "mean":
        return total / max(length, 1)
    return total


class Trainer:
    def __init__(self, cfg: RunConfig, seed: int, out_dir: Optional[Path] = None):
        torch.set_num_threads(1)
        self.cfg = cfg
        self.seed = seed
        self.out_dir = Path(out_dir) if out_dir is not None else None
        p = self.problem = build_problem(cfg, seed)
        ppo = cfg.ppo
        K = len(p.spec_ids)
        if p.discrete:
            self.policy = SoftmaxTablePolicy(p.obs_size, p.act_size)
            self.critic_r = TableCritic(p.obs_size)
            self.critics_c = [TableCritic(p.obs_size) for _ in range(K)]
        else:
            self.policy = GaussianPolicy(p.obs_size, p.act_size, ppo.hidden, ppo.init_log_std, _stream(seed, _POLICY))
            self.critic_r = MLPCritic(p.obs_size, ppo.hidden, _stream(seed, _CRITIC, 0))
            self.critics_c = [MLPCritic(p.obs_size, ppo.hidden, _stream(seed, _CRITIC, k + 1)) for k in range(K)]
        self.opt_pi = torch.optim.Adam(self.policy.parameters(), lr=ppo.lr, eps=1e-5)
        self.opt_r = torch.optim.Adam(self.critic_r.parameters(), lr=ppo.lr, eps=1e-5)
        self.opt_c = [torch.optim.Adam(c.parameters(), lr=ppo.lr, eps=1e-5) for c in self.critics_c]
        self.act_rng = _stream(seed, _ACT)
        self.shuffle_rng = _stream(seed, _SHUFFLE)
        self.lambdas = np.full(K, cfg.dual.init if cfg.method == "ppo_ltl" else 0.0)
        self.batch_size = ppo.horizon * ppo.n_envs
        self.n_iterations = max(1, cfg.total_steps // self.batch_size)
        self.iteration = 0
        self.steps = 0
        self.obs = p.vec.reset()
        n = len(p.vec)
        self._ep_disc = np.zeros((n, K))
        self._ep_t = np.zeros(n, dtype=np.int64)
        self._ep_viol = np.zeros((n, K), dtype=bool)
        self.history: List[Dict[str, float]] = []
        self.episodes: List[dict] = []

    # ------------------------------------------------------------------ rollout
    def collect(self) -> dict:
        p = self.problem
        H, N = self.cfg.ppo.horizon, len(p.vec)
        K = len(p.spec_ids)
        gamma = self.cfg.ppo.gamma
        D = p.obs_size
        obs_b = np.zeros((H, N, D))
        nxt_b = np.zeros((H, N, D))
        act_b = np.zeros((H, N)) if p.discrete else np.zeros((H, N, p.act_size))
        logp_b = np.zeros((H, N))
        rew_b = np.zeros((H, N))
        cost_b = np.zeros((H, N, K))
        term_b = np.zeros((H, N), dtype=bool)
        end_b = np.zeros((H, N), dtype=bool)
        episodes = []
        for t in range(H):
            obs = self.obs
            a, logp = self.policy.act(obs, self.act_rng)
            nobs, r, c, done, infos = p.vec.step(a)
            obs_b[t], act_b[t], logp_b[t], rew_b[t], cost_b[t] = obs, a, logp, r, c
            self._ep_disc += (gamma ** self._ep_t)[:, None] * c
            self._ep_t += 1
            for i, info in enumerate(infos):
                self._ep_viol[i] |= info.get("violations", np.zeros(K, dtype=bool))
                if done[i]:
                    nxt_b[t, i] = info["final_obs"]
                    term_b[t, i] = not info.get("truncated", False)
                    end_b[t, i] = True
                    length = info["episode_length"]
                    total = np.asarray(info["episode_cost"])
                    episodes.append(
                        {
                            "reward": info["episode_reward"],
                            "length": length,
                            "cost": total,
                            "jc": episode_cost_estimate(self._ep_disc[i].copy(), total, length, gamma, self.cfg.dual.cost_estimate),
                            "violation": self._ep_viol[i].copy(),
                            "hit_wall": bool(info.get("hit_wall", False)),
                            "success": bool(info.get("success", False)),
                        }
                    )
                    self._ep_disc[i] = 0
                    self._ep_t[i] = 0
                    self._ep_viol[i] = False
                else:
                    nxt_b[t, i] = nobs[i]
            self.obs = nobs
        self.steps += H * N
        return dict(obs=obs_b, next_obs=nxt_b, act=act_b, logp=logp_b, rew=rew_b, cost=cost_b, term=term_b, end=end_b, episodes=episodes)

    # ------------------------------------------------------------------- update
    def _values(self, critic, obs: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            return critic(obs.reshape(-1, obs.shape[-1])).numpy().reshape(obs.shape[:-1])

    def advantages(self, batch: dict):
        ppo = self.cfg.ppo
        g, lg = ppo.gamma, ppo.gae_lambda

        def one(critic, x):
            v = self._values(critic, batch["obs"])
            nv = self._values(critic, batch["next_obs"])
            adv = gae(x, v, nv, batch["term"], g, lg, ends=batch["end"])
            return adv, adv + v

        adv_r, ret_r = one(self.critic_r, batch["rew"])
        adv_c, ret_c = [], []
        for k, critic in enumerate(self.critics_c):
            a, r = one(critic, batch["cost"][:, :, k])
            adv_c.append(a)
            ret_c.append(r)
        return adv_r, ret_r, adv_c, ret_c

    def _step(self, opt, module, loss) -> float:
        opt.zero_grad()
        loss.backward()
        for prm in module.parameters():
            if prm.grad is not None and not torch.isfinite(prm.grad).all():
                self._dump_nan()
                raise NaNGradient(f"non-finite gradient at iteration {self.iteration}")
        norm = float(torch.nn.utils.clip_grad_norm_(module.parameters(), self.cfg.ppo.max_grad_norm))
        opt.step()
        return norm

    def _dump_nan(self):
        if self.out_dir is None:
            return
        self.out_dir.mkdir(parents=True, exist_ok=True)
        np.savez(self.out_dir / "nan_dump.npz", policy=flat_params(self.policy), lambdas=self.lambdas, iteration=self.iteration)

    def _set_lr(self):
        ppo = self.cfg.ppo
        if ppo.lr_final is None:
            return
        frac = self.iteration / max(self.n_iterations - 1, 1)
        lr = ppo.lr + (ppo.lr_final - ppo.lr) * frac
        for opt in [self.opt_pi, self.opt_r, *self.opt_c]:
            for group in opt.param_groups:
                group["lr"] = lr

    def update(self, batch: dict) -> Dict[str, float]:
        ppo = self.cfg.ppo
        p = self.problem
        adv_r, ret_r, adv_c, ret_c = self.advantages(batch)
        B = adv_r.size
        flat = lambda x: x.reshape(B, *x.shape[2:])
        obs = torch.from_numpy(flat(batch["obs"]))
        act = torch.from_numpy(flat(batch["act"]))
        logp_old = torch.from_numpy(flat(batch["logp"]))
        if self.cfg.method == "ppo_ltl" and len(adv_c):
            mix = mixed_advantage(adv_r.reshape(-1), np.stack([a.reshape(-1) for a in adv_c]), self.lambdas, ppo.normalize_advantages)
        else:
            mix = mixed_advantage(adv_r.reshape(-1), np.zeros((0, B)), [], ppo.normalize_advantages)
        mix_t = torch.from_numpy(mix)
        ret_r_t = torch.from_numpy(ret_r.reshape(-1))
        ret_c_t = [torch.from_numpy(r.reshape(-1)) for r in ret_c]

        stats = {"policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0, "approx_kl": 0.0, "clip_frac": 0.0, "grad_norm": 0.0}
        if self.cfg.diagnostics:
            # primal gradient mapping estimate at the old policy (projection inactive inside the ball)
            self.opt_pi.zero_grad()
            ratio = torch.exp(self.policy.log_prob(obs, act) - logp_old)
            ppo_loss(ratio, mix_t, ppo.clip).backward()
            stats["gmap_G"] = float(math.sqrt(sum(float((q.grad ** 2).sum()) for q in self.policy.parameters())))
            self.opt_pi.zero_grad()
        mb = min(ppo.minibatch, B)
        n_updates = 0
        for _ in range(ppo.epochs):
            perm = self.shuffle_rng.permutation(B)
            for start in range(0, B, mb):
                idx = torch.from_numpy(perm[start:start + mb])
                logp = self.policy.log_prob(obs[idx], act[idx])
                ratio = torch.exp(logp - logp_old[idx])
                surr = ppo_loss(ratio, mix_t[idx], ppo.clip)
                ent = self.policy.entropy(obs[idx]).mean()
                stats["grad_norm"] += self._step(self.opt_pi, self.policy, -(surr + ppo.ent_coef * ent))
                self.policy.clamp_()
                if ppo.project:
                    project_params_(self.policy, ppo.param_radius)
                v_loss = ppo.vf_coef * ((self.critic_r(obs[idx]) - ret_r_t[idx]) ** 2).mean()
                self._step(self.opt_r, self.critic_r, v_loss)
                for critic, opt, rc in zip(self.critics_c, self.opt_c, ret_c_t):
                    self._step(opt, critic, ppo.vf_coef * ((critic(obs[idx]) - rc[idx]) ** 2).mean())
                with torch.no_grad():
                    lr_ = logp - logp_old[idx]
                    stats["approx_kl"] += float(((torch.exp(lr_) - 1) - lr_).mean())
                    stats["clip_frac"] += float(((ratio - 1).abs() > ppo.clip).double().mean())
                stats["policy_loss"] += -surr.item()
                stats["value_loss"] += v_loss.item()
                stats["entropy"] += ent.item()
                n_updates += 1
        for k in stats:
            if k != "gmap_G":
                stats[k] /= max(n_updates, 1)
        return stats

    def dual_step(self, jc: np.ndarray) -> np.ndarray:
        """One projected dual step per spec; returns |H| estimates."""
        dual = self.cfg.dual
        target = self.problem.weights * self.problem.budgets
        if self.cfg.method != "ppo_ltl" or not len(jc):
            return np.zeros(len(jc))
        ok = np.isfinite(jc)
        new = self.lambdas.copy()
        if ok.any():
            new[ok] = dual_update(self.lambdas[ok], dual.lr, jc[ok], target[ok], dual.cap)
        beta = dual.lr if dual.lr > 0 else 1.0
        H = np.where(ok, np.abs(np.clip(self.lambdas + beta * (np.nan_to_num(jc) - target), 0, dual.cap) - self.lambdas) / beta, np.nan)
        self.lambdas = new
        return H

    # -------------------------------------------------------------------- loop
    def iterate(self) -> Dict[str, float]:
        self._set_lr()
        batch = self.collect()
        stats = self.update(batch)
        eps = batch["episodes"]
        K = len(self.problem.spec_ids)
        if eps:
            jc = np.mean([e["jc"] for e in eps], axis=0)
        else:
            jc = np.full(K, np.nan)
        lam_before = self.lambdas.copy()
        H = self.dual_step(jc)
        for e in eps:
            e["iteration"] = self.iteration
        self.episodes.extend(eps)
        row: Dict[str, float] = {
            "iteration": self.iteration,
            "steps": self.steps,
            "episodes": len(eps),
            "reward": _mean([e["reward"] for e in eps]),
            "length": _mean([e["length"] for e in eps]),
            "hit_wall": _mean([e["hit_wall"] for e in eps]),
            "success": _mean([e["success"] for e in eps]),
        }
        for k, sid in enumerate(self.problem.spec_ids):
            row[f"cost_{sid}"] = _mean([e["cost"][k] for e in eps])
            row[f"vr_{sid}"] = _mean([e["violation"][k] for e in eps])
            row[f"jc_{sid}"] = float(jc[k])
            row[f"lambda_{sid}"] = float(self.lambdas[k])
            row[f"gmap_H_{sid}"] = float(H[k])
        for key in ("policy_loss", "value_loss", "entropy", "approx_kl", "clip_frac", "grad_norm"):
            row[key] = stats[key]
        if self.cfg.diagnostics:
            row["gmap_G"] = stats["gmap_G"]
        self.history.append(row)
        self.iteration += 1
        return row

    def run(self, callback: Optional[Callable[[Dict[str, float]], None]] = None) -> List[Dict[str, float]]:
        while self.iteration < self.n_iterations:
            row = self.iterate()
            if callback is not None:
                callback(row)
            if self.out_dir is not None and self.cfg.checkpoint_every and self.iteration % self.cfg.checkpoint_every == 0:
                self.save_checkpoint(self.out_dir / f"checkpoint_{self.iteration:05d}.npz")
        return self.history

    # ----------------------------------------------------------------- summary
    def summary(self, tail_fraction: float = 0.1) -> Dict[str, float]:
        """Episode statistics over the last ``tail_fraction`` of iterations, final lambdas,
        and exact values of the final policy on tabular problems."""
        first = self.n_iterations - max(1, int(round(self.n_iterations * tail_fraction)))
        eps = [e for e in self.episodes if e["iteration"] >= first]
        out = {
            "reward": _mean([e["reward"] for e in eps]),
            "length": _mean([e["length"] for e in eps]),
            "hit_wall": _mean([e["hit_wall"] for e in eps]),
            "success": _mean([e["success"] for e in eps]),
            "cost": _mean([float(np.sum(e["cost"])) for e in eps]),
        }
        for k, sid in enumerate(self.problem.spec_ids):
            out[f"cost_{sid}"] = _mean([e["cost"][k] for e in eps])
            out[f"vr_{sid}"] = _mean([e["violation"][k] for e in eps])
            out[f"lambda_{sid}"] = float(self.lambdas[k])
        M = self.problem.cmdp
        if M is not None:
            from ..theory import evaluate_policy

            ev = evaluate_policy(M, self.policy.probs())
            d = float(self.problem.budgets[0])
            out.update({"J_R": ev.J_R, "J_C": ev.J_C, "budget": d, "feasible": float(ev.J_C <= d)})
        return out

    # ------------------------------------------------------------- checkpoints
    def state_arrays(self) -> Dict[str, np.ndarray]:
        out = {
            "version": np.array(CHECKPOINT_VERSION),
            "policy": flat_params(self.policy),
            "critic_r": flat_params(self.critic_r),
            "lambdas": self.lambdas.copy(),
            "iteration": np.array(self.iteration),
            "steps": np.array(self.steps),
            "obs_size": np.array(self.problem.obs_size),
            "spec_ids": np.array(json.dumps(self.problem.spec_ids)),
            "rng": np.array(json.dumps({"act": self.act_rng.bit_generator.state, "shuffle": self.shuffle_rng.bit_generator.state})),
        }
        for k, c in enumerate(self.critics_c):
            out[f"critic_c{k}"] = flat_params(c)
        return out

    def save_checkpoint(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as fh:
            np.savez(fh, **self.state_arrays())
        return path

    def load_checkpoint(self, path) -> None:
        data = np.load(path, allow_pickle=False)
        if int(data["version"]) != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {int(data['version'])}")
        if int(data["obs_size"]) != self.problem.obs_size or json.loads(str(data["spec_ids"])) != self.problem.spec_ids:
            raise ValueError("checkpoint does not match the configured environment/specs")
        load_flat_params(self.policy, data["policy"])
        load_flat_params(self.critic_r, data["critic_r"])
        for k, c in enumerate(self.critics_c):
            load_flat_params(c, data[f"critic_c{k}"])
        self.lambdas = np.array(data["lambdas"], dtype=float)
        self.iteration = int(data["iteration"])
        self.steps = int(data["steps"])
        rng = json.loads(str(data["rng"]))
        self.act_rng.bit_generator.state = rng["act"]
        self.shuffle_rng.bit_generator.state = rng["shuffle"]


def _mean(xs) -> float:
    return float(np.mean(xs)) if len(xs) else float("nan")


def evaluate(trainer: Trainer, episodes: int, seed_offset: int = 10_000, trace: Optional[list] = None) -> dict:
    """Deterministic-policy rollouts (mean action / argmax) on fresh env seeds."""
    cfg = trainer.cfg
    prob = build_problem(cfg, trainer.seed, n_envs=1, seed_offset=seed_offset)
    env = prob.vec.envs[0]
    K = len(prob.spec_ids)
    rows = []
    for ep in range(episodes):
        obs = env.reset()
        total_r, length = 0.0, 0
        cost = np.zeros(K)
        viol = np.zeros(K, dtype=bool)
        hit = success = False
        subtasks = 0
        while True:
            a = trainer.policy.mode(obs[None])[0]
            res = env.step(a)
            r = res.info.get("task_reward", res.reward)
            total_r += r
            cost += res.cost
            length += 1
            info = res.info
            viol |= info.get("violations", np.zeros(K, dtype=bool))
            events = info.get("events", {})
            subtasks += sum(v in ("SUBTASK_COMPLETE", "SATISFIED") for v in events.values())
            if trace is not None and not prob.discrete:
                trace.append((ep, length - 1, env.state.pos[0], env.state.pos[1], " ".join(sorted(info["letter"])), r, *res.cost, ";".join(f"{k}:{v}" for k, v in events.items())))
            hit = hit or info.get("hit_wall", False)
            success = success or info.get("success", False)
            obs = res.obs
            if res.done:
                break
        rows.append({"episode": ep, "reward": total_r, "length": length, "hit_wall": hit, "success": success, "subtasks": subtasks, **{f"cost_{s}": cost[k] for k, s in enumerate(prob.spec_ids)}, **{f"violated_{s}": bool(viol[k]) for k, s in enumerate(prob.spec_ids)}})
    report = {
        "episodes": episodes,
        "reward": _mean([r["reward"] for r in rows]),
        "length": _mean([r["length"] for r in rows]),
        "hit_wall": _mean([r["hit_wall"] for r in rows]),
        "success": _mean([r["success"] for r in rows]),
    }
    for s in prob.spec_ids:
        report[f"vr_{s}"] = _mean([r[f"violated_{s}"] for r in rows])
    return {"report": report, "rows": rows}


def format_row(row: Dict[str, float], columns: List[str]) -> List[str]:
    out = []
    for c in columns:
        v = row.get(c, float("nan"))
        if isinstance(v, str):
            out.append(v)
        elif isinstance(v, (bool, np.bool_)):
            out.append(str(int(v)))
        elif isinstance(v, (int, np.integer)):
            out.append(str(int(v)))
        else:
            out.append(f"{float(v):.10g}")
    return out


def write_csv(path, rows: List[Dict[str, float]], timestamp: bool = True) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = list(rows[0].keys()) if rows else []
    buf = io.StringIO()
    if timestamp:
        buf.write(f"# created {datetime.now(timezone.utc).isoformat(timespec='seconds')}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow(format_row(r, columns))
    path.write_text(buf.getvalue())
    return path


def train(cfg: RunConfig, seed: int, out_dir: Optional[Path] = None, timestamp: bool = True, callback=None) -> Trainer:
    """Train one seed; writes metrics.csv and checkpoint.npz when ``out_dir`` is given."""
    tr = Trainer(cfg, seed, out_dir)
    tr.run(callback)
    if out_dir is not None:
        write_csv(Path(out_dir) / "metrics.csv", tr.history, timestamp)
        tr.save_checkpoint(Path(out_dir) / "checkpoint.npz")
    return tr
