from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np


@dataclass
class StepResult:
    obs: np.ndarray
    reward: float
    cost: np.ndarray  # per-spec weighted costs
    done: bool
    info: Dict[str, Any] = field(default_factory=dict)
    costs: Any = None  # CostVector when the env runs monitors


class VecEnv:
    """Steps a list of single-owner envs in lockstep and resets finished ones.

    On a finished episode ``infos[i]`` carries ``final_obs``, ``episode_reward``,
    ``episode_cost`` and ``episode_length`` and the returned observation is the
    first observation of the next episode.
    """

    def __init__(self, envs: Sequence):
        if not envs:
            raise ValueError("need at least one env")
        self.envs = list(envs)
        self._len = np.zeros(len(envs), dtype=np.int64)
        self._ret = np.zeros(len(envs))
        self._cost = np.zeros((len(envs), self.n_costs))

    def __len__(self) -> int:
        return len(self.envs)

    @property
    def n_costs(self) -> int:
        return self.envs[0].n_costs

    @property
    def obs_size(self) -> int:
        return self.envs[0].obs_size

    def reset(self) -> np.ndarray:
        self._len[:] = 0
        self._ret[:] = 0
        self._cost[:] = 0
        return np.stack([e.reset() for e in self.envs])

    def step(self, actions):
        obs, rew, cost, done, infos = [], [], [], [], []
        for i, (env, a) in enumerate(zip(self.envs, actions)):
            res = env.step(a)
            self._len[i] += 1
            self._ret[i] += res.info.get("task_reward", res.reward)
            self._cost[i] += res.cost
            info = dict(res.info)
            o = res.obs
            if res.done:
                info["final_obs"] = o
                info["episode_reward"] = float(self._ret[i])
                info["episode_cost"] = self._cost[i].copy()
                info["episode_length"] = int(self._len[i])
                self._len[i] = 0
                self._ret[i] = 0
                self._cost[i] = 0
                o = env.reset()
            obs.append(o)
            rew.append(res.reward)
            cost.append(res.cost)
            done.append(res.done)
            infos.append(info)
        return (
            np.stack(obs),
            np.asarray(rew, dtype=float),
            np.stack(cost).reshape(len(self.envs), self.n_costs),
            np.asarray(done, dtype=bool),
            infos,
        )
