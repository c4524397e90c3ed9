"""A point robot in a square arena with colored disc zones.

Dynamics are a damped velocity integrator::

    v <- clip_norm(damping * v + action_scale * a, speed_cap)
    p <- p + dt * v

Touching the arena boundary ends the episode with a wall penalty. The letter
at each step is the set of colors whose disc strictly contains the position.
With ``shaping > 0`` the training reward adds phi(s') - phi(s), where phi is
minus the scaled distance to the nearest zone that advances the task monitor;
``info["task_reward"]`` keeps the unshaped value used for reporting.

Observation layout (all entries in [-1, 1])::

    [x, y] / half_width
    [vx, vy] / speed_cap
    per zone: unit direction to the zone center (2), distance / diagonal (1)
    one-hot monitor states: one block per spec, then the task monitor if any

Zones are listed color by color in ``colors`` order; with
``sort_by_distance`` the discs of one color are listed nearest first.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..automata import MonitorEvent
from ..monitor import CostVector, MonitorSet, Spec
from ..ltl import parse
from .base import StepResult

DEFAULT_COLORS = ("blue", "green", "yellow", "magenta")


@dataclass(frozen=True)
class Zone:
    color: str
    x: float
    y: float
    radius: float


@dataclass
class ZonesConfig:
    half_width: float = 4.0
    colors: Tuple[str, ...] = DEFAULT_COLORS
    per_color: int = 2
    radius: float = 0.6
    zones: Optional[List[Zone]] = None  # fixed layout; randomized per episode when None
    max_steps: int = 300
    dt: float = 0.1
    speed_cap: float = 1.0
    damping: float = 0.9
    action_scale: float = 0.5
    step_penalty: float = -0.01
    reach_reward: float = 10.0
    wall_penalty: float = -10.0
    terminate_on_violation: bool = True
    task: Optional[str] = None  # reward formula; spec monitors drive the reward when absent
    sort_by_distance: bool = True
    shaping: float = 0.0  # potential-based shaping toward the task's next zone, per unit distance
    start_clearance: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.half_width <= 0 or self.radius <= 0:
            raise ValueError("half_width and radius must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.shaping < 0:
            raise ValueError("shaping must be >= 0")
        if self.zones is not None:
            for z in self.zones:
                if z.radius <= 0:
                    raise ValueError("zone radius must be positive")
                if max(abs(z.x), abs(z.y)) + z.radius > self.half_width:
                    raise ValueError(f"zone {z} lies outside the arena")

    @property
    def n_zones(self) -> int:
        if self.zones is not None:
            return len(self.zones)
        return len(self.colors) * self.per_color

    @property
    def alphabet(self) -> Tuple[str, ...]:
        if self.zones is not None:
            return tuple(dict.fromkeys(z.color for z in self.zones))
        return tuple(self.colors)


@dataclass
class ZonesState:
    pos: np.ndarray
    vel: np.ndarray
    t: int = 0

    def copy(self) -> "ZonesState":
        return ZonesState(self.pos.copy(), self.vel.copy(), self.t)


def sample_layout(cfg: ZonesConfig, rng: np.random.Generator, max_rejections: int = 100) -> List[Zone]:
    """Random non-overlapping discs inside the arena, away from the start."""
    lim = cfg.half_width - cfg.radius
    zones: List[Zone] = []
    for color in cfg.colors:
        for _ in range(cfg.per_color):
            for attempt in range(max_rejections + 1):
                x, y = rng.uniform(-lim, lim, size=2)
                if math.hypot(x, y) < cfg.radius + cfg.start_clearance:
                    continue
                clear = all(math.hypot(x - z.x, y - z.y) >= 2 * cfg.radius for z in zones)
                if clear or attempt == max_rejections:
                    break
            zones.append(Zone(color, float(x), float(y), cfg.radius))
    return zones


def zones_label(state: ZonesState, zones: Sequence[Zone]) -> frozenset:
    x, y = state.pos
    return frozenset(z.color for z in zones if (x - z.x) ** 2 + (y - z.y) ** 2 < z.radius ** 2)


def integrate(state: ZonesState, action, cfg: ZonesConfig) -> Tuple[ZonesState, bool]:
    """One step of the clipped integrator; returns (next state, hit_wall)."""
    a = np.clip(np.asarray(action, dtype=float), -1.0, 1.0)
    vel = cfg.damping * state.vel + cfg.action_scale * a
    speed = float(np.hypot(vel[0], vel[1]))
    if speed > cfg.speed_cap:
        vel = vel * (cfg.speed_cap / speed)
    pos = state.pos + cfg.dt * vel
    hit = bool(np.any(np.abs(pos) >= cfg.half_width))
    if hit:
        pos = np.clip(pos, -cfg.half_width, cfg.half_width)
    return ZonesState(pos, vel, state.t + 1), hit


def zones_observe(state: ZonesState, zones: Sequence[Zone], cfg: ZonesConfig, features: np.ndarray) -> np.ndarray:
    hw = cfg.half_width
    diag = 2.0 * math.sqrt(2.0) * hw
    out = [state.pos / hw, state.vel / cfg.speed_cap]
    block = np.zeros((len(zones), 3))
    for i, z in enumerate(zones):
        dx, dy = z.x - state.pos[0], z.y - state.pos[1]
        dist = math.hypot(dx, dy)
        if dist > 0:
            block[i] = (dx / dist, dy / dist, min(dist / diag, 1.0))
    out.append(block.ravel())
    out.append(features)
    return np.concatenate(out)


def stage_targets(A) -> List[Tuple[str, ...]]:
    """Per monitor state, the atoms whose singleton letter completes a stage."""
    progress = (MonitorEvent.SUBTASK_COMPLETE, MonitorEvent.SATISFIED)
    out = []
    for q in range(A.n_states):
        out.append(tuple(p for p in A.atoms if A.events[q, A.mask({p})] in progress))
    return out


class ZonesEnv:
    """Single Zones instance with spec monitors attached (single owner)."""

    action_dim = 2
    discrete = False

    def __init__(self, cfg: ZonesConfig, specs: Sequence[Spec], seed: Optional[int] = None):
        self.cfg = cfg
        self.specs = list(specs)
        alphabet = cfg.alphabet
        for s in self.specs:
            unknown = s.formula.atoms() - set(alphabet)
            if unknown:
                raise ValueError(f"spec {s.id} uses propositions {sorted(unknown)} not in the arena")
        self.monitors = MonitorSet(self.specs)
        self.task = None
        self._targets: List[Tuple[str, ...]] = []
        if cfg.task:
            self.task = MonitorSet([Spec("task", parse(cfg.task, alphabet))])
            self._targets = stage_targets(self.task.automata[0])
        self._phi = 0.0
        self.rng = np.random.default_rng(cfg.seed if seed is None else seed)
        self.state = ZonesState(np.zeros(2), np.zeros(2))
        self.layout: List[Zone] = list(cfg.zones) if cfg.zones is not None else []
        self.ordered: List[Zone] = list(self.layout)
        self.ep_reward = 0.0
        self.ep_cost = np.zeros(len(self.specs))

    @property
    def n_costs(self) -> int:
        return len(self.specs)

    @property
    def spec_ids(self) -> List[str]:
        return [s.id for s in self.specs]

    @property
    def obs_size(self) -> int:
        n = self.monitors.feature_size + (self.task.feature_size if self.task else 0)
        return 4 + 3 * self.cfg.n_zones + n

    def features(self) -> np.ndarray:
        f = self.monitors.feature()
        if self.task is not None:
            f = np.concatenate([f, self.task.feature()])
        return f

    def _order(self):
        if not self.cfg.sort_by_distance:
            self.ordered = list(self.layout)
            return
        p = self.state.pos
        order = []
        for color in self.cfg.alphabet:
            group = [z for z in self.layout if z.color == color]
            group.sort(key=lambda z: (z.x - p[0]) ** 2 + (z.y - p[1]) ** 2)
            order.extend(group)
        self.ordered = order

    def observe(self) -> np.ndarray:
        self._order()
        return zones_observe(self.state, self.ordered, self.cfg, self.features())

    def reset(self) -> np.ndarray:
        if self.cfg.zones is None:
            self.layout = sample_layout(self.cfg, self.rng)
        self.state = ZonesState(np.zeros(2), np.zeros(2))
        self.monitors.reset()
        if self.task is not None:
            self.task.reset()
        self.ep_reward = 0.0
        self.ep_cost = np.zeros(len(self.specs))
        self._phi = self.potential()
        return self.observe()

    def potential(self) -> float:
        """Minus the distance to the nearest zone that advances the task monitor."""
        if self.task is None or not self.cfg.shaping:
            return 0.0
        colors = self._targets[self.task.cursors[0]]
        p = self.state.pos
        d = [math.hypot(z.x - p[0], z.y - p[1]) for z in self.layout if z.color in colors]
        return -self.cfg.shaping * min(d) if d else 0.0

    def label(self) -> frozenset:
        return zones_label(self.state, self.layout)

    def step(self, action) -> StepResult:
        cfg = self.cfg
        self.state, hit = integrate(self.state, action, cfg)
        letter = self.label()
        cv = self.monitors.observe(letter)
        reward = cfg.step_penalty
        progress = (MonitorEvent.SUBTASK_COMPLETE, MonitorEvent.SATISFIED)
        if self.task is not None:
            tv = self.task.observe(letter)
            reward += cfg.reach_reward * sum(ev in progress for ev in tv.events)
            A = self.task.automata[0]
            success = self.task.cursors[0] == A.final and not A.has_safety
        else:
            reward += cfg.reach_reward * sum(ev in progress for ev in cv.events)
            success = len(self.specs) > 0 and all(
                q == A.final for A, q in zip(self.monitors.automata, self.monitors.cursors)
            )
        violation = any(ev == MonitorEvent.VIOLATION for ev in cv.events)
        if hit:
            reward += cfg.wall_penalty
        terminated = hit or success or (violation and cfg.terminate_on_violation)
        truncated = not terminated and self.state.t >= cfg.max_steps
        self.ep_reward += reward
        task_reward = reward
        if cfg.shaping and self.task is not None:
            phi = 0.0 if terminated else self.potential()
            reward += phi - self._phi
            self._phi = phi
        self.ep_cost += cv.weighted
        info = {
            "hit_wall": hit,
            "violation": violation,
            "success": success,
            "truncated": truncated,
            "letter": letter,
            "task_reward": task_reward,
            "events": {s.id: cv.events[k].name for k, s in enumerate(self.specs)},
            "violations": np.array([ev == MonitorEvent.VIOLATION for ev in cv.events], dtype=bool),
            "monitor": {s.id: cv.states[k] for k, s in enumerate(self.specs)},
        }
        obs = self.observe()
        return StepResult(obs, reward, cv.weighted.copy(), terminated or truncated, info, cv)
