"""Logic-to-cost: run one monitor per specification and emit weighted costs.

Raw per-spec costs are unit signals; weights are applied exactly once, when the
per-spec cost channel ``w_k * raw_k`` is formed. The aggregated cost is the sum
of the channels.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .automata import MonitorAutomaton, MonitorEvent, compile_monitor, reach_avoid_decompose
from .ltl import Formula, parse

COST_MODES = ("pulse", "sustained")


@dataclass(frozen=True)
class Spec:
    id: str
    formula: Formula
    weight: float = 1.0
    budget: float = 0.0
    cost_mode: str = "pulse"

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError(f"spec {self.id}: weight must be >= 0")
        if self.budget < 0:
            raise ValueError(f"spec {self.id}: budget must be >= 0")
        if self.cost_mode not in COST_MODES:
            raise ValueError(f"spec {self.id}: cost_mode must be one of {COST_MODES}")

    @classmethod
    def from_text(cls, id: str, text: str, alphabet: Optional[Sequence[str]] = None, **kw) -> "Spec":
        return cls(id=id, formula=parse(text, alphabet), **kw)


def load_specs(path, alphabet: Optional[Sequence[str]] = None) -> List[Spec]:
    """Read a spec file: a JSON list (or ``{"specs": [...]}``) of objects with
    ``id``, ``formula`` and optional ``weight``, ``budget``, ``cost_mode``."""
    data = json.loads(Path(path).read_text())
    return specs_from_data(data, alphabet)


def specs_from_data(data, alphabet: Optional[Sequence[str]] = None) -> List[Spec]:
    if isinstance(data, dict):
        data = data.get("specs", [])
    out = []
    allowed = {"id", "formula", "weight", "budget", "cost_mode"}
    for i, item in enumerate(data):
        extra = set(item) - allowed
        if extra:
            raise ValueError(f"specs[{i}]: unknown keys {sorted(extra)}")
        if "id" not in item or "formula" not in item:
            raise ValueError(f"specs[{i}]: 'id' and 'formula' are required")
        out.append(
            Spec(
                id=str(item["id"]),
                formula=parse(item["formula"], alphabet),
                weight=float(item.get("weight", 1.0)),
                budget=float(item.get("budget", 0.0)),
                cost_mode=item.get("cost_mode", "pulse"),
            )
        )
    ids = [s.id for s in out]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate spec ids")
    return out


@dataclass
class CostVector:
    raw: np.ndarray  # unweighted per-spec costs
    weighted: np.ndarray  # w_k * raw_k
    events: List[MonitorEvent]
    states: List[str]

    @property
    def total(self) -> float:
        return float(self.weighted.sum())

    def info(self, specs: Sequence[Spec]) -> Dict[str, dict]:
        return {
            s.id: {"event": self.events[k].name, "state": self.states[k], "cost": float(self.weighted[k])}
            for k, s in enumerate(specs)
        }


class MonitorSet:
    """One runtime monitor cursor per spec, advanced synchronously per step."""

    def __init__(self, specs: Sequence[Spec], automata: Optional[Sequence[MonitorAutomaton]] = None):
        self.specs = list(specs)
        if automata is None:
            automata = [compile_monitor(reach_avoid_decompose(s.formula)) for s in self.specs]
        self.automata = list(automata)
        self.weights = np.array([s.weight for s in self.specs], dtype=float)
        self._sustained = np.array([s.cost_mode == "sustained" for s in self.specs], dtype=bool)
        self.cursors = [A.initial for A in self.automata]
        self.t = 0

    def __len__(self) -> int:
        return len(self.specs)

    def copy(self) -> "MonitorSet":
        other = MonitorSet(self.specs, self.automata)
        other.cursors = list(self.cursors)
        other.t = self.t
        return other

    def reset(self) -> "MonitorSet":
        self.cursors = [A.initial for A in self.automata]
        self.t = 0
        return self

    def observe(self, letter: Iterable[str]) -> CostVector:
        letter = frozenset(letter)
        k = len(self.specs)
        raw = np.zeros(k)
        events = []
        for i, A in enumerate(self.automata):
            q, ev = A.step(self.cursors[i], letter)
            self.cursors[i] = q
            events.append(ev)
            if ev == MonitorEvent.VIOLATION:
                raw[i] = 1.0
            elif self._sustained[i] and q != A.final and q != A.reject:
                raw[i] = 1.0
        self.t += 1
        return CostVector(raw=raw, weighted=raw * self.weights, events=events, states=self.state_names())

    def state_names(self) -> List[str]:
        return [A.names[q] for A, q in zip(self.automata, self.cursors)]

    @property
    def feature_size(self) -> int:
        return sum(A.n_states for A in self.automata)

    def feature(self) -> np.ndarray:
        """Concatenated one-hot encoding of every cursor."""
        out = np.zeros(self.feature_size)
        offset = 0
        for A, q in zip(self.automata, self.cursors):
            out[offset + q] = 1.0
            offset += A.n_states
        return out


def episode_cost_summary(trace: Sequence[CostVector], gamma: float = 0.99, mode: str = "discounted"):
    """Per-spec and aggregate episode cost of a trace of CostVectors.

    ``mode="discounted"`` gives sum_t gamma^t c_t; ``mode="mean"`` the
    undiscounted per-step mean. Costs are the weighted channels.
    """
    if len(trace) == 0:
        raise ValueError("empty cost trace")
    costs = np.stack([cv.weighted for cv in trace])
    if mode == "discounted":
        disc = gamma ** np.arange(len(trace))
        per_spec = disc @ costs
    elif mode == "mean":
        per_spec = costs.mean(axis=0)
    else:
        raise ValueError(f"unknown summary mode {mode!r}")
    return per_spec, float(per_spec.sum())
