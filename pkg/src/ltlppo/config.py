"""Run configuration (JSON). Unknown keys are rejected everywhere."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ZoneSpec(_Strict):
    color: str
    x: float
    y: float
    radius: float = Field(gt=0)


class ZonesEnvConfig(_Strict):
    kind: Literal["zones"] = "zones"
    half_width: float = Field(4.0, gt=0)
    colors: List[str] = ["blue", "green", "yellow", "magenta"]
    per_color: int = Field(2, ge=1)
    radius: float = Field(0.6, gt=0)
    zones: Optional[List[ZoneSpec]] = None
    max_steps: int = Field(300, ge=1)
    dt: float = Field(0.1, gt=0)
    speed_cap: float = Field(1.0, gt=0)
    damping: float = Field(0.9, ge=0, le=1)
    action_scale: float = Field(0.5, gt=0)
    step_penalty: float = -0.01
    reach_reward: float = 10.0
    wall_penalty: float = -10.0
    terminate_on_violation: bool = True
    task: Optional[str] = None
    sort_by_distance: bool = True
    shaping: float = Field(0.0, ge=0)


class ChainEnvConfig(_Strict):
    kind: Literal["chain"] = "chain"
    n: int = Field(5, ge=3)
    p_slip: float = Field(0.0, ge=0, lt=0.5)
    max_steps: int = Field(50, ge=1)


EnvConfig = Annotated[Union[ZonesEnvConfig, ChainEnvConfig], Field(discriminator="kind")]


class SpecConfig(_Strict):
    id: str
    formula: str
    weight: float = Field(1.0, ge=0)
    budget: float = Field(0.0, ge=0)
    cost_mode: Literal["pulse", "sustained"] = "pulse"


class PPOConfig(_Strict):
    lr: float = Field(3e-4, gt=0)
    lr_final: Optional[float] = Field(None, gt=0)
    gamma: float = Field(0.99, gt=0, lt=1)
    gae_lambda: float = Field(0.95, ge=0, le=1)
    clip: float = Field(0.2, gt=0, lt=1)
    epochs: int = Field(4, ge=1)
    minibatch: int = Field(64, ge=1)
    horizon: int = Field(1024, ge=1)
    n_envs: int = Field(8, ge=1)
    ent_coef: float = Field(0.001, ge=0)
    vf_coef: float = Field(0.5, ge=0)
    max_grad_norm: float = Field(0.5, gt=0)
    hidden: Tuple[int, int] = (64, 64)
    init_log_std: float = Field(-0.5, ge=-5, le=2)
    param_radius: float = Field(1e3, gt=0)
    project: bool = True
    normalize_advantages: bool = True


class DualConfig(_Strict):
    lr: float = Field(0.01, ge=0)
    cap: float = Field(100.0, gt=0)
    init: float = Field(0.0, ge=0)
    cost_limit: Optional[float] = Field(None, ge=0)  # overrides every spec budget when set
    cost_estimate: Literal["discounted", "normalized", "mean", "episodic"] = "discounted"

    @model_validator(mode="after")
    def _init_in_range(self):
        if self.init > self.cap:
            raise ValueError("dual.init must not exceed dual.cap")
        return self


class RunConfig(_Strict):
    name: str = "run"
    method: Literal["ppo_ltl", "ppo"] = "ppo_ltl"
    env: EnvConfig = Field(default_factory=ZonesEnvConfig)
    specs: List[SpecConfig] = []
    spec_file: Optional[str] = None
    ppo: PPOConfig = Field(default_factory=PPOConfig)
    dual: DualConfig = Field(default_factory=DualConfig)
    seeds: List[int] = [0]
    total_steps: int = Field(200_000, ge=1)
    eval_episodes: int = Field(20, ge=1)
    checkpoint_every: int = Field(0, ge=0)
    diagnostics: bool = False
    out: str = "runs"

    @field_validator("seeds")
    @classmethod
    def _seeds(cls, v):
        if not v:
            raise ValueError("at least one seed is required")
        return v

    @model_validator(mode="after")
    def _specs(self):
        if self.specs and self.spec_file:
            raise ValueError("give either specs or spec_file, not both")
        ids = [s.id for s in self.specs]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate spec ids")
        if self.env.kind == "chain" and (self.specs or self.spec_file):
            raise ValueError("the chain env has a built-in cost channel; specs are not allowed")
        return self


class ConfigError(ValueError):
    pass


def load_config(path, overrides: Optional[Dict[str, object]] = None) -> RunConfig:
    """Load and validate a JSON run config; ``spec_file`` is resolved relative to it."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path}: no such file")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from e
    for key, value in (overrides or {}).items():
        set_path(data, key, value)
    cfg = validate_config(data, str(path))
    if cfg.spec_file:
        spec_path = Path(cfg.spec_file)
        if not spec_path.is_absolute():
            spec_path = path.parent / spec_path
        if not spec_path.exists():
            raise ConfigError(f"spec_file: {spec_path} does not exist")
        cfg = cfg.model_copy(update={"spec_file": str(spec_path)})
    return cfg


def validate_config(data, source: str = "<config>") -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        lines = []
        for err in e.errors():
            loc = ".".join(str(p) for p in err["loc"])
            lines.append(f"{source}: {loc}: {err['msg']}")
        raise ConfigError("\n".join(lines)) from None


ALIASES = {"cost_limit": "dual.cost_limit", "dual_lr": "dual.lr"}


def set_path(data: dict, key: str, value) -> None:
    key = ALIASES.get(key, key)
    parts = key.split(".")
    node = data
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set {key}: {p} is not a block")
    node[parts[-1]] = value


def dump_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"
