from .base import StepResult, VecEnv
from .tabular import RIGHT, STAY, TabularCMDP, TabularEnv, chain_cmdp, random_cmdp
from .zones import (
    Zone,
    ZonesConfig,
    ZonesEnv,
    ZonesState,
    integrate,
    sample_layout,
    zones_label,
    zones_observe,
)
