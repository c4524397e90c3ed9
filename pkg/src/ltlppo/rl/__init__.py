from .core import (
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
from .policies import GaussianPolicy, MLPCritic, SoftmaxTablePolicy, TableCritic
from .trainer import Trainer, build_problem, evaluate, train, write_csv
