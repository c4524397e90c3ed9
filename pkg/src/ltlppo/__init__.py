"""LTL safety specifications compiled to runtime monitors, with PPO-Lagrangian training."""

__version__ = "0.1.0"
