"""Full-model Monte Carlo laboratory for checking the first-order approximation."""

from .engine import McEstimate, TerminalSample, mc_future_price, simulate_paths
from .model import ModelSpec, load_config, parse_config
from .nested import Budget, mc_option_price
from .quadrature import implied_group_params
from .sweep import SweepResult, SweepRow, accuracy_sweep

__all__ = [
    "Budget", "McEstimate", "ModelSpec", "SweepResult", "SweepRow", "TerminalSample", "accuracy_sweep",
    "implied_group_params", "load_config", "mc_future_price", "mc_option_price", "parse_config",
    "simulate_paths",
]
