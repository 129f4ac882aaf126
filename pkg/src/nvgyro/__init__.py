"""Simulator for a cavity-coupled NV nuclear-spin gyroscope.

Mean-field cavity QED of a driven lambda ensemble, multi-subensemble
comagnetometry and vector operation, sensitivity figures of merit, and an
exact small-system Lindblad oracle.
"""

from .lambda_dynamics import (
    LambdaParams,
    Regime,
    SteadyStateSolution,
    default_params,
    integrate,
    perfect_eit_curve,
    solve_steady_state,
)
from .sensing import NoiseModel, SensitivityReport, sensitivity, signal_slope

__all__ = [
    "LambdaParams", "Regime", "SteadyStateSolution", "default_params",
    "integrate", "perfect_eit_curve", "solve_steady_state",
    "NoiseModel", "SensitivityReport", "sensitivity", "signal_slope",
]

__version__ = "0.1.0"
