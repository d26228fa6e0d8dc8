"""RIS-aided multi-user downlink simulator.

Fractional-programming joint transmit-beamforming and reflection design
with closed-form block updates, LS cascaded channel estimation, baseline
schemes, and a seeded Monte-Carlo experiment harness.
"""

__version__ = "0.1.0"

from .channel import ChannelSet, SystemConfig, draw_channels, pathloss_db, ula_response
from .estimation import (
    EstimationResult,
    PilotPlan,
    dft_pilot_matrix,
    dft_pilot_plan,
    estimate_cascaded,
    expected_ls_error,
    ls_estimate,
    simulate_uplink_pilots,
)
from .experiments import ResultTable, ScenarioSpec, effective_sum_rate, run_scenario
from .optimizer import (
    ConvergenceTrace,
    OptimizerState,
    RealizedPerformance,
    run_algorithm1,
    run_algorithm2,
)

__all__ = [
    "__version__",
    "SystemConfig",
    "ChannelSet",
    "draw_channels",
    "ula_response",
    "pathloss_db",
    "OptimizerState",
    "ConvergenceTrace",
    "RealizedPerformance",
    "run_algorithm1",
    "run_algorithm2",
    "PilotPlan",
    "EstimationResult",
    "dft_pilot_matrix",
    "dft_pilot_plan",
    "simulate_uplink_pilots",
    "ls_estimate",
    "expected_ls_error",
    "estimate_cascaded",
    "ScenarioSpec",
    "ResultTable",
    "run_scenario",
    "effective_sum_rate",
]
