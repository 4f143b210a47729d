"""Large-system ergodic rate and statistical-CSI design for double-RIS MIMO links."""

from .channel import (ChannelDraw, CorrelationParams, CorrelationProfile, Link, NodeGeometry, PhaseConfig,
                      SystemDims, build_profile, effective_channel, integral_correlation, path_loss_linear,
                      sample_channel, sinc_correlation)
from .errors import (ConfigError, ConvergenceError, DegenerateError, DivergenceError, DoubleRisError,
                     MatrixError, NumericalError)
from .fixed_point import (AuxiliaryState, SolverSettings, apply_transforms, asymptotic_rate, evaluate,
                          residuals, solve_auxiliary)
from .montecarlo import McEstimate, ergodic_rate_mc, instantaneous_rate
from .optimize import (AoTrace, PsoSettings, TransmitCovariance, alternating_optimize, optimize_q,
                       pso_phases, water_filling)
from .scenario import (Scenario, SweepSpec, echo, parse_scenario, run_benchmarks, run_sweep,
                       run_validate, scenario_hash)
