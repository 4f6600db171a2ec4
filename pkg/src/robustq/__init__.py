"""robustq: robustness-of-inference numerics for reproducible experiments.

Discrete evidence and Fisher-information machinery for finite outcome
tables, the constant-Fisher correlation families of two-router pair and
single-magnet deflection experiments with seeded event simulators, and
grid solvers verifying that minimising the robustness functional
reproduces the stationary and time-dependent wave-equation solutions.
"""

__version__ = "0.1.0"

from .errors import (BranchError, ConfigError, ConvergenceError, DomainError,
                     EmptyDataError, InvalidModelError, LinearSolveError,
                     PhaseUndefinedError, ResourceError, RobustqError,
                     StabilityError)
from .grid import Grid1D, ScalarField, WaveField, normalized_wave
from .inference import (BoundCheck, CountRecord, EvidenceReport,
                        FisherReport, FrequencyAssignment, MaximizerReport,
                        OutcomeTable, evidence_bound_check,
                        evidence_quadratic, fisher_discrete,
                        frequency_maximizer_suite, log_evidence,
                        log_multinomial_iprob, multinomial_iprob,
                        validate_table)
from .eprb import (CorrelationModel, Decomposition, EventStatistics,
                   PairCounts, RouterSetting, accumulate_statistics,
                   decompose, model_correlation, pair_table,
                   pair_table_from_correlation, recompose, simulate_pairs,
                   simulate_pairs_from_table, solve_robust_ode)
from .sterngerlach import MagnetSetting, sg_table, sg_table_from_angle, simulate_sg
from .stationary import (MinimizeResult, ShiftVerdict, StationaryProblem,
                         continuum_fisher, density_functional,
                         functional_gradient, hje_residual, madelung_join,
                         madelung_split, minimize_functional,
                         shift_covariance_check, solve_eigen, wave_functional)
from .dynamic import (DynamicFormBreakdown, GaugeField, Observables,
                      ObservableTrace, PropagatorConfig, avg_hje_residual,
                      dynamic_wave_functional, gauge_transform, observables,
                      propagate)

__all__ = [name for name in dir() if not name.startswith("_")]
