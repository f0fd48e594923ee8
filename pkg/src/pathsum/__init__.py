"""pathsum: a laboratory for Riemann-sum approximation of integral functionals
of Levy-driven Markov processes.

The package measures strong and weak convergence rates of the left-endpoint
Riemann sum of time integrals of bounded functions along simulated paths,
verifies a time-derivative bound on transition densities (numerically and
through a desk-scale parametrix construction), and prices discretely monitored
occupation-time options with explicit error budgets.
"""

__version__ = "0.1.0"

from .stable import (StableParams, char_exponent, sample_stable,
                     stable_density, tail_constant, fit_power_tail,
                     power_tail_integral, integrate_with_tails,
                     normalization_integral, density_table, DensityTable,
                     DominationReport, check_density_domination)
from .models import (TAIL_PURE, TAIL_TEMPERED, TAIL_TRUNCATED, DriftSpec,
                     TailSpec, BrownianMotion, StableProcess,
                     StableWithDrift, LocallyStableSDE, PathGrid,
                     simulate_grid, integrate_flow, flow_chi, flow_theta)
from .functionals import (FunctionalSpec, riemann_functional,
                          reference_functional, subsample, path_error)
from .mc import SweepResult, sweep_functionals
from .ratelab import (Z95, rate_D, const_C, const_weak, model_beta,
                      fit_rate, RateConfig, RateReport, strong_error,
                      weak_error, AnalyticPhi, analytic_weak_bound,
                      analytic_weak_error)
from .conditionx import (DensityField, BetaReport, dt_density,
                         fd_vs_analytic_gap, estimate_beta)
from .parametrix import (ParametrixConfig, ParametrixState, DtBoundReport,
                         SeriesTruncationError, build_parametrix_density,
                         density_slice, default_slice_grid, kernel_mass,
                         check_dt_bound, density_ratio_bound,
                         check_q_normalization, chapman_kolmogorov_gap)
from .option import (OptionSpec, OptionRow, GEstimate, check_moment_model,
                     price_discrete, price_reference, estimate_g_lambda,
                     bound_prop41, bound_prop42, rate_D_tilde,
                     truncation_level, price_table)

__all__ = [
    "__version__",
    # stable driver
    "StableParams", "char_exponent", "sample_stable", "stable_density",
    "tail_constant", "fit_power_tail", "power_tail_integral",
    "integrate_with_tails", "normalization_integral", "density_table",
    "DensityTable", "DominationReport", "check_density_domination",
    # models
    "TAIL_PURE", "TAIL_TEMPERED", "TAIL_TRUNCATED", "DriftSpec", "TailSpec",
    "BrownianMotion", "StableProcess", "StableWithDrift", "LocallyStableSDE",
    "PathGrid", "simulate_grid", "integrate_flow", "flow_chi", "flow_theta",
    # functionals and Monte Carlo sweeps
    "FunctionalSpec", "riemann_functional", "reference_functional",
    "subsample", "path_error", "SweepResult", "sweep_functionals",
    # convergence-rate laboratory
    "Z95", "rate_D", "const_C", "const_weak", "model_beta", "fit_rate",
    "RateConfig", "RateReport", "strong_error", "weak_error", "AnalyticPhi",
    "analytic_weak_bound", "analytic_weak_error",
    # density time-derivative verification
    "DensityField", "BetaReport", "dt_density", "fd_vs_analytic_gap",
    "estimate_beta",
    # parametrix construction
    "ParametrixConfig", "ParametrixState", "DtBoundReport",
    "SeriesTruncationError", "build_parametrix_density", "density_slice",
    "default_slice_grid", "kernel_mass", "check_dt_bound",
    "density_ratio_bound", "check_q_normalization", "chapman_kolmogorov_gap",
    # occupation-time option pricing
    "OptionSpec", "OptionRow", "GEstimate", "check_moment_model",
    "price_discrete", "price_reference", "estimate_g_lambda",
    "bound_prop41", "bound_prop42", "rate_D_tilde", "truncation_level",
    "price_table",
]
