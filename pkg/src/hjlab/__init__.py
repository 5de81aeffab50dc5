"""Numerical laboratory for boundary gradient blow-up in the superquadratic
diffusive Hamilton-Jacobi equation u_t = Laplace(u) + |grad u|^p, p > 2."""

from .geometry import Grid, Interval, Projection, RadialDisk, Rectangle
from .profiles import Constants, SingularityError, constants, ode_profile, \
    ode_residual, profile, profile_slope, spacetime_bounds
from .solver import (EllipticResult, Field, RunRecord, SolverConfig,
                     gradient, gradient_magnitude, run, solve_elliptic, step,
                     truncated_power, truncated_run)
from .analysis import (MonitorReport, ProfileFit, RescaleResult,
                       bernstein_monitor, directional_derivatives, fit_profile,
                       gbu_rate_fit, normal_lowerbound, normal_profile_samples,
                       ode_dominance, rescale_compare, tangential_anisotropy,
                       tangential_monitor, ut_monitor)
from .continuation import (Classification, ExtendedRun, ThresholdResult,
                           UndecidedProbeError, boundary_loss, classify,
                           order_check, threshold_bisect, viscosity_extend)
from .barriers import (BarrierParams, barrier_residual_sweep, barrier_wall_flux,
                       cutoff, find_feasible_barrier, gradient_bound_bracket,
                       ode_comparison_margin, parabolic_barrier_residual)
from .config import ConfigError, ParsedConfig, parse_config
from .experiments import run_experiment
from .plots import emit_plot

__version__ = "0.1.0"
