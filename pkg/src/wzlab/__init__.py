"""Numerical laboratory for window-averaged approximations of jump-driven
equations, random time changes, and Skorokhod M1/J1 distances."""

from .cadlag import (
    LINEAR,
    STEP,
    CadlagPath,
    ConfigError,
    JumpRecord,
    QuadraticVariationSplit,
    quadratic_variation_split,
    read_csv,
    write_csv,
)
from .drivers import DriverSpec, JumpLaw, RandomSeed, appendix_pair, simulate
from .harness import (
    ExperimentConfig,
    ks_band95,
    ks_distance,
    realization_hash,
    run_convergence,
    run_passage,
    run_special_case,
    selfcheck,
)
from .skorokhod import (
    MetricResult,
    completed_graph,
    d_j1,
    d_m1,
    m1_convergence_diagnostic,
    w_prime,
)
from .smoothing import SmoothedPath, clock_path, gamma_eps, smooth, smoothed_derivative, v_eps
from .solvers import (
    CoefficientFamily,
    CoefficientSet,
    SolverConfig,
    SolverDivergenceError,
    coefficient_family,
    marcus_flow,
    solve_marcus,
    solve_random_ode,
    y_eps_and_residual,
)
from .timechange import (
    PlateauRecord,
    TimeChangeSystem,
    build,
    gamma_grid,
    sandwich_margin,
    step1_gap,
    u_eps,
    z_eps,
    z_limit,
)

__version__ = "0.1.0"
