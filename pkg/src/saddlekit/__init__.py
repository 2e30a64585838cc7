"""Primal-dual saddle-point solvers with Lyapunov diagnostics.

Problems have the form ``min_x max_y f(x) + <F x, y> - g*(y)``. The package
provides proximal Arrow-Hurwicz and PDHG iterations, continuous-time models
of both, and checks of the standard convergence bounds on recorded traces.
"""

from .diagnostics import (
    Anchor,
    BoundCheck,
    DiagnosticsReport,
    build_report,
    continuous_checks,
    lyapunov,
    monotonicity_verdict,
    numerical_error,
    rate_fit,
    theorem_bound_check,
    vi_gap,
)
from .functions import (
    ConvexFunction,
    IndicatorAffine,
    IndicatorLinfBall,
    Linear,
    Quadratic,
    ScaledL1,
    Zero,
    conjugate,
    evaluate,
    prox,
)
from .linalg import cholesky, solve_spd, spectral_norm
from .ode import (
    ContinuousState,
    general_high_res,
    hamiltonian,
    high_res,
    implicit_euler_step,
    low_res,
    rk4_trajectory,
    symplectic_euler_step,
)
from .problems import (
    SaddleCertificate,
    SaddleProblem,
    make_basis_pursuit,
    make_counterexample,
    make_generalized_lasso,
    make_problem,
    make_quadratic_pair,
    random_lasso,
    saddle_oracle,
)
from .solvers import (
    StepSchedule,
    Trace,
    arrow_hurwicz_step,
    general_pdhg_step,
    orbit_invariant,
    pdhg_step,
    run,
)

__version__ = "0.1.0"
