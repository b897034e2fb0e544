"""Truncated spectral regularization of ill-posed final value problems
``u' + Au = f, u(tau) = phi_tau`` for diagonalized positive self-adjoint
operators ``A``, with Lavrentiev regularization for comparison."""

from .errors import (
    BoundViolation,
    DomainViolation,
    NoBracket,
    ParameterOverflow,
    QuadratureTolerance,
    RegLabError,
)
from .evolution import (
    FinalValueProblem,
    ModeFunction,
    SourceTerm,
    TimeGrid,
    accumulate_psi,
    bochner_quadrature,
    classical_solution_check,
    fvp_mild_solution,
    ivp_mild_solution,
    manufacture_problem,
)
from .experiments import (
    NoiseSpec,
    RateReport,
    compare_methods,
    estimate_rate,
    l1_time_norm,
    make_smooth_problem,
    perturb_data,
    run_convergence_study,
)
from .regularization import (
    RegChoice,
    SourceCondition,
    beta_alpha_correspondence,
    choose_alpha_lavrentiev,
    choose_beta_exponential,
    choose_beta_general,
    choose_beta_power_of_delta,
    lavrentiev_solution,
    source_condition_norm,
    stability_bound,
    tail_rho,
    total_bound,
    truncated_solution,
    truncation_error_bound,
)
from .spectral import (
    EigenSystem,
    ScalarSymbol,
    SpectralVector,
    apply_calculus,
    domain_check,
    make_dirichlet_laplacian,
    norm,
    semigroup_apply,
)

__version__ = "0.1.0"
