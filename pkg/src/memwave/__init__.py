"""Modal simulation and decay-rate verification for wave equations with fading memory."""

from .bounds import (
    ComparisonOdeReport,
    DecayBound,
    FitDomainError,
    FitReport,
    ImprovedBoundUnavailableError,
    PriorRates,
    UndefinedBoundError,
    case1_bound_basic,
    case1_bound_improved,
    case1_integrability,
    case2_bound,
    case2_integrability,
    comparison_envelope,
    fit_envelope,
    prior_polynomial_rates,
    verify_comparison_ode,
)
from .config import ExperimentConfig, ConfigError, from_ini, load_config, preset, save_config, to_ini
from .energy import (
    EnergyTrace,
    coercivity_floor,
    compute_energy_trace,
    energy,
    energy2,
    energy_rate_identity,
    lyapunov_functionals,
    write_energy_csv,
)
from .history import (
    HistoryData,
    bump_history,
    constant_history,
    exponential_history,
    history_tail_integral,
    sup_ab_norm,
    sup_b_norm,
    tail_moment_arrays,
)
from .kernels import (
    AdmissibilityError,
    HypothesisReport,
    ParameterDomainError,
    TailUndefinedError,
    XiWeight,
    admissible_xi_p,
    check_hypotheses,
    constant_xi,
    default_check_grid,
    load_kernel_table,
    make_exponential_kernel,
    make_polynomial_kernel,
    make_tabulated_kernel,
    tabulated_xi,
    tail_weight,
    weighted_kernel_integral,
)
from .operators import (
    CaseConstants,
    ModalOperatorPair,
    case_constants,
    coercivity_constants,
    laplacian_1d,
    modal_pair,
)
from .simulator import (
    InstabilityError,
    ModalTrajectory,
    SimConfig,
    exponential_oracle,
    memory_convolution,
    simulate,
    step,
    write_trajectory_csv,
)

__version__ = "0.1.0"
