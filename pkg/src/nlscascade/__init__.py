"""Resonant energy-cascade laboratory for the cubic equation on
irrational rectangular tori: exact continued-fraction arithmetic,
resonant-quartet combinatorics, placed mode sets, a quartic normal-form
map, the finite chain/spouse reductions and Galerkin truncations of the
gauged flow, plus the shadowing and norm-growth experiments tying them
together."""

from .diophantine import (
    CFExpansion,
    Convergent,
    GuardReport,
    LogProfile,
    OmegaSpec,
    PowerProfile,
    convergent_bracket,
    convergents,
    expand_continued_fraction,
    is_psi_convergent,
    liouville_guard,
    parse_omega,
    psi_value,
    select_convergent,
)
from .errors import (
    BallEscapeError,
    ConfigError,
    NlsCascadeError,
    NumericError,
    PrecisionExhaustedError,
    ResonantQuartetError,
    SearchError,
    SupportEscapeError,
    ToleranceUnmetError,
)
from .exactnum import QuadExact, RationalInterval, exact_sign, sqrt_bracket
from .lambda_set import (
    BaseSet,
    Family,
    LambdaSet,
    build_base_set,
    generation_weights,
    radius_bracket,
    scale_set,
    unit_square_base,
    verify_properties,
)
from .normal_form import (
    BirkhoffMap,
    FTerm,
    GeneratingFunction,
    build_F,
    default_eta,
    f_is_real,
    flow_amplitudes,
    gamma_apply,
    homological_residual,
    make_birkhoff,
    wbnf_smallness,
)
from .nls_sim import (
    BoxRegion,
    GrowthReport,
    LadderEntry,
    NLSTrajectory,
    ShadowReport,
    ShellRegion,
    SparseFourierState,
    box_region,
    eigenvalue,
    ell1_norm,
    gauge_transform,
    growth_diagnostic,
    integrate_nls,
    lift_chain,
    nls_truncated_field,
    rotate_frame,
    shadowing_experiment,
    shell_region,
    sobolev_norm,
)
from .resonance import (
    Mode,
    Quartet,
    as_mode,
    as_quartet,
    canonical_quartet,
    classify_quartet,
    compute_L1,
    compute_U0,
    enumerate_A0,
    enumerate_A1,
    omega_pq,
    omega_r,
)
from .toy_model import (
    IntegratorConfig,
    SpouseState,
    SpouseTrajectory,
    ToyState,
    ToyTrajectory,
    find_transfer_orbit,
    integrate_spouse,
    integrate_toy,
    intragenerational_state,
    scale_solution,
    spouse_invariants,
    spouse_vector_field,
    toy_invariants,
    toy_vector_field,
    transfer_time_fit,
)

__version__ = "0.1.0"
