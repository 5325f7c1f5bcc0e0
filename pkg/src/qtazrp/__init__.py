"""Exact finite-N probabilities of the q-deformed totally asymmetric zero
range process, with independent oracles to check them against."""
from .bethe import BetheContext, amplitude, bethe_integrand, energy, iter_amplitudes, s_matrix
from .contour import (
    ContourSpec,
    QuadratureGrid,
    adaptive_node_count,
    default_radius,
    integrate_1d,
    integrate_nd,
)
from .errors import (
    ContourPlacementError,
    ConvergenceError,
    CostBudgetError,
    NumericalQualityError,
    OverflowGuardError,
    QtazrpError,
    StateError,
)
from .identities import IdentityReport, run_battery
from .leftmost import (
    LeftmostQuery,
    cauchy_kernel_det_check,
    f_sigma,
    leftmost_cdf_distribution,
    leftmost_cdf_step,
    leftmost_distribution,
    leftmost_pmf,
)
from .oracle import (
    ExclusionState,
    GeneratorMatrix,
    build_generator,
    gillespie_ensemble,
    gillespie_sample,
    map_from_exclusion,
    map_to_exclusion,
    master_solve,
    simulate_variant,
    variant_ensemble,
)
from .qcalc import (
    Composition,
    Permutation,
    QParameter,
    enumerate_compositions,
    enumerate_permutations,
    q_bracket,
    q_factorial,
    state_weight,
)
from .states import ZrpState, reachable_states
from .transition import (
    Distribution,
    TransitionQuery,
    distribution_at_time,
    evaluate_transition,
    transition_probability,
)

__version__ = "0.1.0"
