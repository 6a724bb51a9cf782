"""SINDy as a causal-discovery method, benchmarked against classical baselines."""

from .causal import CausalGraph, graph_restrict, graph_to_constraint_mask, hamming_loss
from .dynamics import (
    SYSTEMS,
    SystemSpec,
    Trajectory,
    augment_with_noise,
    finite_difference_derivs,
    get_system,
    ground_truth_graph,
    rhs_eval,
    rk4_step,
    simulate,
)
from .sindy import (
    CandidateLibrary,
    CoefficientMatrix,
    ConstraintMask,
    FeatureSpec,
    coefficients_to_graph,
    default_library,
    evaluate_library,
    fit,
    fit_constrained,
    stls,
)

__version__ = "0.1.0"
