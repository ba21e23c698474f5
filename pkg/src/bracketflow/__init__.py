"""Homogeneous geometric flows, bracket flows and semi-algebraic solitons.

Structure constants of a Lie bracket on g = k + p, invariant tensors on p, a
pluggable preferred direction (Ricci ships), adaptive integration of the flow
on tensors and of the bracket flow, and soliton certificates.
"""

from .curvature import CurvatureReport, PreferredDirection, koszul_oracle, ricci_flow_direction, ricci_leftinvariant
from .flows import (
    FlowError,
    FlowTrajectory,
    integrate_bracket_flow,
    integrate_coupling,
    integrate_geometric_flow,
    normalized_bracket_flow,
    verify_equivalence,
)
from .integrate import IntegrationError, IntegratorConfig
from .lie import (
    AdmissibilityReport,
    BracketTensor,
    DerivationBasis,
    DimensionError,
    ReductiveSplit,
    act_basis_change,
    check_admissibility,
    derivation_algebra,
    jacobi_residual,
    killing_form,
    scale_bracket,
    theta_bracket,
)
from .problems import PRESETS, Problem, ProblemParseError, dump_problem, load_problem, parse_problem, preset
from .solitons import (
    FlowDiagonalResult,
    ScalingPair,
    SolitonCertificate,
    check_algebraic,
    classify_A_dynamics,
    closed_form_bracket_evolution,
    closed_form_coupling,
    detect_fixed_point_up_to_scaling,
    flow_diagonal_test,
    scaling_pair,
    self_similar_solution,
    solve_semi_algebraic,
)
from .tensors import (
    DegenerateTensorError,
    IncompatibleDirectionError,
    InvariantTensor,
    StabilizerDecomposition,
    adk_invariance_residual,
    euclidean,
    exterior_differential,
    group_action,
    hermitian_triple,
    is_in_normalizer,
    metric,
    pseudo_metric,
    pullback,
    solve_operator_from_tensor,
    stabilizer_algebra,
    standard_g2,
    standard_hermitian,
    standard_symplectic,
    symplectic,
    theta_action,
    three_form,
)

__version__ = "0.1.0"
