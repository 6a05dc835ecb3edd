"""Graph matching through a concave-linear relaxation of the quadratic
assignment objective: PSD-shifted edge structure, entropic Sinkhorn solving,
reference baselines, and a synthetic keypoint benchmark."""

from .baselines import ObjectiveKind, PgdParams, brute_force, evaluate, pgd_solve
from .clap_solver import (
    MatchProblem,
    MatchResult,
    SoftAssignment,
    SolverParams,
    build_problem,
    hungarian,
    objective_value,
    score_matrix,
    sign_matrix,
    sinkhorn_log,
    solve,
    with_attributes,
)
from .errors import (
    DegenerateGeometryError,
    EnumerationSizeError,
    InvalidInputError,
    MatchingError,
    NotPsdError,
)
from .graph_model import (
    EdgeAttributeMatrix,
    GraphSide,
    HardAssignment,
    NodeSimilarityMatrix,
    accuracy,
    build_adjacency_attributes,
    build_inner_product_attributes,
    build_length_attributes,
    node_similarity,
    pair_from_dict,
    pair_to_dict,
)
from .psd_transform import (
    FactoredStructure,
    factorize,
    prepare_structure,
    psd_shift,
    row_absolute_radius,
)
from .synthetic_bench import (
    BenchRecord,
    BenchReport,
    SynthConfig,
    emit_report,
    gen_pair,
    run_benchmark,
)

__version__ = "0.1.0"
