"""Exact combinatorics and metric-measure experiments on the doubled-center
triadic substitution complex."""

__version__ = "0.1.0"

from .words import (  # noqa: F401
    ALPHABET,
    CENTER_LETTERS,
    GRID_LETTERS,
    Letter,
    LETTERS,
    ParseError,
    Segment,
    TriadicSquare,
    all_words,
    compose_bits,
    flip,
    fold,
    grid_word_of_square,
    letter_at,
    parse_word,
    prepend,
    project_word,
    seam_rectangles,
    section,
    shift,
    word_square,
    word_to_triples,
)
from .graphs import (  # noqa: F401
    CapacityError,
    HORIZONTAL,
    ReplacementGraph,
    SEAM,
    VERTICAL,
    adjacency,
    ball,
    boundary_face,
    build_graph,
    chain_oracle_adjacency,
    distance,
    flip_permutation,
    is_automorphism,
    prefix_subgraph,
    read_graph,
    read_graph_binary,
    read_graph_json,
    write_graph_binary,
    write_graph_json,
)
from .measures import (  # noqa: F401
    DimensionFit,
    DoublingReport,
    IntervalWeights,
    RatioRow,
    TileMeasure,
    ball_dimension_estimate,
    blowup_measure,
    box_dimension_estimate,
    middle_third_ratios,
    pushforward_x,
    tile_doubling_check,
)
from .modulus import (  # noqa: F401
    ModulusProblem,
    ModulusResult,
    Network,
    ScanRow,
    ScanTable,
    conformal_scan,
    effective_conductance,
    grid_network,
    mincut_oracle,
    parallel_network,
    path_network,
    solve_modulus,
)
from .metrics import (  # noqa: F401
    CoverReport,
    DistortionProfile,
    MetricMatrix,
    PIDiagnostic,
    QuotientReport,
    RowMetric,
    blowup_metric,
    cover_preimage,
    graph_metric,
    internal_block_metric,
    lipschitz_quotient_check,
    pi_diagnostic,
    qs_distortion,
    read_metric_matrix,
    symmetrize,
    write_metric_matrix,
)
