"""Two-dimensional phase unwrapping as a QUBO, with tile-and-stitch decomposition."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConsistencyError,
    GenerationFailedError,
    GridFormatError,
    InvalidArgumentError,
    InvalidStateError,
    ProblemTooLargeError,
    UnwrapError,
)
from .phase import (  # noqa: E402
    EnergyBreakdown,
    LabelGrid,
    PhaseGrid,
    PhaseKind,
    UnwrapProblem,
    WeightPolicy,
    apply_labels,
    build_problem,
    edge_constant,
    edge_constants,
    energy_l1,
    energy_l2,
    wrap,
)
from .qubo import (  # noqa: E402
    BinaryEncoding,
    QuboProblem,
    VarLayout,
    build_qubo,
    decode_solution,
    encode_label,
    encode_labels,
    qubo_energy,
)
from .solvers import (  # noqa: E402
    SolveReport,
    SolverConfig,
    get_solver,
    register_solver,
    solve_exhaustive,
    solve_pt,
    solve_pticm,
    solve_sa,
)
from .superpixel import (  # noqa: E402
    PipelineReport,
    SuperpixelProblem,
    Tiling,
    build_superpixel_problem,
    make_tiling,
    restrict_problem,
    stitch,
    unwrap_single,
    unwrap_superpixel,
)
from .synth import SynthSpec, add_noise, generate_instance, generate_truth, wrap_grid  # noqa: E402
from .metrics import MatchReport, match_labels, summarize  # noqa: E402
