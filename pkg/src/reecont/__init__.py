"""Relative entropy of entanglement with certified bounds, and numerical
checks of its continuity in the trace norm."""

from .continuity import (
    BatchReport,
    ContinuityReport,
    CorollaryTrace,
    DensityRecord,
    batch_report,
    corollary_trace,
    density_check,
    proof_chain_check,
    theorem_check,
)
from .entropy import eta, fannes_bound, relative_entropy, theorem_bound, von_neumann_entropy
from .errors import (
    ConvergenceFailure,
    DimensionMismatch,
    NonPositiveSpectrum,
    NotDensityMatrix,
    NotHermitian,
    NotInSet,
    NotProbabilityVector,
    OutOfDomain,
    ReeError,
    SamplingExhausted,
)
from .sets import ConvexSetSpec, ppt_linmin, ppt_member, sep_linmin, sep_member, shift
from .solver import CertifiedValue, SolverOptions, closest_state, ree, ree_shifted
from .states import (
    BipartiteDims,
    DensityMatrix,
    bell_diagonal,
    bell_state,
    load_state,
    maximally_mixed,
    pure_state,
    random_mixed,
    save_state,
    trace_distance,
    validate_density,
)

__version__ = "0.1.0"
