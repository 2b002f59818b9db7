"""Certification of graph states by random stabiliser tests on M copies."""

from .errors import (
    CapacityError,
    DimensionError,
    GraphCertError,
    InsufficientSharesError,
    PatternFlowError,
    ValidationError,
)
from .graphs import Graph, LocalRotation, StabilizerGroup, generators, graph_from_spec, state_vector
from .pauli import PauliString, commutes, multiply, to_matrix
from .protocol import (
    Coherent,
    Honest,
    IIDChannel,
    Key,
    ProductState,
    SingleCopyReplace,
    Verdict,
    estimate_p_fail,
    exact_p_fail,
    run_protocol,
    sample_key,
)
from .spectral import build_Q, eigenvalue_for_k, verify_q_bound

__version__ = "0.1.0"
