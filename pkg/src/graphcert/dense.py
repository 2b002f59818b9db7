"""
Exact dense linear algebra for small qubit systems.

States are plain numpy arrays: a 1-D array is a state vector, a 2-D array a
density matrix. Qubit ``j`` is bit ``j`` of the basis index (little-endian),
so a block of ``width`` qubits starting at ``offset`` is the middle axis of
the reshape ``(2**(q - offset - width), 2**width, 2**offset)``.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .errors import CapacityError, DimensionError, GraphCertError, ValidationError
from .pauli import DENSE_CAP, PauliString, to_matrix

# Coherent (global) source states: M*n qubits as a state vector.
GLOBAL_STATE_CAP = 20
# Explicit Q / accept-projector matrices: M*n qubits.
Q_MATRIX_CAP = 12

_NORM_TOL = 1e-10


def num_qubits(state: np.ndarray) -> int:
    dim = state.shape[0]
    q = dim.bit_length() - 1
    if dim != 1 << q:
        raise DimensionError(f"dimension {dim} is not a power of two")
    return q


def check_cap(what: str, qubits: int, limit: int) -> None:
    if qubits > limit:
        raise CapacityError(what, qubits, limit)


def density(state: np.ndarray) -> np.ndarray:
    """Density matrix of a state vector; density matrices pass through."""
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        return np.outer(state, state.conj())
    return state


def check_state_vector(vec: np.ndarray, tol: float = _NORM_TOL) -> np.ndarray:
    vec = np.asarray(vec, dtype=complex)
    if vec.ndim != 1:
        raise ValidationError("state vector must be one-dimensional")
    num_qubits(vec)
    if abs(np.linalg.norm(vec) - 1.0) > tol:
        raise ValidationError(f"state vector norm {np.linalg.norm(vec):.3g} != 1")
    return vec


def check_density(rho: np.ndarray, tol: float = _NORM_TOL) -> np.ndarray:
    """Validate Hermiticity, unit trace and positivity; return the array."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValidationError("density matrix must be square")
    num_qubits(rho)
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise ValidationError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > tol:
        raise ValidationError(f"density matrix trace {np.trace(rho).real:.3g} != 1")
    if np.linalg.eigvalsh(rho)[0] < -1e-9:
        raise ValidationError("density matrix has a negative eigenvalue")
    return rho


def check_state(state: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    return check_state_vector(state) if state.ndim == 1 else check_density(state)


def kron_all(factors: Iterable[np.ndarray]) -> np.ndarray:
    """Kronecker product with the *first* factor on the least significant qubits."""
    out = np.ones((1, 1), dtype=complex)
    for f in factors:
        out = np.kron(f, out)
    return out


def kron_vectors(factors: Iterable[np.ndarray]) -> np.ndarray:
    out = np.ones(1, dtype=complex)
    for f in factors:
        out = np.kron(f, out)
    return out


# -- local operator application --------------------------------------------


def apply_left(op: np.ndarray, state: np.ndarray, offset: int = 0) -> np.ndarray:
    """Apply ``op`` to the qubit block starting at ``offset``.

    For a density matrix only the left (row) index is acted upon.
    """
    op = np.asarray(op)
    w = num_qubits(op)
    q = num_qubits(state)
    if offset < 0 or offset + w > q:
        raise DimensionError(f"block [{offset}, {offset + w}) outside {q} qubits")
    hi = 1 << (q - offset - w)
    lo = 1 << offset
    if state.ndim == 1:
        t = state.reshape(hi, 1 << w, lo)
        return np.einsum("ab,xby->xay", op, t).reshape(-1)
    t = state.reshape(hi, 1 << w, lo, state.shape[1])
    return np.einsum("ab,xbyc->xayc", op, t).reshape(state.shape)


def conjugate(op: np.ndarray, rho: np.ndarray, offset: int = 0) -> np.ndarray:
    """``op rho op^dagger`` on a block; state vectors are mapped to ``op v``."""
    if rho.ndim == 1:
        return apply_left(op, rho, offset)
    left = apply_left(op, rho, offset)
    return apply_left(op, left.conj().T, offset).conj().T


def expectation(op: np.ndarray, state: np.ndarray, offset: int = 0) -> complex:
    """``Tr(op rho)`` or ``<v|op|v>`` with ``op`` acting on a block."""
    moved = apply_left(op, state, offset)
    if state.ndim == 1:
        return complex(np.vdot(state, moved))
    return complex(np.trace(moved))


# -- measurement ------------------------------------------------------------

_SNAP = 1e-12


def snap_probability(p):
    """Clip to [0, 1] and round values within 1e-12 of 0 or 1."""
    p = np.clip(p, 0.0, 1.0)
    p = np.where(np.abs(p - 1.0) < _SNAP, 1.0, p)
    return np.where(p < _SNAP, 0.0, p)


def measure_observable(state: np.ndarray, obs: np.ndarray, rng: np.random.Generator, offset: int = 0):
    """Projective measurement of a ±1-valued observable.

    ``obs`` may act on a block of qubits starting at ``offset``. Exactly one
    uniform variate is drawn: the outcome is +1 iff it falls below the +1
    probability. Returns ``(outcome, post_state, probability)`` where the
    post-state keeps the representation (vector or matrix) of ``state``.
    """
    obs = np.asarray(obs, dtype=complex)
    eye = np.eye(obs.shape[0])
    if np.max(np.abs(obs @ obs - eye)) > 1e-9:
        raise ValidationError("observable must square to the identity")
    p_plus = float(snap_probability(0.5 * (1.0 + expectation(obs, state, offset).real)))
    outcome = 1 if rng.random() < p_plus else -1
    prob = p_plus if outcome == 1 else 1.0 - p_plus
    if prob <= 0.0:
        raise GraphCertError("sampled a zero-probability measurement branch")
    proj = 0.5 * (eye + outcome * obs)
    post = conjugate(proj, state, offset)
    if post.ndim == 1:
        post = post / np.sqrt(prob)
    else:
        post = post / prob
    return outcome, post, prob


def measure_pauli_locally(state: np.ndarray, pauli: PauliString, rng: np.random.Generator, offset: int = 0):
    """Measure a Hermitian Pauli string one qubit at a time.

    Each non-identity factor is measured on its own qubit in ascending qubit
    order; the reported outcome is the product of the local outcomes times the
    sign of the string. Returns ``(outcome, post_state)``.
    """
    if not pauli.is_hermitian():
        raise ValidationError("only Hermitian Pauli strings are observables")
    outcome = 1 if pauli.phase_exp == 0 else -1
    for j in range(pauli.n):
        xj = (pauli.x >> j) & 1
        zj = (pauli.z >> j) & 1
        if not (xj or zj):
            continue
        factor = to_matrix(PauliString(1, xj, zj))
        o, state, _ = measure_observable(state, factor, rng, offset + j)
        outcome *= o
    return outcome, state


# -- figures of merit -------------------------------------------------------


def fidelity_sq(rho: np.ndarray, target: np.ndarray) -> float:
    """``<target|rho|target>``; ``rho`` may be a vector.

    Snapped like measurement probabilities, so rounding noise within 1e-12
    of 0 or 1 does not leak into fail estimates.
    """
    target = np.asarray(target, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    if rho.shape[0] != target.shape[0]:
        raise DimensionError("state and target dimensions differ")
    if rho.ndim == 1:
        val = abs(np.vdot(target, rho)) ** 2
    else:
        val = np.vdot(target, rho @ target).real
    return float(snap_probability(val))


def fidelity(rho: np.ndarray, target: np.ndarray) -> float:
    """``sqrt(<target|rho|target>)``; see :func:`fidelity_sq` for the square."""
    return float(np.sqrt(fidelity_sq(rho, target)))


def partial_trace(rho: np.ndarray, keep: Iterable[int]) -> np.ndarray:
    """Reduced density matrix on ``keep``.

    Kept qubits retain their relative order: the smallest kept index becomes
    qubit 0 of the result. An empty ``keep`` yields the 1x1 trace.
    """
    rho = density(rho)
    q = num_qubits(rho)
    keep = sorted(set(keep))
    if any(k < 0 or k >= q for k in keep):
        raise ValidationError(f"keep indices must lie in [0, {q})")
    # numpy axis a corresponds to qubit q-1-a
    t = rho.reshape((2,) * (2 * q))
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    if 2 * q > len(letters):
        raise CapacityError("partial_trace", q, len(letters) // 2)
    rows = list(letters[:q])
    cols = list(letters[q : 2 * q])
    out_rows, out_cols = [], []
    for a in range(q):
        qubit = q - 1 - a
        if qubit in keep:
            out_rows.append(rows[a])
            out_cols.append(cols[a])
        else:
            cols[a] = rows[a]
    spec = "".join(rows) + "".join(cols) + "->" + "".join(out_rows) + "".join(out_cols)
    red = np.einsum(spec, t)
    d = 1 << len(keep)
    return np.asarray(red).reshape(d, d)


def eig_hermitian(h: np.ndarray):
    """Eigenvalues (ascending) and orthonormal eigenvectors (columns)."""
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValidationError("matrix must be square")
    scale = max(1.0, float(np.max(np.abs(h))) if h.size else 1.0)
    if np.max(np.abs(h - h.conj().T)) > 1e-9 * scale:
        raise ValidationError("matrix is not Hermitian")
    return np.linalg.eigh(h)


# -- random states ----------------------------------------------------------


def haar_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Ginibre-distributed mixed state of the given rank (full rank by default)."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a Ginibre matrix with the phase fix."""
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def apply_kraus(kraus: Iterable[np.ndarray], rho: np.ndarray, offset: int = 0) -> np.ndarray:
    rho = density(rho)
    return sum(conjugate(k, rho, offset) for k in kraus)


__all__ = [
    "DENSE_CAP",
    "GLOBAL_STATE_CAP",
    "Q_MATRIX_CAP",
    "apply_kraus",
    "apply_left",
    "check_density",
    "check_state",
    "check_state_vector",
    "conjugate",
    "density",
    "eig_hermitian",
    "expectation",
    "fidelity",
    "fidelity_sq",
    "haar_state",
    "haar_unitary",
    "kron_all",
    "kron_vectors",
    "measure_observable",
    "measure_pauli_locally",
    "partial_trace",
    "random_density",
]
