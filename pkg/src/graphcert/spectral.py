"""
Accept projectors, the Q operator and its spectrum.

For ``M`` copies of a graph state ``|G>`` with ``A = (I + |G><G|)/2`` and
``B = I - |G><G|``::

    Q = sum_r  A (x) ... (x) B_r (x) ... (x) A

The expected value ``Tr(Q rho) / M`` of any ``M``-copy source ``rho`` is the
probability that the protocol accepts and hands out a bad copy. A product of
``k`` states orthogonal to ``|G>`` with ``M - k`` copies of ``|G>`` is an
eigenvector of Q with eigenvalue ``k / 2**(k-1)``; these vectors span the
whole space, so the largest eigenvalue is 1 (reached at ``k = 1, 2``).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb
from typing import Iterable

import numpy as np

from . import dense, pauli
from .dense import Q_MATRIX_CAP, check_cap
from .errors import ValidationError
from .graphs import Graph, StabilizerGroup, complement_basis, state_vector
from .protocol import Key

BOUND_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class QOperator:
    graph: Graph
    M: int
    matrix: np.ndarray

    def expectation(self, rho: np.ndarray) -> float:
        rho = np.asarray(rho, dtype=complex)
        if rho.ndim == 1:
            return float(np.vdot(rho, self.matrix @ rho).real)
        return float(np.trace(self.matrix @ rho).real)

    def p_fail(self, rho: np.ndarray) -> float:
        """``Tr(Q rho) / M``."""
        return self.expectation(rho) / self.M


def _check_size(g: Graph, M: int) -> None:
    if M < 1:
        raise ValidationError("M must be positive")
    check_cap("Q operator", g.n * M, Q_MATRIX_CAP)


def _copy_ops(g: Graph):
    psi = state_vector(g)
    proj = np.outer(psi, psi.conj())
    eye = np.eye(1 << g.n)
    return 0.5 * (eye + proj), eye - proj


def build_accept_projector(g: Graph, M: int, key: Key) -> np.ndarray:
    """Projector onto "every tested copy returned +1" for a fixed key.

    Copy ``c`` is the ``c``-th tensor factor counted from the least
    significant qubits; the output copy ``r`` carries the identity.
    """
    _check_size(g, M)
    sg = StabilizerGroup.of(g)
    key.check_group(len(sg))
    eye = np.eye(1 << g.n)
    factors = [eye] * M
    for copy, t in key.tested():
        factors[copy - 1] = 0.5 * (eye + pauli.to_matrix(sg.element(t - 1)))
    return dense.kron_all(factors)


def build_Q(g: Graph, M: int) -> QOperator:
    """Q from the projector form (one ``B`` factor, ``A`` elsewhere)."""
    _check_size(g, M)
    a, b = _copy_ops(g)
    total = sum(dense.kron_all([b if c == r else a for c in range(M)]) for r in range(M))
    return QOperator(g, M, total)


def build_Q_from_keys(g: Graph, M: int) -> QOperator:
    """Q as an explicit average of accept projectors over every test key.

    ``sum_r (1/|S|**(M-1)) sum_t [prod_{i != r} (S_{t_i} + I)/2] (x) B_r``; no
    use is made of the group average being ``|G><G|``.
    """
    _check_size(g, M)
    _, b = _copy_ops(g)
    sg = StabilizerGroup.of(g)
    size = len(sg)
    eye = np.eye(1 << g.n)
    halves = [0.5 * (eye + pauli.to_matrix(s)) for s in sg.elements()]
    dim = 1 << (g.n * M)
    total = np.zeros((dim, dim), dtype=complex)
    for r in range(M):
        for ts in itertools.product(range(size), repeat=M - 1):
            it = iter(ts)
            factors = [b if c == r else halves[next(it)] for c in range(M)]
            total += dense.kron_all(factors)
    return QOperator(g, M, total / size ** (M - 1))


def apply_Q(g: Graph, M: int, vec: np.ndarray) -> np.ndarray:
    """``Q @ vec`` without forming Q, by applying per-copy factors."""
    check_cap("matrix-free Q", g.n * M, dense.GLOBAL_STATE_CAP)
    a, b = _copy_ops(g)
    out = np.zeros_like(vec, dtype=complex)
    for r in range(M):
        w = np.asarray(vec, dtype=complex)
        for c in range(M):
            w = dense.apply_left(b if c == r else a, w, c * g.n)
        out += w
    return out


def eigenvalue_for_k(k: int) -> float:
    """``k / 2**(k-1)``: eigenvalue of Q on vectors with ``k`` bad copies."""
    if k < 0:
        raise ValidationError("k must be non-negative")
    return k / 2.0 ** (k - 1) if k else 0.0


def expected_spectrum(n: int, M: int) -> list[tuple[int, float, int]]:
    """``(k, eigenvalue, multiplicity)`` rows with multiplicity ``C(M,k) (2**n - 1)**k``."""
    return [(k, eigenvalue_for_k(k), comb(M, k) * ((1 << n) - 1) ** k) for k in range(M + 1)]


def expected_eigenvalues(n: int, M: int) -> np.ndarray:
    vals = [lam for _, lam, mult in expected_spectrum(n, M) for _ in range(mult)]
    return np.sort(np.array(vals))


def build_appendix_eigenvector(g: Graph, M: int, positions: Iterable[int], gprime: np.ndarray) -> np.ndarray:
    """``|G'>`` on the copies in ``positions`` (1-based), ``|G>`` on the rest."""
    _check_size(g, M)
    psi = state_vector(g)
    gprime = np.asarray(gprime, dtype=complex)
    if gprime.shape != psi.shape:
        raise ValidationError("|G'> has the wrong dimension")
    if abs(np.vdot(psi, gprime)) > 1e-10:
        raise ValidationError("|G'> must be orthogonal to |G>")
    gprime = gprime / np.linalg.norm(gprime)
    positions = set(positions)
    if any(not 1 <= p <= M for p in positions):
        raise ValidationError(f"positions must lie in [1, {M}]")
    return dense.kron_vectors([gprime if c in positions else psi for c in range(1, M + 1)])


def family_projector(g: Graph, M: int, k: int) -> np.ndarray:
    """Projector onto the span of all vectors with exactly ``k`` bad copies."""
    a_proj = np.outer(state_vector(g), state_vector(g).conj())
    b = np.eye(1 << g.n) - a_proj
    total = 0
    for pos in itertools.combinations(range(M), k):
        total = total + dense.kron_all([b if c in pos else a_proj for c in range(M)])
    return total


def spectrum_table(g: Graph, M: int, tol: float = 1e-8) -> list[dict]:
    """Expected versus observed eigenvalue multiplicities, one row per ``k``.

    The observed multiplicity for ``k`` counts eigenvalues of Q, compressed to
    the span of the ``k``-bad-copy family, that equal ``k / 2**(k-1)``.
    """
    q = build_Q(g, M).matrix
    rows = []
    for k, lam, mult in expected_spectrum(g.n, M):
        vals, vecs = dense.eig_hermitian(family_projector(g, M, k))
        basis = vecs[:, vals > 0.5]
        sub = dense.eig_hermitian(basis.conj().T @ q @ basis)[0]
        observed = int(np.count_nonzero(np.abs(sub - lam) <= tol))
        rows.append({"k": k, "eigenvalue": lam, "expected_multiplicity": mult, "observed_multiplicity": observed})
    return rows


def verify_q_bound(g: Graph, M: int) -> tuple[float, bool]:
    """Largest eigenvalue of Q and whether it is at most 1 (+1e-9)."""
    vals = dense.eig_hermitian(build_Q(g, M).matrix)[0]
    top = float(vals[-1])
    return top, top <= 1.0 + BOUND_TOL


def spectrum_matches(g: Graph, M: int, tol: float = 1e-8) -> tuple[float, bool]:
    """Max deviation between the sorted spectrum of Q and the predicted multiset."""
    vals = dense.eig_hermitian(build_Q(g, M).matrix)[0]
    dev = float(np.max(np.abs(vals - expected_eigenvalues(g.n, M))))
    return dev, dev <= tol


def eigen_relation_residual(g: Graph, M: int, positions, gprime, matrix_free: bool = False) -> float:
    """``|Q v - k/2**(k-1) v|`` for the constructed family vector."""
    v = build_appendix_eigenvector(g, M, positions, gprime)
    qv = apply_Q(g, M, v) if matrix_free else build_Q(g, M).matrix @ v
    return float(np.linalg.norm(qv - eigenvalue_for_k(len(set(positions))) * v))


def complement_vectors(g: Graph) -> np.ndarray:
    """Deterministic orthonormal basis (columns) orthogonal to ``|G>``."""
    return complement_basis(state_vector(g))
