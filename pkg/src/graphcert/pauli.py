"""
Phased multi-qubit Pauli operators in symplectic bit-mask form.

A :class:`PauliString` on ``n`` qubits is stored as two integers used as bit
vectors plus a phase exponent::

    P = i**phase_exp * P_0 (x) P_1 (x) ... (x) P_{n-1}

where the factor on qubit ``j`` is selected by bit ``j`` of ``x`` and ``z``:

    x_j z_j   factor
    0   0     I
    1   0     X
    1   1     Y
    0   1     Z

Qubit 0 is the least significant bit, both in the masks and in the
computational-basis index of dense matrices (little-endian). The dense matrix
of ``X`` on qubit 0 and ``Z`` on qubit 1 is therefore ``kron(Z, X)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CapacityError, DimensionError, ValidationError

DENSE_CAP = 14

_LABELS = "IXZY"  # indexed by x + 2*z
_PHASE_TEXT = ("+", "+i", "-", "-i")
_PHASE_VALUE = (1, 1j, -1, -1j)
_LABEL_RE = re.compile(r"^\s*([+-]?)(i?)([IXYZ]+)\s*$")


def _popcount(v: int) -> int:
    return bin(v).count("1")


@dataclass(frozen=True)
class PauliString:
    """Immutable phased Pauli operator.

    Attributes
    ----------
    n : int
        Number of qubits.
    x, z : int
        Bit masks of length ``n``; bit ``j`` belongs to qubit ``j``.
    phase_exp : int
        Exponent ``e`` of the global phase ``i**e``, kept in ``range(4)``.
    """

    n: int
    x: int = 0
    z: int = 0
    phase_exp: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("a Pauli string needs at least one qubit")
        limit = 1 << self.n
        if not (0 <= self.x < limit and 0 <= self.z < limit):
            raise ValidationError(f"masks must fit in {self.n} bits")
        object.__setattr__(self, "phase_exp", self.phase_exp % 4)

    # -- constructors -------------------------------------------------------

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(n)

    @classmethod
    def single(cls, n: int, qubit: int, label: str) -> "PauliString":
        """``label`` in {I, X, Y, Z} on ``qubit``, identity elsewhere."""
        if not 0 <= qubit < n:
            raise ValidationError(f"qubit {qubit} out of range for n={n}")
        code = _LABELS.index(label)
        return cls(n, (code & 1) << qubit, (code >> 1) << qubit)

    @classmethod
    def from_label(cls, text: str) -> "PauliString":
        """Parse ``"±[i]P0P1..."``; the leftmost letter is qubit 0."""
        m = _LABEL_RE.match(text)
        if m is None:
            raise ValidationError(f"not a Pauli label: {text!r}")
        sign, imag, letters = m.groups()
        x = z = 0
        for j, ch in enumerate(letters):
            code = _LABELS.index(ch)
            x |= (code & 1) << j
            z |= (code >> 1) << j
        phase = (2 if sign == "-" else 0) + (1 if imag else 0)
        return cls(len(letters), x, z, phase)

    @classmethod
    def from_bits(cls, x_bits: Sequence[int], z_bits: Sequence[int], phase_exp: int = 0) -> "PauliString":
        if len(x_bits) != len(z_bits):
            raise DimensionError("x and z bit vectors differ in length")
        x = sum(int(b) << j for j, b in enumerate(x_bits))
        z = sum(int(b) << j for j, b in enumerate(z_bits))
        return cls(len(x_bits), x, z, phase_exp)

    # -- properties ---------------------------------------------------------

    @property
    def phase(self) -> complex:
        return _PHASE_VALUE[self.phase_exp]

    @property
    def x_bits(self) -> tuple[int, ...]:
        return tuple((self.x >> j) & 1 for j in range(self.n))

    @property
    def z_bits(self) -> tuple[int, ...]:
        return tuple((self.z >> j) & 1 for j in range(self.n))

    @property
    def support(self) -> int:
        """Bit mask of qubits carrying a non-identity factor."""
        return self.x | self.z

    @property
    def weight(self) -> int:
        return _popcount(self.support)

    def is_hermitian(self) -> bool:
        return self.phase_exp % 2 == 0

    def letters(self) -> str:
        return "".join(_LABELS[((self.x >> j) & 1) | (((self.z >> j) & 1) << 1)] for j in range(self.n))

    def __str__(self) -> str:
        return _PHASE_TEXT[self.phase_exp] + self.letters()

    # -- algebra ------------------------------------------------------------

    def __mul__(self, other: "PauliString") -> "PauliString":
        return multiply(self, other)

    def inverse(self) -> "PauliString":
        # each factor squares to I, so only the phase needs undoing
        return PauliString(self.n, self.x, self.z, -self.phase_exp)

    def with_phase(self, phase_exp: int) -> "PauliString":
        return PauliString(self.n, self.x, self.z, phase_exp)


def _check_same_n(a: PauliString, b: PauliString) -> None:
    if a.n != b.n:
        raise DimensionError(f"Pauli strings act on {a.n} and {b.n} qubits")


def multiply(a: PauliString, b: PauliString) -> PauliString:
    """Exact product ``a @ b`` including the phase.

    Each operand is written as ``i**(e + |x&z|) X^x Z^z``; moving ``Z^z1``
    past ``X^x2`` costs ``(-1)**|z1&x2|``.
    """
    _check_same_n(a, b)
    x = a.x ^ b.x
    z = a.z ^ b.z
    e = (
        a.phase_exp
        + b.phase_exp
        + _popcount(a.x & a.z)
        + _popcount(b.x & b.z)
        + 2 * _popcount(a.z & b.x)
        - _popcount(x & z)
    )
    return PauliString(a.n, x, z, e)


def commutes(a: PauliString, b: PauliString) -> bool:
    """True iff the symplectic inner product of ``a`` and ``b`` is even."""
    _check_same_n(a, b)
    return (_popcount(a.x & b.z) + _popcount(a.z & b.x)) % 2 == 0


def _basis_action(p: PauliString):
    """Row index and value of the single nonzero entry in every column."""
    cols = np.arange(1 << p.n, dtype=np.int64)
    rows = cols ^ p.x
    parity = np.zeros(cols.shape, dtype=np.int64)
    zc = cols & p.z
    for j in range(p.n):
        parity ^= (zc >> j) & 1
    base = _PHASE_VALUE[(p.phase_exp + _popcount(p.x & p.z)) % 4]
    vals = base * (1 - 2 * parity)
    return rows, cols, vals.astype(complex)


def to_matrix(p: PauliString) -> np.ndarray:
    """Dense ``2**n x 2**n`` matrix of ``p`` (little-endian qubit order)."""
    if p.n > DENSE_CAP:
        raise CapacityError("Pauli to_matrix", p.n, DENSE_CAP)
    rows, cols, vals = _basis_action(p)
    out = np.zeros((1 << p.n, 1 << p.n), dtype=complex)
    out[rows, cols] = vals
    return out


def apply(p: PauliString, vec: np.ndarray) -> np.ndarray:
    """``p @ vec`` without forming the matrix; ``vec`` may have trailing axes."""
    if p.n > DENSE_CAP:
        raise CapacityError("Pauli apply", p.n, DENSE_CAP)
    rows, cols, vals = _basis_action(p)
    vec = np.asarray(vec)
    out = np.empty(vec.shape, dtype=complex)
    shape = (-1,) + (1,) * (vec.ndim - 1)
    out[rows] = vals.reshape(shape) * vec[cols]
    return out


def expectation(p: PauliString, rho: np.ndarray) -> complex:
    """``Tr(p rho)`` for a density matrix, or ``<v|p|v>`` for a state vector."""
    rows, cols, vals = _basis_action(p)
    rho = np.asarray(rho)
    if rho.ndim == 1:
        return complex(np.vdot(rho[rows], vals * rho[cols]))
    # Tr(P rho) = sum_c P[row(c), c] rho[c, row(c)]
    return complex(np.sum(vals * rho[cols, rows]))
