"""
Simple graphs, their stabiliser groups and dense graph-state vectors.

Vertex ``i`` of a graph is qubit ``i``. The stabiliser group of a graph on
``n`` vertices has ``2**n`` elements; element ``mask`` is the product of the
generators whose bit is set in ``mask``. Protocol keys refer to elements by
the 1-based index ``t = mask + 1``, so ``t = 1`` is the identity.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from . import pauli
from .dense import kron_all
from .errors import CapacityError, ValidationError
from .pauli import DENSE_CAP, PauliString

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on vertices ``0 .. n-1``."""

    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("a graph needs at least one vertex")
        norm = set()
        for e in self.edges:
            u, v = tuple(e)
            if u == v:
                raise ValidationError(f"self-loop on vertex {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValidationError(f"edge ({u}, {v}) outside [0, {self.n})")
            norm.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        edges = list(edges)
        seen = set()
        for u, v in edges:
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValidationError(f"duplicate edge {key}")
            seen.add(key)
        return cls(n, frozenset(edges))

    def neighbours(self, i: int) -> list[int]:
        return sorted({v for u, v in self.edges if u == i} | {u for u, v in self.edges if v == i})

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


def line(n: int) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def ring(n: int) -> Graph:
    if n < 3:
        raise ValidationError("a ring needs at least 3 vertices")
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def star(n: int) -> Graph:
    """Star with centre 0 and leaves ``1 .. n-1``."""
    return Graph.from_edges(n, [(0, i) for i in range(1, n)])


def complete(n: int) -> Graph:
    return Graph.from_edges(n, itertools.combinations(range(n), 2))


BUILTINS = {"line": line, "ring": ring, "star": star, "complete": complete}


def parse_edge_list(text: str) -> Graph:
    """Parse the edge-list format: first line ``n``, then ``u v`` per line."""
    rows = []
    for raw in text.splitlines():
        body = raw.split("#", 1)[0].strip()
        if body:
            rows.append(body.split())
    if not rows:
        raise ValidationError("empty graph description")
    try:
        if len(rows[0]) != 1:
            raise ValueError
        n = int(rows[0][0])
        edges = []
        for row in rows[1:]:
            if len(row) != 2:
                raise ValueError
            edges.append((int(row[0]), int(row[1])))
    except ValueError:
        raise ValidationError("malformed edge list") from None
    return Graph.from_edges(n, edges)


def format_edge_list(g: Graph) -> str:
    return "\n".join([str(g.n)] + [f"{u} {v}" for u, v in g.sorted_edges()]) + "\n"


def graph_from_spec(spec: str) -> Graph:
    """Build a graph from ``kind:N`` (line, ring, star, complete) or a file path."""
    kind, sep, size = spec.partition(":")
    if sep and kind in BUILTINS:
        try:
            n = int(size)
        except ValueError:
            raise ValidationError(f"bad graph size in {spec!r}") from None
        return BUILTINS[kind](n)
    path = Path(spec)
    if not path.is_file():
        raise ValidationError(f"unknown graph {spec!r}: not a builtin keyword or a file")
    return parse_edge_list(path.read_text())


# -- stabilisers --------------------------------------------------------------


def generators(g: Graph) -> list[PauliString]:
    """``S_i = X_i prod_{j in N(i)} Z_j`` for every vertex."""
    out = []
    for i in range(g.n):
        z = sum(1 << j for j in g.neighbours(i))
        out.append(PauliString(g.n, 1 << i, z))
    return out


@dataclass(frozen=True)
class StabilizerGroup:
    n: int
    generators: tuple

    @classmethod
    def of(cls, g: Graph) -> "StabilizerGroup":
        return cls(g.n, tuple(generators(g)))

    def __len__(self) -> int:
        return 1 << self.n

    def element(self, mask) -> PauliString:
        """Product of the generators selected by ``mask`` (int or bit sequence)."""
        if not isinstance(mask, (int, np.integer)):
            bits = list(mask)
            if len(bits) != self.n:
                raise ValidationError(f"mask must have {self.n} bits")
            mask = sum(int(b) << j for j, b in enumerate(bits))
        mask = int(mask)
        if not 0 <= mask < len(self):
            raise ValidationError(f"mask {mask} out of range")
        out = PauliString.identity(self.n)
        for j, s in enumerate(self.generators):
            if (mask >> j) & 1:
                out = out * s
        return out

    def elements(self) -> Iterator[PauliString]:
        for mask in range(len(self)):
            yield self.element(mask)

    @cached_property
    def all_elements(self) -> tuple:
        return tuple(self.elements())


def group_element(sg: StabilizerGroup, mask) -> PauliString:
    return sg.element(mask)


def state_vector(g: Graph) -> np.ndarray:
    """``|G>``: controlled-Z on every edge applied to ``|+>^n``."""
    if g.n > DENSE_CAP:
        raise CapacityError("graph state vector", g.n, DENSE_CAP)
    idx = np.arange(1 << g.n)
    parity = np.zeros(idx.shape, dtype=np.int64)
    for u, v in g.edges:
        parity ^= ((idx >> u) & (idx >> v)) & 1
    return (1 - 2 * parity).astype(complex) / np.sqrt(1 << g.n)


def projector_from_group(sg: StabilizerGroup) -> np.ndarray:
    """``(1/2**n) sum_S S`` over the whole group."""
    if sg.n > DENSE_CAP:
        raise CapacityError("group projector", sg.n, DENSE_CAP)
    d = 1 << sg.n
    out = np.zeros((d, d), dtype=complex)
    for s in sg.elements():
        out += pauli.to_matrix(s)
    return out / d


# -- local rotations ----------------------------------------------------------


@dataclass(frozen=True)
class LocalRotation:
    """One 2x2 unitary per qubit; factor ``j`` acts on qubit ``j``."""

    factors: tuple

    def __post_init__(self):
        mats = []
        for j, u in enumerate(self.factors):
            u = np.asarray(u, dtype=complex)
            if u.shape != (2, 2) or np.max(np.abs(u.conj().T @ u - np.eye(2))) > 1e-12:
                raise ValidationError(f"rotation factor {j} is not a 2x2 unitary")
            u.setflags(write=False)
            mats.append(u)
        object.__setattr__(self, "factors", tuple(mats))

    @classmethod
    def identity(cls, n: int) -> "LocalRotation":
        return cls(tuple(np.eye(2) for _ in range(n)))

    @property
    def n(self) -> int:
        return len(self.factors)

    def matrix(self) -> np.ndarray:
        if self.n > DENSE_CAP:
            raise CapacityError("local rotation matrix", self.n, DENSE_CAP)
        return kron_all(self.factors)


def ghz_rotation(n: int) -> LocalRotation:
    """Hadamard on the leaves of ``star(n)``; maps the star graph state to GHZ."""
    return LocalRotation(tuple([np.eye(2)] + [HADAMARD] * (n - 1)))


def ghz_state(n: int) -> np.ndarray:
    v = np.zeros(1 << n, dtype=complex)
    v[0] = v[-1] = 1 / np.sqrt(2)
    return v


def rotated_target(g: Graph, rot: LocalRotation | None = None):
    """Target ``U|G>`` and the rotated generators ``U S_i U^dagger`` as matrices."""
    gens = [pauli.to_matrix(s) for s in generators(g)]
    psi = state_vector(g)
    if rot is None:
        return psi, gens
    if rot.n != g.n:
        raise ValidationError(f"rotation acts on {rot.n} qubits, graph has {g.n}")
    u = rot.matrix()
    return u @ psi, [u @ s @ u.conj().T for s in gens]


def local_complement(g: Graph, v: int) -> Graph:
    """Toggle every edge inside the neighbourhood of ``v``."""
    nb = g.neighbours(v)
    edges = set(g.edges)
    for a, b in itertools.combinations(nb, 2):
        edges ^= {(a, b)}
    return Graph(g.n, frozenset(edges))


def complete_to_ghz_rotation(n: int) -> LocalRotation:
    """Local unitary taking ``|complete(n)>`` to the GHZ state.

    Local complementation at vertex 0 turns the complete graph into the star
    centred on 0; on states that is ``sqrt(-iX_0) prod_{j>0} sqrt(iZ_j)``.
    Composing with :func:`ghz_rotation` gives the GHZ state up to global phase.
    """
    sx = np.array([[1, -1j], [-1j, 1]], dtype=complex) / np.sqrt(2)  # sqrt(-iX)
    sz = np.array([[np.exp(1j * np.pi / 4), 0], [0, np.exp(-1j * np.pi / 4)]], dtype=complex)  # sqrt(iZ)
    lc = [sx] + [sz] * (n - 1)
    ghz = ghz_rotation(n).factors
    return LocalRotation(tuple(h @ f for h, f in zip(ghz, lc)))


def complement_basis(psi: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of the complement of ``psi``.

    Gram-Schmidt over computational basis vectors in index order; vectors that
    fall (numerically) into the span already built are skipped.
    """
    d = psi.shape[0]
    basis = [psi / np.linalg.norm(psi)]
    for k in range(d):
        v = np.zeros(d, dtype=complex)
        v[k] = 1.0
        for b in basis:
            v = v - np.vdot(b, v) * b
        nrm = np.linalg.norm(v)
        if nrm > 1e-8:
            basis.append(v / nrm)
        if len(basis) == d:
            break
    return np.column_stack(basis[1:])
