"""
The certification protocol: keys, sources, stabiliser tests and verdicts.

Copies are numbered ``1 .. M``. In a global state of ``M`` copies of an
``n``-qubit system, copy ``c`` occupies qubits ``(c-1)*n .. c*n - 1``, so copy
1 sits on the least significant qubits. Key indices ``t`` address group
elements 1-based (``t = mask + 1``), hence ``t = 1`` is the identity.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import dense, pauli
from .dense import GLOBAL_STATE_CAP, check_cap, snap_probability
from .errors import DimensionError, ValidationError
from .graphs import Graph, LocalRotation, StabilizerGroup, state_vector
from .montecarlo import run_trials
from .pauli import DENSE_CAP

# Above this many (r, t) keys the coherent exact path averages over t analytically.
KEY_ENUMERATION_LIMIT = 4096


# -- keys ---------------------------------------------------------------------


@dataclass(frozen=True)
class Key:
    """Classical secret: output copy ``r`` and one test index per other copy."""

    M: int
    r: int
    t: tuple

    def __post_init__(self):
        if self.M < 2:
            raise ValidationError("the protocol needs at least M = 2 copies")
        if not 1 <= self.r <= self.M:
            raise ValidationError(f"r = {self.r} outside [1, {self.M}]")
        object.__setattr__(self, "t", tuple(int(v) for v in self.t))
        if len(self.t) != self.M - 1:
            raise ValidationError(f"key needs {self.M - 1} test indices, got {len(self.t)}")
        if any(v < 1 for v in self.t):
            raise ValidationError("test indices are 1-based")

    def tested(self) -> list[tuple[int, int]]:
        """``(copy, t)`` pairs in ascending copy order."""
        copies = [c for c in range(1, self.M + 1) if c != self.r]
        return list(zip(copies, self.t))

    def check_group(self, group_size: int) -> None:
        if any(v > group_size for v in self.t):
            raise ValidationError(f"test index exceeds group size {group_size}")


def sample_key(
    M: int,
    group_size: int,
    rng: np.random.Generator,
    exclude_identity: bool = False,
    allowed: Sequence[int] | None = None,
) -> Key:
    """Uniform ``r`` and independent uniform ``t_i``.

    ``allowed`` restricts the test indices to an explicit list (used by the
    secret-sharing variant); otherwise they range over ``1 .. group_size``,
    skipping the identity when ``exclude_identity`` is set.
    """
    if M < 2:
        raise ValidationError("the protocol needs at least M = 2 copies")
    if group_size < 2:
        raise ValidationError("a stabiliser group has at least 2 elements")
    r = int(rng.integers(1, M + 1))
    if allowed is not None:
        allowed = np.asarray(allowed)
        t = allowed[rng.integers(0, len(allowed), size=M - 1)]
    else:
        lo = 2 if exclude_identity else 1
        t = rng.integers(lo, group_size + 1, size=M - 1)
    return Key(M, r, tuple(int(v) for v in t))


# -- what the players test against --------------------------------------------


class CertificationTarget:
    """Target state and the test observables for one graph.

    With a local ``rotation`` U the target is ``U|G>`` and the test for index
    ``t`` is ``U S_t U^dagger``. ``allowed`` lists the usable test indices.
    """

    def __init__(
        self,
        graph: Graph,
        rotation: LocalRotation | None = None,
        exclude_identity: bool = False,
        allowed: Sequence[int] | None = None,
    ):
        if graph.n > DENSE_CAP:
            raise dense.CapacityError("certification target", graph.n, DENSE_CAP)
        if rotation is not None and rotation.n != graph.n:
            raise ValidationError("rotation and graph sizes differ")
        self.graph = graph
        self.n = graph.n
        self.rotation = rotation
        self.group = StabilizerGroup.of(graph)
        self.group_size = len(self.group)
        explicit = allowed is not None
        if allowed is None:
            allowed = range(2 if exclude_identity else 1, self.group_size + 1)
        self.allowed = tuple(int(t) for t in allowed)
        self._explicit = explicit
        if not self.allowed:
            raise ValidationError("no test stabilisers available")
        self.exclude_identity = exclude_identity
        self._u = None if rotation is None else rotation.matrix()
        psi = state_vector(graph)
        self.state = psi if self._u is None else self._u @ psi

    @property
    def restricted(self) -> bool:
        return len(self.allowed) != self.group_size

    def sample_key(self, M: int, rng: np.random.Generator) -> Key:
        if self._explicit:
            return sample_key(M, self.group_size, rng, allowed=self.allowed)
        return sample_key(M, self.group_size, rng, exclude_identity=self.exclude_identity)

    def element(self, t: int) -> pauli.PauliString:
        return self.group.all_elements[t - 1]

    def observable(self, t: int) -> np.ndarray:
        return self._observables[t]

    @cached_property
    def _observables(self) -> dict:
        out = {}
        for t in self.allowed:
            m = pauli.to_matrix(self.element(t))
            out[t] = m if self._u is None else self._u @ m @ self._u.conj().T
        return out

    def to_stabiliser_frame(self, rho: np.ndarray) -> np.ndarray:
        if self._u is None:
            return rho
        u = self._u.conj().T
        return u @ rho @ u.conj().T

    def pass_probabilities(self, rho: np.ndarray) -> np.ndarray:
        """``P(+1)`` for every group element (index ``t - 1``) on one copy."""
        rho = self.to_stabiliser_frame(dense.density(rho))
        vals = np.array([pauli.expectation(s, rho).real for s in self.group.all_elements])
        return snap_probability(0.5 * (1.0 + vals))

    def mean_pass_operator(self) -> np.ndarray:
        """Average of ``(I + O_t)/2`` over the allowed test indices."""
        acc = sum(self.observable(t) for t in self.allowed) / len(self.allowed)
        return 0.5 * (np.eye(1 << self.n) + acc)

    def fail_projector(self) -> np.ndarray:
        return np.eye(1 << self.n) - np.outer(self.state, self.state.conj())


def acceptance_threshold(tau: float, tests: int) -> int:
    """Number of passed tests needed to accept."""
    if not 0.0 < tau <= 1.0:
        raise ValidationError("tau must lie in (0, 1]")
    return int(math.ceil(round(tau * tests, 9)))


# -- sources ------------------------------------------------------------------


class SourceStrategy:
    """Base class for the state emitted by the (untrusted) source."""

    is_product = True

    def copy_plan(self, target: np.ndarray, M: int):
        """Distinct per-copy states and, for copies 1..M, the index into them."""
        raise NotImplementedError

    def copy_states(self, target: np.ndarray, M: int) -> list[np.ndarray]:
        states, idx = self.copy_plan(target, M)
        return [states[i] for i in idx]

    def global_state(self, target: np.ndarray, M: int) -> np.ndarray:
        """Full ``M*n``-qubit density matrix (small sizes only)."""
        return dense.kron_all(self.copy_states(target, M))

    def describe(self) -> dict:
        return {"kind": type(self).__name__}


@dataclass(eq=False)
class Honest(SourceStrategy):
    def copy_plan(self, target, M):
        return [dense.density(target)], [0] * M


@dataclass(eq=False)
class IIDChannel(SourceStrategy):
    """The same channel applied to every ideal copy.

    ``kraus`` holds either single-qubit operators (applied to every qubit of
    the copy independently) or operators on the whole copy.
    """

    kraus: tuple
    label: str = "channel"

    @classmethod
    def depolarizing(cls, p: float) -> "IIDChannel":
        """Single-qubit depolarizing ``rho -> (1-p) rho + p I/2`` on every qubit."""
        if not 0.0 <= p <= 1.0:
            raise ValidationError("depolarizing probability must lie in [0, 1]")
        mats = [pauli.to_matrix(pauli.PauliString.from_label(s)) for s in "IXYZ"]
        weights = [1 - 3 * p / 4, p / 4, p / 4, p / 4]
        return cls(tuple(np.sqrt(w) * m for w, m in zip(weights, mats)), f"depolarizing(p={p})")

    def apply(self, rho: np.ndarray) -> np.ndarray:
        rho = dense.density(rho)
        q = dense.num_qubits(rho)
        k0 = np.asarray(self.kraus[0])
        if k0.shape[0] == 2 and q > 1:
            for j in range(q):
                rho = dense.apply_kraus(self.kraus, rho, offset=j)
            return rho
        if k0.shape[0] != rho.shape[0]:
            raise DimensionError("Kraus operators do not match the copy size")
        return dense.apply_kraus(self.kraus, rho)

    def copy_plan(self, target, M):
        return [self.apply(target)], [0] * M

    def describe(self):
        return {"kind": "IIDChannel", "label": self.label}


@dataclass(eq=False)
class SingleCopyReplace(SourceStrategy):
    """Honest everywhere except copy ``position``, which carries ``state``."""

    position: int
    state: np.ndarray
    label: str = ""

    def copy_plan(self, target, M):
        if not 1 <= self.position <= M:
            raise ValidationError(f"position {self.position} outside [1, {M}]")
        bad = dense.density(self.state)
        if bad.shape[0] != target.shape[0]:
            raise DimensionError("replacement state has the wrong size")
        idx = [0] * M
        idx[self.position - 1] = 1
        return [dense.density(target), bad], idx

    def describe(self):
        return {"kind": "SingleCopyReplace", "position": self.position, "label": self.label}


@dataclass(eq=False)
class ProductState(SourceStrategy):
    """Explicit, possibly different, state for every copy."""

    states: tuple

    def copy_plan(self, target, M):
        if len(self.states) != M:
            raise ValidationError(f"product source has {len(self.states)} copies, protocol uses {M}")
        states = [dense.density(s) for s in self.states]
        if any(s.shape[0] != target.shape[0] for s in states):
            raise DimensionError("copy state has the wrong size")
        return states, list(range(M))


@dataclass(eq=False)
class Coherent(SourceStrategy):
    """Arbitrary (entangled) state of all ``M*n`` qubits, vector or matrix."""

    state: np.ndarray
    is_product = False

    def copy_plan(self, target, M):
        raise ValidationError("a coherent source has no per-copy decomposition")

    def global_state(self, target, M):
        q = dense.num_qubits(self.state)
        n = dense.num_qubits(target)
        if q != M * n:
            raise DimensionError(f"coherent state has {q} qubits, expected {M * n}")
        check_cap("coherent source", q, GLOBAL_STATE_CAP)
        return np.asarray(self.state, dtype=complex)


def orthogonal_replacement(target: np.ndarray, qubit: int = 0) -> np.ndarray:
    """``Z_q`` applied to the target; orthogonal to it whenever ``S_q`` has X on ``q``."""
    n = dense.num_qubits(target)
    return pauli.apply(pauli.PauliString.single(n, qubit, "Z"), target)


def partial_replacement(target: np.ndarray, fidelity_sq: float, qubit: int = 0) -> np.ndarray:
    """``sqrt(f)|T> + sqrt(1-f) Z_q|T>``, a state with ``F^2 = f`` against ``|T>``."""
    if not 0.0 <= fidelity_sq <= 1.0:
        raise ValidationError("fidelity must lie in [0, 1]")
    perp = orthogonal_replacement(target, qubit)
    return np.sqrt(fidelity_sq) * target + np.sqrt(1.0 - fidelity_sq) * perp


# -- running the protocol -------------------------------------------------------


@dataclass
class Verdict:
    accepted: bool
    output: np.ndarray | None
    tests_passed: int
    tests_total: int
    outcomes: tuple = field(default=())


def _block_reduce(state: np.ndarray, offset: int, width: int) -> np.ndarray:
    q = dense.num_qubits(state)
    hi, d, lo = 1 << (q - offset - width), 1 << width, 1 << offset
    if state.ndim == 1:
        t = state.reshape(hi, d, lo)
        return np.einsum("xay,xby->ab", t, t.conj())
    t = state.reshape(hi, d, lo, hi, d, lo)
    return np.einsum("xayxby->ab", t)


def _resolve_target(g, rotation, exclude_identity) -> CertificationTarget:
    if isinstance(g, CertificationTarget):
        return g
    return CertificationTarget(g, rotation, exclude_identity)


def run_protocol(
    g: Graph | CertificationTarget,
    M: int,
    src: SourceStrategy,
    key: Key,
    rng: np.random.Generator,
    tau: float = 1.0,
    rotation: LocalRotation | None = None,
) -> Verdict:
    """Run one round of the protocol for a fixed key.

    Every copy other than ``key.r`` is measured, in ascending order, with its
    test observable; the verdict counts the +1 outcomes against the threshold
    ``ceil(tau * (M - 1))``. The output is the state of copy ``r`` after the
    tests (only meaningful, and only returned, on acceptance).
    """
    target = _resolve_target(g, rotation, False)
    if key.M != M:
        raise ValidationError("key was sampled for a different M")
    key.check_group(target.group_size)
    n = target.n
    outcomes = []
    if src.is_product:
        copies = src.copy_states(target.state, M)
        for copy, t in key.tested():
            o, _, _ = dense.measure_observable(copies[copy - 1], target.observable(t), rng)
            outcomes.append(o)
        output = copies[key.r - 1]
    else:
        state = src.global_state(target.state, M)
        for copy, t in key.tested():
            o, state, _ = dense.measure_observable(state, target.observable(t), rng, offset=(copy - 1) * n)
            outcomes.append(o)
        output = _block_reduce(state, (key.r - 1) * n, n)
    passed = sum(1 for o in outcomes if o == 1)
    accepted = passed >= acceptance_threshold(tau, M - 1)
    return Verdict(accepted, output if accepted else None, passed, M - 1, tuple(outcomes))


# -- Monte Carlo ----------------------------------------------------------------


@dataclass
class TrialRecord:
    trial: int
    key_r: int
    accepted: bool
    tests_passed: int
    fidelity_sq: float | None


class TrialRunner:
    """Samples a key and runs one protocol round per call.

    Product sources take a fast path: a table of per-copy pass probabilities
    replaces the dense measurements. Random draws are consumed exactly as in
    :func:`run_protocol` (key first, then one uniform per tested copy in
    ascending order), so both paths agree trial by trial.
    """

    def __init__(self, g, M, src, tau=1.0, rotation=None, exclude_identity=False, target=None):
        self.target = target if target is not None else CertificationTarget(g, rotation, exclude_identity)
        self.M = M
        self.src = src
        self.tau = tau
        self.threshold = acceptance_threshold(tau, M - 1)
        if src.is_product:
            states, idx = src.copy_plan(self.target.state, M)
            self._states = states
            self._idx = np.asarray(idx)
            self._pass = np.array([self.target.pass_probabilities(s) for s in states])
            self._fid = np.array([dense.fidelity_sq(s, self.target.state) for s in states])
        else:
            src.global_state(self.target.state, M)

    def run(self, rng: np.random.Generator):
        """Returns ``(key, accepted, tests_passed, output or None)``."""
        key = self.target.sample_key(self.M, rng)
        if not self.src.is_product:
            v = run_protocol(self.target, self.M, self.src, key, rng, self.tau)
            return key, v.accepted, v.tests_passed, v.output
        copies = np.array([c for c, _ in key.tested()], dtype=np.int64)
        t = np.asarray(key.t, dtype=np.int64)
        p = self._pass[self._idx[copies - 1], t - 1]
        u = rng.random(self.M - 1)
        passed = int(np.count_nonzero(u < p))
        accepted = passed >= self.threshold
        output = self._states[self._idx[key.r - 1]] if accepted else None
        return key, accepted, passed, output

    def output_fidelity_sq(self, key: Key, output: np.ndarray) -> float:
        if self.src.is_product:
            return float(self._fid[self._idx[key.r - 1]])
        return dense.fidelity_sq(output, self.target.state)

    def __call__(self, index: int, rng: np.random.Generator) -> TrialRecord:
        key, accepted, passed, output = self.run(rng)
        f2 = self.output_fidelity_sq(key, output) if accepted else None
        return TrialRecord(index, key.r, accepted, passed, f2)


@dataclass
class PFailEstimate:
    estimate: float
    stderr: float
    p_acc: float
    trials: int
    records: list = field(default_factory=list, repr=False)


def mean_and_stderr(values: np.ndarray) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    mean = float(values.mean())
    if values.size < 2:
        return mean, 0.0
    return mean, float(values.std(ddof=1) / np.sqrt(values.size))


def summarize_records(records: Sequence[TrialRecord]) -> PFailEstimate:
    fails = np.array([(1.0 - r.fidelity_sq) if r.accepted else 0.0 for r in records])
    acc = np.array([1.0 if r.accepted else 0.0 for r in records])
    est, err = mean_and_stderr(fails)
    return PFailEstimate(est, err, float(acc.mean()), len(records), list(records))


def estimate_p_fail(
    g,
    M: int,
    src: SourceStrategy,
    trials: int,
    seed: int,
    tau: float = 1.0,
    rotation: LocalRotation | None = None,
    exclude_identity: bool = False,
    workers: int = 1,
) -> PFailEstimate:
    """Monte Carlo estimate of ``Tr(P_fail rho_out)``.

    Each trial contributes ``[accepted] * (1 - F^2)`` of its output copy, an
    unbiased per-trial expectation of the fail projector.
    """
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    runner = TrialRunner(g, M, src, tau, rotation, exclude_identity)
    return summarize_records(run_trials(runner, trials, seed, workers))


# -- exact evaluation -----------------------------------------------------------


def _at_least(probs: Sequence[float], k: int) -> float:
    """P(at least k successes) for independent Bernoulli trials."""
    dist = np.zeros(len(probs) + 1)
    dist[0] = 1.0
    for p in probs:
        dist[1:] = dist[1:] * (1 - p) + dist[:-1] * p
        dist[0] *= 1 - p
    return float(dist[k:].sum())


def _product_terms(target, M, src, tau):
    """Per ``r``: (P(accept | r), 1 - F^2 of copy r)."""
    states, idx = src.copy_plan(target.state, M)
    allowed = np.asarray(target.allowed) - 1
    mean_pass = [float(target.pass_probabilities(s)[allowed].mean()) for s in states]
    fid = [dense.fidelity_sq(s, target.state) for s in states]
    thr = acceptance_threshold(tau, M - 1)
    out = []
    for r in range(1, M + 1):
        probs = [mean_pass[idx[c - 1]] for c in range(1, M + 1) if c != r]
        out.append((_at_least(probs, thr), 1.0 - fid[idx[r - 1]]))
    return out


def _product_expectation(state: np.ndarray, ops: Sequence[np.ndarray], n: int) -> float:
    """``Tr((ops[M-1] x ... x ops[0]) rho)``, each op on its copy block."""
    moved = state
    for c, op in enumerate(ops):
        if op is not None:
            moved = dense.apply_left(op, moved, c * n)
    if state.ndim == 1:
        return float(np.vdot(state, moved).real)
    return float(np.trace(moved).real)


def _coherent_terms(target, M, src, tau):
    """Per ``r``: (P(accept | r), P(accept and fail | r)) for a global state."""
    state = src.global_state(target.state, M)
    n = target.n
    thr = acceptance_threshold(tau, M - 1)
    eye = np.eye(1 << n)
    fail_op = target.fail_projector()
    n_keys = len(target.allowed) ** (M - 1)
    enumerate_keys = n_keys * M <= KEY_ENUMERATION_LIMIT
    if enumerate_keys:
        choices = [
            [(0.5 * (eye + target.observable(t)), 0.5 * (eye - target.observable(t))) for t in ts]
            for ts in itertools.product(target.allowed, repeat=M - 1)
        ]
    else:
        a = target.mean_pass_operator()
        choices = [[(a, eye - a)] * (M - 1)]
    weight = 1.0 / len(choices)
    out = []
    for r in range(1, M + 1):
        others = [c for c in range(1, M + 1) if c != r]
        p_acc = p_bad = 0.0
        for per_copy in choices:
            for pattern in itertools.product((0, 1), repeat=M - 1):
                if (M - 1) - sum(pattern) < thr:
                    continue
                ops = [None] * M
                for c, which, pair in zip(others, pattern, per_copy):
                    ops[c - 1] = pair[which]
                p_acc += weight * _product_expectation(state, ops, n)
                ops[r - 1] = fail_op
                p_bad += weight * _product_expectation(state, ops, n)
        out.append((p_acc, p_bad))
    return out


def exact_evaluation(
    g,
    M: int,
    src: SourceStrategy,
    tau: float = 1.0,
    rotation: LocalRotation | None = None,
    exclude_identity: bool = False,
) -> dict:
    """Exact fail probability and acceptance probabilities, overall and per ``r``."""
    target = _resolve_target(g, rotation, exclude_identity)
    if src.is_product:
        terms = [(a, a * bad) for a, bad in _product_terms(target, M, src, tau)]
    else:
        terms = _coherent_terms(target, M, src, tau)
    p_acc_r = [a for a, _ in terms]
    p_fail = sum(b for _, b in terms) / M
    return {"p_fail": p_fail, "p_acc": sum(p_acc_r) / M, "p_acc_given_r": p_acc_r}


def exact_p_fail(g, M: int, src: SourceStrategy, tau: float = 1.0, rotation=None, exclude_identity=False) -> float:
    """Exact ``Tr(P_fail rho_out)`` averaged over all keys.

    Product sources factorise copy by copy and the average over each test
    index is taken in closed form. Coherent sources sum the accept projector
    over every key explicitly when there are at most
    ``KEY_ENUMERATION_LIMIT`` of them, and use the averaged pass operator
    otherwise.
    """
    return exact_evaluation(g, M, src, tau, rotation, exclude_identity)["p_fail"]


def exact_acceptance(g, M: int, src: SourceStrategy, tau: float = 1.0, rotation=None, exclude_identity=False) -> float:
    return exact_evaluation(g, M, src, tau, rotation, exclude_identity)["p_acc"]
