"""
Measurement patterns on graph states and delegated-computation soundness.

A pattern measures every non-output vertex once, in a fixed order, in the
X-Y plane basis ``|0> +/- e^{i theta}|1>``. With corrections enabled the
angle actually used for vertex ``j`` is::

    theta_j = (-1)**s_X * phi_j + s_Z * pi

where ``s_X`` (``s_Z``) is the parity of the earlier outcomes listed in the X
(Z) correction set of ``j``. Output vertices receive ``X**s_X`` then
``Z**s_Z`` from their own correction sets. Outcome bit 0 means the ``+``
branch.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .. import dense
from ..errors import PatternFlowError, ValidationError
from ..graphs import Graph, graph_from_spec, line, state_vector
from ..montecarlo import run_trials
from ..protocol import TrialRunner, mean_and_stderr

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


@dataclass(frozen=True, eq=False)
class MeasurementPattern:
    graph: Graph
    inputs: tuple
    outputs: tuple
    order: tuple
    angles: Mapping[int, float]
    x_deps: Mapping[int, frozenset] = field(default_factory=dict)
    z_deps: Mapping[int, frozenset] = field(default_factory=dict)

    def __post_init__(self):
        n = self.graph.n
        for name in ("inputs", "outputs", "order"):
            object.__setattr__(self, name, tuple(int(v) for v in getattr(self, name)))
        object.__setattr__(self, "angles", {int(k): float(v) for k, v in self.angles.items()})
        for name in ("x_deps", "z_deps"):
            deps = {int(k): frozenset(int(i) for i in v) for k, v in getattr(self, name).items()}
            object.__setattr__(self, name, deps)

        if len(set(self.order)) != len(self.order):
            raise ValidationError("a vertex is measured twice")
        if set(self.order) & set(self.outputs):
            raise ValidationError("output vertices cannot be measured")
        if set(self.order) | set(self.outputs) != set(range(n)):
            raise ValidationError("every non-output vertex must be measured exactly once")
        if not set(self.inputs) <= set(range(n)):
            raise ValidationError("input vertex outside the graph")
        missing = set(self.order) - set(self.angles)
        if missing:
            raise ValidationError(f"no angle for vertices {sorted(missing)}")
        position = {v: i for i, v in enumerate(self.order)}
        for deps in (self.x_deps, self.z_deps):
            for v, srcs in deps.items():
                limit = position.get(v, len(self.order))
                if any(position.get(s, limit) >= limit for s in srcs):
                    raise ValidationError(f"corrections of vertex {v} use outcomes not yet available")

    @classmethod
    def from_flow(cls, graph, inputs, outputs, order, angles, flow: Mapping[int, int]) -> "MeasurementPattern":
        """Correction sets induced by a flow ``i -> f(i)``.

        The outcome of ``i`` sends an X byproduct to ``f(i)`` and a Z byproduct
        to every other neighbour of ``f(i)``.
        """
        x_deps: dict = {}
        z_deps: dict = {}
        for i in order:
            fi = flow[i]
            if fi not in graph.neighbours(i):
                raise ValidationError(f"flow successor {fi} of {i} is not a neighbour")
            x_deps.setdefault(fi, set()).add(i)
            for k in graph.neighbours(fi):
                if k != i:
                    z_deps.setdefault(k, set()).symmetric_difference_update({i})
        return cls(graph, tuple(inputs), tuple(outputs), tuple(order), angles, x_deps, z_deps)

    def without_corrections(self) -> "MeasurementPattern":
        return MeasurementPattern(self.graph, self.inputs, self.outputs, self.order, self.angles)


def line_pattern(angles: Sequence[float]) -> MeasurementPattern:
    """Linear cluster on ``len(angles) + 1`` qubits: input 0, output last."""
    n = len(angles) + 1
    order = tuple(range(n - 1))
    return MeasurementPattern.from_flow(
        line(n), (0,), (n - 1,), order, dict(enumerate(angles)), {i: i + 1 for i in order}
    )


def line_unitary(angles: Sequence[float]) -> np.ndarray:
    """Unitary implemented by :func:`line_pattern`: ``prod_j H diag(1, e^{-i phi_j})``."""
    u = np.eye(2, dtype=complex)
    for phi in angles:
        u = _H @ np.diag([1.0, np.exp(-1j * phi)]) @ u
    return u


def load_pattern(path: str | Path) -> MeasurementPattern:
    """Read a JSON pattern file.

    Keys: ``graph`` (builtin keyword or edge-list path), ``inputs``,
    ``outputs``, ``order``, ``angles`` (vertex -> radians) and either
    ``flow`` (vertex -> successor) or ``x_corrections``/``z_corrections``
    (vertex -> list of earlier measured vertices).
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read pattern file {path}: {exc}") from None
    known = {"graph", "inputs", "outputs", "order", "angles", "flow", "x_corrections", "z_corrections"}
    unknown = set(data) - known
    if unknown:
        raise ValidationError(f"unknown pattern keys: {sorted(unknown)}")
    spec = str(data["graph"])
    if not spec.split(":")[0] in ("line", "ring", "star", "complete") and not Path(spec).is_absolute():
        spec = str(path.parent / spec)
    g = graph_from_spec(spec)
    angles = {int(k): float(v) for k, v in data["angles"].items()}
    if "flow" in data:
        flow = {int(k): int(v) for k, v in data["flow"].items()}
        return MeasurementPattern.from_flow(g, data["inputs"], data["outputs"], data["order"], angles, flow)
    return MeasurementPattern(
        g,
        tuple(data["inputs"]),
        tuple(data["outputs"]),
        tuple(data["order"]),
        angles,
        {int(k): v for k, v in data.get("x_corrections", {}).items()},
        {int(k): v for k, v in data.get("z_corrections", {}).items()},
    )


# -- simulation -----------------------------------------------------------------


def basis_observable(theta: float) -> np.ndarray:
    """``cos(theta) X + sin(theta) Y``; its +1 eigenvector is ``|0> + e^{i theta}|1>``."""
    return np.array([[0, np.exp(-1j * theta)], [np.exp(1j * theta), 0]], dtype=complex)


def _parity(bits: Mapping[int, int], deps) -> int:
    return sum(bits[i] for i in deps) % 2


def measured_angle(pattern: MeasurementPattern, v: int, bits: Mapping[int, int], with_corrections: bool) -> float:
    phi = pattern.angles[v]
    if not with_corrections:
        return phi
    sx = _parity(bits, pattern.x_deps.get(v, ()))
    sz = _parity(bits, pattern.z_deps.get(v, ()))
    return (-1) ** sx * phi + sz * np.pi


def permute_qubits(rho: np.ndarray, order: Sequence[int]) -> np.ndarray:
    """Reorder qubits so that new qubit ``i`` is old qubit ``order[i]``."""
    q = len(order)
    if list(order) == list(range(q)):
        return rho
    # numpy axis a is qubit q-1-a
    axes = [q - 1 - order[q - 1 - a] for a in range(q)]
    if rho.ndim == 1:
        return rho.reshape((2,) * q).transpose(axes).reshape(-1)
    t = rho.reshape((2,) * (2 * q)).transpose(axes + [q + a for a in axes])
    return t.reshape(rho.shape)


def run_pattern(
    state: np.ndarray,
    pattern: MeasurementPattern,
    rng: np.random.Generator | None,
    with_corrections: bool = True,
    outcomes: Sequence[int] | None = None,
):
    """Execute the pattern on a state of the graph's qubits.

    Outcomes are sampled from ``rng`` (one uniform per measurement) unless
    ``outcomes`` fixes them, in which case the state is post-selected.
    Returns ``(outcome bits in measurement order, output density matrix)``;
    output qubit ``i`` is ``pattern.outputs[i]``.
    """
    state = np.asarray(state, dtype=complex)
    if dense.num_qubits(state) != pattern.graph.n:
        raise ValidationError("state size does not match the pattern graph")
    bits: dict[int, int] = {}
    for step, v in enumerate(pattern.order):
        obs = basis_observable(measured_angle(pattern, v, bits, with_corrections))
        if outcomes is None:
            o, state, _ = dense.measure_observable(state, obs, rng, offset=v)
        else:
            o = 1 - 2 * int(outcomes[step])
            proj = 0.5 * (np.eye(2) + o * obs)
            state = dense.conjugate(proj, state, offset=v)
            norm = np.linalg.norm(state) ** 2 if state.ndim == 1 else np.trace(state).real
            if norm <= 1e-15:
                raise PatternFlowError(f"forced outcome on vertex {v} has zero probability")
            state = state / (np.sqrt(norm) if state.ndim == 1 else norm)
        bits[v] = 0 if o == 1 else 1
    keep = sorted(pattern.outputs)
    out = dense.partial_trace(state, keep)
    out = permute_qubits(out, [keep.index(v) for v in pattern.outputs])
    if with_corrections:
        for i, v in enumerate(pattern.outputs):
            if _parity(bits, pattern.x_deps.get(v, ())):
                out = dense.conjugate(_X, out, offset=i)
            if _parity(bits, pattern.z_deps.get(v, ())):
                out = dense.conjugate(_Z, out, offset=i)
    return tuple(bits[v] for v in pattern.order), out


def ideal_output(pattern: MeasurementPattern) -> np.ndarray:
    """Output vector of the corrected pattern on the ideal graph state."""
    _, rho = run_pattern(state_vector(pattern.graph), pattern, None, True, outcomes=[0] * len(pattern.order))
    vals, vecs = np.linalg.eigh(rho)
    return vecs[:, -1]


# -- induced unitaries ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class UnitaryEnsembleSample:
    outcomes: tuple
    probability: float
    unitary: np.ndarray


def _graph_phase(g: Graph) -> np.ndarray:
    idx = np.arange(1 << g.n)
    parity = np.zeros(idx.shape, dtype=np.int64)
    for u, v in g.edges:
        parity ^= ((idx >> u) & (idx >> v)) & 1
    return 1 - 2 * parity


def kraus_operator(pattern: MeasurementPattern, outcomes: Sequence[int]) -> np.ndarray:
    """Linear map from the input qubits to the outputs for fixed outcomes.

    Column ``b`` is the (unnormalised) output when input qubit ``k`` is
    prepared in ``|b_k>``, other vertices in ``|+>``, followed by the graph's
    controlled-Z gates and projection of the measured vertices onto the
    uncorrected outcome basis states.
    """
    g = pattern.graph
    n_in = len(pattern.inputs)
    plus = np.ones(2, dtype=complex) / np.sqrt(2)
    phase = _graph_phase(g)
    cols = []
    for b in range(1 << n_in):
        factors = [plus] * g.n
        for k, v in enumerate(pattern.inputs):
            factors[v] = np.eye(2, dtype=complex)[(b >> k) & 1]
        vec = dense.kron_vectors(factors) * phase
        remaining = list(range(g.n))
        for v, s in zip(pattern.order, outcomes):
            theta = pattern.angles[v]
            sign = 1 if int(s) == 0 else -1
            bra = np.array([1.0, sign * np.exp(-1j * theta)]) / np.sqrt(2)
            pos = remaining.index(v)
            q = len(remaining)
            t = vec.reshape(1 << (q - pos - 1), 2, 1 << pos)
            vec = np.einsum("b,xby->xy", bra, t).reshape(-1)
            remaining.pop(pos)
        vec = permute_qubits(vec, [remaining.index(v) for v in pattern.outputs])
        cols.append(vec)
    return np.column_stack(cols)


def induced_unitary(pattern: MeasurementPattern, outcomes: Sequence[int], tol: float = 1e-8) -> UnitaryEnsembleSample:
    """Unitary applied to ``|+>^|I|`` by the uncorrected pattern for one outcome string."""
    if len(outcomes) != len(pattern.order):
        raise ValidationError("one outcome per measured vertex is required")
    if len(pattern.inputs) != len(pattern.outputs):
        raise PatternFlowError("inputs and outputs differ in size")
    k = kraus_operator(pattern, outcomes)
    kk = k.conj().T @ k
    p = float(np.trace(kk).real) / kk.shape[0]
    if p <= tol or np.max(np.abs(kk - p * np.eye(kk.shape[0]))) > tol:
        raise PatternFlowError(f"outcomes {tuple(outcomes)} do not induce a unitary")
    return UnitaryEnsembleSample(tuple(int(s) for s in outcomes), p, k / np.sqrt(p))


def enumerate_ensemble(pattern: MeasurementPattern) -> list[UnitaryEnsembleSample]:
    return [induced_unitary(pattern, m) for m in itertools.product((0, 1), repeat=len(pattern.order))]


def unitary_deviation(pattern: MeasurementPattern, outcomes: Sequence[int]) -> float:
    """``max |K^dagger K - p I|`` for one outcome string."""
    k = kraus_operator(pattern, outcomes)
    kk = k.conj().T @ k
    p = np.trace(kk).real / kk.shape[0]
    return float(np.max(np.abs(kk - p * np.eye(kk.shape[0]))))


# -- delegated computation soundness ---------------------------------------------


@dataclass
class DelegatedRecord:
    trial: int
    key_r: int
    accepted: bool
    raw_fail: float
    comp_fail: float
    comp_fidelity_sq: float | None


class _DelegatedTrial:
    def __init__(self, runner: TrialRunner, pattern: MeasurementPattern, ideal: np.ndarray):
        self.runner = runner
        self.pattern = pattern
        self.ideal = ideal

    def __call__(self, index, rng):
        key, accepted, _, output = self.runner.run(rng)
        if not accepted:
            return DelegatedRecord(index, key.r, False, 0.0, 0.0, None)
        raw = 1.0 - self.runner.output_fidelity_sq(key, output)
        _, out = run_pattern(output, self.pattern, rng, with_corrections=True)
        f2 = dense.fidelity_sq(out, self.ideal)
        return DelegatedRecord(index, key.r, True, raw, 1.0 - f2, f2)


@dataclass
class DelegatedResult:
    estimate: float
    stderr: float
    p_acc: float
    raw_estimate: float
    raw_stderr: float
    diff_stderr: float
    fidelity_sq: float
    fidelity_sq_stderr: float
    trials: int
    records: list = field(default_factory=list, repr=False)


def delegated_soundness(g, pattern, M, src, trials, seed, tau=1.0, workers=1) -> DelegatedResult:
    """Estimate ``Tr(P_fail^comp rho_out^comp)`` for the corrected pattern.

    The protocol part of every trial consumes the same draws as
    :func:`graphcert.protocol.estimate_p_fail` with the same seed, so the
    ``raw_*`` figures equal that estimator exactly.
    """
    if pattern.graph != g:
        raise ValidationError("pattern is defined on a different graph")
    runner = TrialRunner(g, M, src, tau)
    recs = run_trials(_DelegatedTrial(runner, pattern, ideal_output(pattern)), trials, seed, workers)
    comp = np.array([r.comp_fail for r in recs])
    raw = np.array([r.raw_fail for r in recs])
    acc = np.array([r.accepted for r in recs], dtype=float)
    est, err = mean_and_stderr(comp)
    raw_est, raw_err = mean_and_stderr(raw)
    _, diff_err = mean_and_stderr(raw - comp)
    f2 = np.array([r.comp_fidelity_sq for r in recs if r.accepted])
    f2_mean, f2_err = mean_and_stderr(f2) if f2.size else (float("nan"), float("nan"))
    return DelegatedResult(est, err, float(acc.mean()), raw_est, raw_err, diff_err, f2_mean, f2_err, trials, recs)
