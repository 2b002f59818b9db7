import itertools
import json

import numpy as np
import pytest

from graphcert import dense, graphs
from graphcert.applications import mbqc
from graphcert.errors import PatternFlowError, ValidationError
from graphcert.graphs import state_vector
from graphcert.protocol import Honest, SingleCopyReplace, orthogonal_replacement

H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PLUS = np.ones(2, dtype=complex) / np.sqrt(2)


def _phase_free_distance(u, v):
    overlap = np.trace(u.conj().T @ v)
    return np.max(np.abs(u * (overlap / abs(overlap)) - v))


def test_k2_measurement_example():
    pat = mbqc.line_pattern([0.0]).without_corrections()
    _, out = mbqc.run_pattern(state_vector(graphs.line(2)), pat, None, outcomes=[0])
    assert np.allclose(out, np.diag([1, 0]))


def test_honest_line_pattern_matches_circuit():
    angles = [0.3, 1.1, -0.7, 2.0]
    pat = mbqc.line_pattern(angles)
    target = mbqc.line_unitary(angles) @ PLUS
    psi = state_vector(pat.graph)
    for m in itertools.product((0, 1), repeat=4):
        _, out = mbqc.run_pattern(psi, pat, None, with_corrections=True, outcomes=m)
        assert dense.fidelity_sq(out, target) == pytest.approx(1.0, abs=1e-8)
    rng = np.random.default_rng(0)
    for _ in range(20):
        _, out = mbqc.run_pattern(psi, pat, rng)
        assert dense.fidelity_sq(out, target) == pytest.approx(1.0, abs=1e-8)


def test_zero_outcomes_need_no_corrections():
    pat = mbqc.line_pattern([0.4, -1.2])
    psi = state_vector(pat.graph)
    _, a = mbqc.run_pattern(psi, pat, None, True, outcomes=[0, 0])
    _, b = mbqc.run_pattern(psi, pat, None, False, outcomes=[0, 0])
    assert np.allclose(a, b)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_induced_unitaries_exhaustive(n):
    rng = np.random.default_rng(n)
    pat = mbqc.line_pattern(rng.uniform(-np.pi, np.pi, size=n - 1)).without_corrections()
    ens = mbqc.enumerate_ensemble(pat)
    assert sum(s.probability for s in ens) == pytest.approx(1.0, abs=1e-8)
    psi = state_vector(pat.graph)
    for s in ens:
        assert mbqc.unitary_deviation(pat, s.outcomes) < 1e-8
        assert np.allclose(s.unitary.conj().T @ s.unitary, np.eye(2), atol=1e-8)
        # the uncorrected branch output is U^m |+>
        _, out = mbqc.run_pattern(psi, pat, None, False, outcomes=s.outcomes)
        assert dense.fidelity_sq(out, s.unitary @ PLUS) == pytest.approx(1.0, abs=1e-8)


def test_two_qubit_induced_unitary_is_hadamard():
    s = mbqc.induced_unitary(mbqc.line_pattern([0.0]).without_corrections(), [0])
    assert s.probability == pytest.approx(0.5)
    assert _phase_free_distance(s.unitary, H) < 1e-12


def test_byproduct_relation_three_qubits():
    angles = [0.9, -0.4]
    pat = mbqc.line_pattern(angles)
    u0 = mbqc.induced_unitary(pat.without_corrections(), [0, 0]).unitary
    assert _phase_free_distance(u0, mbqc.line_unitary(angles)) < 1e-10
    psi = state_vector(pat.graph)
    for m in itertools.product((0, 1), repeat=2):
        _, out = mbqc.run_pattern(psi, pat, None, True, outcomes=m)
        assert dense.fidelity_sq(out, u0 @ PLUS) == pytest.approx(1.0, abs=1e-10)


def test_non_unitary_branch_raises():
    # measuring a |+> neighbour of the input applies (I + e^{-i theta} Z)/2 to it
    pat = mbqc.MeasurementPattern(graphs.line(3), (1,), (2,), (0, 1), {0: 0.3, 1: 0.0})
    assert mbqc.unitary_deviation(pat, [0, 0]) > 1e-3
    with pytest.raises(PatternFlowError):
        mbqc.induced_unitary(pat, [0, 0])


def test_pattern_validation():
    g = graphs.line(3)
    with pytest.raises(ValidationError):
        mbqc.MeasurementPattern(g, (0,), (2,), (0, 0), {0: 0.0})
    with pytest.raises(ValidationError):
        mbqc.MeasurementPattern(g, (0,), (2,), (0, 1), {0: 0.0, 1: 0.0}, {0: {1}})


def test_load_pattern(tmp_path):
    path = tmp_path / "p.json"
    spec = {
        "graph": "line:3",
        "inputs": [0],
        "outputs": [2],
        "order": [0, 1],
        "angles": {"0": 0.5, "1": -0.25},
        "flow": {"0": 1, "1": 2},
    }
    path.write_text(json.dumps(spec))
    loaded = mbqc.load_pattern(path)
    ref = mbqc.line_pattern([0.5, -0.25])
    assert loaded.x_deps == ref.x_deps and loaded.z_deps == ref.z_deps
    spec["colour"] = "red"
    path.write_text(json.dumps(spec))
    with pytest.raises(ValidationError):
        mbqc.load_pattern(path)


def test_delegated_honest_is_zero():
    pat = mbqc.line_pattern([0.3, 1.1])
    res = mbqc.delegated_soundness(pat.graph, pat, 4, Honest(), 200, seed=3)
    assert res.estimate == pytest.approx(0.0, abs=1e-12)
    assert res.p_acc == 1.0


def test_delegated_not_above_raw():
    pat = mbqc.line_pattern([0.3, 1.1, -0.7])
    src = SingleCopyReplace(1, orthogonal_replacement(state_vector(pat.graph), qubit=1))
    res = mbqc.delegated_soundness(pat.graph, pat, 4, src, 3000, seed=8)
    assert res.estimate <= res.raw_estimate + 3 * res.diff_stderr
    assert res.estimate <= 0.25 + 3 * res.stderr
