import itertools

import numpy as np
import pytest

from graphcert import dense, graphs, protocol
from graphcert.errors import CapacityError, ValidationError
from graphcert.graphs import ghz_rotation, star, state_vector
from graphcert.montecarlo import trial_rng
from graphcert.protocol import (
    CertificationTarget,
    Coherent,
    Honest,
    IIDChannel,
    Key,
    ProductState,
    SingleCopyReplace,
    TrialRunner,
    acceptance_threshold,
    estimate_p_fail,
    exact_evaluation,
    exact_p_fail,
    orthogonal_replacement,
    partial_replacement,
    run_protocol,
    sample_key,
)


def test_key_validation():
    with pytest.raises(ValidationError):
        Key(1, 1, ())
    with pytest.raises(ValidationError):
        Key(3, 4, (1, 1))
    with pytest.raises(ValidationError):
        Key(3, 1, (1,))
    with pytest.raises(ValidationError):
        sample_key(1, 2, np.random.default_rng(0))


def test_sample_key_uniform():
    rng = np.random.default_rng(11)
    counts = np.zeros((2, 2))
    draws = 10_000
    for _ in range(draws):
        k = sample_key(2, 2, rng)
        counts[k.r - 1, k.t[0] - 1] += 1
    expected = draws / 4
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    assert chi2 < 14.16  # 3 degrees of freedom, upper 0.27% point


def test_sample_key_replay_and_exclusion():
    a = sample_key(5, 8, trial_rng(99, 3))
    b = sample_key(5, 8, trial_rng(99, 3))
    assert a == b
    rng = np.random.default_rng(0)
    assert all(1 not in sample_key(6, 4, rng, exclude_identity=True).t for _ in range(500))


def test_acceptance_threshold():
    assert acceptance_threshold(1.0, 7) == 7
    assert acceptance_threshold(0.5, 3) == 2
    assert acceptance_threshold(0.7, 10) == 7


@pytest.mark.parametrize("g,M", [(graphs.line(3), 4), (graphs.ring(3), 3), (graphs.line(2), 3)])
def test_completeness_exhaustive(g, M):
    target = CertificationTarget(g)
    rng = np.random.default_rng(0)
    for r in range(1, M + 1):
        for t in itertools.product(range(1, target.group_size + 1), repeat=M - 1):
            v = run_protocol(target, M, Honest(), Key(M, r, t), rng)
            assert v.accepted and v.tests_passed == M - 1
            assert dense.fidelity_sq(v.output, target.state) == pytest.approx(1.0, abs=1e-12)


def test_replacement_untested_is_accepted():
    g = graphs.line(3)
    psi = state_vector(g)
    bad = orthogonal_replacement(psi)
    src = SingleCopyReplace(2, bad)
    v = run_protocol(g, 4, src, Key(4, 2, (5, 3, 8)), np.random.default_rng(0))
    assert v.accepted
    assert dense.fidelity(v.output, psi) == pytest.approx(0.0, abs=1e-12)


def test_replacement_tested_with_anticommuting_generator_is_rejected():
    g = graphs.line(3)
    src = SingleCopyReplace(2, orthogonal_replacement(state_vector(g)))
    # t = 2 is the group element with mask 1, the generator S_0 = X_0 Z_1
    for seed in range(20):
        v = run_protocol(g, 3, src, Key(3, 1, (2, 1)), np.random.default_rng(seed))
        assert not v.accepted and v.outcomes == (-1, 1)


def test_coherent_source_cap():
    with pytest.raises(CapacityError):
        Coherent(np.ones(1 << 21) / np.sqrt(1 << 21)).global_state(np.ones(2 ** 7) / np.sqrt(2 ** 7), 3)


def test_exact_examples():
    g = graphs.line(3)
    psi = state_vector(g)
    assert exact_p_fail(g, 5, Honest()) == 0.0
    assert exact_p_fail(g, 2, SingleCopyReplace(1, orthogonal_replacement(psi))) == pytest.approx(0.5)
    for f2 in (0.0, 0.3, 0.9):
        src = SingleCopyReplace(2, partial_replacement(psi, f2))
        assert exact_p_fail(g, 4, src) == pytest.approx((1 - f2) / 4, abs=1e-12)


def test_product_and_coherent_routes_agree():
    g = graphs.line(2)
    rng = np.random.default_rng(12)
    for M in (2, 3):
        states = [dense.random_density(4, rng) for _ in range(M)]
        prod = exact_evaluation(g, M, ProductState(tuple(states)))
        coh = exact_evaluation(g, M, Coherent(dense.kron_all(states)))
        assert prod["p_fail"] == pytest.approx(coh["p_fail"], abs=1e-12)
        assert prod["p_acc"] == pytest.approx(coh["p_acc"], abs=1e-12)


def test_averaged_pass_operator_route_agrees():
    g = graphs.line(2)
    rng = np.random.default_rng(13)
    src = Coherent(dense.haar_state(1 << 6, rng))
    explicit = exact_p_fail(g, 3, src)
    old = protocol.KEY_ENUMERATION_LIMIT
    try:
        protocol.KEY_ENUMERATION_LIMIT = 0
        averaged = exact_p_fail(g, 3, src)
    finally:
        protocol.KEY_ENUMERATION_LIMIT = old
    assert explicit == pytest.approx(averaged, abs=1e-12)


def test_exchange_symmetric_source_is_blind_to_r():
    g = graphs.ring(3)
    res = exact_evaluation(g, 4, IIDChannel.depolarizing(0.2))
    assert np.allclose(res["p_acc_given_r"], res["p_acc_given_r"][0])


def _sources(psi, M, rng):
    return [
        IIDChannel.depolarizing(0.1),
        SingleCopyReplace(M, partial_replacement(psi, 0.4)),
        ProductState(tuple(dense.random_density(psi.size, rng) for _ in range(M))),
    ]


def test_fast_path_matches_reference_per_trial():
    g = graphs.line(3)
    M = 4
    target = CertificationTarget(g)
    for src in _sources(target.state, M, np.random.default_rng(14)):
        runner = TrialRunner(g, M, src, target=target)
        for i in range(300):
            key, accepted, passed, _ = runner.run(trial_rng(5, i))
            ref_rng = trial_rng(5, i)
            ref_key = target.sample_key(M, ref_rng)
            v = run_protocol(target, M, src, ref_key, ref_rng)
            assert key == ref_key
            assert (accepted, passed) == (v.accepted, v.tests_passed)


@pytest.mark.parametrize("tau", [1.0, 0.5])
def test_monte_carlo_agrees_with_exact(tau):
    g = graphs.line(3)
    M = 5
    psi = state_vector(g)
    for src in _sources(psi, M, np.random.default_rng(15)):
        est = estimate_p_fail(g, M, src, 4000, seed=21, tau=tau)
        ex = exact_evaluation(g, M, src, tau)
        assert abs(est.estimate - ex["p_fail"]) <= 4 * est.stderr + 1e-12
        assert abs(est.p_acc - ex["p_acc"]) <= 4 * np.sqrt(ex["p_acc"] * (1 - ex["p_acc"]) / 4000) + 1e-12


def test_coherent_monte_carlo_agrees_with_exact():
    g = graphs.line(2)
    src = Coherent(dense.haar_state(1 << 6, np.random.default_rng(16)))
    est = estimate_p_fail(g, 3, src, 3000, seed=4)
    assert abs(est.estimate - exact_p_fail(g, 3, src)) <= 4 * est.stderr


def test_honest_estimate_is_zero():
    est = estimate_p_fail(graphs.star(4), 6, Honest(), 500, seed=1)
    assert est.estimate == 0.0 and est.p_acc == 1.0


def test_rotated_ghz_protocol_is_complete():
    n = 4
    target = CertificationTarget(star(n), ghz_rotation(n))
    assert dense.fidelity_sq(target.state, graphs.ghz_state(n)) == pytest.approx(1.0)
    rng = np.random.default_rng(0)
    for _ in range(200):
        v = run_protocol(target, 3, Honest(), target.sample_key(3, rng), rng)
        assert v.accepted
    assert exact_p_fail(star(n), 4, IIDChannel.depolarizing(0.1), rotation=ghz_rotation(n)) <= 0.25


def test_verdict_threshold_invariant():
    g = graphs.line(2)
    src = IIDChannel.depolarizing(0.3)
    rng = np.random.default_rng(17)
    target = CertificationTarget(g)
    for tau in (1.0, 0.6):
        thr = acceptance_threshold(tau, 4)
        for _ in range(200):
            v = run_protocol(target, 5, src, target.sample_key(5, rng), rng, tau)
            assert v.accepted == (v.tests_passed >= thr)
            assert (v.output is not None) == v.accepted
