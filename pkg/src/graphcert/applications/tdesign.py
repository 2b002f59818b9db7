"""Frame potentials and certified measurement-induced unitary ensembles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .. import dense
from ..errors import ValidationError
from ..montecarlo import run_trials
from ..protocol import TrialRunner, mean_and_stderr
from .mbqc import MeasurementPattern, enumerate_ensemble, run_pattern


def _stack(unitaries: Sequence[np.ndarray]) -> np.ndarray:
    mats = [np.asarray(u, dtype=complex) for u in unitaries]
    if len({m.shape for m in mats}) != 1:
        raise ValidationError("unitaries must share one dimension")
    return np.stack(mats).reshape(len(mats), -1)


def frame_potential(samples: Sequence[np.ndarray], t: int, chunk: int = 512) -> float:
    """Mean of ``|Tr(U_a^dagger U_b)|**(2t)`` over ordered pairs ``a != b``.

    Dropping the diagonal makes this an unbiased estimate of the frame
    potential of the distribution the samples were drawn from.
    """
    if t < 1:
        raise ValidationError("t must be at least 1")
    if len(samples) < 2:
        raise ValidationError("need at least two samples")
    v = _stack(samples)
    n = v.shape[0]
    total = 0.0
    diag = 0.0
    for start in range(0, n, chunk):
        block = v[start : start + chunk].conj() @ v.T
        vals = np.abs(block) ** (2 * t)
        total += float(vals.sum())
        idx = np.arange(block.shape[0])
        diag += float(vals[idx, start + idx].sum())
    return (total - diag) / (n * (n - 1))


def ensemble_frame_potential(unitaries: Sequence[np.ndarray], weights: Sequence[float], t: int) -> float:
    """Exact ``sum_{a,b} p_a p_b |Tr(U_a^dagger U_b)|**(2t)`` of a weighted ensemble."""
    v = _stack(unitaries)
    w = np.asarray(weights, dtype=float)
    if w.shape != (v.shape[0],):
        raise ValidationError("one weight per unitary is required")
    gram = np.abs(v.conj() @ v.T) ** (2 * t)
    return float(w @ gram @ w)


def haar_frame_potential(d: int, t: int) -> float:
    """Haar value ``t!``; valid for ``d >= t``."""
    if d < t:
        raise ValidationError("closed form t! holds only for d >= t")
    return float(math.factorial(t))


def haar_samples(d: int, count: int, rng: np.random.Generator) -> list[np.ndarray]:
    return [dense.haar_unitary(d, rng) for _ in range(count)]


def certified_ensemble_fidelity(p_acc: float, M: int) -> float:
    """Lower bound ``1 - 1/(P_acc M)`` on the squared fidelity after acceptance."""
    if not 0.0 < p_acc <= 1.0:
        raise ValidationError("P_acc must lie in (0, 1]")
    if M < 2:
        raise ValidationError("M must be at least 2")
    return 1.0 - 1.0 / (p_acc * M)


# -- certified sampling ---------------------------------------------------------


class _EnsembleTrial:
    def __init__(self, runner: TrialRunner, pattern: MeasurementPattern, targets: dict):
        self.runner = runner
        self.pattern = pattern
        self.targets = targets

    def __call__(self, index, rng):
        key, accepted, _, output = self.runner.run(rng)
        if not accepted:
            return index, False, None, None
        outcomes, out = run_pattern(output, self.pattern, rng, with_corrections=False)
        return index, True, outcomes, dense.fidelity_sq(out, self.targets[outcomes])


@dataclass
class EnsembleCertification:
    p_acc: float
    fidelity_sq: float
    fidelity_sq_stderr: float
    bound: float
    passed: bool
    frame_potentials: dict
    trials: int
    records: list = field(default_factory=list, repr=False)


def certify_ensemble(g, pattern, M, src, trials, seed, t_max: int = 2, tau: float = 1.0, workers: int = 1):
    """Sample unitaries from the uncorrected pattern on the protocol output.

    For every accepted trial the pattern runs without corrections; the output
    for outcome string ``m`` is compared with ``U^m |+>``. The mean squared
    fidelity over accepted trials is checked against
    :func:`certified_ensemble_fidelity` with the measured acceptance rate.
    """
    pattern = pattern.without_corrections()
    if pattern.graph != g:
        raise ValidationError("pattern is defined on a different graph")
    ensemble = enumerate_ensemble(pattern)
    d = ensemble[0].unitary.shape[0]
    plus = np.ones(d, dtype=complex) / np.sqrt(d)
    targets = {s.outcomes: s.unitary @ plus for s in ensemble}
    runner = TrialRunner(g, M, src, tau)
    recs = run_trials(_EnsembleTrial(runner, pattern, targets), trials, seed, workers)
    acc = np.array([r[1] for r in recs], dtype=float)
    p_acc = float(acc.mean())
    f2 = np.array([r[3] for r in recs if r[1]])
    f2_mean, f2_err = mean_and_stderr(f2) if f2.size else (float("nan"), float("nan"))
    bound = certified_ensemble_fidelity(p_acc, M) if p_acc > 0 else float("nan")
    fps = {
        k: ensemble_frame_potential([s.unitary for s in ensemble], [s.probability for s in ensemble], k)
        for k in range(1, t_max + 1)
    }
    passed = bool(p_acc > 0 and f2_mean >= bound - 3 * f2_err)
    return EnsembleCertification(p_acc, f2_mean, f2_err, bound, passed, fps, trials, recs)
