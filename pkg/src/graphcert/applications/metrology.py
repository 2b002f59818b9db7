"""Quantum Fisher information and the certified GHZ phase-estimation bound."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import dense
from ..errors import ValidationError
from ..graphs import ghz_rotation, ghz_state, star
from ..montecarlo import run_trials
from ..protocol import TrialRunner

EIG_CUTOFF = 1e-12


def jz(n: int) -> np.ndarray:
    """Collective spin ``J_z = (1/2) sum_k Z_k``."""
    diag = np.zeros(1 << n)
    idx = np.arange(1 << n)
    for k in range(n):
        diag += 0.5 * (1 - 2 * ((idx >> k) & 1))
    return np.diag(diag).astype(complex)


def qfi(rho: np.ndarray, generator: np.ndarray, cutoff: float = EIG_CUTOFF) -> float:
    """Quantum Fisher information of ``rho`` for phases ``exp(-i psi H)``.

    ``2 sum_{ij} (l_i - l_j)**2 / (l_i + l_j) |<v_i|H|v_j>|**2`` over pairs
    with ``l_i + l_j > cutoff``. A state vector is treated as pure.
    """
    h = np.asarray(generator, dtype=complex)
    if np.max(np.abs(h - h.conj().T)) > 1e-9:
        raise ValidationError("generator must be Hermitian")
    rho = np.asarray(rho, dtype=complex)
    if rho.shape[0] != h.shape[0]:
        raise ValidationError("state and generator dimensions differ")
    if rho.ndim == 1:
        return qfi_pure(rho, h)
    lam, vecs = dense.eig_hermitian(rho)
    lam = np.clip(lam, 0.0, None)
    hij = np.abs(vecs.conj().T @ h @ vecs) ** 2
    s = lam[:, None] + lam[None, :]
    d = (lam[:, None] - lam[None, :]) ** 2
    mask = s > cutoff
    return float(2.0 * np.sum(d[mask] / s[mask] * hij[mask]))


def qfi_pure(psi: np.ndarray, generator: np.ndarray) -> float:
    """``4 (<H^2> - <H>^2)`` for a pure state."""
    hpsi = generator @ psi
    mean = np.vdot(psi, hpsi).real
    return float(4.0 * (np.vdot(hpsi, hpsi).real - mean**2))


def cramer_rao(nu: int, fq: float) -> float:
    """Smallest attainable mean squared error ``1 / (nu F_Q)``."""
    if nu < 1:
        raise ValidationError("need at least one repetition")
    if fq <= 0:
        raise ValidationError("Fisher information must be positive")
    return 1.0 / (nu * fq)


def certified_qfi_bound(N: int, p_acc: float, M: int) -> float:
    """``N**2 (1 - 6/(P_acc M))``; negative values mean the bound is vacuous."""
    if not 0.0 < p_acc <= 1.0:
        raise ValidationError("P_acc must lie in (0, 1]")
    if M < 2:
        raise ValidationError("M must be at least 2")
    return N**2 * (1.0 - 6.0 / (p_acc * M))


def continuity_gap(N: int, fid: float) -> float:
    """Largest QFI difference ``6 sqrt(1 - F**2) N**2`` allowed between close states."""
    return 6.0 * np.sqrt(max(0.0, 1.0 - fid**2)) * N**2


# -- rotated GHZ protocol -------------------------------------------------------


class _OutputTrial:
    def __init__(self, runner: TrialRunner):
        self.runner = runner

    def __call__(self, index, rng):
        key, accepted, _, output = self.runner.run(rng)
        return accepted, (dense.density(output) if accepted else None)


@dataclass
class MetrologyResult:
    N: int
    M: int
    p_acc: float
    qfi: float
    bound: float
    passed: bool
    fidelity_sq: float
    rho_acc: np.ndarray
    trials: int
    accepted_flags: list = field(default_factory=list, repr=False)


def ghz_certification(N: int, M: int, src, trials: int, seed: int, tau: float = 1.0, workers: int = 1, generator=None):
    """Rotated protocol for GHZ_N: star graph with Hadamards on the leaves.

    ``rho_ACC`` is the mean of the accepted outputs. Its QFI (for ``J_z`` by
    default) is compared with :func:`certified_qfi_bound` at the measured
    acceptance rate.
    """
    g = star(N)
    runner = TrialRunner(g, M, src, tau, rotation=ghz_rotation(N))
    recs = run_trials(_OutputTrial(runner), trials, seed, workers)
    flags = [bool(ok) for ok, _ in recs]
    accepted = [out for ok, out in recs if ok]
    p_acc = len(accepted) / trials
    h = jz(N) if generator is None else generator
    if not accepted:
        rho = np.full((1 << N, 1 << N), np.nan, dtype=complex)
        return MetrologyResult(N, M, 0.0, float("nan"), float("nan"), False, float("nan"), rho, trials, flags)
    rho = np.sum(accepted, axis=0) / len(accepted)
    f_q = qfi(rho, h)
    bound = certified_qfi_bound(N, p_acc, M)
    f2 = dense.fidelity_sq(rho, runner.target.state)
    return MetrologyResult(N, M, p_acc, f_q, bound, bool(f_q >= bound), f2, rho, trials, flags)


def ghz_qfi(N: int, generator=None) -> float:
    """QFI of the ideal GHZ_N state, ``N**2`` for ``J_z``."""
    return qfi(dense.density(ghz_state(N)), jz(N) if generator is None else generator)
