"""
Shamir sharing over GF(257) and the restricted-test protocol variant.

Player ``p`` (0-based) holds qubit ``p`` of every copy and receives the
evaluation of each byte polynomial at ``x = p + 1``. Field elements range over
``0 .. 256``, so shares are integer tuples rather than bytes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..errors import InsufficientSharesError, ValidationError
from ..graphs import Graph, StabilizerGroup
from ..montecarlo import run_trials
from ..protocol import CertificationTarget, Key, Verdict, run_protocol

PRIME = 257


@dataclass(frozen=True)
class AccessStructure:
    """Threshold structure: any ``k`` of the ``n`` players are authorised."""

    n: int
    k: int

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise ValidationError("threshold must satisfy 1 <= k <= n")

    def is_authorized(self, players: Iterable[int]) -> bool:
        players = set(players)
        if any(not 0 <= p < self.n for p in players):
            raise ValidationError("player index out of range")
        return len(players) >= self.k


@dataclass(frozen=True)
class ClassicalShareSet:
    k: int
    n: int
    shares: Mapping[int, tuple]

    def subset(self, players: Iterable[int]) -> dict:
        return {p: self.shares[p] for p in players}


def _eval_poly(coeffs: np.ndarray, x: int) -> np.ndarray:
    """Horner evaluation mod PRIME; ``coeffs[:, j]`` multiplies ``x**j``."""
    acc = np.zeros(coeffs.shape[0], dtype=np.int64)
    for j in range(coeffs.shape[1] - 1, -1, -1):
        acc = (acc * x + coeffs[:, j]) % PRIME
    return acc


def shamir_share(secret: bytes, k: int, n: int, rng: np.random.Generator) -> ClassicalShareSet:
    """One random degree ``k-1`` polynomial per byte with the byte as constant term."""
    if not 1 <= k <= n <= 255:
        raise ValidationError("need 1 <= k <= n <= 255")
    data = np.frombuffer(bytes(secret), dtype=np.uint8).astype(np.int64)
    coeffs = np.empty((data.size, k), dtype=np.int64)
    coeffs[:, 0] = data
    if k > 1:
        coeffs[:, 1:] = rng.integers(0, PRIME, size=(data.size, k - 1))
    shares = {p: tuple(int(v) for v in _eval_poly(coeffs, p + 1)) for p in range(n)}
    return ClassicalShareSet(k, n, shares)


def shamir_reconstruct(shares: Mapping[int, Sequence[int]] | ClassicalShareSet, k: int) -> bytes:
    """Lagrange interpolation at zero from any ``k`` distinct players' shares."""
    if isinstance(shares, ClassicalShareSet):
        shares = shares.shares
    if len(shares) < k:
        raise InsufficientSharesError(f"{len(shares)} shares supplied, {k} required")
    players = sorted(shares)[:k]
    xs = [p + 1 for p in players]
    lengths = {len(shares[p]) for p in players}
    if len(lengths) != 1:
        raise ValidationError("shares differ in length")
    weights = []
    for i, xi in enumerate(xs):
        num = den = 1
        for j, xj in enumerate(xs):
            if i != j:
                num = num * xj % PRIME
                den = den * (xj - xi) % PRIME
        weights.append(num * pow(den, -1, PRIME) % PRIME)
    vals = np.array([shares[p] for p in players], dtype=np.int64)
    secret = (np.array(weights, dtype=np.int64) @ vals) % PRIME
    if np.any(secret > 255):
        raise ValidationError("shares are inconsistent: reconstructed value is not a byte")
    return bytes(int(v) for v in secret)


# -- restricted stabiliser tests ----------------------------------------------------


def restricted_tests(g: Graph, authorized: Iterable[int]) -> list[int]:
    """1-based indices of the stabilisers acting trivially outside ``authorized``."""
    mask = sum(1 << p for p in set(authorized))
    sg = StabilizerGroup.of(g)
    return [i + 1 for i, s in enumerate(sg.all_elements) if s.support & ~mask == 0]


def encode_key(key: Key) -> bytes:
    return b"".join(int(v).to_bytes(2, "big") for v in (key.M, key.r, *key.t))


def decode_key(data: bytes) -> Key:
    vals = [int.from_bytes(data[i : i + 2], "big") for i in range(0, len(data), 2)]
    return Key(vals[0], vals[1], tuple(vals[2:]))


def run_ss_variant(g: Graph, M: int, src, access: AccessStructure, authorized_set, rng: np.random.Generator, tau: float = 1.0):
    """Protocol with tests restricted to an authorised set.

    The dealer samples the key over the restricted subgroup and distributes it
    with Shamir sharing under ``access``; the authorised players rebuild it
    from their shares and run the tests. Only the identity being available
    makes the test vacuous: a warning is issued and the run is rejected.
    """
    authorized_set = sorted(set(authorized_set))
    if access.n != g.n:
        raise ValidationError("access structure and graph disagree on the number of players")
    if not access.is_authorized(authorized_set):
        raise ValidationError(f"set {authorized_set} is not authorised (threshold {access.k})")
    allowed = restricted_tests(g, authorized_set)
    if len(allowed) <= 1:
        warnings.warn(f"only the identity is supported on {authorized_set}; certification is void", stacklevel=2)
        return Verdict(False, None, 0, M - 1)
    target = CertificationTarget(g, allowed=allowed)
    dealer_key = target.sample_key(M, rng)
    shares = shamir_share(encode_key(dealer_key), access.k, access.n, rng)
    key = decode_key(shamir_reconstruct(shares.subset(authorized_set), access.k))
    return run_protocol(target, M, src, key, rng, tau)


class _SSTrial:
    def __init__(self, g, M, src, access, authorized, tau):
        self.args = (g, M, src, access, authorized)
        self.tau = tau

    def __call__(self, index, rng):
        g, M, src, access, authorized = self.args
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            v = run_ss_variant(g, M, src, access, authorized, rng, self.tau)
        return v.accepted, v.tests_passed


def ss_records(g, M, src, access, authorized, trials, seed, tau=1.0, workers=1) -> list:
    """Per-trial ``(accepted, tests_passed)`` pairs in trial order."""
    return run_trials(_SSTrial(g, M, src, access, authorized, tau), trials, seed, workers)


def ss_acceptance_rate(g, M, src, access, authorized, trials, seed, tau=1.0, workers=1) -> float:
    recs = ss_records(g, M, src, access, authorized, trials, seed, tau, workers)
    return float(np.mean([a for a, _ in recs]))
