"""Secret-key quantities for the synchronisation count seen through Eve's noisy channel.

Alice and Bob both learn the cycle count ``M``.  Eve only sees the per-cycle
indicator ``S`` (0 before the synchronisation cycle, 1 from it on) through
a binary symmetric channel with crossover ``p``.  The key rate is
``H(M | Z)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError, ProtocolError, SizeError
from .network import session_rng

MAX_EXACT = 20
_CHUNK = 1 << 14
_LN2 = math.log(2.0)


def _check_open_p(p):
    if not (0.0 < p < 0.5):
        raise DomainError(f"crossover probability must lie in (0, 0.5), got {p!r}")


def _check_half_closed_p(p):
    if not (0.0 < p <= 0.5):
        raise DomainError(f"crossover probability must lie in (0, 0.5], got {p!r}")


@dataclass(frozen=True)
class EveModel:
    p: float
    m_tilde: int

    def __post_init__(self):
        _check_open_p(self.p)
        if self.m_tilde < 1:
            raise DomainError("m_tilde must be at least 1")


@dataclass(frozen=True)
class IndicatorSequence:
    bits: tuple

    def __post_init__(self):
        b = self.bits
        if any(x not in (0, 1) for x in b) or any(b[i] > b[i + 1] for i in range(len(b) - 1)):
            raise DomainError("indicator bits must be a non-decreasing 0/1 sequence")

    @property
    def m(self) -> int:
        return self.bits.index(1) + 1

    def __len__(self):
        return len(self.bits)

    def as_array(self):
        return np.array(self.bits, dtype=np.uint8)


def indicator_sequence(m: int, m_tilde: int) -> IndicatorSequence:
    if not (1 <= m <= m_tilde):
        raise DomainError(f"need 1 <= m <= m_tilde, got m={m}, m_tilde={m_tilde}")
    return IndicatorSequence((0,) * (m - 1) + (1,) * (m_tilde - m + 1))


def sample_eve_observation(S, p: float, rng: np.random.Generator) -> np.ndarray:
    """Flip each bit of ``S`` independently with probability ``p``."""
    if not (0.0 <= p <= 0.5):
        raise DomainError(f"crossover probability must lie in [0, 0.5], got {p!r}")
    s = S.as_array() if isinstance(S, IndicatorSequence) else np.asarray(S, dtype=np.uint8)
    flips = rng.random(s.shape) < p
    return s ^ flips.astype(np.uint8)


def mismatch_counts(z) -> np.ndarray:
    """Hamming distance from each row of ``z`` to every indicator sequence.

    Column ``m - 1`` compares against ``S(m)``: ones among the first
    ``m - 1`` bits plus zeros among the rest.
    """
    z = np.atleast_2d(np.asarray(z, dtype=np.int64))
    mt = z.shape[1]
    ones_before = np.zeros((z.shape[0], mt), dtype=np.int64)
    ones_before[:, 1:] = np.cumsum(z, axis=1)[:, :-1]
    total = ones_before[:, -1:] + z[:, -1:]
    tail_len = mt - np.arange(mt)
    zeros_after = tail_len - (total - ones_before)
    return ones_before + zeros_after


def likelihood(z, m: int, p: float, m_tilde: int) -> float:
    """``Pr{Z = z | M = m}``."""
    z = np.asarray(z, dtype=np.int64)
    if z.shape != (m_tilde,):
        raise DomainError(f"z must have length {m_tilde}")
    if not (0.0 <= p <= 1.0):
        raise DomainError("p must be a probability")
    k = int(mismatch_counts(z)[0, m - 1]) if 1 <= m <= m_tilde else None
    if k is None:
        raise DomainError(f"need 1 <= m <= m_tilde, got m={m}")
    return p ** k * (1.0 - p) ** (m_tilde - k)


def all_observations(m_tilde: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Rows ``start..stop`` of the binary enumeration of ``{0,1}^m_tilde``."""
    stop = (1 << m_tilde) if stop is None else stop
    codes = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(m_tilde - 1, -1, -1, dtype=np.int64)
    return ((codes[:, None] >> shifts) & 1).astype(np.uint8)


def likelihood_ratio_check(m1: int, m2: int, p: float, m_tilde: int) -> bool:
    """Whether ``Pr{z|m1} / Pr{z|m2} >= (p/(1-p))**|m1-m2|`` for every ``z``."""
    if m_tilde > MAX_EXACT:
        raise SizeError(f"exhaustive check limited to m_tilde <= {MAX_EXACT}")
    _check_half_closed_p(p)
    if not (1 <= m1 <= m_tilde and 1 <= m2 <= m_tilde):
        raise DomainError("m1 and m2 must lie in 1..m_tilde")
    lr = math.log(p) - math.log1p(-p)
    bound = abs(m1 - m2) * lr
    for start in range(0, 1 << m_tilde, _CHUNK):
        k = mismatch_counts(all_observations(m_tilde, start, min(start + _CHUNK, 1 << m_tilde)))
        # Mismatch counts k share the same total length, so the log ratio is (k1 - k2) log(p/(1-p)).
        log_ratio = (k[:, m1 - 1] - k[:, m2 - 1]) * lr
        if np.any(log_ratio < bound - 1e-12 * max(1.0, abs(bound))):
            return False
    return True


def _prior(dist):
    pi = np.asarray(dist, dtype=float)
    if pi.ndim != 1 or pi.size < 1 or np.any(pi < 0.0) or abs(pi.sum() - 1.0) > 1e-9:
        raise DomainError("dist must be a probability vector over 1..m_tilde")
    return pi


def _log_joint(k, pi, p):
    """``log Pr{M = m, Z = z}`` for mismatch matrix ``k`` (rows z, columns m)."""
    mt = pi.size
    with np.errstate(divide="ignore"):
        log_pi = np.log(pi)
    return log_pi[None, :] + k * math.log(p) + (mt - k) * math.log1p(-p)


def conditional_entropy_exact(dist, p: float) -> float:
    """``H(M | Z)`` in bits by enumerating every observation.

    ``dist[m - 1] = Pr{M = m}`` over ``1..m_tilde``; ``p`` may be 0.5, where
    ``Z`` carries no information.
    """
    pi = _prior(dist)
    mt = pi.size
    if mt > MAX_EXACT:
        raise SizeError(f"exact enumeration limited to m_tilde <= {MAX_EXACT}")
    _check_half_closed_p(p)
    if mt == 1:
        return 0.0
    support = pi > 0.0
    total = 0.0
    for start in range(0, 1 << mt, _CHUNK):
        z = all_observations(mt, start, min(start + _CHUNK, 1 << mt))
        lj = _log_joint(mismatch_counts(z), pi, p)[:, support]
        lz = logsumexp(lj, axis=1)
        joint = np.exp(lj)
        # -sum P(m,z) log P(m|z)
        total += float(np.sum(joint * (lz[:, None] - lj)))
    return max(total / _LN2, 0.0)


def conditional_entropy_mc(dist, p: float, trials: int, seed: int = 0, stream: int = 0):
    """Monte-Carlo estimate of ``H(M | Z)`` in bits and its standard error."""
    if trials < 100:
        raise DomainError("trials must be at least 100")
    pi = _prior(dist)
    _check_half_closed_p(p)
    mt = pi.size
    rng = session_rng(seed, 0, stream)
    ms = rng.choice(mt, size=trials, p=pi / pi.sum())
    steps = (np.arange(mt)[None, :] >= ms[:, None]).astype(np.uint8)
    z = steps ^ (rng.random((trials, mt)) < p).astype(np.uint8)
    samples = np.empty(trials)
    for start in range(0, trials, _CHUNK):
        sl = slice(start, min(start + _CHUNK, trials))
        lj = _log_joint(mismatch_counts(z[sl]), pi, p)
        lz = logsumexp(lj, axis=1)
        samples[sl] = (lz - lj[np.arange(lj.shape[0]), ms[sl]]) / _LN2
    est = float(samples.mean())
    err = float(samples.std(ddof=1) / math.sqrt(trials))
    return est, err


def key_rate_lower_bound(lambda1: float, lambda2: float, p: float, m_tilde: int) -> float:
    """Lower bound on ``H(M | Z)`` in bits from the envelope ratios of the count distribution.

    ``log2 min{1/(1 - d1), 1 + (1 - lambda2) * sum_{i=1}^{m_tilde-1} d2**i}``
    with ``d1 = lambda1 p/(1-p)`` and ``d2 = p / ((1-p) lambda2)``.
    """
    _check_open_p(p)
    if m_tilde < 1:
        raise DomainError("m_tilde must be at least 1")
    if not (0.0 < lambda1 <= lambda2 < 1.0):
        raise DomainError("need 0 < lambda1 <= lambda2 < 1")
    r = p / (1.0 - p)
    d1 = lambda1 * r
    d2 = r / lambda2
    series = math.fsum(d2 ** i for i in range(1, m_tilde))
    first = -math.log2(1.0 - d1)
    second = math.log2(1.0 + (1.0 - lambda2) * series)
    return max(min(first, second), 0.0)


# -- reconciliation ----------------------------------------------------------

def residue(m: int, d: int) -> int:
    """What a party reveals: its count modulo ``2d + 1``."""
    if d < 1:
        raise DomainError("d must be at least 1")
    return m % (2 * d + 1)


def reconcile(m_local: int, remote_residue: int, d: int) -> int:
    """Common value ``max(m_local, m_remote)`` given ``|m_local - m_remote| <= d``."""
    if d < 1:
        raise DomainError("d must be at least 1")
    mod = 2 * d + 1
    if not (0 <= remote_residue < mod):
        raise ProtocolError(f"residue {remote_residue!r} outside 0..{mod - 1}")
    diff = (m_local - remote_residue) % mod
    if diff > d:
        diff -= mod
    if abs(diff) > d:
        raise ProtocolError("count difference exceeds d")
    return max(m_local, m_local - diff)


def extract_randomness(m: int, d: int) -> int:
    """Key symbol left after the residue has been revealed."""
    if m < 1 or d < 1:
        raise DomainError("need m >= 1 and d >= 1")
    return m // (2 * d + 1)
