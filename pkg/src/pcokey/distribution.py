"""Distribution of the synchronisation cycle count for two oscillators.

The unit interval of initial phase differences is cut into nested shells
around the repeller: ``[tau_{i-1}, tau_i] U [tau'_i, tau'_{i-1}]`` is the
set of differences that synchronise in full cycle ``i``.  The shell edges
are backward orbits of the absorption boundaries under ``R``.
"""

from __future__ import annotations

import bisect as _bisect
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import DynamicsMaps
from .errors import ConvergenceError, NonSyncError

DEFAULT_TOL = 1e-10
_MAX_SHELLS = 100_000


@dataclass(frozen=True)
class PulseCountDistribution:
    """Shell edges and cycle-count probabilities.

    ``probs[i - 1]`` is ``Pr{M = i}``.  ``tail_mass`` is the measure of the
    un-resolved core ``(tau_k, tau'_k)`` left after ``truncation_index``
    shells; ``lambda2`` is kept to bound the entropy hidden in that core.
    """

    tau_seq: tuple
    tau_prime_seq: tuple
    probs: np.ndarray
    truncation_index: int
    tail_mass: float
    lambda2: float = float("nan")

    def __len__(self):
        return len(self.probs)


def boundary_sequences(dm: DynamicsMaps, tol: float = DEFAULT_TOL):
    """Shell edges ``tau_0..tau_k`` (increasing) and ``tau'_0..tau'_k`` (decreasing).

    Iteration stops once both edges are within ``tol`` of the fixed point.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    star = dm.tau_star
    lo = [0.0, dm.delta]
    hi = [1.0, dm.h_inv_delta]
    while max(star - lo[-1], hi[-1] - star) >= tol:
        if len(lo) > _MAX_SHELLS:
            raise ConvergenceError("shell edges did not reach the fixed point")
        a = dm.R_inverse(lo[-1])
        b = dm.R_inverse(hi[-1])
        if not (lo[-1] < a and b < hi[-1]):
            raise ConvergenceError(f"shell edges lost monotonicity at index {len(lo)}")
        lo.append(a)
        hi.append(b)
    return tuple(lo), tuple(hi)


def pulse_count_distribution(dm: DynamicsMaps, tol: float = DEFAULT_TOL) -> PulseCountDistribution:
    lo, hi = boundary_sequences(dm, tol)
    a = np.diff(np.array(lo))
    b = -np.diff(np.array(hi))
    probs = a + b
    k = len(lo) - 1
    return PulseCountDistribution(lo, hi, probs, k, hi[-1] - lo[-1], dm.lambda2)


def classify_initial_tau(dist_or_dm, tau: float, tol: float = DEFAULT_TOL) -> int:
    """Cycle in which two oscillators with leader ahead by ``tau`` synchronise.

    Accepts a prebuilt distribution (fast repeated use) or a ``DynamicsMaps``.
    """
    dist = dist_or_dm
    if isinstance(dist_or_dm, DynamicsMaps):
        dist = pulse_count_distribution(dist_or_dm, tol)
    if not (0.0 < tau < 1.0):
        raise ValueError(f"tau must lie in (0, 1), got {tau!r}")
    lo, hi = dist.tau_seq, dist.tau_prime_seq
    if lo[-1] < tau < hi[-1]:
        raise NonSyncError(f"tau = {tau!r} lies within the unresolved core around the fixed point")
    if tau <= lo[-1]:
        return _bisect.bisect_left(lo, tau)
    # hi is decreasing: the answer is the first index with hi[i] <= tau.
    k, j = 0, len(hi) - 1
    while k < j:
        mid = (k + j) // 2
        if hi[mid] <= tau:
            j = mid
        else:
            k = mid + 1
    return k


class Classifier:
    """Vectorisable classifier over a fixed distribution."""

    def __init__(self, dist: PulseCountDistribution):
        self.dist = dist
        self._lo = np.asarray(dist.tau_seq)
        self._neg_hi = -np.asarray(dist.tau_prime_seq)

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        if np.any((tau <= 0.0) | (tau >= 1.0)):
            raise ValueError("tau must lie in (0, 1)")
        core = (tau > self._lo[-1]) & (tau < -self._neg_hi[-1])
        if np.any(core):
            raise NonSyncError("some tau lie within the unresolved core around the fixed point")
        left = np.searchsorted(self._lo, tau, side="left")
        right = np.searchsorted(self._neg_hi, -tau, side="left")
        out = np.where(tau <= self._lo[-1], left, right)
        return int(out) if out.ndim == 0 else out


def _g(x):
    return -x * math.log2(x) if x > 0.0 else 0.0


def entropy(dist) -> tuple:
    """Entropy of the cycle count in bits, with a bound on the unresolved tail.

    Returns ``(value, tail_bound)``: ``value`` sums ``-p log2 p`` over the
    resolved atoms; the true entropy lies in ``[value, value + tail_bound]``.
    For a ``PulseCountDistribution`` the tail bound sums the entropy of the
    geometric envelope ``p_k * lambda2**j``; plain probability vectors have
    no tail.
    """
    if isinstance(dist, PulseCountDistribution):
        probs = np.asarray(dist.probs, dtype=float)
        value = math.fsum(_g(float(p)) for p in probs)
        q = float(probs[-1])
        lam = dist.lambda2
        if dist.tail_mass <= 0.0 or q <= 0.0:
            return value, 0.0
        tail = _g(q) * lam / (1.0 - lam) + q * _g(lam) / (1.0 - lam) ** 2
        return value, tail
    probs = np.asarray(dist, dtype=float)
    return math.fsum(_g(float(p)) for p in probs), 0.0


def entropy_bound_formula(c: float, lam: float) -> float:
    """``g(c)/(1-lam) + c g(lam)/(1-lam)^2`` in bits: entropy of ``c * lam**(i-1)``."""
    return _g(c) / (1.0 - lam) + c * _g(lam) / (1.0 - lam) ** 2


def entropy_bounds(dm: DynamicsMaps, dist: PulseCountDistribution | None = None,
                   start: int = 1):
    """Lower and upper bounds on the entropy of the cycle count (bits).

    The geometric envelope ``c * lam**(i - start)`` is anchored at atom
    ``start`` with ``c = p_start``; atoms before it contribute their exact
    ``-p log2 p`` to both bounds.  Atoms of at least ``1/e`` at the anchor
    are peeled off the same way, since ``g`` is not increasing there.

    With ``start=1`` the envelope relies on ``p_2 / p_1 >= lambda1``, which
    the first, extra-wide shell can violate (it does for small ``gamma``);
    ``start=2`` only needs the ratio bounds from the third atom on.
    """
    if dist is None:
        dist = pulse_count_distribution(dm)
    probs = dist.probs
    if not (1 <= start <= len(probs)):
        raise ValueError("start must index a computed atom")
    const = math.fsum(_g(float(p)) for p in probs[: start - 1])
    k = start - 1
    while k < len(probs) - 1 and probs[k] >= 1.0 / math.e:
        const += _g(float(probs[k]))
        k += 1
    c = float(probs[k])
    lower = const + entropy_bound_formula(c, dm.lambda1)
    upper = const + entropy_bound_formula(c, dm.lambda2)
    return lower, upper


def truncated_session_distribution(dist, m_tilde: int) -> np.ndarray:
    """Cycle count of a session capped at ``m_tilde`` cycles.

    Atoms ``1..m_tilde-1`` are unchanged; the last atom absorbs the rest.
    """
    if m_tilde < 1:
        raise ValueError("m_tilde must be at least 1")
    probs = np.asarray(dist.probs if isinstance(dist, PulseCountDistribution) else dist,
                       dtype=float)
    out = np.zeros(m_tilde)
    head = probs[: m_tilde - 1]
    out[: len(head)] = head
    out[-1] = max(0.0, 1.0 - math.fsum(head))
    return out
