"""Two-oscillator dynamics under a jammer that injects one pulse per full cycle.

A jammer pulse arriving while the phase difference is ``tau`` stretches it
by at most ``lambda0 = sup |h'|``.  Over one full cycle the resulting
difference is bracketed by compositions of the return map with that
stretch, and the stretched return maps still have repelling fixed points.
Initial differences outside the window spanned by those fixed points
synchronise whatever the jammer does.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from .dynamics import CLAMPED, DynamicsMaps
from .errors import ConfigError, ConvergenceError, HypothesisError
from .network import ABSORB_SLACK, ABSORBED

NONE = "none"
UNIFORM = "uniform-random"
ADVERSARIAL = "adversarial-grid"
STRATEGIES = (NONE, UNIFORM, ADVERSARIAL)


def _hc(dm, x):
    return dm.h(x, CLAMPED)


def _Rc(dm, x):
    return dm.R(x, CLAMPED)


def jam_maps(dm: DynamicsMaps, lam: float, tau):
    """``(R_lam(tau), lam * R(tau), R(lam * tau))`` with clamping.

    ``R_lam = h(lam * h(tau))``; every inner and outer application of ``h``
    or ``R`` uses the clamped conventions, and ``lam * R`` is capped at 1.
    """
    if not lam >= 1.0:
        raise ValueError("lambda must be at least 1")
    scalar = np.ndim(tau) == 0
    tau = float(tau) if scalar else np.asarray(tau, dtype=float)
    r_lam = _hc(dm, lam * _hc(dm, tau))
    lam_r = np.minimum(lam * _Rc(dm, tau), 1.0)
    r_of = _Rc(dm, lam * tau)
    if scalar:
        return float(r_lam), float(lam_r), float(r_of)
    return r_lam, lam_r, r_of


@dataclass(frozen=True)
class JamFixedPoints:
    """Fixed points of the three stretched maps for one ``lambda``.

    ``tau_star`` solves ``R(lam tau) = tau``; ``lambda_R`` and ``R_lambda``
    are the fixed points of ``lam R`` and ``R_lam`` obtained from it.  When
    ``R(lam delta) >= delta`` nothing is returned and ``missing`` names the
    maps without a bracketing sign change.
    """

    lam: float
    exists: bool
    tau_star: float = math.nan
    lambda_R: float = math.nan
    R_lambda: float = math.nan
    missing: tuple = ()


def _first_crossing(g, lo, hi, tol, points=2001):
    """Root of ``g`` at its first sign change from negative to non-negative on a grid."""
    xs = np.linspace(lo, hi, points)
    vals = np.array([g(float(x)) for x in xs])
    idx = np.nonzero((vals[:-1] < 0.0) & (vals[1:] >= 0.0))[0]
    if idx.size == 0:
        return None
    a, b = float(xs[idx[0]]), float(xs[idx[0] + 1])
    if g(b) == 0.0:
        return b
    return bisect(g, a, b, xtol=min(tol, 1e-15), maxiter=500)


def jam_fixed_points(dm: DynamicsMaps, lam: float, tol: float = 1e-12) -> JamFixedPoints:
    if not lam > 1.0:
        raise ValueError("lambda must exceed 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    lo, hi = dm.delta, dm.h_inv_delta
    g_of = lambda t: _Rc(dm, lam * t) - t
    g_lr = lambda t: min(lam * _Rc(dm, t), 1.0) - t
    g_rl = lambda t: _hc(dm, lam * _hc(dm, t)) - t

    if not _Rc(dm, lam * lo) < lo:
        missing = [name for name, g in (("R(lam tau)", g_of), ("lam R", g_lr), ("R_lam", g_rl))
                   if _first_crossing(g, lo, hi, tol) is None]
        return JamFixedPoints(lam, False, missing=tuple(missing))

    star = _first_crossing(g_of, lo, hi, tol)
    if star is None:
        raise ConvergenceError(f"no sign change for R(lam tau) - tau at lam = {lam}")
    lr = lam * star
    rl = dm.h_inverse(star)
    # The identities are exact; direct evaluation guards against breakdown.
    slack = 1e3 * max(tol, 1e-15) * lam * lam * dm.lambda0 ** 2 / dm.lambda1 + 1e-12
    for name, g, x in (("R(lam tau)", g_of, star), ("lam R", g_lr, lr), ("R_lam", g_rl, rl)):
        if abs(g(x)) > slack:
            raise ConvergenceError(f"fixed point of {name} fails direct check: residual {g(x)!r}")
    return JamFixedPoints(lam, True, star, lr, rl)


@dataclass(frozen=True)
class SafeRegion:
    hypothesis_value: float
    delta: float
    window: tuple
    probability: float

    @property
    def hypothesis_holds(self) -> bool:
        return self.hypothesis_value < self.delta


@dataclass(frozen=True)
class JamMaps:
    """Jam analysis bound to one ``DynamicsMaps`` and expansion factor."""

    dm: DynamicsMaps
    lambda0: float
    tau_star_jam: float
    safe_window: tuple | None

    @classmethod
    def build(cls, dm: DynamicsMaps, lam: float | None = None, tol: float = 1e-12) -> "JamMaps":
        lam = dm.lambda0 if lam is None else float(lam)
        fp = jam_fixed_points(dm, lam, tol)
        if not fp.exists:
            return cls(dm, lam, math.nan, None)
        return cls(dm, lam, fp.tau_star, (fp.tau_star, fp.R_lambda))

    def maps(self, tau, lam=None):
        return jam_maps(self.dm, self.lambda0 if lam is None else lam, tau)

    def hypothesis_value(self, lam=None) -> float:
        """``R(lam delta)``; the safe-region argument needs it below ``delta``."""
        lam = self.lambda0 if lam is None else lam
        return float(_Rc(self.dm, lam * self.dm.delta))

    def jam_interval(self, tau):
        """Range of the end-of-cycle difference when one jam pulse may arrive."""
        r_lam, lam_r, r_of = self.maps(tau)
        return r_lam, max(r_of, lam_r)

    def fixed_points(self, lam=None, tol=1e-12) -> JamFixedPoints:
        return jam_fixed_points(self.dm, self.lambda0 if lam is None else lam, tol)

    def safe_region(self, tol: float = 1e-12, lam=None) -> SafeRegion:
        lam = self.lambda0 if lam is None else lam
        cond = self.hypothesis_value(lam)
        if not cond < self.dm.delta:
            raise HypothesisError(
                f"R(lambda0 * delta) = {cond!r} is not below delta = {self.dm.delta!r}")
        fp = jam_fixed_points(self.dm, lam, tol)
        lo, hi = fp.tau_star, fp.R_lambda
        return SafeRegion(cond, self.dm.delta, (lo, hi), 1.0 - hi + lo)


@dataclass(frozen=True)
class CycleAudit:
    tau: float
    tau_end: float
    lo: float
    hi: float
    inside: bool
    forced: bool


def audit_cycles(jm: JamMaps, trace, tau0: float, tol: float = 1e-9) -> list[CycleAudit]:
    """Check each visited cycle of a recorded two-node trace against the envelope.

    ``forced`` marks cycles where the jam pulse pushed a node over threshold.
    When that node is the leader, the follower is kicked by the jam and by
    the leader's pulse in the same instant, which the single-kick envelope
    does not cover; such cycles can land just below ``lo`` (or stay apart
    when the envelope says they merge).
    """
    absorbed_at = {t for t, _, k in trace.events if k == ABSORBED}
    out = []
    prev, start = float(tau0), 0.0
    for phases, stop in zip(trace.boundary_phases, trace.boundary_times):
        forced = any(start <= t <= stop and t in absorbed_at for t in trace.jam_log)
        now = float(max(phases))
        lo, hi = jm.jam_interval(prev)
        if now == 0.0:
            inside = lo <= tol or hi >= 1.0 - tol
        else:
            inside = lo - tol <= now <= hi + tol
        out.append(CycleAudit(prev, now, float(lo), float(hi), bool(inside), forced))
        prev, start = now, stop
    return out


# -- two-node cycle outcome ---------------------------------------------------

def _receive(pf, eps, x):
    """Phases after a pulse arrives at phases ``x``; second value flags absorption."""
    x = np.minimum(x, 1.0)
    fx = pf.f(x)
    absorbed = fx >= 1.0 - eps - ABSORB_SLACK
    return pf.inverse(np.minimum(fx + eps, 1.0)), absorbed


def cycle_outcome(dm: DynamicsMaps, follower: float, leader: float, offsets):
    """End-of-cycle phase difference for a jam pulse at each of ``offsets``.

    The cycle starts with the two nodes at phases ``follower <= leader`` and
    ends when both have fired once.  Offsets at or beyond the end of the
    cycle mean no pulse lands in it.  Synchronisation is reported as 0.
    """
    pf, eps = dm.pf, dm.epsilon
    t = np.atleast_1d(np.asarray(offsets, dtype=float))
    a, b = float(follower), float(leader)
    tau = b - a
    out = np.full(t.shape, np.nan)
    if tau <= 0.0:
        return np.zeros_like(t)
    plain = float(_Rc(dm, tau)) if tau <= 1.0 else 0.0

    first = 1.0 - b
    # Jam before the leader fires.
    m1 = t < first
    if np.any(m1):
        tt = t[m1]
        bn, b_abs = _receive(pf, eps, b + tt)
        an, a_abs = _receive(pf, eps, a + tt)
        # Leader triggered: it fires now and its own pulse reaches the follower.
        a2, a2_abs = _receive(pf, eps, an)
        via_fire = np.where(a_abs | a2_abs, 0.0, _hc(dm, a2))
        tau1 = bn - an
        via_map = np.where(a_abs, 0.0, _Rc(dm, np.clip(tau1, 0.0, 1.0)))
        out[m1] = np.where(b_abs, via_fire, via_map)

    if tau < dm.delta:
        out[~m1] = 0.0
        out[out >= 1.0] = 0.0
        return out
    hb = float(_hc(dm, tau))
    second = first + (1.0 - hb)
    m2 = (t >= first) & (t < second)
    if np.any(m2):
        s = t[m2] - first
        an, a_abs = _receive(pf, eps, hb + s)
        bn, b_abs = _receive(pf, eps, s)
        u = np.where(a_abs, 1.0 - bn, an - bn)
        res = _hc(dm, np.clip(u, 0.0, 1.0))
        out[m2] = np.where(b_abs, 0.0, res)
    out[t >= second] = plain
    out[out >= 1.0] = 0.0
    return out


def nominal_cycle_length(dm: DynamicsMaps, follower: float, leader: float) -> float:
    tau = leader - follower
    if tau < dm.delta:
        return 1.0 - leader
    return (1.0 - leader) + (1.0 - float(_hc(dm, tau)))


@functools.lru_cache(maxsize=32)
def _maps_for(pf, epsilon):
    return DynamicsMaps.build(pf, epsilon)


@dataclass(frozen=True)
class JammerStrategy:
    """Per-cycle jamming policy; see :func:`jammer_step`."""

    kind: str = NONE
    grid_points: int = 512

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise ConfigError(f"unknown jammer strategy {self.kind!r}", "jammer")
        if self.grid_points < 2:
            raise ConfigError("grid_points must be at least 2", "jam_grid_points")

    def plan(self, state, rng):
        return jammer_step(self, state, rng)


def jammer_step(strategy: JammerStrategy, state, rng):
    """Offset of this cycle's jam pulse from the cycle start, or ``None``.

    ``uniform-random`` draws the offset uniformly over the nominal cycle
    length.  ``adversarial-grid`` (two nodes only) scores a grid of offsets
    spanning the whole cycle, plus the option of not jamming, by the
    distance of the resulting difference from the nearer absorption
    boundary and plays the best one.
    """
    if strategy.kind == NONE:
        return None
    if strategy.kind == UNIFORM:
        return float(rng.random()) * state.nominal_length()
    if len(state.phases) != 2:
        raise ConfigError("the adversarial-grid jammer supports two nodes only", "jammer")
    dm = _maps_for(state.pf, state.epsilon)
    a, b = sorted(state.phases)
    if b - a <= 0.0:
        return None
    length = nominal_cycle_length(dm, a, b)
    offsets = np.linspace(0.0, length, strategy.grid_points, endpoint=False)
    res = cycle_outcome(dm, a, b, offsets)
    score = np.minimum(res - dm.delta, dm.h_inv_delta - res)
    score = np.where((res <= 0.0) | (res >= 1.0), -np.inf, score)
    base = float(_Rc(dm, b - a))
    base_score = -math.inf if base in (0.0, 1.0) else min(base - dm.delta, dm.h_inv_delta - base)
    k = int(np.argmax(score))
    if score[k] <= base_score:
        return None
    return float(offsets[k])
