"""Two-oscillator firing map, return map, their inverses and slope bounds.

With two identical oscillators whose phases differ by ``tau`` (leader
ahead), the firing of the leader moves the follower to ``h(tau)``, which
becomes the new difference with the roles swapped.  ``R = h o h`` is the
difference after a full cycle.  ``R`` has a single repelling fixed point
``tau_star``; everything left of it drifts down to the absorption zone
``[0, delta]`` and everything right of it up to ``[h^-1(delta), 1]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect, minimize_scalar

from .errors import ConfigError, ConvergenceError, DomainError, NumericError
from .phase import PESKIN, PhaseFunction, validate_phase_function

STRICT = "strict"
CLAMPED = "clamped"

_EDGE = 1e-12
DEFAULT_GRID = 10_000


def compute_delta(pf: PhaseFunction, epsilon: float) -> float:
    """Width of the absorption zone, ``1 - f^-1(1 - epsilon)``."""
    if not (0.0 < epsilon < 1.0):
        raise ConfigError(f"epsilon must lie in (0, 1), got {epsilon!r}", "epsilon")
    return 1.0 - pf.inverse(1.0 - epsilon)


def _in(x, lo, hi):
    if isinstance(x, float):
        return lo - _EDGE <= x <= hi + _EDGE
    x = np.asarray(x)
    return bool(np.all((x >= lo - _EDGE) & (x <= hi + _EDGE)))


@dataclass(frozen=True)
class DynamicsMaps:
    """Derived maps for a phase function and coupling strength.

    Strict evaluation accepts the closure of each domain (the maps extend
    continuously to the endpoints).  Clamped evaluation is total on
    ``tau >= 0``: ``h`` becomes 1 below ``delta`` and 0 above 1, ``R``
    becomes 0 below ``delta`` and 1 above ``h^-1(delta)``.
    """

    pf: PhaseFunction
    epsilon: float
    delta: float
    h_inv_delta: float
    tau_star: float
    lambda0: float
    lambda1: float
    lambda2: float

    @classmethod
    def build(cls, pf: PhaseFunction, epsilon: float, tol: float = 1e-12,
              grid: int = DEFAULT_GRID) -> "DynamicsMaps":
        report = validate_phase_function(pf)
        if not report.valid:
            raise ConfigError("; ".join(report.violations), "phase_function")
        delta = compute_delta(pf, epsilon)
        # Placeholder instance so the map methods are usable while solving.
        dm = cls(pf, float(epsilon), delta, float("nan"), float("nan"),
                 float("nan"), float("nan"), float("nan"))
        object.__setattr__(dm, "h_inv_delta", dm.h_inverse(delta))
        object.__setattr__(dm, "tau_star", fixed_point_R(dm, tol))
        lam0, lam1, lam2 = lambda_bounds(dm, grid)
        object.__setattr__(dm, "lambda0", lam0)
        object.__setattr__(dm, "lambda1", lam1)
        object.__setattr__(dm, "lambda2", lam2)
        return dm

    @property
    def gamma(self) -> float:
        return self.pf.gamma

    # -- forward maps -----------------------------------------------------

    def h(self, tau, mode=STRICT):
        if mode == CLAMPED:
            if isinstance(tau, float) or isinstance(tau, int):
                tau = float(tau)
                if tau < self.delta:
                    return 1.0
                if tau > 1.0:
                    return 0.0
                return self._h(tau)
            tau = np.asarray(tau, dtype=float)
            inner = np.clip(tau, self.delta, 1.0)
            return np.where(tau < self.delta, 1.0, np.where(tau > 1.0, 0.0, self._h(inner)))
        if not _in(tau, self.delta, 1.0):
            raise DomainError(f"h is defined on [delta, 1] = [{self.delta}, 1]")
        return self._h(tau)

    def _h(self, tau):
        pf = self.pf
        if isinstance(tau, float):
            tau = min(max(tau, self.delta), 1.0)
            return pf.inverse(min(self.epsilon + pf.f(1.0 - tau), 1.0))
        tau = np.clip(tau, self.delta, 1.0)
        return pf.inverse(np.minimum(self.epsilon + pf.f(1.0 - tau), 1.0))

    def R(self, tau, mode=STRICT):
        if mode == CLAMPED:
            if isinstance(tau, float) or isinstance(tau, int):
                tau = float(tau)
                if tau < self.delta:
                    return 0.0
                if tau > self.h_inv_delta:
                    return 1.0
                return self._h(self._h(tau))
            tau = np.asarray(tau, dtype=float)
            inner = np.clip(tau, self.delta, self.h_inv_delta)
            val = self._h(self._h(inner))
            return np.where(tau < self.delta, 0.0, np.where(tau > self.h_inv_delta, 1.0, val))
        if not _in(tau, self.delta, self.h_inv_delta):
            raise DomainError(
                f"R is defined on [delta, h^-1(delta)] = [{self.delta}, {self.h_inv_delta}]")
        if isinstance(tau, float):
            tau = min(max(tau, self.delta), self.h_inv_delta)
        else:
            tau = np.clip(np.asarray(tau, dtype=float), self.delta, self.h_inv_delta)
        return self._h(self._h(tau))

    # -- inverses ---------------------------------------------------------

    def h_inverse(self, y):
        """Solve ``h(x) = y``: ``f(1 - x) = f(y) - epsilon``."""
        lo = self.pf.inverse(self.epsilon)
        if not _in(y, lo, 1.0):
            raise DomainError(f"h^-1 is defined on [{lo}, 1]")
        pf = self.pf
        if isinstance(y, float):
            y = min(max(y, lo), 1.0)
            return 1.0 - pf.inverse(max(pf.f(y) - self.epsilon, 0.0))
        y = np.clip(np.asarray(y, dtype=float), lo, 1.0)
        return 1.0 - pf.inverse(np.maximum(pf.f(y) - self.epsilon, 0.0))

    def R_inverse(self, y):
        return self.h_inverse(self.h_inverse(y))

    # -- slopes -----------------------------------------------------------

    def h_prime(self, tau):
        """``h'(tau) = -f'(1 - tau) / f'(h(tau))`` (always below -1)."""
        if not _in(tau, self.delta, 1.0):
            raise DomainError("h' is defined on [delta, 1]")
        tau = np.clip(np.asarray(tau, dtype=float), self.delta, 1.0)
        out = -self.pf.derivative(1.0 - tau) / self.pf.derivative(self._h(tau))
        return float(out) if np.ndim(out) == 0 else out

    def R_prime(self, tau):
        if not _in(tau, self.delta, self.h_inv_delta):
            raise DomainError("R' is defined on [delta, h^-1(delta)]")
        tau = np.clip(np.asarray(tau, dtype=float), self.delta, self.h_inv_delta)
        out = self.h_prime(self._h(tau)) * self.h_prime(tau)
        return float(out) if np.ndim(out) == 0 else out


def fixed_point_R(dm: DynamicsMaps, tol: float = 1e-12) -> float:
    """Unique fixed point of ``R``, found as the root of ``h(tau) - tau``.

    ``h`` is strictly decreasing, so it crosses the diagonal once; that
    crossing is also the (unique) fixed point of ``R``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    g = lambda t: dm._h(t) - t
    lo, hi = dm.delta, 1.0
    if not (g(lo) > 0.0 > g(hi)):
        raise ConvergenceError("h(tau) - tau has no sign change on [delta, 1]")
    return bisect(g, lo, hi, xtol=min(tol, 1e-15), maxiter=500)


def _refine(fun, xs, k, maximize):
    """Bounded Brent search between the grid neighbours of index ``k``."""
    a = xs[max(k - 1, 0)]
    b = xs[min(k + 1, len(xs) - 1)]
    sign = -1.0 if maximize else 1.0
    res = minimize_scalar(lambda t: sign * fun(t), bounds=(a, b), method="bounded",
                          options={"xatol": 1e-13})
    best = sign * res.fun
    edge = fun(xs[k])
    return max(best, edge) if maximize else min(best, edge)


def lambda_bounds(dm: DynamicsMaps, grid: int = DEFAULT_GRID):
    """Return ``(lambda0, lambda1, lambda2)``.

    ``lambda0 = sup |h'|`` over the domain of ``h``; ``lambda1 = 1 / sup R'``
    and ``lambda2 = 1 / inf R'`` over the domain of ``R``.  Extrema come
    from a dense grid followed by bounded refinement around the grid
    optimum.
    """
    xs_h = np.linspace(dm.delta, 1.0, grid)
    hp = np.abs(dm.h_prime(xs_h))
    xs_r = np.linspace(dm.delta, dm.h_inv_delta, grid)
    rp = dm.R_prime(xs_r)

    if dm.pf.kind == PESKIN:
        g = dm.pf.gamma
        exact_h = np.exp(g * (dm._h(xs_h) - (1.0 - xs_h)))
        hh = dm._h(xs_r)
        exact_r = np.exp(g * (dm._h(hh) + 2.0 * hh + xs_r - 2.0))
        if not (np.allclose(hp, exact_h, rtol=1e-9) and np.allclose(rp, exact_r, rtol=1e-9)):
            raise NumericError("chain-rule slopes disagree with the Peskin closed form")

    abs_hp = lambda t: abs(dm.h_prime(t))
    sup_h = _refine(abs_hp, xs_h, int(np.argmax(hp)), maximize=True)
    sup_r = _refine(dm.R_prime, xs_r, int(np.argmax(rp)), maximize=True)
    inf_r = _refine(dm.R_prime, xs_r, int(np.argmin(rp)), maximize=False)
    if not inf_r > 1.0:
        raise NumericError(f"inf R' = {inf_r} <= 1; phase function is not admissible")
    if not sup_h > 1.0:
        raise NumericError(f"sup |h'| = {sup_h} <= 1; phase function is not admissible")
    return float(sup_h), float(1.0 / sup_r), float(1.0 / inf_r)


def peskin_reference(gamma: float = 2.0, epsilon: float = 0.02) -> DynamicsMaps:
    """Maps for the Peskin curve; the defaults are the reference setting."""
    return DynamicsMaps.build(PhaseFunction.peskin(gamma), epsilon)


__all__ = [
    "CLAMPED", "STRICT", "DynamicsMaps", "compute_delta", "fixed_point_R",
    "lambda_bounds", "peskin_reference",
]
