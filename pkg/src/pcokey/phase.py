"""Oscillator state map ``x = f(phase)``.

Two kinds are supported: the Peskin charging curve
``f(phase) = c * (1 - exp(-gamma * phase))`` with ``c`` chosen so that
``f(1) = 1``, and an arbitrary table sampled on a uniform grid over [0, 1]
and interpolated with a monotone cubic (PCHIP).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import ConfigError, DomainError

PESKIN = "peskin"
TABULATED = "custom-tabulated"

# Inputs this close outside [0, 1] are treated as the endpoint.
_SLACK = 1e-12


def _check_unit(x, what):
    if isinstance(x, float) or isinstance(x, int):
        if x < -_SLACK or x > 1.0 + _SLACK or x != x:
            raise DomainError(f"{what} {x!r} outside [0, 1]")
        return min(max(float(x), 0.0), 1.0)
    arr = np.asarray(x, dtype=float)
    if np.any(~((arr >= -_SLACK) & (arr <= 1.0 + _SLACK))):
        raise DomainError(f"{what} outside [0, 1]")
    return np.clip(arr, 0.0, 1.0)


@dataclass(frozen=True)
class PhaseFunction:
    """Concave, increasing state map on [0, 1] with its inverse and slope.

    Use :meth:`peskin` or :meth:`tabulated` rather than the constructor.
    Scalars in, scalars out; arrays are handled elementwise.
    """

    kind: str
    gamma: float = float("nan")
    c: float = float("nan")
    table: tuple = ()
    _interp: object = field(default=None, repr=False, compare=False)

    @classmethod
    def peskin(cls, gamma: float) -> "PhaseFunction":
        gamma = float(gamma)
        if not (gamma > 0.0 and math.isfinite(gamma)):
            raise ConfigError("gamma must be a positive finite number", "phase_function.gamma")
        return cls(kind=PESKIN, gamma=gamma, c=1.0 / -math.expm1(-gamma))

    @classmethod
    def tabulated(cls, values) -> "PhaseFunction":
        """State values sampled at ``linspace(0, 1, len(values))``.

        The table is not validated here; see :func:`validate_phase_function`.
        """
        vals = tuple(float(v) for v in values)
        if len(vals) < 3:
            raise ConfigError("table needs at least 3 samples", "phase_function.table")
        grid = np.linspace(0.0, 1.0, len(vals))
        interp = PchipInterpolator(grid, np.array(vals))
        return cls(kind=TABULATED, table=vals, _interp=interp)

    # -- evaluation -------------------------------------------------------

    def f(self, phase):
        phase = _check_unit(phase, "phase")
        if self.kind == PESKIN:
            if isinstance(phase, float):
                if phase == 1.0:
                    return 1.0
                return self.c * -math.expm1(-self.gamma * phase)
            out = self.c * -np.expm1(-self.gamma * phase)
            return np.where(phase == 1.0, 1.0, out)
        if isinstance(phase, float):
            return float(self._interp(phase))
        return self._interp(phase)

    def inverse(self, state):
        state = _check_unit(state, "state")
        if self.kind == PESKIN:
            if isinstance(state, float):
                if state == 1.0:
                    return 1.0
                return min(-math.log1p(-state / self.c) / self.gamma, 1.0)
            out = -np.log1p(-state / self.c) / self.gamma
            return np.where(state == 1.0, 1.0, np.minimum(out, 1.0))
        return self._tabulated_inverse(state)

    def derivative(self, phase):
        phase = _check_unit(phase, "phase")
        if self.kind == PESKIN:
            if isinstance(phase, float):
                return self.c * self.gamma * math.exp(-self.gamma * phase)
            return self.c * self.gamma * np.exp(-self.gamma * phase)
        d = self._interp.derivative()
        if isinstance(phase, float):
            return float(d(phase))
        return d(phase)

    def _tabulated_inverse(self, state):
        # Vectorised bisection on the interpolant; 64 halvings reach float resolution.
        scalar = isinstance(state, float)
        y = np.atleast_1d(np.asarray(state, dtype=float))
        lo = np.zeros_like(y)
        hi = np.ones_like(y)
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            below = self._interp(mid) < y
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        out = 0.5 * (lo + hi)
        return float(out[0]) if scalar else out.reshape(np.shape(state))


@dataclass
class ValidationReport:
    violations: list

    @property
    def valid(self) -> bool:
        return not self.violations


def validate_phase_function(pf: PhaseFunction, grid_size: int = 1001) -> ValidationReport:
    """Check normalisation, monotonicity and strict concavity on a grid.

    Concavity is judged from second differences of ``f`` on the uniform
    grid; a tabulated function is judged on its own samples as well.
    """
    if grid_size < 3:
        raise ValueError("grid_size must be at least 3")
    violations = []
    f0, f1 = pf.f(0.0), pf.f(1.0)
    if abs(f0) > 1e-12:
        violations.append(f"f(0) = {f0!r}, expected 0")
    if abs(f1 - 1.0) > 1e-12:
        violations.append(f"f(1) = {f1!r}, expected 1")

    samples = [np.asarray(pf.f(np.linspace(0.0, 1.0, grid_size)))]
    if pf.kind == TABULATED:
        samples.append(np.asarray(pf.table))
    for ys in samples:
        first = np.diff(ys)
        if np.any(first <= 0.0):
            k = int(np.argmax(first <= 0.0))
            violations.append(f"not strictly increasing near grid index {k}")
            break
    for ys in samples:
        # Relative threshold keeps exactly linear tables from passing on rounding noise.
        second = np.diff(ys, 2)
        scale = np.max(np.abs(ys)) * 1e-12
        if np.any(second >= -scale):
            k = int(np.argmax(second >= -scale))
            violations.append(f"not strictly concave near grid index {k + 1}")
            break
    return ValidationReport(violations)
