"""High-precision reference computations for the Peskin curve.

Everything here is written against mpmath directly and shares no code with
the package.  ``f^-1`` is the closed-form logarithm, ``h^-1`` and ``R^-1``
come from bisection rather than composed formulas, and slope extrema come
from a dense grid plus golden-section refinement.
"""

import mpmath as mp

mp.mp.dps = 40

GAMMA = mp.mpf(2)
EPS = mp.mpf("0.02")


def bisect(g, a, b, iters=140):
    a, b = mp.mpf(a), mp.mpf(b)
    ga = g(a)
    for _ in range(iters):
        m = (a + b) / 2
        gm = g(m)
        if (gm > 0) == (ga > 0):
            a, ga = m, gm
        else:
            b = m
    return (a + b) / 2


class Peskin:
    def __init__(self, gamma=GAMMA, eps=EPS):
        self.g = mp.mpf(gamma)
        self.eps = mp.mpf(eps)
        self.c = 1 / (1 - mp.exp(-self.g))
        self.delta = 1 - self.finv(1 - self.eps)
        self.h_inv_delta = self.h_inv(self.delta)
        self.tau_star = bisect(lambda t: self.h(t) - t, self.delta, 1)

    def f(self, x):
        return self.c * (1 - mp.exp(-self.g * x))

    def finv(self, y):
        y = mp.mpf(y)
        if y >= 1:
            return mp.mpf(1)
        return -mp.log(1 - y / self.c) / self.g

    def h(self, t):
        return self.finv(self.eps + self.f(1 - t))

    def R(self, t):
        return self.h(self.h(t))

    def h_inv(self, y):
        # h is decreasing on [delta, 1]
        return bisect(lambda x: self.h(x) - y, self.delta, 1)

    def R_inv_bisect(self, y, lo, hi):
        return bisect(lambda x: self.R(x) - y, lo, hi)

    def hc(self, t):
        if t < self.delta:
            return mp.mpf(1)
        if t > 1:
            return mp.mpf(0)
        return self.h(t)

    def Rc(self, t):
        if t < self.delta:
            return mp.mpf(0)
        if t > self.h_inv_delta:
            return mp.mpf(1)
        return self.R(t)

    # slope exponents: |h'| = exp(g (h - (1 - t))), R' = exp(g (R + 2h + t - 2))
    def abs_h_prime(self, t):
        return mp.exp(self.g * (self.h(t) - (1 - t)))

    def R_prime(self, t):
        ht = self.h(t)
        return mp.exp(self.g * (self.h(ht) + 2 * ht + t - 2))


def _golden(fun, a, b, maximize, iters=80):
    sign = -1 if maximize else 1
    phi = (mp.sqrt(5) - 1) / 2
    a, b = mp.mpf(a), mp.mpf(b)
    c, d = b - phi * (b - a), a + phi * (b - a)
    fc, fd = sign * fun(c), sign * fun(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = sign * fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = sign * fun(d)
    return sign * min(fc, fd)


def extremum(fun, lo, hi, maximize, points=400):
    xs = [lo + (hi - lo) * mp.mpf(k) / points for k in range(points + 1)]
    vals = [fun(x) for x in xs]
    best = max(vals) if maximize else min(vals)
    k = vals.index(best)
    a, b = xs[max(k - 1, 0)], xs[min(k + 1, points)]
    refined = _golden(fun, a, b, maximize)
    return max(best, refined) if maximize else min(best, refined)


def lambdas(pk):
    lam0 = extremum(pk.abs_h_prime, pk.delta, mp.mpf(1), True)
    sup_r = extremum(pk.R_prime, pk.delta, pk.h_inv_delta, True)
    inf_r = extremum(pk.R_prime, pk.delta, pk.h_inv_delta, False)
    return lam0, 1 / sup_r, 1 / inf_r


def shell_probs(pk, count):
    """First ``count`` cycle-count probabilities via bisection on ``R``."""
    lo, hi = [mp.mpf(0), pk.delta], [mp.mpf(1), pk.h_inv_delta]
    while len(lo) <= count:
        lo.append(pk.R_inv_bisect(lo[-1], lo[-1], pk.tau_star))
        hi.append(pk.R_inv_bisect(hi[-1], pk.tau_star, hi[-1]))
    return [(lo[i] - lo[i - 1]) + (hi[i - 1] - hi[i]) for i in range(1, count + 1)], lo, hi


def g(x):
    return -x * mp.log(x, 2) if x > 0 else mp.mpf(0)


def envelope_entropy(c, lam):
    return g(c) / (1 - lam) + c * g(lam) / (1 - lam) ** 2
