"""Quadrature helpers and numerically tabulated antiderivatives.

The linear-theory module needs smooth monotone changes of variables such as
xbar = int dx / xi(x), with evaluation, exact first/second derivatives and
inversion.  Antiderivative builds the cumulative integral on a fine grid with
Gauss-Legendre panels and interpolates between nodes with a cubic Hermite
whose slopes are the *exact* integrand values, so the interpolation error is
O(h^4) with a tiny constant.
"""

from __future__ import annotations

import bisect

import numpy as np

from .errors import NonMonotoneTransform
from .numutil import bisect_root, hermite_eval

# 10-point Gauss-Legendre nodes/weights on [-1, 1].
_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


def gauss_panel(f, a, b):
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return half * sum(w * f(mid + half * x) for x, w in zip(_GL_X, _GL_W))


def adaptive_quad(f, a, b, tol=1e-12, depth=40):
    """Adaptive Gauss-Legendre by interval halving."""
    whole = gauss_panel(f, a, b)
    return _adapt(f, a, b, whole, tol, depth)


def _adapt(f, a, b, whole, tol, depth):
    m = 0.5 * (a + b)
    left = gauss_panel(f, a, m)
    right = gauss_panel(f, m, b)
    if depth <= 0 or abs(left + right - whole) <= tol:
        return left + right
    return (_adapt(f, a, m, left, tol / 2, depth - 1)
            + _adapt(f, m, b, right, tol / 2, depth - 1))


class Antiderivative:
    """F(x) = F(x0) + int_{x0}^x f  on [a, b], tabulated on ``n`` panels.

    ``f`` is the integrand callable; ``df`` (optional) is its derivative and
    enables exact second derivatives of F.  Evaluation outside [a, b] is an
    error by construction of the callers (they size the grid to cover every
    query point).
    """

    def __init__(self, f, a, b, x0=None, n=600, df=None):
        if not b > a:
            raise ValueError("empty integration interval")
        self.f = f
        self.df = df
        self.a = float(a)
        self.b = float(b)
        self.xs = np.linspace(a, b, n + 1)
        vals = np.empty(n + 1)
        vals[0] = 0.0
        for i in range(n):
            vals[i + 1] = vals[i] + gauss_panel(f, self.xs[i], self.xs[i + 1])
        if x0 is None:
            x0 = a
        # shift so F(x0) = 0
        self.vals = vals - self._raw(vals, float(x0))
        self.slopes = np.array([f(x) for x in self.xs])

    def _raw(self, vals, x):
        i = min(max(bisect.bisect_right(self.xs, x) - 1, 0), len(self.xs) - 2)
        y, _ = hermite_eval(x, self.xs[i], self.xs[i + 1], vals[i], vals[i + 1],
                            self.f(self.xs[i]), self.f(self.xs[i + 1]))
        return y

    def __call__(self, x):
        if x < self.a - 1e-9 or x > self.b + 1e-9:
            raise ValueError(f"antiderivative queried at {x} outside [{self.a}, {self.b}]")
        x = min(max(x, self.a), self.b)
        i = min(max(bisect.bisect_right(self.xs, x) - 1, 0), len(self.xs) - 2)
        y, _ = hermite_eval(x, self.xs[i], self.xs[i + 1], self.vals[i],
                            self.vals[i + 1], self.slopes[i], self.slopes[i + 1])
        return y

    def derivative(self, x):
        return self.f(x)

    def second_derivative(self, x):
        if self.df is None:
            raise ValueError("no integrand derivative supplied")
        return self.df(x)

    def eval2(self, x):
        """(F, F', F'') triple for composition with Dual2 chains."""
        return self(x), self.f(x), (self.df(x) if self.df else 0.0)


class MonotoneMap:
    """Strictly monotone map built from an antiderivative-like evaluator.

    Supports forward evaluation with derivatives and inversion by bisection.
    """

    def __init__(self, forward: Antiderivative, increasing=None):
        self.forward = forward
        lo, hi = forward(forward.a), forward(forward.b)
        if increasing is None:
            increasing = hi > lo
        self.increasing = increasing
        samples = [forward(x) for x in np.linspace(forward.a, forward.b, 200)]
        diffs = np.diff(samples)
        if not (np.all(diffs > 0) if increasing else np.all(diffs < 0)):
            raise NonMonotoneTransform("change of variables is not strictly monotone")
        self.range = (min(lo, hi), max(lo, hi))

    def __call__(self, x):
        return self.forward(x)

    def derivative(self, x):
        return self.forward.derivative(x)

    def inverse(self, y, xtol=1e-13):
        lo, hi = self.range
        if y < lo - 1e-9 or y > hi + 1e-9:
            raise ValueError(f"inverse queried at {y} outside [{lo}, {hi}]")
        y = min(max(y, lo), hi)
        return bisect_root(lambda x: self.forward(x) - y,
                           self.forward.a, self.forward.b, xtol=xtol)


def compose_eval2(outer_eval2, inner_eval2, x):
    """Second-order chain rule for numeric map composition f(g(x))."""
    g, dg, d2g = inner_eval2(x)
    f, df, d2f = outer_eval2(g)
    return f, df * dg, d2f * dg * dg + df * d2g
