"""Shared numerics: scalar root finding, a small adaptive RK45 for ODE flows,
cubic Hermite segments, and a Halton low-discrepancy sampler."""

from __future__ import annotations

import math

import numpy as np

from .errors import BlowUpError, DodsLabError

# Dormand-Prince 5(4) tableau.
DP_C = (0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0)
DP_A = (
    (),
    (1.0 / 5.0,),
    (3.0 / 40.0, 9.0 / 40.0),
    (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0),
    (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0),
    (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0,
     -5103.0 / 18656.0),
    (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0,
     11.0 / 84.0),
)
DP_B5 = (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0,
         11.0 / 84.0, 0.0)
DP_B4 = (5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0,
         -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0)


def rk45_step(fun, t, y, h):
    """One Dormand-Prince step; returns (y5, error_estimate_vector, k_stages)."""
    k = [np.asarray(fun(t, y), dtype=float)]
    for i in range(1, 7):
        yi = y + h * sum(a * ks for a, ks in zip(DP_A[i], k))
        k.append(np.asarray(fun(t + DP_C[i] * h, yi), dtype=float))
    y5 = y + h * sum(b * ks for b, ks in zip(DP_B5, k))
    y4 = y + h * sum(b * ks for b, ks in zip(DP_B4, k))
    return y5, y5 - y4, k


def integrate_ode(fun, t0, y0, t1, rtol=1e-12, atol=1e-14, max_step=math.inf,
                  min_step_factor=1e-14):
    """Adaptive RK45 from t0 to t1 (either direction). Returns the final state.

    Raises BlowUpError when the step size underflows relative to the span.
    """
    y = np.atleast_1d(np.asarray(y0, dtype=float)).copy()
    t = float(t0)
    span = t1 - t0
    if span == 0.0:
        return y
    direction = math.copysign(1.0, span)
    h = direction * min(abs(span), max_step, max(1e-4, 0.01 * abs(span)))
    h_floor = abs(span) * min_step_factor
    while (t1 - t) * direction > 0.0:
        if abs(h) > abs(t1 - t):
            h = t1 - t
        y5, err_vec, _ = rk45_step(fun, t, y, h)
        if not np.all(np.isfinite(y5)):
            h *= 0.5
            if abs(h) < h_floor:
                raise BlowUpError(f"flow blew up near t = {t}")
            continue
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
        err = float(np.max(np.abs(err_vec) / scale)) if scale.size else 0.0
        if err <= 1.0:
            t += h
            y = y5
            factor = 5.0 if err == 0.0 else min(5.0, 0.9 * err ** -0.2)
            h *= max(0.2, factor)
            if abs(h) > max_step:
                h = direction * max_step
        else:
            h *= max(0.2, 0.9 * err ** -0.2)
        if abs(h) < h_floor:
            raise BlowUpError(f"step size underflow near t = {t}")
    return y


def bisect_root(f, a, b, xtol=1e-12, maxit=200):
    """Classic bisection; requires a sign change on [a, b]."""
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0.0:
        raise DodsLabError(f"root not bracketed on [{a}, {b}]")
    for _ in range(maxit):
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0.0 or (b - a) * 0.5 < xtol:
            return m
        if fa * fm < 0.0:
            b, fb = m, fm
        else:
            a, fa = m, fm
    return 0.5 * (a + b)


def rightmost_root(f, lo, hi, scan=400, xtol=1e-12):
    """Largest root of f in (lo, hi), found by a right-to-left grid scan
    followed by bisection.  Returns (root, n_sign_changes) or (None, 0)."""
    xs = np.linspace(lo, hi, scan + 1)
    vals = []
    for x in xs:
        try:
            v = f(x)
        except DodsLabError:
            v = math.nan
        vals.append(v)
    changes = []
    for i in range(scan, 0, -1):
        v1, v0 = vals[i], vals[i - 1]
        if not (math.isfinite(v0) and math.isfinite(v1)):
            continue
        if v1 == 0.0:
            changes.append((xs[i], xs[i]))
        elif v0 == 0.0:
            changes.append((xs[i - 1], xs[i - 1]))
        elif v0 * v1 < 0.0:
            changes.append((xs[i - 1], xs[i]))
    if not changes:
        return None, 0
    a, b = changes[0]
    root = a if a == b else bisect_root(f, a, b, xtol=xtol)
    return root, len(changes)


def newton_damped(residual, jacobian, x0, tol=1e-12, maxit=60):
    """Damped Newton for small square systems.

    ``residual(x) -> array``, ``jacobian(x) -> matrix``.  Returns (x, ok).
    """
    x = np.asarray(x0, dtype=float).copy()
    r = np.asarray(residual(x), dtype=float)
    if not np.all(np.isfinite(r)):
        return x, False
    norm = float(np.max(np.abs(r)))
    for _ in range(maxit):
        if norm <= tol:
            return x, True
        J = np.asarray(jacobian(x), dtype=float)
        if not np.all(np.isfinite(J)):
            return x, False
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            # rank-deficient constraint systems (one-parameter solution
            # families) still converge along the minimum-norm direction
            step = np.linalg.lstsq(J, -r, rcond=None)[0]
            if not np.all(np.isfinite(step)):
                return x, False
        lam = 1.0
        while lam > 1e-8:
            x_new = x + lam * step
            try:
                r_new = np.asarray(residual(x_new), dtype=float)
            except DodsLabError:
                r_new = np.array([math.nan])
            if np.all(np.isfinite(r_new)) and float(np.max(np.abs(r_new))) < norm:
                x, r, norm = x_new, r_new, float(np.max(np.abs(r_new)))
                break
            lam *= 0.5
        else:
            return x, norm <= tol
    return x, norm <= tol


def hermite_eval(x, x0, x1, y0, y1, m0, m1):
    """Cubic Hermite value and derivative on [x0, x1]."""
    h = x1 - x0
    t = (x - x0) / h
    t2 = t * t
    t3 = t2 * t
    y = ((2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * h * m0
         + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * h * m1)
    dy = ((6.0 * t2 - 6.0 * t) * y0 / h + (3.0 * t2 - 4.0 * t + 1.0) * m0
          + (-6.0 * t2 + 6.0 * t) * y1 / h + (3.0 * t2 - 2.0 * t) * m1)
    return y, dy


_HALTON_PRIMES = (2, 3, 5, 7, 11, 13)


def halton(n, dim, start=0):
    """First ``n`` points of the Halton sequence in [0,1)^dim, skipping
    ``start`` points.  Deterministic; used for validation sampling."""
    out = np.empty((n, dim))
    for j in range(dim):
        base = _HALTON_PRIMES[j % len(_HALTON_PRIMES)]
        for i in range(n):
            k = start + i + 1
            f, r = 1.0, 0.0
            while k > 0:
                f /= base
                r += f * (k % base)
                k //= base
            out[i, j] = r
    return out
