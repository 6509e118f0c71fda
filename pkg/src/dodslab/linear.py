"""Linear DODS theory: the K-function, the compatibility condition, the
extra symmetry acting on x, homogenization, canonical forms, and
superposition checks.

A linear DODS  ydot = alpha(x) y + beta(x) y_ + gamma(x), x_ = g(x)  always
carries the superposition symmetries rho(x) d/dy and (y - sigma(x)) d/dy.
When K(g) gdot^2 = gddot + K gdot holds for
K = alpha - gdot * alpha(g) - betadot / beta, a further symmetry
Z = xi d/dx + (A y + B) d/dy with xi = exp(int K) may exist - but xi must
also satisfy the functional equation xi(g(x)) = gdot(x) xi(x), which the
ODE alone does not guarantee (alpha = 0, beta = 1, g = x/2 satisfies the
compatibility condition with zero defect yet admits no such Z).  Both checks
are therefore enforced before an extra symmetry is returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import exprlang as el
from . import solver as _solver
from .core import DODSystem, LinearDODS, PointField
from .errors import (ConfigError, DodsLabError, DomainError, NonMonotoneTransform,
                     NotAParticularSolution)
from .numutil import bisect_root, hermite_eval
from .quadrature import Antiderivative, MonotoneMap, compose_eval2


def _fn(expr):
    return el.compile_scalar(expr, ("x",))


def k_function(lin: LinearDODS, x) -> float:
    """K(x) = alpha - gdot * alpha(g(x)) - betadot/beta, AD derivatives."""
    env = {"x": float(x)}
    beta, beta_dot = el.diff_eval(lin.beta, env, "x")
    if beta == 0.0:
        raise DomainError(f"beta({x}) = 0; K is undefined there")
    g, g_dot = el.diff_eval(lin.g, env, "x")
    alpha = el.evaluate(lin.alpha, env)
    alpha_at_g = el.evaluate(lin.alpha, {"x": g})
    return alpha - g_dot * alpha_at_g - beta_dot / beta


def compatibility(lin: LinearDODS, grid=200, tol=1e-8):
    """(holds, max_defect) of K(g) gdot^2 - gddot - K gdot over the domain."""
    if grid < 20:
        raise ConfigError("need at least 20 grid points")
    xs = np.linspace(lin.domain[0], lin.domain[1], grid)
    worst = 0.0
    for x in xs:
        x = float(x)
        g, g_dot, g_ddot = el.diff2_eval(lin.g, {"x": x}, "x")
        defect = k_function(lin, g) * g_dot ** 2 - g_ddot \
            - k_function(lin, x) * g_dot
        worst = max(worst, abs(defect))
    return worst <= tol, worst


class _ZeroB:
    def value(self, x):
        return 0.0

    def derivative(self, x):
        return 0.0


class _SolvedB:
    """B and Bdot read from a method-of-steps solution of the B-equation."""

    def __init__(self, sol):
        self.sol = sol

    def value(self, x):
        return self.sol.evaluate(x)[0]

    def derivative(self, x):
        return self.sol.evaluate(x)[1]


class ExtraSymmetry(PointField):
    """Z = xi(x) d/dx + (A(x) y + B(x)) d/dy with xi = exp(int K).

    xi is tabulated via a high-order antiderivative of K; its derivative is
    exact through xi' = K xi, so prolongations stay at AD accuracy.
    """

    label = "Z"

    def __init__(self, lin, k_antideriv, b_part, functional_defect):
        self.lin = lin
        self._F = k_antideriv
        self.B = b_part
        self.functional_defect = functional_defect
        self._alpha_fn = _fn(lin.alpha)

    def xi(self, x):
        return math.exp(self._F(x))

    def A(self, x):
        return self.xi(x) * self._alpha_fn(x)

    def describe(self):
        parts = []
        xs = np.linspace(self.lin.domain[0], self.lin.domain[1], 5)
        if all(abs(self.xi(float(x)) - 1.0) < 1e-12 for x in xs):
            parts.append("d/dx")
        else:
            parts.append("xi(x) d/dx")
        if any(abs(self.A(float(x))) > 1e-12 for x in xs):
            parts.append("A(x) y d/dy")
        if any(abs(self.B.value(float(x))) > 1e-12 for x in xs):
            parts.append("B(x) d/dy")
        return " + ".join(parts)

    # PointField interface
    def coeffs(self, x, y):
        return self.xi(x), self.A(x) * y + self.B.value(x)

    def partials(self, x, y):
        K = k_function(self.lin, x)
        xi = self.xi(x)
        _, alpha_dot = el.diff_eval(self.lin.alpha, {"x": float(x)}, "x")
        A_dot = xi * (K * self._alpha_fn(x) + alpha_dot)
        return K * xi, 0.0, A_dot * y + self.B.derivative(x), self.A(x)


class _CallableLinearSystem:
    """Duck-typed stand-in for DODSystem so the method-of-steps solver can
    integrate a linear DDE whose inhomogeneity is a numeric function."""

    def __init__(self, lin, q_fn):
        self.g = lin.g
        self._g_fn = el.compile_scalar(lin.g, ("x", "y", "y_"))
        self._G_fn = None
        self.g_uses_y_minus = False
        self.delta_max = 10.0
        self.f = True  # explicit right-hand side
        self.label = "B-equation"
        self._alpha = _fn(lin.alpha)
        self._beta = _fn(lin.beta)
        self._q = q_fn

    def rhs(self, x, y, y_minus, x_minus=None):
        return self._alpha(x) * y + self._beta(x) * y_minus + self._q(x)


def _k_antiderivative(lin, lo_needed):
    lo = min(lo_needed, lin.domain[0])
    return Antiderivative(lambda t: k_function(lin, t), lo, lin.domain[1],
                          x0=lin.domain[0], n=800)


def extra_symmetry_report(lin: LinearDODS, tol=1e-8, grid=200):
    """(ExtraSymmetry | None, diagnostics list)."""
    diags = []
    holds, defect = compatibility(lin, grid, tol)
    diags.append(f"compatibility defect = {defect:.3e}"
                 f" ({'holds' if holds else 'violated'} at tol {tol:g})")
    if not holds:
        return None, diags

    xs = np.linspace(lin.domain[0], lin.domain[1], grid)
    g_vals = [lin.g_at(float(x)) for x in xs]
    F = _k_antiderivative(lin, min(g_vals))

    # xi = exp(F) solves the ODE; now the functional equation
    # xi(g(x)) = gdot(x) xi(x) must hold as well.  Any constant rescaling of
    # xi leaves the ratio xi(g)/(gdot xi) unchanged, so a ratio != 1 kills
    # every candidate, not just this normalization.
    worst = 0.0
    ratios = []
    for x in xs:
        x = float(x)
        g, g_dot = el.diff_eval(lin.g, {"x": x}, "x")
        lhs = math.exp(F(g))
        rhs = g_dot * math.exp(F(x))
        worst = max(worst, abs(lhs - rhs))
        if rhs != 0.0:
            ratios.append(lhs / rhs)
    scale = max(math.exp(F(float(x))) for x in xs)
    diags.append(f"functional equation defect = {worst:.3e} (scale {scale:.3e})")
    if worst > tol * max(1.0, scale):
        spread = max(ratios) - min(ratios) if ratios else float("nan")
        mean = sum(ratios) / len(ratios) if ratios else float("nan")
        diags.append(
            f"xi(g)/(gdot xi) = {mean:.6g} (spread {spread:.1e});"
            " no constant rescaling can satisfy the functional equation,"
            " so only xi = 0 remains despite the compatibility condition")
        return None, diags

    if lin.is_homogeneous():
        b_part = _ZeroB()
        diags.append("gamma = 0: B = 0")
    else:
        # Bdot = alpha B + beta B_ + gamma xi' + gammadot xi - gamma A
        alpha_fn = _fn(lin.alpha)
        gamma = lin.gamma

        def q(x):
            K = k_function(lin, x)
            xi = math.exp(F(x))
            gam, gam_dot = el.diff_eval(gamma, {"x": float(x)}, "x")
            return gam * K * xi + gam_dot * xi - gam * xi * alpha_fn(x)

        x0 = lin.domain[0]
        xm1 = lin.g_at(x0)
        bsys = _CallableLinearSystem(lin, q)
        sol = _solver.solve(bsys, "0", (xm1, x0), lin.domain[1],
                            _solver.SolverOptions(rel_tol=1e-10, abs_tol=1e-12))
        b_part = _SolvedB(sol)
        diags.append("B solved by method of steps with B = 0 initial data")
    return ExtraSymmetry(lin, F, b_part, worst), diags


def extra_symmetry(lin: LinearDODS, tol=1e-8, grid=200):
    field_, _diags = extra_symmetry_report(lin, tol, grid)
    return field_


def homogenize(lin: LinearDODS, sigma, tol=1e-8, grid=200):
    """Shift y by a particular solution sigma; returns (homogeneous, record)."""
    if isinstance(sigma, str):
        sigma = el.parse(sigma, ("x",))
    xs = np.linspace(lin.domain[0], lin.domain[1], grid)
    worst = 0.0
    for x in xs:
        x = float(x)
        s, s_dot = el.diff_eval(sigma, {"x": x}, "x")
        s_at_g = el.evaluate(sigma, {"x": lin.g_at(x)})
        r = s_dot - lin.alpha_at(x) * s - lin.beta_at(x) * s_at_g \
            - lin.gamma_at(x)
        worst = max(worst, abs(r))
    if worst > tol:
        raise NotAParticularSolution(
            f"sigma residual {worst:.3e} exceeds {tol:g}")
    homo = LinearDODS(lin.alpha, lin.beta, "0", lin.g, lin.domain,
                      label=(lin.label or "linear") + " homogenized")
    return homo, {"sigma": sigma, "residual": worst,
                  "change": "ybar = y - sigma(x)"}


# ---------------------------------------------------------------------------
# Canonical forms


class PiecewiseMap:
    """Monotone piecewise-Hermite map built from sampled spans (used for the
    delay-straightening change of variables)."""

    def __init__(self, xs, vals, slopes):
        self.xs = np.asarray(xs)
        self.vals = np.asarray(vals)
        self.slopes = np.asarray(slopes)
        if not np.all(np.diff(self.vals) > 0):
            raise NonMonotoneTransform("straightening map is not increasing")

    def __call__(self, x):
        i = int(np.searchsorted(self.xs, x, side="right")) - 1
        i = min(max(i, 0), len(self.xs) - 2)
        return hermite_eval(float(x), self.xs[i], self.xs[i + 1], self.vals[i],
                            self.vals[i + 1], self.slopes[i],
                            self.slopes[i + 1])[0]

    def derivative(self, x):
        i = int(np.searchsorted(self.xs, x, side="right")) - 1
        i = min(max(i, 0), len(self.xs) - 2)
        return hermite_eval(float(x), self.xs[i], self.xs[i + 1], self.vals[i],
                            self.vals[i + 1], self.slopes[i],
                            self.slopes[i + 1])[1]

    def inverse(self, v):
        return bisect_root(lambda x: self(x) - v, float(self.xs[0]),
                           float(self.xs[-1]), xtol=1e-13)


@dataclass
class CanonicalForm:
    tag: str                    # "compatible" | "incompatible"
    mode: str                   # "canonical1" | "canonical2" | "canonical3"
    C: float | None             # constant delay of the canonical system
    x_map: object               # forward map x -> xbar with .inverse
    y_scale: object             # callable s(x); ybar = s(x) * y
    coeff_samples: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)


def _exp_int_alpha(lin, lo_needed):
    lo = min(lo_needed, lin.domain[0])
    fn = _fn(lin.alpha)
    F = Antiderivative(fn, lo, lin.domain[1], x0=lin.domain[0], n=800)
    return lambda x: math.exp(-F(x))


def _beta_tilde(lin, s):
    beta_fn = _fn(lin.beta)
    g_fn = _fn(lin.g)
    return lambda x: beta_fn(x) * s(x) / s(g_fn(x))


def canonical_form(lin: LinearDODS, mode="auto", tol=1e-8, grid=200):
    """Transform toward the representative forms.

    Compatible systems (both checks) go to  ybar' = ybar_ + h, xbar_ = xbar - C.
    Incompatible ones go, per ``mode``, to the delay-straightened form
    ("canonical2": ybar' = f(xbar) ybar_ + h, delay C = 1) or the coefficient-
    absorbed form ("canonical3": ybar' = ybar_ + h, xbar_ = gbar(xbar)).
    """
    z, diags = extra_symmetry_report(lin, tol, grid)
    xs = np.linspace(lin.domain[0], lin.domain[1], grid)
    g_fn = _fn(lin.g)
    gamma_fn = _fn(lin.gamma)
    min_g = min(g_fn(float(x)) for x in xs)
    # the absorbed-coefficient map evaluates s at g of points down to min_g
    min_g2 = min(min_g, min(g_fn(float(t))
                            for t in np.linspace(min_g, lin.domain[1], grid)))
    s = _exp_int_alpha(lin, min_g2)

    if z is not None and mode == "auto":
        # xbar = int dx/xi, ybar = exp(-int alpha) y, then rescale so the
        # coefficient of ybar_ is 1; the delay becomes exactly constant.
        xi = z.xi
        xbar = Antiderivative(lambda t: 1.0 / xi(t), min_g, lin.domain[1],
                              x0=lin.domain[0], n=800,
                              df=lambda t: -k_function(lin, t) / xi(t))
        beta_fn = _fn(lin.beta)
        c1_vals = [xi(float(x)) * beta_fn(float(x)) * s(float(x))
                   / s(g_fn(float(x))) for x in xs]
        c_vals = [xbar(float(x)) - xbar(g_fn(float(x))) for x in xs]
        c1 = float(np.median(c1_vals))
        c_raw = float(np.median(c_vals))
        notes = [f"coefficient spread {np.ptp(c1_vals):.2e},"
                 f" delay spread {np.ptp(c_vals):.2e}"]
        if c1 <= 0:
            raise NonMonotoneTransform(
                "canonical rescaling needs a positive delayed-term"
                " coefficient on this domain")
        scaled = Antiderivative(lambda t: c1 / xi(t), min_g, lin.domain[1],
                                x0=lin.domain[0], n=800,
                                df=lambda t: -c1 * k_function(lin, t) / xi(t))
        x_map = MonotoneMap(scaled)
        C = c1 * c_raw
        h_samples = [(x_map(float(x)),
                      xi(float(x)) * s(float(x)) * gamma_fn(float(x)) / c1)
                     for x in xs]
        return CanonicalForm(tag="compatible", mode="canonical1", C=C,
                             x_map=x_map, y_scale=s,
                             coeff_samples={"h": h_samples},
                             notes=diags + notes)

    if mode == "auto":
        mode = "canonical2"
    if mode not in ("canonical2", "canonical3"):
        raise ConfigError(f"unknown canonical mode {mode!r}")
    beta_t = _beta_tilde(lin, s)

    if mode == "canonical2":
        # Straighten the delay: xbar(g(x)) = xbar(x) - 1, linear seed on the
        # first span, extended forward through the delay recursion.
        t0 = lin.domain[0]
        t1 = bisect_root(lambda t: g_fn(t) - t0, t0 + 1e-12, lin.domain[1])
        spans_x, spans_v, spans_m = [], [], []
        seed_slope = 1.0 / (t1 - t0)

        def xbar_eval(x, table):
            if x <= t1:
                return (x - t0) * seed_slope, seed_slope
            xs_t, vs_t, ms_t = table
            i = int(np.searchsorted(xs_t, x, side="right")) - 1
            i = min(max(i, 0), len(xs_t) - 2)
            return hermite_eval(x, xs_t[i], xs_t[i + 1], vs_t[i], vs_t[i + 1],
                                ms_t[i], ms_t[i + 1])

        n_per = max(40, grid // 4)
        for x in np.linspace(t0, t1, n_per):
            spans_x.append(float(x))
            spans_v.append((float(x) - t0) * seed_slope)
            spans_m.append(seed_slope)
        guard = 0
        while spans_x[-1] < lin.domain[1] - 1e-12 and guard < 64:
            guard += 1
            lo = spans_x[-1]
            hi_candidates = [lin.domain[1]]
            try:
                hi_candidates.append(
                    bisect_root(lambda t: g_fn(t) - lo, lo + 1e-12,
                                lin.domain[1]))
            except DodsLabError:
                pass
            hi = min(hi_candidates)
            table = (np.array(spans_x), np.array(spans_v), np.array(spans_m))
            for x in np.linspace(lo, hi, n_per)[1:]:
                x = float(x)
                g, g_dot = el.diff_eval(lin.g, {"x": x}, "x")
                v, m = xbar_eval(g, table)
                spans_x.append(x)
                spans_v.append(v + 1.0)
                spans_m.append(m * g_dot)
        x_map = PiecewiseMap(spans_x, spans_v, spans_m)
        fbar, hbar = [], []
        for x, m in zip(spans_x, spans_m):
            fbar.append((x_map(x), beta_t(x) / m))
            hbar.append((x_map(x), gamma_fn(x) * s(x) / m))
        fvals = [v for (_, v) in fbar]
        notes = diags + [f"fbar spread {max(fvals) - min(fvals):.3e}"
                         " (nonconstant expected for incompatible systems)"]
        return CanonicalForm(tag="incompatible", mode="canonical2", C=1.0,
                             x_map=x_map, y_scale=s,
                             coeff_samples={"f": fbar, "h": hbar}, notes=notes)

    # canonical3: absorb the delayed-term coefficient into x
    def beta_t_dot(x):
        b, b_dot = el.diff_eval(lin.beta, {"x": float(x)}, "x")
        g, g_dot = el.diff_eval(lin.g, {"x": float(x)}, "x")
        alpha_x = el.evaluate(lin.alpha, {"x": float(x)})
        alpha_g = el.evaluate(lin.alpha, {"x": g})
        return beta_t(x) * (b_dot / b - alpha_x + alpha_g * g_dot)

    xbar = Antiderivative(beta_t, min_g, lin.domain[1], x0=lin.domain[0],
                          n=800, df=beta_t_dot)
    x_map = MonotoneMap(xbar)
    gbar_dd = []
    hbar = []
    for x in xs:
        x = float(x)

        def g_eval2(t):
            return el.diff2_eval(lin.g, {"x": float(t)}, "x")

        def inv_eval2(v):
            t = x_map.inverse(v)
            b = beta_t(t)
            return t, 1.0 / b, -beta_t_dot(t) / b ** 3

        val = compose_eval2(xbar.eval2, g_eval2, x)  # d/dx of xbar(g(x))
        # second derivative of gbar with respect to xbar via the inverse map
        v = x_map(x)
        _, inv_d1, inv_d2 = inv_eval2(v)
        gb = xbar(g_fn(x))
        gb_d1 = val[1] * inv_d1
        gb_d2 = val[2] * inv_d1 ** 2 + val[1] * inv_d2
        gbar_dd.append((v, gb, gb_d1, gb_d2))
        hbar.append((v, gamma_fn(x) * s(x) / beta_t(x)))
    max_gdd = max(abs(r[3]) for r in gbar_dd)
    notes = diags + [f"max |gbar''| = {max_gdd:.3e} after absorption"]
    return CanonicalForm(tag="incompatible", mode="canonical3", C=None,
                         x_map=x_map, y_scale=s,
                         coeff_samples={"gbar": gbar_dd, "h": hbar},
                         notes=notes)


# ---------------------------------------------------------------------------
# Superposition


def superposition_check(system, sols, coeffs, n=100):
    """Residual of sum(c_i y_i) under ``system`` (LinearDODS or DODSystem)."""
    if isinstance(system, LinearDODS):
        system = system.as_dods()
    if len(sols) != len(coeffs) or not sols:
        raise ConfigError("need matching, nonempty solutions and coefficients")
    starts = {round(s.breakpoints[0], 12) for s in sols}
    inits = {round(s.x_start, 12) for s in sols}
    if len(starts) > 1 or len(inits) > 1:
        raise ConfigError("solutions must share the initial interval")
    x_lo = sols[0].breakpoints[0]
    x_hi = min(s.x_end for s in sols)
    cover = sols[0].x_start
    avoid = sorted({b for s in sols for b in s.breakpoints})

    def combo(x):
        y = 0.0
        yd = 0.0
        for c, s in zip(coeffs, sols):
            yv, ydv = s.evaluate(x)
            y += c * yv
            yd += c * ydv
        return y, yd

    return _solver.solution_residual(system, combo, x_lo, x_hi, n=n,
                                     cover_lo=cover, avoid=avoid)


def linear_from_family(family_id, f="", g=""):
    """LinearDODS built verbatim from the defining functions of the two
    linearizable dimension-2 families (chord-slope coefficient form)."""
    if family_id == "A2,1":
        f = f or "1 + 1/x"
        g = g or "x/2"
        alpha = f"({f})/(x - ({g}))"
        beta = f"-({f})/(x - ({g}))"
        gamma = "0"
    elif family_id == "A2,3":
        f = f or "1"
        g = g or "x/2"
        alpha = f"1/(x - ({g}))"
        beta = f"-1/(x - ({g}))"
        gamma = f
    else:
        raise ConfigError("only A2,1 and A2,3 map onto the linear class")
    return LinearDODS(alpha, beta, gamma, g, domain=(1.0, 6.0),
                      label=f"{family_id} as linear DODS")
