"""Domain types for delay ordinary differential systems.

A DODS couples a delay ODE  ydot = f(x, y, y_)  with a delay relation
x_ = g(x, y, y_) subject to x_ < x.  Some catalog families only provide the
delay relation implicitly as a residual G(x, y, x_, y_) = 0 (and one family
leaves the ODE itself implicit as F(x, y, x_, y_, yd) = 0), so DODSystem
stores either form and resolves the implicit ones numerically.

Variable naming convention (ASCII): x_, y_ are the delayed point, yd is the
derivative, dx/dy are not variables here - difference quantities are spelled
out as (x - x_) and (y - y_) inside expressions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import exprlang as el
from .errors import (CausalityError, ConfigError, DelayOrderError, DodsLabError,
                     DomainError)
from .numutil import bisect_root, halton, rightmost_root

JET_VARS = ("x", "y", "x_", "y_", "yd")
POINT_VARS = ("x", "y", "y_")


@dataclass(frozen=True)
class JetPoint:
    """Coordinates of the five-dimensional jet space (x, y, x_, y_, yd)."""

    x: float
    y: float
    x_minus: float
    y_minus: float
    ydot: float

    @property
    def dx(self):
        return self.x - self.x_minus

    @property
    def dy(self):
        return self.y - self.y_minus

    def env(self):
        return {"x": self.x, "y": self.y, "x_": self.x_minus,
                "y_": self.y_minus, "yd": self.ydot}

    def as_array(self):
        return np.array([self.x, self.y, self.x_minus, self.y_minus, self.ydot])


class PointField:
    """Protocol-ish base for vector fields xi(x,y) d/dx + eta(x,y) d/dy.

    Subclasses provide coeffs(x, y) -> (xi, eta) and
    partials(x, y) -> (xi_x, xi_y, eta_x, eta_y).
    """

    label = ""

    def coeffs(self, x, y):
        raise NotImplementedError

    def partials(self, x, y):
        raise NotImplementedError


class VectorField(PointField):
    """Expression-backed point vector field."""

    def __init__(self, xi, eta, label=""):
        self.xi = el.parse(xi, ("x", "y")) if isinstance(xi, str) else xi
        self.eta = el.parse(eta, ("x", "y")) if isinstance(eta, str) else eta
        self.label = label

    def __repr__(self):
        name = f" {self.label!r}" if self.label else ""
        return (f"VectorField{name}(xi={el.unparse(self.xi)},"
                f" eta={el.unparse(self.eta)})")

    def coeffs(self, x, y):
        env = {"x": x, "y": y}
        return el.evaluate(self.xi, env), el.evaluate(self.eta, env)

    def partials(self, x, y):
        env = {"x": x, "y": y}
        xi_x = el.diff_eval(self.xi, env, "x")[1]
        xi_y = el.diff_eval(self.xi, env, "y")[1]
        eta_x = el.diff_eval(self.eta, env, "x")[1]
        eta_y = el.diff_eval(self.eta, env, "y")[1]
        return xi_x, xi_y, eta_x, eta_y


def combine_fields(fields, coeffs, label=""):
    """Constant linear combination sum(c_i X_i) as a new VectorField."""
    xi = el.num(0.0)
    eta = el.num(0.0)
    for c, f in zip(coeffs, fields):
        if not isinstance(f, VectorField):
            raise ConfigError("can only combine expression-backed fields")
        xi = el.add(xi, el.mul(el.num(c), f.xi))
        eta = el.add(eta, el.mul(el.num(c), f.eta))
    return VectorField(xi, eta, label=label)


@dataclass
class Box:
    """Sampling box for (x, y, y_) used by validation and symmetry checks."""

    x: tuple = (0.0, 1.0)
    y: tuple = (-10.0, 10.0)
    y_minus: tuple = (-10.0, 10.0)
    ydot: tuple = (-2.0, 2.0)       # only used when sampling full jets
    x_minus: tuple | None = None    # only used when sampling full jets

    def validate(self):
        for name, (lo, hi) in (("x", self.x), ("y", self.y), ("y_", self.y_minus)):
            if not hi > lo:
                raise ConfigError(f"degenerate sampling box in {name}: [{lo}, {hi}]")


class DODSystem:
    """The pair (f, g) with its domain interval.

    Exactly one of ``f`` / ``dode_residual`` and one of ``g`` /
    ``delay_residual`` must be given.  ``f`` may reference x_ in addition to
    (x, y, y_); the delay is resolved first.
    """

    def __init__(self, f=None, g=None, dode_residual=None, delay_residual=None,
                 domain=(0.0, 1.0), label="", box=None, delta_max=10.0):
        if (f is None) == (dode_residual is None):
            raise ConfigError("need exactly one of f / dode_residual")
        if (g is None) == (delay_residual is None):
            raise ConfigError("need exactly one of g / delay_residual")

        def _p(src, names):
            return el.parse(src, names) if isinstance(src, str) else src

        self.f = _p(f, ("x", "y", "y_", "x_"))
        self.g = _p(g, POINT_VARS)
        self.dode_residual = _p(dode_residual, JET_VARS)
        self.delay_residual = _p(delay_residual, ("x", "y", "x_", "y_"))
        if not domain[1] > domain[0]:
            raise ConfigError(f"empty domain interval {domain}")
        self.domain = (float(domain[0]), float(domain[1]))
        self.label = label
        self.box = box or Box(x=self.domain)
        self.delta_max = float(delta_max)

        self._f_fn = el.compile_scalar(self.f, ("x", "y", "y_", "x_")) \
            if self.f is not None else None
        self._g_fn = el.compile_scalar(self.g, POINT_VARS) \
            if self.g is not None else None
        self._G_fn = el.compile_scalar(self.delay_residual, ("x", "y", "x_", "y_")) \
            if self.delay_residual is not None else None
        self._F_fn = el.compile_scalar(self.dode_residual, JET_VARS) \
            if self.dode_residual is not None else None
        self.g_uses_y_minus = (self.g is not None
                               and "y_" in el.variables_of(self.g))

    def __repr__(self):
        return f"DODSystem({self.label or 'unnamed'})"

    # -- residual view (always available) -----------------------------------

    def residual_exprs(self):
        """(F, G) over the jet variables with F = G = 0 the solution manifold."""
        if self.dode_residual is not None:
            F = self.dode_residual
        else:
            F = el.sub(el.var("yd"), self.f)
        if self.delay_residual is not None:
            G = self.delay_residual
        else:
            G = el.sub(el.var("x_"), self.g)
        return F, G

    def residuals_at(self, jet: JetPoint):
        F, G = self.residual_exprs()
        env = jet.env()
        return el.evaluate(F, env), el.evaluate(G, env)

    # -- delay resolution ----------------------------------------------------

    def resolve_delay(self, x, y, y_minus):
        """Delayed abscissa x_ for given (x, y, y_).  For residual-form delay
        relations this bisects on (x - delta_max, x) and takes the largest
        admissible root (multiple roots are possible in pathological regions).
        """
        if self.g is not None:
            x_minus = self._g_fn(x, y, y_minus)
            if not x_minus < x:
                raise DelayOrderError(
                    f"g({x}, {y}, {y_minus}) = {x_minus} >= x")
            return x_minus
        fn = self._G_fn
        root, n = rightmost_root(lambda xm: fn(x, y, xm, y_minus),
                                 x - self.delta_max, x - 1e-12)
        if root is None:
            err = DelayOrderError(
                f"no delayed abscissa in ({x - self.delta_max}, {x}) for"
                f" (x, y, y_) = ({x}, {y}, {y_minus})")
            err.no_root = True  # inadmissible point, not an ordering violation
            raise err
        return root

    def rhs(self, x, y, y_minus, x_minus=None):
        """ydot at a point of the manifold; resolves x_ when not supplied."""
        if x_minus is None:
            x_minus = self.resolve_delay(x, y, y_minus)
        if self.f is not None:
            return self._f_fn(x, y, y_minus, x_minus)
        # Implicit ODE: solve F(x, y, x_, y_, yd) = 0 for yd, bracketing
        # around the chord slope.
        fn = self._F_fn
        m = (y - y_minus) / (x - x_minus)
        lo, hi = m - 1.0, m + 1.0
        flo, fhi = fn(x, y, x_minus, y_minus, lo), fn(x, y, x_minus, y_minus, hi)
        grow = 0
        while flo * fhi > 0.0 and grow < 60:
            lo, hi = m - 2.0 * (m - lo), m + 2.0 * (hi - m)
            flo, fhi = fn(x, y, x_minus, y_minus, lo), fn(x, y, x_minus, y_minus, hi)
            grow += 1
        if flo * fhi > 0.0:
            raise DodsLabError(
                f"could not bracket ydot for implicit DODE at x = {x}")
        return bisect_root(lambda u: fn(x, y, x_minus, y_minus, u), lo, hi,
                           xtol=1e-14)

    def jet(self, x, y, y_minus):
        """Point of the solution manifold (E1 = E2 = 0 by construction)."""
        x_minus = self.resolve_delay(x, y, y_minus)
        ydot = self.rhs(x, y, y_minus, x_minus)
        return JetPoint(x, y, x_minus, y_minus, ydot)

    def dfdy_minus(self, x, y, y_minus):
        """d ydot / d y_ holding (x, y), through the resolved delay."""
        x_minus = self.resolve_delay(x, y, y_minus)
        ydot = self.rhs(x, y, y_minus, x_minus)
        env = {"x": x, "y": y, "x_": x_minus, "y_": y_minus, "yd": ydot}
        F, G = self.residual_exprs()
        G_xm = el.diff_eval(G, env, "x_")[1]
        G_ym = el.diff_eval(G, env, "y_")[1]
        dxm = 0.0 if G_xm == 0.0 else -G_ym / G_xm
        F_ym = el.diff_eval(F, env, "y_")[1]
        F_xm = el.diff_eval(F, env, "x_")[1]
        F_yd = el.diff_eval(F, env, "yd")[1]
        if F_yd == 0.0:
            raise DomainError("implicit DODE is degenerate in ydot here")
        return -(F_ym + F_xm * dxm) / F_yd

    def perturbed_dode(self, extra, label_suffix="+perturbation"):
        """New system with ``extra(x, y, y_)`` added to the right-hand side."""
        extra_expr = el.parse(extra, POINT_VARS) if isinstance(extra, str) else extra
        if self.f is not None:
            f2, F2 = el.add(self.f, extra_expr), None
        else:
            f2, F2 = None, el.sub(self.dode_residual, extra_expr)
        return DODSystem(f=f2, dode_residual=F2, g=self.g,
                         delay_residual=self.delay_residual, domain=self.domain,
                         label=self.label + label_suffix, box=self.box,
                         delta_max=self.delta_max)


def jet_on_manifold(system: DODSystem, x, y, y_minus) -> JetPoint:
    """The jet (x, y, g(..), y_, f(..)) lying on the DODS manifold."""
    return system.jet(x, y, y_minus)


# ---------------------------------------------------------------------------
# Validation of the defining conditions


@dataclass
class ConditionReport:
    name: str
    passed: bool
    detail: str
    witness: tuple | None = None


@dataclass
class ValidationReport:
    system: str
    conditions: list = field(default_factory=list)
    n_sampled: int = 0
    n_rejected: int = 0

    @property
    def ok(self):
        return all(c.passed for c in self.conditions)

    def summary(self):
        lines = [f"validation of {self.system}: "
                 f"{self.n_sampled} sample points ({self.n_rejected} rejected)"]
        for c in self.conditions:
            lines.append(f"  [{'pass' if c.passed else 'FAIL'}] {c.name}: {c.detail}")
        return "\n".join(lines)


def sample_points(box: Box, n, seed=0):
    """Low-discrepancy (x, y, y_) triples inside the box."""
    box.validate()
    u = halton(n, 3, start=17 * seed)
    xs = box.x[0] + u[:, 0] * (box.x[1] - box.x[0])
    ys = box.y[0] + u[:, 1] * (box.y[1] - box.y[0])
    yms = box.y_minus[0] + u[:, 2] * (box.y_minus[1] - box.y_minus[0])
    return list(zip(xs, ys, yms))


def validate_system(system: DODSystem, sample_size=200, seed=0) -> ValidationReport:
    """Check the defining DODS conditions on a deterministic sample.

    'not identically zero' is made operational as max |.| > 1e-12 over the
    sample; the delay ordering must hold at every resolvable sample point.
    """
    if sample_size < 10:
        raise ConfigError("sample_size must be at least 10")
    report = ValidationReport(system=system.label or "system")
    pts = sample_points(system.box, sample_size, seed)

    max_dfdym = 0.0
    dfdym_witness = None
    g_values = []
    order_ok = True
    order_witness = None
    rejected = 0
    for (x, y, ym) in pts:
        try:
            x_minus = system.resolve_delay(x, y, ym)
            dfdym = system.dfdy_minus(x, y, ym)
        except (DelayOrderError, DomainError, DodsLabError) as exc:
            if isinstance(exc, DelayOrderError) and not getattr(exc, "no_root",
                                                                False):
                order_ok = False
                order_witness = (x, y, ym)
            rejected += 1
            continue
        if not math.isfinite(dfdym) or not math.isfinite(x_minus):
            rejected += 1
            continue
        if abs(dfdym) > max_dfdym:
            max_dfdym = abs(dfdym)
            dfdym_witness = (x, y, ym)
        g_values.append(x_minus)
        if not x_minus < x:
            order_ok = False
            order_witness = (x, y, ym)
    report.n_sampled = len(pts)
    report.n_rejected = rejected
    if len(g_values) < max(10, sample_size // 4):
        report.conditions.append(ConditionReport(
            "sampling", False,
            f"only {len(g_values)} of {sample_size} points admissible"))
        return report

    report.conditions.append(ConditionReport(
        "df/dy_ not identically zero", max_dfdym > 1e-12,
        f"max |df/dy_| = {max_dfdym:.3e}", dfdym_witness))
    report.conditions.append(ConditionReport(
        "x_ < x", order_ok,
        "delay ordering holds at every sampled point" if order_ok
        else "delay ordering violated", order_witness))
    spread = max(g_values) - min(g_values)
    report.conditions.append(ConditionReport(
        "g not identically constant", spread > 1e-12,
        f"spread of x_ over sample = {spread:.3e}"))
    return report


# ---------------------------------------------------------------------------
# Linear DODS and algebra realizations


class LinearDODS:
    """ydot = alpha(x) y + beta(x) y_ + gamma(x) with x_ = g(x)."""

    def __init__(self, alpha, beta, gamma, g, domain, label=""):
        def _p(src):
            return el.parse(src, ("x",)) if isinstance(src, str) else src

        self.alpha = _p(alpha)
        self.beta = _p(beta)
        self.gamma = _p(gamma)
        self.g = _p(g)
        if not domain[1] > domain[0]:
            raise ConfigError(f"empty domain interval {domain}")
        self.domain = (float(domain[0]), float(domain[1]))
        self.label = label
        self._check()

    def _check(self, n=64):
        xs = np.linspace(self.domain[0], self.domain[1], n)
        beta_max = 0.0
        g_vals = []
        for x in xs:
            env = {"x": float(x)}
            beta_max = max(beta_max, abs(el.evaluate(self.beta, env)))
            gx = el.evaluate(self.g, env)
            if not gx < x:
                raise ConfigError(f"delay relation g(x) = {gx} >= x = {x}")
            g_vals.append(gx)
        if beta_max <= 1e-12:
            raise ConfigError("beta(x) vanishes identically; not a DODE")
        if max(g_vals) - min(g_vals) <= 1e-12:
            raise ConfigError("g(x) is constant; not admissible")

    def alpha_at(self, x):
        return el.evaluate(self.alpha, {"x": x})

    def beta_at(self, x):
        return el.evaluate(self.beta, {"x": x})

    def gamma_at(self, x):
        return el.evaluate(self.gamma, {"x": x})

    def g_at(self, x):
        return el.evaluate(self.g, {"x": x})

    def is_homogeneous(self, n=32):
        xs = np.linspace(self.domain[0], self.domain[1], n)
        return max(abs(self.gamma_at(float(x))) for x in xs) <= 1e-14

    def as_dods(self, box=None):
        f = el.add(el.add(el.mul(self.alpha, el.var("y")),
                          el.mul(self.beta, el.var("y_"))), self.gamma)
        return DODSystem(f=f, g=self.g, domain=self.domain,
                         label=self.label or "linear", box=box)


@dataclass
class AlgebraRealization:
    """One row of the realization table: basis fields plus bookkeeping."""

    id: str
    algebra: str                    # isomorphism class, e.g. "s2,1"
    basis: list                     # list of VectorField
    params: dict = field(default_factory=dict)
    structure_notes: str = ""
    flags: tuple = ()

    @property
    def dim(self):
        return len(self.basis)

    def basis_rank(self, n_points=40, seed=3):
        """Rank of the coefficient sample matrix; equals dim iff the basis
        fields are linearly independent as vector fields."""
        rng = np.random.default_rng(seed)
        rows = []
        for f in self.basis:
            row = []
            for _ in range(n_points):
                x, y = rng.uniform(0.3, 2.5, size=2)
                xi, eta = f.coeffs(x, y)
                row.extend([xi, eta])
            rows.append(row)
        M = np.array(rows)
        s = np.linalg.svd(M, compute_uv=False)
        return int(np.sum(s > 1e-9 * s[0]))
