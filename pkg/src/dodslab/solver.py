"""Method-of-steps integrator for delay ordinary differential systems.

The delay relation generates a chain of breakpoints: x_{n+1} is the abscissa
where the delayed point catches up with x_n, i.e. where
g(x, y(x), y(x_n)) = x_n.  The solution is continuous but generally not
smooth there, so accepted steps never straddle a breakpoint; each span
[x_n, x_{n+1}] is integrated with an embedded Dormand-Prince 5(4) pair and
stored as cubic-Hermite dense output.

Two controls gate step acceptance: the usual embedded error estimate, and a
direct defect check |H'(x) - f(x, H(x), y(x_))| at three interior points of
the Hermite interpolant (placed near the extrema of the cubic's derivative
error curve).  The defect check is what makes pointwise residuals of the
returned solution track the requested tolerance.

Delayed values are read from the already-computed history.  When the delayed
abscissa falls inside the step currently being built (short or vanishing
delay), the step is iterated against its own dense output to a fixed point.
"""

from __future__ import annotations

import bisect as _bisect
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import exprlang as el
from .core import DODSystem
from .errors import (CausalityError, CompatibilityError, DelayOrderError,
                     DodsLabError, DomainError, OutOfRange, StiffnessError)
from .numutil import DP_A, DP_B5, DP_B4, DP_C, bisect_root, hermite_eval, rightmost_root

_DEFECT_THETAS = (0.2113, 0.5, 0.7887)


@dataclass
class SolverOptions:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = math.inf
    delay_root_tol: float = 1e-12
    interpolation: str = "cubic-hermite"
    compat_tol: float = 1e-8
    force: bool = False
    breakpoint_tol: float = 1e-12
    max_breakpoints: int = 500
    check_defect: bool = True

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise DodsLabError("tolerances must be positive")
        if self.interpolation != "cubic-hermite":
            raise DodsLabError("only cubic-hermite dense output is implemented")


@dataclass
class Span:
    """One inter-breakpoint interval with Hermite node data.

    Node slopes are one-sided: the first node carries the right limit of
    ydot, the last node the left limit, so kinks at breakpoints survive.
    """

    xs: list = field(default_factory=list)
    ys: list = field(default_factory=list)
    ms: list = field(default_factory=list)

    def eval(self, x):
        j = min(max(_bisect.bisect_right(self.xs, x) - 1, 0), len(self.xs) - 2)
        return hermite_eval(x, self.xs[j], self.xs[j + 1], self.ys[j],
                            self.ys[j + 1], self.ms[j], self.ms[j + 1])


class PiecewiseSolution:
    """Initial function plus dense-output spans between breakpoints."""

    def __init__(self, phi, initial_interval, spans, breakpoints, system_label=""):
        self.phi = phi
        self.initial_interval = (float(initial_interval[0]),
                                 float(initial_interval[1]))
        self.spans = spans
        self.breakpoints = breakpoints  # [x0, x1, ..., xN] span boundaries
        self.system_label = system_label

    @property
    def x_start(self):
        return self.initial_interval[0]

    @property
    def x_end(self):
        return self.breakpoints[-1]

    def node_breaks(self):
        return [self.initial_interval[0]] + list(self.breakpoints)

    def evaluate(self, x, side="right"):
        """(y, ydot) at x.  On the initial interval this is (phi, phi');
        exactly at x0 the first integration span wins (right-sided), matching
        the convention ydot(x0) = ydot(x0+)."""
        x0 = self.breakpoints[0]
        if x < self.x_start - 1e-12 or x > self.x_end + 1e-12:
            raise OutOfRange(f"{x} outside [{self.x_start}, {self.x_end}]")
        if x < x0 or (x == x0 and side == "left"):
            env = {"x": float(max(x, self.x_start))}
            return (el.evaluate(self.phi, env),
                    el.diff_eval(self.phi, env, "x")[1])
        if side == "left":
            idx = _bisect.bisect_left(self.breakpoints, x) - 1
        else:
            idx = _bisect.bisect_right(self.breakpoints, x) - 1
        idx = min(max(idx, 0), len(self.spans) - 1)
        return self.spans[idx].eval(min(max(x, x0), self.x_end))

    __call__ = evaluate

    def value(self, x):
        return self.evaluate(x)[0]

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("x,y,ydot,segment_index\n")
            for i, span in enumerate(self.spans):
                for x, y, m in zip(span.xs, span.ys, span.ms):
                    fh.write(f"{x!r},{y!r},{m!r},{i}\n")

    def breakpoints_json(self):
        return json.dumps({
            "initial_interval": list(self.initial_interval),
            "breakpoints": list(self.breakpoints),
            "n_segments": len(self.spans),
        }, sort_keys=True)


# ---------------------------------------------------------------------------
# Delay resolution against an arbitrary solution/history evaluator


def _secant_root(fn, lo, hi, guess, tol):
    """Secant iteration for a root of fn inside (lo, hi), refined by a local
    bracket when it stalls; returns None when no nearby root is found."""
    span = hi - lo
    t0 = _clamp(guess, lo, hi)
    t1 = _clamp(t0 + max(100.0 * tol, 1e-7 * max(1.0, abs(t0))), lo, hi)
    if t1 == t0:
        t1 = _clamp(t0 - max(100.0 * tol, 1e-7), lo, hi)
    try:
        f0, f1 = fn(t0), fn(t1)
    except DodsLabError:
        return None
    best = t0
    for _ in range(40):
        if not (math.isfinite(f0) and math.isfinite(f1)) or f1 == f0:
            break
        t2 = t1 - f1 * (t1 - t0) / (f1 - f0)
        if not lo <= t2 <= hi:
            break
        t0, f0 = t1, f1
        t1 = t2
        try:
            f1 = fn(t1)
        except DodsLabError:
            return None
        best = t1
        if abs(t1 - t0) <= tol:
            return t1
    # local expanding bracket around the best iterate
    delta = max(1000.0 * tol, 1e-4 * span)
    while delta <= span:
        a, b = max(lo, best - delta), min(hi, best + delta)
        try:
            fa, fb = fn(a), fn(b)
        except DodsLabError:
            return None
        if math.isfinite(fa) and math.isfinite(fb) and fa * fb <= 0.0:
            return bisect_root(fn, a, b, xtol=tol)
        delta *= 4.0
    return None


def resolve_delay_on_history(system: DODSystem, x, y, hist_value, hist_floor,
                             tol=1e-12, clamp_floor=False, guess=None):
    """Solve the delay relation for x_ with y_ = Y(x_) read from history.

    ``hist_value(t)`` returns Y(t); ``hist_floor`` is the earliest abscissa
    history can serve (x_{-1}).  Raises CausalityError outside [floor, x);
    with ``clamp_floor`` (forced runs) a sub-floor delayed abscissa is
    tolerated and its value is read at the floor instead.

    A ``guess`` (warm start from a neighbouring resolution) selects the root
    branch by secant iteration; without one the branch is established by a
    right-to-left scan that picks the largest admissible root.
    """
    if system.g is not None and not system.g_uses_y_minus:
        x_minus = system._g_fn(x, y, 0.0)
    else:
        if system.g is not None:
            def psi(t):
                return t - system._g_fn(x, y, hist_value(t))
        else:
            G_fn = system._G_fn

            def psi(t):
                return G_fn(x, y, t, hist_value(t))
        lo = hist_floor if system.g is not None \
            else max(hist_floor, x - system.delta_max)
        hi = x - 1e-13
        x_minus = None
        if guess is not None and lo < guess < x:
            x_minus = _secant_root(psi, lo, hi, guess, tol)
        if x_minus is None:
            x_minus, _n = rightmost_root(psi, lo, hi, xtol=tol)
        if x_minus is None:
            raise CausalityError(
                f"could not resolve delayed abscissa at x = {x}")
    if not x_minus < x:
        raise CausalityError(f"resolved x_ = {x_minus} >= x = {x}")
    if x_minus < hist_floor - 1e-9 and not clamp_floor:
        raise CausalityError(
            f"resolved x_ = {x_minus} precedes the initial interval start"
            f" {hist_floor}")
    return x_minus


def _clamp(v, lo, hi):
    return min(max(v, lo), hi)


class _History:
    """Initial function plus all accepted nodes (the live span included)."""

    def __init__(self, phi, x_m1, x0):
        self.phi = phi
        self.x_m1 = x_m1
        self.x0 = x0
        self.spans = []         # all spans, live one last
        self.closed_bps = [x0]  # boundaries of closed spans
        self._phi_fn = el.compile_scalar(phi, ("x",))

    def start_span(self):
        self.spans.append(Span())
        return self.spans[-1]

    def close_span(self, x_bp):
        self.closed_bps.append(x_bp)

    @property
    def x_accepted(self):
        if self.spans and self.spans[-1].xs:
            return self.spans[-1].xs[-1]
        return self.x0

    def value(self, x):
        return self.pair(x)[0]

    clamp_floor = False

    def pair(self, x):
        if x <= self.x0:
            if x < self.x_m1 - 1e-9 and not self.clamp_floor:
                raise CausalityError(f"history queried at {x} < {self.x_m1}")
            xv = float(max(x, self.x_m1))
            return self._phi_fn(xv), el.diff_eval(self.phi, {"x": xv}, "x")[1]
        idx = len(self.spans) - 1
        # skip spans that start past x and the live span while it has a
        # single node (its start value lives in the previous span)
        while idx > 0 and (x < self.spans[idx].xs[0]
                           or len(self.spans[idx].xs) < 2):
            idx -= 1
        span = self.spans[idx]
        if len(span.xs) < 2:
            env = {"x": float(self.x0)}
            return self._phi_fn(self.x0), el.diff_eval(self.phi, env, "x")[1]
        return span.eval(_clamp(x, span.xs[0], span.xs[-1]))


def _check_compatibility(system, hist, opts):
    x0, x_m1 = hist.x0, hist.x_m1
    y0 = hist.value(x0)
    ym1 = hist.value(x_m1)
    if system.g is not None:
        g0 = system._g_fn(x0, y0, ym1)
        if not g0 < x0:
            raise CausalityError(
                f"delay relation points forward: g(x0) = {g0} >= x0 = {x0}")
        defect = abs(x_m1 - g0)
    else:
        defect = abs(system._G_fn(x0, y0, x_m1, ym1))
    if defect > opts.compat_tol:
        msg = (f"initial interval is incompatible with the delay relation:"
               f" defect {defect:.3e} at x0 = {x0}")
        if not opts.force:
            raise CompatibilityError(msg)
        import warnings
        warnings.warn(msg, stacklevel=2)
    return defect


def solve(system: DODSystem, phi, initial_interval, x_end,
          opts: SolverOptions | None = None) -> PiecewiseSolution:
    """Integrate the DODS forward from x0 = initial_interval[1] to x_end."""
    opts = opts or SolverOptions()
    if isinstance(phi, str):
        phi = el.parse(phi, ("x",))
    x_m1, x0 = float(initial_interval[0]), float(initial_interval[1])
    if not x_m1 < x0:
        raise DodsLabError("initial interval must have positive length")
    if not x_end > x0:
        raise DodsLabError("x_end must exceed x0")

    hist = _History(phi, x_m1, x0)
    hist.clamp_floor = opts.force
    _check_compatibility(system, hist, opts)

    x, y = x0, hist.value(x0)
    bp_cur = x0
    flags = {"spec": False}
    warm = {"x_minus": None}  # delayed-abscissa warm start across stages

    def rhs(xs, ys, step_left, speculative):
        """f at a stage point; delayed values beyond the accepted history come
        from the trial interpolant (or a linear predictor on the first pass)."""

        def value_at(t):
            if t > step_left + 1e-14:
                flags["spec"] = True
                if speculative is not None:
                    return speculative(t)
                yl, ml = hist.pair(step_left)
                return yl + ml * (t - step_left)
            return hist.value(t)

        x_minus = resolve_delay_on_history(system, xs, ys, value_at, hist.x_m1,
                                           tol=opts.delay_root_tol,
                                           clamp_floor=opts.force,
                                           guess=warm["x_minus"])
        warm["x_minus"] = x_minus
        y_minus = value_at(max(x_minus, hist.x_m1) if opts.force else x_minus)
        return system.rhs(xs, ys, y_minus, x_minus)

    def event_fn(xs, y_of_x):
        """Zero exactly when the delayed point of xs sits at bp_cur."""
        y_bp = hist.value(bp_cur)
        if system.g is not None:
            return system._g_fn(xs, y_of_x(xs), y_bp) - bp_cur
        return system._G_fn(xs, y_of_x(xs), bp_cur, y_bp)

    def attempt_step(x0s, y0s, hs):
        """One DOPRI step with fixed-point iteration when the delayed point
        lands inside the step.  Returns (y1, err, m0, m1, interp)."""
        interp = None
        y1_prev = None
        for _ in range(50):
            flags["spec"] = False
            k = [rhs(x0s, y0s, x0s, interp)]
            for i in range(1, 7):
                yi = y0s + hs * sum(a * kk for a, kk in zip(DP_A[i], k))
                k.append(rhs(x0s + DP_C[i] * hs, yi, x0s, interp))
            y1 = y0s + hs * sum(b * kk for b, kk in zip(DP_B5, k))
            y1h = y0s + hs * sum(b * kk for b, kk in zip(DP_B4, k))
            m0 = k[0]
            m1 = rhs(x0s + hs, y1, x0s, interp)
            scale = opts.abs_tol + opts.rel_tol * max(abs(y0s), abs(y1))
            err = abs(y1 - y1h) / scale

            def interp_fn(t, a=x0s, b=x0s + hs, ya=y0s, yb=y1, ma=m0, mb=m1):
                return hermite_eval(_clamp(t, a, b), a, b, ya, yb, ma, mb)[0]

            if not flags["spec"]:
                return y1, err, m0, m1, interp_fn
            if y1_prev is not None and abs(y1 - y1_prev) <= opts.delay_root_tol:
                return y1, err, m0, m1, interp_fn
            y1_prev = y1
            interp = interp_fn
        raise StiffnessError("delay fixed-point iteration did not converge")

    h = min(opts.max_step, (x_end - x0) / 50.0, 0.25)
    h_floor = max(1e-13, 1e-14 * (x_end - x0))
    span = hist.start_span()

    while x < x_end - 1e-13:
        if len(hist.closed_bps) > opts.max_breakpoints:
            raise StiffnessError("too many breakpoints")
        if not span.xs:
            span.xs.append(x)
            span.ys.append(y)
            span.ms.append(rhs(x, y, x, None))

        hs = min(h, x_end - x, opts.max_step)
        if hs < h_floor:
            raise StiffnessError(f"step size underflow at x = {x}")

        try:
            y1, err, m0, m1, interp = attempt_step(x, y, hs)
        except (DomainError, DelayOrderError):
            h = hs * 0.5
            continue
        if not (math.isfinite(y1) and math.isfinite(err)):
            h = hs * 0.5
            continue

        # Cut the trial step at a breakpoint crossing *before* the acceptance
        # gates: a step straddling a kink of the solution would otherwise be
        # rejected forever while only creeping toward the breakpoint.
        def y_of_x(t, a=x, b=x + hs, ya=y, yb=y1, ma=m0, mb=m1):
            if t <= a:
                return hist.value(t)
            return hermite_eval(_clamp(t, a, b), a, b, ya, yb, ma, mb)[0]

        e1 = event_fn(x + hs, y_of_x)
        closing = abs(e1) < opts.breakpoint_tol
        if not closing and event_fn(x, y_of_x) * e1 < 0.0:
            hit = bisect_root(lambda t: event_fn(t, y_of_x), x, x + hs,
                              xtol=opts.breakpoint_tol)
            if hit > x + h_floor:
                hs = hit - x
                y1, err, m0, m1, interp = attempt_step(x, y, hs)
                closing = True
        if not (math.isfinite(y1) and math.isfinite(err)):
            h = hs * 0.5
            continue
        if err > 1.0:
            h = hs * max(0.2, 0.9 * err ** -0.2)
            continue

        # defect control on the cubic Hermite dense output
        if opts.check_defect:
            defect_tol = opts.abs_tol + opts.rel_tol * max(abs(y), abs(y1), 1e-6)
            worst = 0.0
            for theta in _DEFECT_THETAS:
                xq = x + theta * hs
                yq, mq = hermite_eval(xq, x, x + hs, y, y1, m0, m1)
                try:
                    fq = rhs(xq, yq, x, interp)
                except (DomainError, DelayOrderError, CausalityError):
                    worst = math.inf
                    break
                worst = max(worst, abs(mq - fq))
            if worst > defect_tol:
                shrink = 0.8 * (defect_tol / worst) ** (1.0 / 3.0) \
                    if math.isfinite(worst) else 0.3
                h = hs * max(0.15, min(0.9, shrink))
                if h < h_floor:
                    raise StiffnessError(
                        f"defect control forced step underflow at x = {x}")
                continue

        x_new = x + hs
        span.xs.append(x_new)
        span.ys.append(y1)
        span.ms.append(m1)
        x, y = x_new, y1
        h = hs * (min(5.0, 0.9 * err ** -0.2) if err > 0.0 else 5.0)

        if closing:
            hist.close_span(x)
            bp_cur = x
            if x < x_end - 1e-13:
                span = hist.start_span()

    if span.xs and (not hist.closed_bps or hist.closed_bps[-1] < x - 1e-13):
        if len(span.xs) == 1:  # degenerate: x_end == x0 + epsilon
            span.xs.append(x)
            span.ys.append(y)
            span.ms.append(span.ms[0])
        hist.close_span(x)

    return PiecewiseSolution(phi, (x_m1, x0), hist.spans, hist.closed_bps,
                             system_label=system.label)


# ---------------------------------------------------------------------------
# Residual measurement (independent of how the solution was produced)


def solution_residual(system: DODSystem, eval_fn, x_lo, x_hi, n=100,
                      cover_lo=None, avoid=(), offset=1e-9):
    """max over a grid of |E1| with (y, ydot) from ``eval_fn`` and the
    delayed pair re-resolved from the delay relation.

    ``eval_fn(x) -> (y, ydot)`` must cover [cover_lo, x_hi]; grid points whose
    delayed abscissa falls below cover_lo are skipped (counted).  ``avoid``
    lists abscissae (breakpoints) that the grid sidesteps by ``offset``.
    """
    if n < 10:
        raise DodsLabError("need at least 10 residual grid points")
    cover_lo = x_lo if cover_lo is None else cover_lo
    F, _G = system.residual_exprs()
    F_fn = el.compile_scalar(F, ("x", "y", "x_", "y_", "yd"))
    xs = np.linspace(x_lo + offset, x_hi - offset, n)
    for b in avoid:
        for i, xv in enumerate(xs):
            if abs(xv - b) < offset:
                xs[i] = xv + 3 * offset
    worst = 0.0
    skipped = 0
    warm = None
    for xv in xs:
        xv = float(xv)
        try:
            yv, ydv = eval_fn(xv)
            x_minus = resolve_delay_on_history(
                system, xv, yv, lambda t: eval_fn(_clamp(t, cover_lo, x_hi))[0],
                cover_lo, tol=1e-14, guess=warm)
            warm = x_minus
        except (CausalityError, DelayOrderError, DomainError, OutOfRange):
            skipped += 1
            warm = None
            continue
        if x_minus < cover_lo - 1e-9:
            skipped += 1
            continue
        y_minus = eval_fn(x_minus)[0]
        r = abs(F_fn(xv, yv, x_minus, y_minus, ydv))
        if math.isfinite(r):
            worst = max(worst, r)
    if skipped > n // 2:
        raise DodsLabError(f"residual grid mostly unresolvable ({skipped}/{n})")
    return worst


def residual(sol: PiecewiseSolution, system: DODSystem, n=100):
    """Defect of a PiecewiseSolution under its system, breakpoints avoided."""
    return solution_residual(system, sol.evaluate, sol.breakpoints[0],
                             sol.x_end, n=n, cover_lo=sol.x_start,
                             avoid=sol.breakpoints)


def compatible_initial_point(system: DODSystem, phi, x0):
    """x_{-1} such that (phi, [x_{-1}, x0]) satisfies the delay relation."""
    if isinstance(phi, str):
        phi = el.parse(phi, ("x",))
    phi_fn = el.compile_scalar(phi, ("x",))
    y0 = phi_fn(x0)
    return resolve_delay_on_history(system, x0, y0, phi_fn,
                                    x0 - system.delta_max)
