"""Group-invariant solutions of the nonlinear catalog families.

For a one-dimensional symmetry subalgebra with xi not identically zero the
plane invariant J1(x, y) = A and the delay invariant J2(x, y, x_, y_) = B
yield reduction formulas y = h(x, A), x_ = k(x, A, B) (and y_ = h(x_, A)).
Substituting them into the family turns the DODS into algebraic constraints
on the constants, solved here by damped Newton from a deduplicated seed
grid.  Applying the remaining group extends a solution by orbit parameters;
the constraints are always re-solved and re-verified after such an
extension rather than trusted.

One ansatz (the rotation subalgebra of the spiral family) has no graph form
y = h(x); it is represented parametrically in the polar angle and verified
through the parametric chain rule.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import catalog as _catalog
from . import exprlang as el
from .errors import (ConstraintViolated, DodsLabError, DomainError,
                     NumericOnlyAnsatz, UnknownFamily)
from .numutil import newton_damped

_SEED_GRID = tuple(s * 2.0 ** j for j in range(-3, 4) for s in (1.0, -1.0))


@dataclass
class InvariantAnsatz:
    family_id: str
    label: str                 # subalgebra label, e.g. "X2", "X1+X3"
    J1: str                    # invariant of the plane action, over (x, y)
    J2: str                    # delay invariant, over (x, y, x_, y_)
    h: str = ""                # y = h(x; consts), "" for numeric-only
    k: str = ""                # x_ = k(x; consts)
    constraints: tuple = ()    # residual templates over consts + params
    unknowns: tuple = ()       # constraint unknowns, solved by Newton
    free: dict = field(default_factory=dict)    # arbitrary consts -> default
    orbit: dict = field(default_factory=dict)   # orbit params -> identity
    admissibility: tuple = ()  # (expr > 0 template, description)
    numeric_only: bool = False
    parametric: dict | None = None  # phi-parametric forms (spiral ansatz)
    x0_default: float = 1.0
    note: str = ""

    def const_names(self):
        return tuple(self.unknowns) + tuple(self.free) + tuple(self.orbit)

    def _names(self, params):
        return self.const_names() + tuple(params)

    def build_constraints(self, params):
        """Constraint Exprs with the family parameters substituted."""
        return _constraint_exprs(self, params)

    def closed_forms(self, params, constants):
        """(y_expr, xminus_expr) over x with every constant substituted."""
        if not self.h:
            raise NumericOnlyAnsatz(
                f"{self.family_id} {self.label}: catalogued with reduction"
                " invariants only; no closed form is available")
        binding = dict(params)
        binding.update(constants)
        names = ("x",) + self._names(params)
        y_expr = el.substitute(el.parse(self.h, names), binding)
        xm_expr = el.substitute(el.parse(self.k, names), binding)
        return y_expr, xm_expr


@dataclass
class InvariantSolution:
    family_id: str
    ansatz_label: str
    y_expr: object             # Expr over x
    xminus_expr: object        # Expr over x
    constants: dict            # unknowns + frees + orbit values
    family_params: dict
    domain: tuple
    note: str = ""

    def y(self, x):
        return el.evaluate(self.y_expr, {"x": float(x)})

    def ydot(self, x):
        return el.diff_eval(self.y_expr, {"x": float(x)}, "x")[1]

    def x_minus(self, x):
        return el.evaluate(self.xminus_expr, {"x": float(x)})

    def as_initial_data(self, x0=None):
        """(phi_expr, (x_{-1}, x0)) for the method-of-steps solver."""
        x0 = self.domain[0] if x0 is None else x0
        return self.y_expr, (self.x_minus(x0), x0)

    def summary(self):
        return {
            "family": self.family_id,
            "subalgebra": self.ansatz_label,
            "y": el.unparse(self.y_expr),
            "x_minus": el.unparse(self.xminus_expr),
            "constants": dict(sorted(self.constants.items())),
        }


@dataclass
class ParametricSolution:
    family_id: str
    ansatz_label: str
    forms: dict                # name -> Expr over phi (x, y, x_minus, y_minus)
    constants: dict
    family_params: dict
    window: tuple              # admissible phi interval
    note: str = ""

    def point(self, phi):
        env = {"phi": float(phi)}
        return {name: el.evaluate(expr, env) for name, expr in self.forms.items()}

    def jet(self, phi):
        env = {"phi": float(phi)}
        x, dx = el.diff_eval(self.forms["x"], env, "phi")
        y, dy = el.diff_eval(self.forms["y"], env, "phi")
        xm = el.evaluate(self.forms["x_minus"], env)
        ym = el.evaluate(self.forms["y_minus"], env)
        if dx == 0.0:
            raise DomainError("vertical tangent: x'(phi) = 0")
        return x, y, xm, ym, dy / dx

    def summary(self):
        return {
            "family": self.family_id,
            "subalgebra": self.ansatz_label,
            "parametric": {n: el.unparse(e) for n, e in self.forms.items()},
            "constants": dict(sorted(self.constants.items())),
            "window": list(self.window),
        }


@dataclass
class SolveResult:
    assignments: list
    diagnostics: list

    def __bool__(self):
        return bool(self.assignments)

    def __iter__(self):
        return iter(self.assignments)

    def __len__(self):
        return len(self.assignments)


# ---------------------------------------------------------------------------
# The ansatz catalog (subalgebra representative lists)

_ANSAETZE = {}


def _register(ansatz):
    _ANSAETZE.setdefault(ansatz.family_id, []).append(ansatz)


# A2,2: representatives {X1}, {X2}; X1 = d/dy has xi = 0, only X2 survives.
# Constraints A = f(A), B = g(A) come from substituting y = A x, x_ = B x.
_register(InvariantAnsatz(
    family_id="A2,2", label="X2",
    J1="y/x", J2="x_/x",
    h="A*x + alpha", k="B*x",
    constraints=("A - fz(A)", "B - gz(A)"),
    unknowns=("A", "B"), orbit={"alpha": 0.0},
    admissibility=(("B", "B > 0 keeps x_ inside the x > 0 domain"),
                   ("1 - B", "B < 1 enforces x_ < x for x > 0")),
    x0_default=1.0))

# A2,4: representatives cos(phi) X1 + sin(phi) X2; solutions need cos != 0,
# written with the slope a = tan(phi).  A stays arbitrary.
_register(InvariantAnsatz(
    family_id="A2,4", label="X1+a*X2",
    J1="y - a*x", J2="x - x_",
    h="a*x + A", k="x - B",
    constraints=("a - fz(a)", "B - gz(B*a)"),
    unknowns=("a", "B"), free={"A": 5.0},
    admissibility=(("B", "delay span must be positive"),),
    x0_default=0.0))

# A3,2 (a != 1): {X1}, {X2}, {X1 +- X2}, {X3}; X2 = d/dy is excluded.
_register(InvariantAnsatz(
    family_id="A3,2", label="X1",
    J1="y", J2="x - x_",
    h="A", k="x - B",
    constraints=("B",),        # the delay relation forces B = 0
    unknowns=("B",), free={"A": 1.0},
    admissibility=(("B", "B = 0 would erase the delay"),),
    note="no invariant solutions: the constraints force B = 0"))

_register(InvariantAnsatz(
    family_id="A3,2", label="X1+X2",
    J1="y - x", J2="x - x_",
    h="alpha*x + A", k="x - B",
    constraints=("C1 - 1", "B - C2*(alpha*B)^(1/a)"),
    unknowns=("B",), free={"A": 0.0}, orbit={"alpha": 1.0},
    admissibility=(("B", "delay span must be positive"),
                   ("alpha*B", "fractional power needs a positive argument")),
    x0_default=1.0))

_register(InvariantAnsatz(
    family_id="A3,2", label="X1-X2",
    J1="y + x", J2="x - x_",
    h="alpha*x + A", k="x - B",
    constraints=("C1 - 1", "B - C2*(alpha*B)^(1/a)"),
    unknowns=("B",), free={"A": 0.0}, orbit={"alpha": -1.0},
    admissibility=(("B", "delay span must be positive"),
                   ("alpha*B", "fractional power needs a positive argument")),
    x0_default=1.0))

_register(InvariantAnsatz(
    family_id="A3,2", label="X3",
    J1="y/x^a", J2="x_/x",
    h="alpha + A*(x - beta)^a", k="beta + B*(x - beta)",
    constraints=("a - C1*(1 - B^a)/(1 - B)",
                 "(1 - B) - C2*(A*(1 - B^a))^(1/a)"),
    unknowns=("A", "B"), orbit={"alpha": 0.0, "beta": 0.0},
    admissibility=(("B", "0 < B"), ("1 - B", "B < 1")),
    x0_default=1.0))

# A3,4: {X1}, {X2}, {X3}; X2 excluded.
_register(InvariantAnsatz(
    family_id="A3,4", label="X1",
    J1="y", J2="x - x_",
    h="A + alpha*x", k="x - B",
    constraints=("C1", "B - C2*exp(alpha)"),
    unknowns=("B",), free={"A": 1.0}, orbit={"alpha": 0.0},
    admissibility=(("B", "delay span must be positive"),),
    note="exists only for C1 = 0",
    x0_default=0.0))

_register(InvariantAnsatz(
    family_id="A3,4", label="X3",
    J1="y/x - log(abs(x))", J2="x_/x",
    h="alpha + (x - beta)*log(abs(x - beta)) + A*(x - beta)",
    k="beta + B*(x - beta)",
    constraints=("B*log(abs(B))/(1 - B) - (C1 - 1)",
                 "(1 - B)*abs(B)^(B/(1 - B)) - C2*exp(A)"),
    unknowns=("A", "B"), orbit={"alpha": 0.0, "beta": 0.0},
    admissibility=(("B", "0 < B"), ("1 - B", "B < 1")),
    note="x > beta sign branch",
    x0_default=1.0))

# A3,6: {X1}, {X3}.
_register(InvariantAnsatz(
    family_id="A3,6", label="X1",
    J1="y", J2="x - x_",
    h="A", k="x - B",
    constraints=("C1", "B - C2"),
    unknowns=("B",), free={"A": 1.0},
    admissibility=(("B", "delay span must be positive"),),
    note="exists only for C1 = 0",
    x0_default=0.0))

_register(InvariantAnsatz(
    family_id="A3,6", label="X3",
    J1="exp(b*atan(y/x))*sqrt(x^2 + y^2)",
    J2="atan(y/x) - atan(y_/x_)",
    parametric={
        "x": "A*exp(-b*phi)*cos(phi)",
        "y": "A*exp(-b*phi)*sin(phi)",
        "x_minus": "A*exp(-b*(phi - B))*cos(phi - B)",
        "y_minus": "A*exp(-b*(phi - B))*sin(phi - B)",
    },
    constraints=(
        "b*(sin(B) - C1*(cos(B) - exp(-b*B))) - (cos(B) - exp(-b*B)"
        " + C1*sin(B))",
        "A*sqrt(1 - 2*exp(b*B)*cos(B) + exp(2*b*B))"
        "*exp(b*atan2(exp(b*B)*sin(B), 1 - exp(b*B)*cos(B))) - C2"),
    unknowns=("A", "B"),
    admissibility=(("A", "amplitude of the spiral"), ("B", "angular lag"),
                   ("3.14159265 - B", "first window 0 < B < pi")),
    note="polar representation; verified on a window where x - x_ > 0"))

# A3,8 (via the alternative realization): {X1}, {X2}, {X1+X3}.
_register(InvariantAnsatz(
    family_id="A3,8alt", label="X1",
    J1="y", J2="x - x_",
    h="A", k="x - B",
    constraints=("C1/A", "B - C2*A^2"),
    unknowns=("B",), free={"A": 1.0},
    admissibility=(("B", "delay span must be positive"),),
    note="exists only for C1 = 0; B follows from any A",
    x0_default=0.0))

_register(InvariantAnsatz(
    family_id="A3,8alt", label="X2",
    J1="y/sqrt(x)", J2="x_/x",
    h="A*sqrt(x)", k="B*x",
    constraints=("A/2 - A/(1 + sqrt(B)) - C1/A",
                 "1/sqrt(B) - sqrt(B) - C2*A^2"),
    unknowns=("A", "B"),
    admissibility=(("B", "0 < B"), ("1 - B", "B < 1")),
    x0_default=1.0))

_register(InvariantAnsatz(
    family_id="A3,8alt", label="X1+X3",
    J1="y/sqrt(x^2 + 1)", J2="(x - x_)/(1 + x*x_)",
    h="A*sqrt(x^2 + 1)", k="(x - B)/(1 + B*x)",
    constraints=("(A/B)*(1 - sqrt(B^2 + 1)) + C1/A",
                 "B - C2*A^2*sqrt(B^2 + 1)"),
    unknowns=("A", "B"),
    admissibility=(("B", "positive angular lag"),),
    note="sign(1 + B*x) = +1 branch",
    x0_default=1.0))

# A3,9: {X1}, {X2}, {X1+X3}; X1 excluded (xi = 0), X1+X3 numeric-only.
_register(InvariantAnsatz(
    family_id="A3,9", label="X2",
    J1="y/x", J2="x_/x",
    h="A*x", k="B*x",
    constraints=(
        "A - (A^2*(1 - B)^2 + B^2 - 1 + 2*C1*A*(1 - B))"
        "/(2*A*(1 - B) - C1*(A^2*(1 - B)^2 + B^2 - 1))",
        "(A^2 + 1)*(1 - B)^2 - C2*B"),
    unknowns=("A", "B"),
    admissibility=(("B", "0 < B"), ("1 - B", "B < 1")),
    x0_default=2.0))

_register(InvariantAnsatz(
    family_id="A3,9", label="X1+X3",
    J1="(y^2 + x^2 + 1)/x",
    J2="atan((y^2 + x^2 - 1)/(2*y)) - atan((y_^2 + x_^2 - 1)/(2*y_))",
    numeric_only=True,
    note="reduction invariants only; the closed form is not catalogued"))

# A3,10 (via the alternative realization): {X1}, {X2}, {X1+X3}.
_register(InvariantAnsatz(
    family_id="A3,10alt", label="X1",
    J1="y - x", J2="x - x_",
    h="x + A", k="x - B",
    constraints=("1 - C1*((A + B)/B)^2", "B^2/A^2 - C2"),
    unknowns=("A", "B"),
    admissibility=(("B", "delay span must be positive"),),
    x0_default=1.0))

_register(InvariantAnsatz(
    family_id="A3,10alt", label="X2",
    J1="y/x", J2="x_/x",
    h="A*x", k="B*x",
    constraints=("A - C1*((A - B)/(1 - B))^2",
                 "A*(1 - B)^2/((A - 1)^2*B) - C2"),
    unknowns=("A", "B"),
    admissibility=(("B", "0 < B"), ("1 - B", "B < 1")),
    x0_default=1.0))

_register(InvariantAnsatz(
    family_id="A3,10alt", label="X1+X3",
    J1="(y - x)/(1 + x*y)", J2="(x - x_)/(1 + x*x_)",
    h="(x + A)/(1 - A*x)", k="(x - B)/(1 + B*x)",
    constraints=("1 + A^2 - C1*(1 + A/B)^2",
                 "(1 + A^2)*B^2/(A^2*(1 + B^2)) - C2"),
    unknowns=("A", "B"),
    admissibility=(("B", "positive angular lag"),),
    note="valid while 1 - A*x and 1 + B*x keep their sign",
    x0_default=0.5))

# A3,12: one representative, {X1}.
_register(InvariantAnsatz(
    family_id="A3,12", label="X1",
    J1="y/sqrt(1 + x^2)", J2="(x - x_)/(1 + x*x_)",
    h="A*sqrt(1 + x^2)", k="(x - B)/(1 + B*x)",
    constraints=("(A/(1 + A^2))*(1 - 1/sqrt(1 + B^2)) - C1",
                 "(1/sqrt(1 + B^2) + A^2)^2 - (1 - C2)*(1 + A^2)^2"),
    unknowns=("A", "B"),
    admissibility=(("A", "amplitude"), ("B", "positive angular lag"),),
    note="sign(1 + B*x) = +1 branch",
    x0_default=1.0))

_NO_SOLUTION_FAMILIES = {"A1,1": "the only generator has xi = 0",
                         "A2,1": "both generators have xi = 0",
                         "A2,3": "both generators have xi = 0"}


def subalgebra_catalog(family_id):
    """Representative one-dimensional subalgebras with xi not identically 0."""
    if family_id in _ANSAETZE:
        return list(_ANSAETZE[family_id])
    if family_id in _NO_SOLUTION_FAMILIES:
        return []
    _catalog.get_family(family_id)  # raises UnknownFamily for bad ids
    return []


# ---------------------------------------------------------------------------
# Constraint solving


def _constraint_exprs(ansatz, params):
    fam = _catalog.get_family(ansatz.family_id)
    names = ansatz.const_names() + tuple(params)
    out = []
    for template in ansatz.constraints:
        if fam.kind == "functions":
            expr = _splice_functions(template, params, names)
        else:
            expr = el.parse(template, names)
            expr = el.substitute(expr, params)
        out.append(expr)
    return out


def _splice_functions(template, params, names):
    """Replace fz(arg)/gz(arg) in a constraint template by the user-supplied
    family functions evaluated at arg.

    The user function is declared over a single variable (z or w for the
    chord families, x for coefficient families); the call argument is parsed
    and substituted for it.
    """
    import re

    fam_f, fam_g = params["f"], params["g"]
    ext_names = tuple(names) + ("__spliced__",)

    def splice(src):
        m = re.search(r"(fz|gz)\(([^()]*)\)", src)
        if m is None:
            return el.parse(src, ext_names)
        fn_name, arg_src = m.group(1), m.group(2)
        arg_expr = el.parse(arg_src, ext_names)
        user_src = fam_f if fn_name == "fz" else fam_g
        spliced = None
        for varname in ("z", "w", "x"):
            try:
                user_expr = el.parse(user_src, (varname,))
            except DodsLabError:
                continue
            spliced = el.substitute(user_expr, {varname: arg_expr})
            break
        if spliced is None:
            raise DodsLabError(f"cannot splice {fn_name} = {user_src!r}")
        outer = splice(src[:m.start()] + "__spliced__" + src[m.end():])
        return el.substitute(outer, {"__spliced__": spliced})

    return splice(template)


def solve_constraints(ansatz, family_params=None, seeds=None, tol=1e-12,
                      frees=None, orbit=None):
    """Find admissible constant assignments for an ansatz.

    Returns a SolveResult (possibly empty, with diagnostics).  Free constants
    and orbit parameters are held at their defaults unless overridden; they
    are reported inside each assignment.
    """
    if ansatz.numeric_only:
        return SolveResult([], [f"{ansatz.family_id} {ansatz.label} is"
                               " numeric-only"])
    fam = _catalog.get_family(ansatz.family_id)
    params = dict(fam.defaults)
    params.update(family_params or {})
    fixed = {}
    fixed.update({k: float(v) for k, v in ansatz.free.items()})
    fixed.update({k: float(v) for k, v in ansatz.orbit.items()})
    if frees:
        fixed.update({k: float(v) for k, v in frees.items()})
    if orbit:
        fixed.update({k: float(v) for k, v in orbit.items()})

    exprs = _constraint_exprs(ansatz, params)
    unknowns = list(ansatz.unknowns)
    diagnostics = []

    # constraints not involving any unknown act as feasibility gates
    gates, active = [], []
    for expr in exprs:
        used = el.variables_of(expr)
        (active if used & set(unknowns) else gates).append(expr)
    for gate in gates:
        val = el.evaluate(gate, fixed)
        if abs(val) > max(tol, 1e-10):
            diagnostics.append(
                f"feasibility gate {el.unparse(gate)} = {val:.3e} != 0;"
                " no invariant solution for these family parameters")
            return SolveResult([], diagnostics)

    if not unknowns:
        return SolveResult([dict(fixed)], diagnostics)

    def residual_at(vec):
        env = dict(fixed)
        env.update({name: float(v) for name, v in zip(unknowns, vec)})
        return np.array([el.evaluate(expr, env) for expr in active])

    def jacobian_at(vec):
        env = dict(fixed)
        env.update({name: float(v) for name, v in zip(unknowns, vec)})
        return np.array([[el.diff_eval(expr, env, name)[1] for name in unknowns]
                         for expr in active])

    if seeds is None:
        grid = [_SEED_GRID for _ in unknowns]
        seeds = list(itertools.product(*grid))
        if len(seeds) > 3000:
            seeds = seeds[:3000]

    found = []
    for seed in seeds:
        try:
            vec, ok = newton_damped(residual_at, jacobian_at,
                                    np.asarray(seed, dtype=float), tol=tol)
        except (DomainError, DodsLabError):
            continue
        if not ok:
            continue
        if any(max(abs(v - p) for v, p in zip(vec, prev)) < 1e-6
               for prev in found):
            continue
        found.append(tuple(float(v) for v in vec))

    assignments = []
    for vec in sorted(found):
        env = dict(fixed)
        env.update({name: v for name, v in zip(unknowns, vec)})
        if not _admissible(ansatz, env, diagnostics):
            continue
        if ansatz.parametric is None and ansatz.h \
                and _degenerate_on_solution(ansatz, params, env):
            diagnostics.append(
                f"{_fmt(env, unknowns)} rejected: the DODE loses its delayed"
                " argument along this candidate (df/dy_ = 0)")
            continue
        assignments.append(env)
    if not assignments and not diagnostics:
        diagnostics.append("Newton found no admissible root from"
                           f" {len(seeds)} seeds")
    return SolveResult(assignments, diagnostics)


def _fmt(env, unknowns):
    return "{" + ", ".join(f"{k} = {env[k]:.6g}" for k in unknowns) + "}"


def _admissible(ansatz, env, diagnostics):
    for template, description in ansatz.admissibility:
        expr = el.parse(template, tuple(env))
        try:
            val = el.evaluate(expr, env)
        except DodsLabError:
            return False
        if not val > 1e-9:
            diagnostics.append(
                f"root rejected by admissibility '{description}'"
                f" ({el.unparse(expr)} = {val:.3e})")
            return False
    return True


def _degenerate_on_solution(ansatz, params, env, n=5):
    """True when df/dy_ vanishes along the whole candidate solution."""
    try:
        system = _catalog.invariant_family(ansatz.family_id, validate=False,
                                           **params)
        y_expr, xm_expr = ansatz.closed_forms(params, env)
    except DodsLabError:
        return False
    spec = _catalog.get_family(ansatz.family_id)
    lo, hi = spec.box.x
    worst = 0.0
    checked = 0
    for x in np.linspace(lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo), n):
        x = float(x)
        try:
            y = el.evaluate(y_expr, {"x": x})
            xm = el.evaluate(xm_expr, {"x": x})
            ym = el.evaluate(y_expr, {"x": xm})
            sens = system.dfdy_minus(x, y, ym)
        except (DodsLabError, DomainError):
            continue
        checked += 1
        worst = max(worst, abs(sens))
    return checked > 0 and worst <= 1e-12


# ---------------------------------------------------------------------------
# Building, extending and verifying solutions


def build_solution(ansatz, constants, family_params=None):
    """Closed-form invariant solution for one constant assignment."""
    fam = _catalog.get_family(ansatz.family_id)
    params = dict(fam.defaults)
    params.update(family_params or {})
    if ansatz.numeric_only:
        raise NumericOnlyAnsatz(
            f"{ansatz.family_id} {ansatz.label} has no catalogued closed form")
    if ansatz.parametric is not None:
        forms = {}
        binding = dict(params)
        binding.update(constants)
        for name, template in ansatz.parametric.items():
            expr = el.parse(template, ("phi",) + ansatz.const_names()
                            + tuple(params))
            forms[name] = el.substitute(expr, binding)
        window = _parametric_window(forms)
        return ParametricSolution(ansatz.family_id, ansatz.label, forms,
                                  dict(constants), params, window,
                                  note=ansatz.note)
    y_expr, xm_expr = ansatz.closed_forms(params, constants)
    domain = _solution_domain(ansatz, y_expr, xm_expr, params)
    return InvariantSolution(ansatz.family_id, ansatz.label, y_expr, xm_expr,
                             dict(constants), params, domain, note=ansatz.note)


def _solution_domain(ansatz, y_expr, xm_expr, params):
    spec = _catalog.get_family(ansatz.family_id)
    lo, hi = spec.make_system(validate=False, **params).domain
    # keep the largest contiguous run where x_ < x and the forms evaluate
    # finitely (poles of Moebius-type forms split the system domain)
    xs = np.linspace(lo, hi, 240)
    runs, current = [], []
    for x in xs:
        x = float(x)
        ok = True
        try:
            xm = el.evaluate(xm_expr, {"x": x})
            yv = el.evaluate(y_expr, {"x": x})
            ymv = el.evaluate(y_expr, {"x": xm})
            ok = xm < x and all(math.isfinite(v) and abs(v) < 100.0
                                for v in (xm, yv, ymv))
        except DodsLabError:
            ok = False
        if ok:
            current.append(x)
        elif current:
            runs.append(current)
            current = []
    if current:
        runs.append(current)
    best = max(runs, key=len, default=[])
    if len(best) < 10:
        raise DodsLabError(
            f"no usable domain for the {ansatz.family_id} {ansatz.label}"
            " solution")
    return best[0], best[-1]


def _parametric_window(forms, n=720):
    """Largest phi interval where x - x_ > 0 and x'(phi) != 0."""
    phis = np.linspace(-2.0 * math.pi, 2.0 * math.pi, n)
    best = (None, None)
    run_start = None
    for phi in phis:
        env = {"phi": float(phi)}
        try:
            x, dx = el.diff_eval(forms["x"], env, "phi")
            xm = el.evaluate(forms["x_minus"], env)
        except DodsLabError:
            ok = False
        else:
            ok = (x - xm) > 1e-6 and abs(dx) > 1e-6
        if ok and run_start is None:
            run_start = phi
        if not ok and run_start is not None:
            if best[0] is None or (phi - run_start) > (best[1] - best[0]):
                best = (run_start, phi)
            run_start = None
    if run_start is not None:
        if best[0] is None or (phis[-1] - run_start) > (best[1] - best[0]):
            best = (run_start, phis[-1])
    if best[0] is None:
        raise DodsLabError("no admissible parametric window found")
    width = best[1] - best[0]
    return best[0] + 0.1 * width, best[1] - 0.1 * width


def verify(system, solution, grid=200, tol=None):
    """Max residual of both defining equations along a closed-form or
    parametric solution; independent of the numerical solver."""
    F, G = system.residual_exprs()
    F_fn = el.compile_scalar(F, ("x", "y", "x_", "y_", "yd"))
    G_fn = el.compile_scalar(G, ("x", "y", "x_", "y_", "yd"))
    worst = 0.0
    used = 0
    if isinstance(solution, ParametricSolution):
        lo, hi = solution.window
        for phi in np.linspace(lo, hi, grid):
            try:
                x, y, xm, ym, yd = solution.jet(float(phi))
            except (DodsLabError, DomainError):
                continue
            used += 1
            worst = max(worst, abs(F_fn(x, y, xm, ym, yd)),
                        abs(G_fn(x, y, xm, ym, yd)))
    else:
        lo, hi = solution.domain
        pad = 1e-9 * (hi - lo)
        for x in np.linspace(lo + pad, hi - pad, grid):
            x = float(x)
            try:
                y = solution.y(x)
                yd = solution.ydot(x)
                xm = solution.x_minus(x)
                ym = solution.y(xm)
            except (DodsLabError, DomainError):
                continue
            used += 1
            worst = max(worst, abs(F_fn(x, y, xm, ym, yd)),
                        abs(G_fn(x, y, xm, ym, yd)))
    if used < grid // 2:
        raise DodsLabError("verification grid mostly inadmissible")
    if tol is not None and worst > tol:
        raise ConstraintViolated(
            f"solution residual {worst:.3e} exceeds {tol:g}")
    return worst


def orbit_extend(ansatz, solution, group_params, family_params=None,
                 tol=1e-8):
    """Apply the remaining group: rebind orbit parameters, re-solve the
    constraints seeded at the current constants, and re-verify.

    Raises ConstraintViolated when the extended candidate cannot satisfy the
    family equations (with diagnostics in the message).
    """
    fam = _catalog.get_family(ansatz.family_id)
    params = dict(fam.defaults)
    params.update(family_params or {})
    unknown = set(group_params) - set(ansatz.orbit) - set(ansatz.free)
    if unknown:
        raise ConstraintViolated(
            f"{ansatz.family_id} {ansatz.label} has no orbit/free parameters"
            f" {sorted(unknown)}")
    orbit_vals = {k: group_params.get(k, solution.constants.get(k, v))
                  for k, v in ansatz.orbit.items()}
    free_vals = {k: group_params.get(k, solution.constants.get(k, v))
                 for k, v in ansatz.free.items()}
    seed = [solution.constants[u] for u in ansatz.unknowns]
    result = solve_constraints(ansatz, params, seeds=[seed] if seed else None,
                               frees=free_vals, orbit=orbit_vals)
    if not result:
        raise ConstraintViolated(
            f"orbit extension of {ansatz.family_id} {ansatz.label} with"
            f" {group_params} admits no constants; "
            + "; ".join(result.diagnostics))
    extended = build_solution(ansatz, result.assignments[0], params)
    system = _catalog.invariant_family(ansatz.family_id, validate=False,
                                       **params)
    residual = verify(system, extended, grid=120)
    if residual > tol:
        raise ConstraintViolated(
            f"extended solution violates the system (residual"
            f" {residual:.3e} > {tol:g})")
    return extended


def jacobian_condition_min(ansatz, family_params=None, n=50, seed=7,
                           constants=None):
    """min |det d(J1,J2)/d(y, x_)| over sampled admissible points.

    The reduction invariants may mention ansatz constants (slopes etc.);
    they are bound at generic values (unknowns at 1, frees/orbit at their
    defaults) unless ``constants`` overrides them.
    """
    fam = _catalog.get_family(ansatz.family_id)
    params = dict(fam.defaults)
    params.update(family_params or {})
    binding = dict(params)
    binding.update({name: 1.0 for name in ansatz.unknowns})
    binding.update(ansatz.free)
    binding.update(ansatz.orbit)
    if constants:
        binding.update(constants)
    names = ("x", "y", "x_", "y_") + tuple(binding)
    j1 = el.substitute(el.parse(ansatz.J1, names), binding)
    j2 = el.substitute(el.parse(ansatz.J2, names), binding)
    rng = np.random.default_rng(seed)
    box = fam.box
    best = math.inf
    used = 0
    while used < n:
        x = rng.uniform(*box.x)
        y = rng.uniform(*box.y)
        ym = rng.uniform(*box.y_minus)
        xm = rng.uniform(*box.x_minus) if box.x_minus else x - rng.uniform(0.2, 1.0)
        if not xm < x:
            continue
        env = {"x": x, "y": y, "x_": xm, "y_": ym}
        try:
            d1 = el.diff_eval(j1, {"x": x, "y": y}, "y")[1]
            d2 = el.diff_eval(j2, env, "x_")[1]
            d1b = 0.0  # J1 never involves x_
            d2b = el.diff_eval(j2, env, "y")[1] if "y" in el.variables_of(j2) \
                else 0.0
        except (DodsLabError, DomainError):
            continue
        det = d1 * d2 - d1b * d2b
        if math.isfinite(det):
            used += 1
            best = min(best, abs(det))
    return best
