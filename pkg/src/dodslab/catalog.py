"""Machine-readable catalog of symmetry-algebra realizations (dimensions 1-4
plus the six-dimensional conformal realization) and of the invariant DODS
families attached to them.

Realizations are stored as expression strings for (xi, eta).  In the
structure notes a ";" separates the nilradical (solvable algebras) or the
derived algebra (nilpotent ones) from the rest, and "{..}, {..}" groups mark
decomposable algebras, following the usual table conventions.

Families with dimension <= 2 take free functions as expression strings with
a documented variable, families with dimension 3 take numeric constants.
Delay relations that are implicit in x_ are stored in residual form and the
resulting DODSystem resolves them by bracketed bisection (largest admissible
root below x).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import exprlang as el
from .core import AlgebraRealization, Box, DODSystem, VectorField, validate_system
from .errors import (DegenerateFamilyError, FamilyValidationError, ParamError,
                     UnknownFamily)

# difference quantities used when substituting templates
_DY = "(y - y_)"
_DX = "(x - x_)"
_M = f"({_DY}/{_DX})"  # chord slope


# ---------------------------------------------------------------------------
# Table of realizations


def _fields(*pairs):
    return [VectorField(xi, eta, label=f"X{i + 1}")
            for i, (xi, eta) in enumerate(pairs)]


@dataclass
class RealizationSpec:
    id: str
    algebra: str
    pairs: tuple                       # ((xi, eta) strings, possibly with params)
    dim: int
    param_spec: dict = field(default_factory=dict)  # name -> (default, doc)
    structure_notes: str = ""
    flags: tuple = ()
    base_id: str = ""                  # class id when this is an alternative

    def build(self, **params):
        bound = {}
        for name, (default, doc) in self.param_spec.items():
            bound[name] = params.get(name, default)
        for name in params:
            if name not in self.param_spec:
                raise ParamError(f"{self.id} has no parameter {name!r}")
        _check_realization_params(self.id, bound)
        fields_ = []
        for i, (xi, eta) in enumerate(self.pairs):
            sub = {}
            for name, value in bound.items():
                if isinstance(value, str):
                    sub[name] = el.parse(value, ("x",))
                else:
                    sub[name] = float(value)
            xi_e = el.substitute(el.parse(xi, ("x", "y") + tuple(bound)), sub)
            eta_e = el.substitute(el.parse(eta, ("x", "y") + tuple(bound)), sub)
            fields_.append(VectorField(xi_e, eta_e, label=f"X{i + 1}"))
        return AlgebraRealization(id=self.id, algebra=self.algebra,
                                  basis=fields_, params=bound,
                                  structure_notes=self.structure_notes,
                                  flags=self.flags)


def _check_realization_params(rid, p):
    a = p.get("a")
    if rid == "A3,2" and a is not None and not 0.0 < abs(a):
        raise ParamError("A3,2 requires a != 0")
    if rid in ("A4,4", "A4,15") and a is not None:
        if not (-1.0 <= a < 0.0 or 0.0 < a < 1.0):
            raise ParamError(f"{rid} requires a in [-1,0) or (0,1)")
    if rid == "A4,4":
        alpha = p.get("alpha")
        if alpha is not None and a is not None:
            if alpha in (0.0, 1.0) or abs(alpha - 1.0 / (1.0 - a)) < 1e-12:
                raise ParamError("A4,4 requires alpha not in {0, 1/(1-a), 1}")
    if rid == "A4,6" and p.get("a") in (0.0, 1.0):
        raise ParamError("A4,6 requires a not in {0, 1}")
    if rid == "A4,9" and p.get("a") in (0.0, 1.0):
        raise ParamError("A4,9 requires a not in {0, 1}")
    if rid == "A4,7" and p.get("beta") == 0.0:
        raise ParamError("A4,7 requires beta != 0")
    if rid in ("A3,6", "A3,7") and p.get("b") is not None and p["b"] < 0.0:
        raise ParamError(f"{rid} requires b >= 0")
    if rid == "A4,17" and p.get("alpha") is not None and p["alpha"] < 0.0:
        raise ParamError("A4,17 requires alpha >= 0")


_R = RealizationSpec

REALIZATIONS = [
    # dimension 1
    _R("A1,1", "n1,1", (("0", "1"),), 1),
    # dimension 2
    _R("A2,1", "s2,1", (("0", "1"), ("0", "y")), 2,
       structure_notes="X1; X2 - linearly connected"),
    _R("A2,2", "s2,1", (("0", "1"), ("x", "y")), 2,
       structure_notes="X1; X2 - linearly nonconnected"),
    _R("A2,3", "2n1,1", (("0", "1"), ("0", "x")), 2,
       structure_notes="{X1}, {X2} - linearly connected"),
    _R("A2,4", "2n1,1", (("1", "0"), ("0", "1")), 2,
       structure_notes="{X1}, {X2} - linearly nonconnected"),
    # dimension 3
    _R("A3,1", "n3,1", (("0", "1"), ("0", "x"), ("1", "0")), 3,
       structure_notes="X1, X2; X3"),
    _R("A3,2", "s3,1", (("1", "0"), ("0", "1"), ("x", "a*y")), 3,
       param_spec={"a": (0.5, "0 < |a| <= 1 (normalized realization range)")},
       structure_notes="X1, X2; X3"),
    _R("A3,3", "s3,1", (("0", "1"), ("0", "x"), ("(1 - a)*x", "y")), 3,
       param_spec={"a": (0.5, "0 < |a| <= 1")},
       structure_notes="X1, X2; X3 - linearly connected pair"),
    _R("A3,4", "s3,2", (("1", "0"), ("0", "1"), ("x", "x + y")), 3,
       structure_notes="X1, X2; X3"),
    _R("A3,5", "s3,2", (("0", "1"), ("0", "x"), ("1", "y")), 3,
       structure_notes="X1, X2; X3 - linearly connected pair"),
    _R("A3,6", "s3,3", (("1", "0"), ("0", "1"), ("b*x + y", "b*y - x")), 3,
       param_spec={"b": (0.5, "b >= 0")},
       structure_notes="X1, X2; X3"),
    _R("A3,7", "s3,3", (("0", "1"), ("0", "x"), ("1 + x^2", "(x + b)*y")), 3,
       param_spec={"b": (0.5, "b >= 0")},
       structure_notes="X1, X2; X3 - linearly connected pair"),
    _R("A3,8", "sl2", (("0", "1"), ("x", "y"), ("2*x*y", "y^2")), 3,
       structure_notes="imprimitive; centralizer x d/dx"),
    _R("A3,8alt", "sl2", (("1", "0"), ("2*x", "y"), ("x^2", "x*y")), 3,
       base_id="A3,8", structure_notes="alternative realization of A3,8"),
    _R("A3,9", "sl2", (("0", "1"), ("x", "y"), ("2*x*y", "y^2 - x^2")), 3,
       structure_notes="primitive over the reals"),
    _R("A3,10", "sl2", (("0", "1"), ("x", "y"), ("2*x*y", "y^2 + x^2")), 3,
       structure_notes="imprimitive"),
    _R("A3,10alt", "sl2", (("1", "1"), ("x", "y"), ("x^2", "y^2")), 3,
       base_id="A3,10", structure_notes="alternative realization of A3,10"),
    _R("A3,11", "sl2", (("0", "1"), ("0", "y"), ("0", "y^2")), 3,
       structure_notes="all fields along d/dy - linearly connected"),
    _R("A3,12", "o3", (("1 + x^2", "x*y"), ("x*y", "1 + y^2"), ("y", "-x")), 3),
    _R("A3,13", "n1,1+s2,1", (("1", "0"), ("0", "1"), ("0", "y")), 3,
       structure_notes="{X1}, {X2; X3}"),
    _R("A3,14", "n1,1+s2,1", (("0", "x"), ("0", "1"), ("x", "y")), 3,
       structure_notes="{X1}, {X2; X3}"),
    _R("A3,15", "3n1,1", (("0", "1"), ("0", "x"), ("0", "chi")), 3,
       param_spec={"chi": ("x^2", "chi(x) with nonvanishing second derivative")},
       structure_notes="{X1}, {X2}, {X3}"),
    # dimension 4
    _R("A4,1", "n4,1", (("0", "1"), ("0", "x"), ("0", "x^2"), ("1", "0")), 4,
       structure_notes="X1, X2; X3, X4"),
    _R("A4,2", "s4,1", (("0", "1"), ("0", "x"), ("0", "exp(x)"), ("1", "0")), 4,
       structure_notes="X1, X2, X3; X4"),
    _R("A4,3", "s4,2", (("0", "1"), ("0", "x"), ("0", "x^2"), ("1", "y")), 4,
       structure_notes="X1, X2, X3; X4"),
    _R("A4,4", "s4,3",
       (("0", "1"), ("0", "x"), ("0", "abs(x)^alpha"), ("(1 - a)*x", "y")), 4,
       param_spec={"a": (0.5, "a in [-1,0) or (0,1)"),
                   "alpha": (3.0, "alpha not in {0, 1/(1-a), 1}")},
       structure_notes="X1, X2, X3; X4",
       flags=("additional-restriction-not-reproduced",)),
    _R("A4,5", "s4,3", (("0", "1"), ("0", "x"), ("0", "chi"), ("0", "y")), 4,
       param_spec={"chi": ("x^2", "chi(x) with nonvanishing second derivative")},
       structure_notes="X1, X2, X3; X4"),
    _R("A4,6", "s4,4", (("0", "1"), ("0", "x"), ("0", "exp(a*x)"), ("1", "y")), 4,
       param_spec={"a": (2.0, "a not in {0, 1}")},
       structure_notes="X1, X2, X3; X4"),
    _R("A4,7", "s4,5",
       (("0", "1"), ("0", "exp(alpha*x)*cos(beta*x)"),
        ("0", "exp(alpha*x)*sin(beta*x)"), ("1", "y")), 4,
       param_spec={"alpha": (0.5, "any real"), "beta": (1.0, "beta != 0")},
       structure_notes="X1, X2, X3; X4"),
    _R("A4,8", "s4,6", (("0", "1"), ("1", "0"), ("0", "x"), ("x", "0")), 4,
       structure_notes="X1, X2, X3; X4"),
    _R("A4,9", "s4,8", (("0", "1"), ("1", "0"), ("0", "x"), ("x", "a*y")), 4,
       param_spec={"a": (2.0, "a not in {0, 1}")},
       structure_notes="X1, X2, X3; X4"),
    _R("A4,10", "s4,10", (("0", "1"), ("1", "0"), ("0", "x"),
                          ("x", "2*y + x^2")), 4,
       structure_notes="X1, X2, X3; X4"),
    _R("A4,11", "s4,11", (("0", "1"), ("1", "0"), ("0", "x"), ("x", "y")), 4,
       structure_notes="X1, X2, X3; X4"),
    _R("A4,12", "s4,11", (("0", "1"), ("0", "x"), ("1", "0"), ("0", "y")), 4,
       structure_notes="X1, X2, X3; X4"),
    _R("A4,13", "s4,12", (("1", "0"), ("0", "1"), ("x", "y"), ("y", "-x")), 4,
       structure_notes="X1, X2; X3, X4"),
    _R("A4,14", "s4,12", (("0", "1"), ("0", "x"), ("0", "y"),
                          ("1 + x^2", "x*y")), 4,
       structure_notes="X1, X2; X3, X4"),
    _R("A4,15", "n1,1+s3,1",
       (("0", "abs(x)^(1/(1 - a))"), ("0", "1"), ("0", "x"),
        ("(1 - a)*x", "y")), 4,
       param_spec={"a": (0.5, "a in [-1,0) or (0,1)")},
       structure_notes="{X1}, {X2, X3; X4}"),
    _R("A4,16", "n1,1+s3,2", (("0", "exp(x)"), ("0", "1"), ("0", "x"),
                              ("1", "y")), 4,
       structure_notes="{X1}, {X2, X3; X4}"),
    _R("A4,17", "n1,1+s3,3",
       (("0", "1"), ("1", "0"), ("0", "exp(alpha*x)*cos(x)"),
        ("0", "exp(alpha*x)*sin(x)")), 4,
       param_spec={"alpha": (0.5, "alpha >= 0")},
       structure_notes="{X1}, {X2, X3, X4}"),
    _R("A4,18", "n1,1+sl2", (("1", "0"), ("0", "1"), ("0", "y"),
                             ("0", "y^2")), 4,
       structure_notes="{X1}, {X2, X3, X4}"),
    _R("A4,19", "n1,1+sl2", (("x", "0"), ("0", "1"), ("x", "y"),
                             ("2*x*y", "y^2")), 4,
       structure_notes="{X1}, {X2, X3, X4}"),
    _R("A4,20", "2s2,1", (("1", "0"), ("x", "0"), ("0", "1"), ("0", "y")), 4,
       structure_notes="{X1; X2}, {X3; X4}"),
    _R("A4,21", "2s2,1", (("0", "1"), ("x", "y"), ("0", "x"), ("x", "0")), 4,
       structure_notes="{X1; X2}, {X3; X4}"),
    _R("A4,22", "4n1,1", (("0", "1"), ("0", "x"), ("0", "chi1"), ("0", "chi2")), 4,
       param_spec={"chi1": ("x^2", "1, x, chi1, chi2 linearly independent"),
                   "chi2": ("x^3", "1, x, chi1, chi2 linearly independent")},
       structure_notes="{X1}, {X2}, {X3}, {X4}"),
    # the only >=5-dimensional algebra without a linearly connected pair
    _R("so31", "so(3,1)",
       (("1", "0"), ("0", "1"), ("x", "y"), ("y", "-x"),
        ("x^2 - y^2", "2*x*y"), ("2*x*y", "y^2 - x^2")), 6),
]

_REALIZATION_INDEX = {r.id: r for r in REALIZATIONS}


def list_algebras(dim=None):
    """All realization entries (alternative realizations are separate ids)."""
    out = [r for r in REALIZATIONS if dim is None or r.dim == dim]
    return out


def algebra_classes(dim):
    """Distinct algebra classes of a given dimension (alts folded in)."""
    seen = []
    for r in REALIZATIONS:
        if r.dim != dim:
            continue
        base = r.base_id or r.id
        if base not in seen:
            seen.append(base)
    return seen


def get_algebra(rid, **params) -> AlgebraRealization:
    if rid not in _REALIZATION_INDEX:
        raise UnknownFamily(f"no realization {rid!r} in the catalog")
    return _REALIZATION_INDEX[rid].build(**params)


# ---------------------------------------------------------------------------
# Invariant families


@dataclass
class FamilySpec:
    id: str
    realization_id: str
    kind: str                    # "functions" or "constants"
    param_doc: dict              # name -> docstring
    defaults: dict               # default instance parameters
    invariant_templates: tuple   # (label, template over jet vars + params)
    box: Box                     # admissible sampling box of the default
    builder: object = None       # params -> DODSystem kwargs
    restrictions: tuple = ()     # human-readable admissibility notes
    delta_max: float = 10.0

    def invariants(self, **params):
        bound = self._bind(params)
        out = []
        for label, template in self.invariant_templates:
            expr = el.parse(template, ("x", "y", "x_", "y_", "yd") + tuple(bound))
            expr = el.substitute(expr, bound)
            fn = el.compile_scalar(expr, ("x", "y", "x_", "y_", "yd"))
            out.append((label, expr,
                        (lambda j, f=fn: f(j.x, j.y, j.x_minus, j.y_minus,
                                           j.ydot))))
        return out

    def _bind(self, params):
        bound = dict(self.defaults)
        for k, v in params.items():
            if k not in self.defaults:
                raise ParamError(f"family {self.id} has no parameter {k!r}")
            bound[k] = v
        _check_family_params(self.id, bound)
        return bound

    def make_system(self, validate=True, **params):
        bound = self._bind(params)
        kwargs = self.builder(bound)
        kwargs.setdefault("box", self.box)
        kwargs.setdefault("delta_max", self.delta_max)
        kwargs.setdefault("label", f"{self.id} family")
        system = DODSystem(**kwargs)
        system.family_id = self.id
        system.family_params = bound
        if validate:
            report = validate_system(system, 200, seed=1)
            if not report.ok:
                raise FamilyValidationError(
                    f"{self.id} instance fails the DODS conditions:\n"
                    + report.summary())
        return system


def _check_family_params(fid, p):
    if fid == "A3,2":
        if abs(p["a"] - 1.0) < 1e-12:
            raise DegenerateFamilyError(
                "A3,2 with a = 1: the invariant equations force a constant"
                " chord slope, a trivial ODE rather than a DODS")
        if p["a"] == 0.0:
            raise ParamError("A3,2 requires a != 0")
        if p["C1"] == 0.0:
            raise ParamError("A3,2 requires C1 != 0")
        if p["C2"] == 0.0:
            raise ParamError("A3,2 requires C2 != 0")
    if fid in ("A3,4", "A3,6", "A3,8", "A3,8alt", "A3,9", "A3,10") \
            and p.get("C2") == 0.0:
        raise ParamError(f"{fid} requires C2 != 0")
    if fid == "A3,6" and p["b"] < 0.0:
        raise ParamError("A3,6 requires b >= 0")
    if fid == "A3,10alt" and p["C1"] * p["C2"] == 0.0:
        raise ParamError("A3,10alt requires C1*C2 != 0")
    if fid == "A3,12" and p["C2"] == 0.0:
        raise ParamError("A3,12 requires C2 != 0")


def _sub(template, names, bound):
    """Parse a template over ``names`` + params and substitute the params."""
    expr = el.parse(template, tuple(names) + tuple(bound))
    return el.substitute(expr, bound)


def _parse_user_fn(src, varnames, what):
    try:
        return el.parse(src, varnames)
    except Exception as exc:
        raise ParamError(f"bad {what} expression {src!r}: {exc}") from exc


# -- builders ---------------------------------------------------------------

def _build_a11(p):
    f_user = _parse_user_fn(p["f"], ("x", "z"), "f(x, z)")
    g_user = _parse_user_fn(p["g"], ("x", "w"), "g(x, w)")
    f = el.substitute(f_user, {"z": el.parse(_M, ("x", "y", "x_", "y_"))})
    g = el.sub(el.var("x"),
               el.substitute(g_user, {"w": el.parse(_DY, ("y", "y_"))}))
    return {"f": f, "g": g, "domain": (0.0, 5.0)}


def _build_a21(p):
    f_user = _parse_user_fn(p["f"], ("x",), "f(x)")
    g_user = _parse_user_fn(p["g"], ("x",), "g(x)")
    f = el.mul(f_user, el.parse(_M, ("x", "y", "x_", "y_")))
    return {"f": f, "g": g_user, "domain": (1.0, 6.0)}


def _build_a22(p):
    f_user = _parse_user_fn(p["f"], ("z",), "f(z)")
    g_user = _parse_user_fn(p["g"], ("z",), "g(z)")
    m = el.parse(_M, ("x", "y", "x_", "y_"))
    f = el.substitute(f_user, {"z": m})
    G = el.sub(el.var("x_"), el.mul(el.var("x"), el.substitute(g_user, {"z": m})))
    return {"f": f, "delay_residual": G, "domain": (1.0, 8.0)}


def _build_a23(p):
    f_user = _parse_user_fn(p["f"], ("x",), "f(x)")
    g_user = _parse_user_fn(p["g"], ("x",), "g(x)")
    f = el.add(el.parse(_M, ("x", "y", "x_", "y_")), f_user)
    return {"f": f, "g": g_user, "domain": (1.0, 6.0)}


def _build_a24(p):
    f_user = _parse_user_fn(p["f"], ("z",), "f(z)")
    g_user = _parse_user_fn(p["g"], ("w",), "g(w)")
    f = el.substitute(f_user, {"z": el.parse(_M, ("x", "y", "x_", "y_"))})
    g = el.sub(el.var("x"),
               el.substitute(g_user, {"w": el.parse(_DY, ("y", "y_"))}))
    return {"f": f, "g": g, "domain": (0.0, 6.0)}


def _build_a32(p):
    f = _sub(f"C1*{_M}", ("x", "y", "x_", "y_"), p)
    g = _sub(f"x - C2*{_DY}^(1/a)", ("x", "y", "y_"), p)
    return {"f": f, "g": g, "domain": (1.0, 9.0)}


def _build_a34(p):
    f = _sub(f"{_M} + C1", ("x", "y", "x_", "y_"), p)
    G = _sub(f"{_DX} - C2*exp({_M})", ("x", "y", "x_", "y_"), p)
    return {"f": f, "delay_residual": G, "domain": (0.0, 6.0)}


def _build_a36(p):
    f = _sub(f"({_M} + C1)/(1 - C1*{_M})", ("x", "y", "x_", "y_"), p)
    G = _sub(f"{_DX}*exp(b*atan({_M}))*sqrt(1 + {_M}^2) - C2",
             ("x", "y", "x_", "y_"), p)
    return {"f": f, "delay_residual": G, "domain": (0.0, 6.0)}


def _build_a38(p):
    f = _sub(f"{_DY}/(2*x + C1*{_DY})", ("x", "y", "y_"), p)
    g = _sub(f"C2*{_DY}^2/x", ("x", "y", "y_"), p)
    return {"f": f, "g": g, "domain": (2.0, 6.0)}


def _build_a38alt(p):
    f = _sub(f"{_M} + C1/y", ("x", "y", "x_", "y_"), p)
    g = _sub("x - C2*y*y_", ("x", "y", "y_"), p)
    return {"f": f, "g": g, "domain": (0.0, 6.0)}


def _build_a39(p):
    f = _sub(f"({_DY}^2 + x_^2 - x^2 + 2*C1*x*{_DY})"
             f"/(2*x*{_DY} - C1*({_DY}^2 + x_^2 - x^2))",
             ("x", "y", "x_", "y_"), p)
    G = _sub(f"{_DY}^2 + {_DX}^2 - C2*x*x_", ("x", "y", "x_", "y_"), p)
    return {"f": f, "delay_residual": G, "domain": (2.0, 6.0), "delta_max": 6.0}


def _build_a310(p):
    f = _sub(f"({_DY}^2 + x^2 - x_^2 + 2*C1*x*{_DY})"
             f"/(2*x*{_DY} + C1*({_DY}^2 + x^2 - x_^2))",
             ("x", "y", "x_", "y_"), p)
    G = _sub(f"{_DY}^2 - {_DX}^2 - C2*x*x_", ("x", "y", "x_", "y_"), p)
    return {"f": f, "delay_residual": G, "domain": (1.0, 4.0), "delta_max": 4.0}


def _build_a310alt(p):
    f = _sub("C1*((y - x_)/(x - x_))^2", ("x", "y", "x_", "y_"), p)
    g = _sub("(C2*(y - x)*y_ - (y - y_)*x)/(C2*(y - x) - (y - y_))",
             ("x", "y", "y_"), p)
    return {"f": f, "g": g, "domain": (0.8, 2.0)}


_A312_I1 = (f"{_DX}^2*(1 + {_M}^2 + (y - x*{_M})^2)"
            "/((1 + x^2 + y^2)*(1 + x_^2 + y_^2))")
_A312_I2 = (f"{_DX}*(yd - {_M})"
            "/(sqrt(1 + yd^2 + (y - x*yd)^2)*sqrt(1 + x_^2 + y_^2))")


def _build_a312(p):
    F = _sub(f"{_A312_I2} - C1", ("x", "y", "x_", "y_", "yd"), p)
    G = _sub(f"{_A312_I1} - C2", ("x", "y", "x_", "y_"), p)
    return {"dode_residual": F, "delay_residual": G, "domain": (0.8, 1.6),
            "delta_max": 2.0}


FAMILIES = {}


def _family(spec):
    FAMILIES[spec.id] = spec
    return spec


_family(FamilySpec(
    id="A1,1", realization_id="A1,1", kind="functions",
    param_doc={"f": "f(x, z) with z the chord slope",
               "g": "g(x, w) with w the chord rise; delay span = g"},
    defaults={"f": "z", "g": "2 + sin(w)"},
    invariant_templates=(("I1", "x"), ("I2", "x_"), ("I3", "y - y_"),
                         ("I4", "yd")),
    box=Box(x=(0.0, 5.0), y=(-2.0, 2.0), y_minus=(-2.0, 2.0),
            x_minus=(-4.0, -0.5), ydot=(-2.0, 2.0)),
    builder=_build_a11))

_family(FamilySpec(
    id="A2,1", realization_id="A2,1", kind="functions",
    param_doc={"f": "f(x), nonvanishing", "g": "g(x) < x, nonconstant"},
    defaults={"f": "1 + 1/x", "g": "x/2"},
    invariant_templates=(("I1", "x"), ("I2", "x_"), ("I3", "yd/(y - y_)")),
    box=Box(x=(1.0, 6.0), y=(1.5, 3.0), y_minus=(-1.0, 1.0),
            x_minus=(0.3, 0.9), ydot=(0.2, 2.0)),
    builder=_build_a21,
    restrictions=("f(x) != 0", "g(x) < x", "g nonconstant")))

_family(FamilySpec(
    id="A2,2", realization_id="A2,2", kind="functions",
    param_doc={"f": "f(z) of the chord slope", "g": "g(z); delay x_ = x*g(z)"},
    defaults={"f": "z^2", "g": "z/2"},
    invariant_templates=(("I1", "(x - x_)/x"), ("I2", "(y - y_)/(x - x_)"),
                         ("I3", "yd")),
    box=Box(x=(1.0, 2.0), y=(1.2, 1.5), y_minus=(1.0, 1.14),
            x_minus=(0.55, 0.95), ydot=(-1.5, 2.5)),
    builder=_build_a22,
    restrictions=("x and x_ keep one sign (default domain x > 0)",)))

_family(FamilySpec(
    id="A2,3", realization_id="A2,3", kind="functions",
    param_doc={"f": "f(x), nonvanishing (else the system is the A2,1 family)",
               "g": "g(x) < x, nonconstant"},
    defaults={"f": "1", "g": "x/2"},
    invariant_templates=(("I1", "x"), ("I2", "x_"),
                         ("I3", "yd - (y - y_)/(x - x_)")),
    box=Box(x=(1.0, 6.0), y=(-2.0, 2.0), y_minus=(-2.0, 2.0),
            x_minus=(0.3, 0.9), ydot=(-2.0, 2.0)),
    builder=_build_a23))

_family(FamilySpec(
    id="A2,4", realization_id="A2,4", kind="functions",
    param_doc={"f": "f(z) of the chord slope",
               "g": "g(w) of the chord rise; delay span = g"},
    defaults={"f": "z^2", "g": "1 + w/2"},
    invariant_templates=(("I1", "x - x_"), ("I2", "y - y_"), ("I3", "yd")),
    box=Box(x=(0.0, 4.0), y=(1.2, 2.0), y_minus=(0.0, 1.0),
            x_minus=(-3.0, -0.5), ydot=(-2.0, 2.0)),
    builder=_build_a24))

_family(FamilySpec(
    id="A3,2", realization_id="A3,2", kind="constants",
    param_doc={"a": "scaling weight, a != 0, a != 1 (catalog accepts values"
                    " outside the normalized realization range 0 < |a| <= 1)",
               "C1": "C1 != 0", "C2": "delay scale, C2 != 0 (default 1)"},
    defaults={"a": 2.0, "C1": 4.0 / 3.0, "C2": 1.0},
    invariant_templates=(("I1", "(y - y_)/(x - x_)^a"),
                         ("I2", "yd*(x - x_)/(y - y_)")),
    box=Box(x=(3.0, 5.0), y=(2.4, 3.0), y_minus=(0.5, 1.5),
            x_minus=(1.4, 2.4), ydot=(0.3, 2.0)),
    builder=_build_a32,
    restrictions=("y - y_ > 0 for fractional 1/a", "x > 0 on the default box")))

_family(FamilySpec(
    id="A3,4", realization_id="A3,4", kind="constants",
    param_doc={"C1": "additive constant", "C2": "delay scale, C2 != 0"},
    defaults={"C1": 1.0, "C2": 1.0},
    invariant_templates=(("I1", "exp((y - y_)/(x - x_))/(x - x_)"),
                         ("I2", "yd - (y - y_)/(x - x_)")),
    box=Box(x=(0.0, 3.0), y=(1.5, 2.5), y_minus=(0.5, 1.2),
            x_minus=(-2.0, -0.3), ydot=(-1.0, 2.0)),
    builder=_build_a34,
    restrictions=("y - y_ > 0 keeps the delay root unique",)))

_family(FamilySpec(
    id="A3,6", realization_id="A3,6", kind="constants",
    param_doc={"b": "spiral pitch, b >= 0", "C1": "rotation constant",
               "C2": "delay scale, C2 != 0"},
    defaults={"b": 0.5, "C1": 0.2, "C2": 2.0},
    invariant_templates=(
        ("I1", "(x - x_)*exp(b*atan((y - y_)/(x - x_)))"
               "*sqrt(1 + ((y - y_)/(x - x_))^2)"),
        ("I2", "(yd - (y - y_)/(x - x_))/(1 + yd*(y - y_)/(x - x_))")),
    box=Box(x=(0.0, 3.0), y=(1.3, 1.7), y_minus=(0.9, 1.1),
            x_minus=(-2.5, -0.5), ydot=(-0.5, 1.5)),
    builder=_build_a36,
    restrictions=("sign branch: x - x_ > 0", "1 - C1*(chord slope) != 0")))

_family(FamilySpec(
    id="A3,8", realization_id="A3,8", kind="constants",
    param_doc={"C1": "any real", "C2": "delay scale, C2 != 0"},
    defaults={"C1": 1.0, "C2": 1.0},
    invariant_templates=(("I1", "(y - y_)^2/(x*x_)"),
                         ("I2", "1/yd - 2*x/(y - y_)")),
    box=Box(x=(2.0, 3.0), y=(2.0, 2.6), y_minus=(1.0, 1.5),
            x_minus=(0.2, 1.2), ydot=(0.1, 1.2)),
    builder=_build_a38,
    restrictions=("x and x_ same sign", "|y - y_| < x/sqrt(C2) on x > 0")))

_family(FamilySpec(
    id="A3,8alt", realization_id="A3,8alt", kind="constants",
    param_doc={"C1": "any real", "C2": "delay scale, C2 != 0"},
    defaults={"C1": 1.0, "C2": 0.5},
    invariant_templates=(("I1", "(x - x_)/(y*y_)"),
                         ("I2", "y*(yd - (y - y_)/(x - x_))")),
    box=Box(x=(0.0, 4.0), y=(1.0, 2.0), y_minus=(1.0, 2.0),
            x_minus=(-3.0, -0.6), ydot=(-1.0, 2.0)),
    builder=_build_a38alt,
    restrictions=("C2*y*y_ > 0",)))

_family(FamilySpec(
    id="A3,9", realization_id="A3,9", kind="constants",
    param_doc={"C1": "any real", "C2": "delay scale, C2 != 0"},
    defaults={"C1": 1.0, "C2": 1.0},
    invariant_templates=(
        ("I1", "((y - y_)^2 + (x - x_)^2)/(x*x_)"),
        ("I2", "(2*(y - y_)*x*yd - (y - y_)^2 - x_^2 + x^2)"
               "/(2*(y - y_)*x + ((y - y_)^2 + x_^2 - x^2)*yd)")),
    box=Box(x=(2.0, 3.0), y=(2.4, 2.9), y_minus=(1.0, 1.2),
            x_minus=(0.8, 1.7), ydot=(0.1, 0.35)),
    builder=_build_a39,
    restrictions=("x, x_ same sign", "|y - y_| < sqrt(C2)*x")))

_family(FamilySpec(
    id="A3,10", realization_id="A3,10", kind="constants",
    param_doc={"C1": "any real with C1 != 1 (C1 = 1 collapses the DODE to"
                     " ydot = 1)",
               "C2": "delay scale, C2 != 0; C2 = 4 is degenerate (on that"
                     " manifold y - y_ = x + x_ and the DODE collapses)"},
    defaults={"C1": 0.5, "C2": 3.0},
    invariant_templates=(
        ("I1", "((y - y_)^2 - (x - x_)^2)/(x*x_)"),
        ("I2", "(2*(y - y_)*x*yd - (y - y_)^2 - x^2 + x_^2)"
               "/(2*(y - y_)*x - ((y - y_)^2 + x^2 - x_^2)*yd)")),
    box=Box(x=(1.2, 1.4), y=(3.0, 3.2), y_minus=(1.3, 1.5),
            x_minus=(0.45, 0.8), ydot=(0.1, 0.45)),
    builder=_build_a310,
    restrictions=("x < |y - y_| < sqrt(C2)*x with C2 > 1",)))

_family(FamilySpec(
    id="A3,10alt", realization_id="A3,10alt", kind="constants",
    param_doc={"C1": "C1 != 0", "C2": "C2 != 0 (C1*C2 != 0)"},
    defaults={"C1": 1.0, "C2": 3.0},
    invariant_templates=(
        ("I1", "((y - y_)*(x - x_))/((y - x)*(y_ - x_))"),
        ("I2", "((x - x_)/(y - x_))^2*yd")),
    box=Box(x=(0.8, 1.2), y=(2.0, 2.2), y_minus=(0.55, 0.7),
            x_minus=(0.0, 0.4), ydot=(0.5, 2.5)),
    builder=_build_a310alt,
    restrictions=("y != x, y_ != x_ (cross-ratio denominators)",)))

_family(FamilySpec(
    id="A3,12", realization_id="A3,12", kind="constants",
    param_doc={"C1": "value of the angle invariant",
               "C2": "value of the chord invariant, C2 != 0"},
    defaults={"C1": 0.24, "C2": 0.24},
    invariant_templates=(("I1", _A312_I1), ("I2", _A312_I2)),
    box=Box(x=(0.9, 1.1), y=(0.5, 0.7), y_minus=(0.15, 0.25),
            x_minus=(0.25, 0.4), ydot=(0.8, 1.6)),
    builder=_build_a312,
    restrictions=("fully implicit form; both equations are residuals",)))

# realizations that carry invariants but no nonlinear family
EXTRA_INVARIANTS = {
    "A4,13": (("I1", "(yd - (y - y_)/(x - x_))/(1 + yd*(y - y_)/(x - x_))"),),
    "A3,2(a=1)": (("I1", "(y - y_)/(x - x_)"), ("I2", "yd")),
}


def list_families():
    return list(FAMILIES.values())


def get_family(fid) -> FamilySpec:
    if fid not in FAMILIES:
        raise UnknownFamily(f"no invariant family {fid!r} in the catalog")
    return FAMILIES[fid]


def invariant_family(fid, validate=True, **params) -> DODSystem:
    """Construct a validated DODSystem for a catalog family."""
    return get_family(fid).make_system(validate=validate, **params)


def elementary_invariants(fid, **params):
    """[(label, Expr, JetPoint -> float)] for a family or extra entry."""
    if fid in FAMILIES:
        return FAMILIES[fid].invariants(**params)
    if fid in EXTRA_INVARIANTS:
        out = []
        for label, template in EXTRA_INVARIANTS[fid]:
            expr = el.parse(template, ("x", "y", "x_", "y_", "yd"))
            fn = el.compile_scalar(expr, ("x", "y", "x_", "y_", "yd"))
            out.append((label, expr,
                        (lambda j, f=fn: f(j.x, j.y, j.x_minus, j.y_minus,
                                           j.ydot))))
        return out
    raise UnknownFamily(f"no invariants catalogued for {fid!r}")


def default_instances():
    """(family_id, params, system) for every shipped default instance."""
    out = []
    for spec in FAMILIES.values():
        out.append((spec.id, dict(spec.defaults),
                    spec.make_system(validate=False)))
    return out


def export_json():
    """Full catalog as a JSON string (schema in docs/catalog-schema.md)."""
    algebras = []
    for r in REALIZATIONS:
        algebras.append({
            "id": r.id,
            "algebra": r.algebra,
            "dim": r.dim,
            "basis": [{"xi": xi, "eta": eta} for (xi, eta) in r.pairs],
            "params": {k: {"default": v[0], "doc": v[1]}
                       for k, v in r.param_spec.items()},
            "structure_notes": r.structure_notes,
            "flags": list(r.flags),
            "base_id": r.base_id or r.id,
        })
    families = []
    for spec in FAMILIES.values():
        families.append({
            "id": spec.id,
            "realization": spec.realization_id,
            "kind": spec.kind,
            "params": {k: {"default": spec.defaults[k], "doc": d}
                       for k, d in spec.param_doc.items()},
            "invariants": [{"label": lbl, "expr": tpl}
                           for (lbl, tpl) in spec.invariant_templates],
            "restrictions": list(spec.restrictions),
        })
    return json.dumps({"schema_version": 1, "algebras": algebras,
                       "families": families}, sort_keys=True, indent=2)
