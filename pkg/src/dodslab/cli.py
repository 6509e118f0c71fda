"""Command-line front end: batch runs driven by TOML configs.

Subcommands: catalog, solve, check-symmetry, invariant-solutions,
classify-linear, export.  Exit codes are a stable contract:
0 success, 1 configuration error, 2 initial-data compatibility failure,
3 causality violation, 4 no invariant-solution constants found.

All JSON is emitted with sorted keys and repr floats, so a fixed seed and
config reproduce byte-identical outputs.
"""

from __future__ import annotations

import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import click

from . import catalog as cat
from . import invariant_solutions as isol
from . import linear as lin_mod
from . import solver as solver_mod
from . import symmetry as sym
from .core import DODSystem, LinearDODS, VectorField
from .errors import (CausalityError, CompatibilityError, ConfigError,
                     DelayOrderError, DodsLabError, ExprSyntaxError, NoRootFound,
                     ParamError, UnknownFamily, UnknownIdentifier)

# numeric defaults, printed by --verbose runs
DEFAULTS = {
    "solver.rel_tol": 1e-10,
    "solver.abs_tol": 1e-12,
    "solver.delay_root_tol": 1e-12,
    "solver.compat_tol": 1e-8,
    "solver.breakpoint_tol": 1e-12,
    "residual_check.n": 100,
    "residual_check.tol": 1e-7,
    "symmetry.sample": 200,
    "symmetry.tol": 1e-8,
    "linear.tol": 1e-8,
    "linear.grid": 200,
    "constraints.tol": 1e-12,
}

EXIT_CONFIG = 1
EXIT_COMPAT = 2
EXIT_CAUSALITY = 3
EXIT_NO_ROOTS = 4


def _fail(code, message):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_config(path):
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        _fail(EXIT_CONFIG, f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        _fail(EXIT_CONFIG, f"bad TOML: {exc}")


def _system_from_config(cfg):
    sc = cfg.get("system")
    if not sc:
        raise ConfigError("config needs a [system] table")
    if "family" in sc:
        params = sc.get("params", {})
        return cat.invariant_family(sc["family"], validate=False, **params)
    kwargs = {}
    for key in ("f", "g", "dode_residual", "delay_residual", "label"):
        if key in sc:
            kwargs[key] = sc[key]
    kwargs["domain"] = tuple(sc.get("domain", (0.0, 1.0)))
    if "delta_max" in sc:
        kwargs["delta_max"] = sc["delta_max"]
    return DODSystem(**kwargs)


def _solver_opts(cfg, force=False):
    sc = cfg.get("solver", {})
    return solver_mod.SolverOptions(
        rel_tol=sc.get("rel_tol", DEFAULTS["solver.rel_tol"]),
        abs_tol=sc.get("abs_tol", DEFAULTS["solver.abs_tol"]),
        max_step=sc.get("max_step", 0.0) or float("inf"),
        delay_root_tol=sc.get("delay_root_tol", DEFAULTS["solver.delay_root_tol"]),
        compat_tol=sc.get("compat_tol", DEFAULTS["solver.compat_tol"]),
        force=force or sc.get("force", False),
    )


def _echo_defaults(verbose):
    if verbose:
        click.echo("numeric defaults:")
        for key, value in sorted(DEFAULTS.items()):
            click.echo(f"  {key} = {value!r}")


@click.group()
def main():
    """Numerical laboratory for delay ordinary differential systems."""


# ---------------------------------------------------------------------------


@main.command("catalog")
@click.option("--dim", type=int, default=None, help="filter by dimension")
@click.option("--id", "entry_id", default=None, help="single entry by id")
@click.option("--format", "fmt", type=click.Choice(["table", "json"]),
              default="table")
@click.option("--families", is_flag=True, help="list invariant families")
def cmd_catalog(dim, entry_id, fmt, families):
    """List symmetry-algebra realizations and invariant families."""
    if entry_id:
        try:
            entries = [r for r in cat.REALIZATIONS if r.id == entry_id]
            if not entries and entry_id in cat.FAMILIES:
                entries = []
            if not entries and entry_id not in cat.FAMILIES:
                raise UnknownFamily(f"no catalog entry {entry_id!r}")
        except UnknownFamily as exc:
            _fail(EXIT_CONFIG, str(exc))
        payload = {"algebras": [], "family": None}
        for r in entries:
            payload["algebras"].append({
                "id": r.id, "algebra": r.algebra, "dim": r.dim,
                "basis": [{"xi": xi, "eta": eta} for xi, eta in r.pairs],
                "structure_notes": r.structure_notes})
        if entry_id in cat.FAMILIES:
            spec = cat.FAMILIES[entry_id]
            payload["family"] = {
                "id": spec.id, "kind": spec.kind,
                "defaults": spec.defaults,
                "invariants": [{"label": l, "expr": t}
                               for l, t in spec.invariant_templates],
                "restrictions": list(spec.restrictions)}
        if fmt == "json":
            click.echo(json.dumps(payload, sort_keys=True, indent=2))
        else:
            for a in payload["algebras"]:
                click.echo(f"{a['id']}  [{a['algebra']}] dim {a['dim']}")
                for i, b in enumerate(a["basis"]):
                    click.echo(f"  X{i + 1} = ({b['xi']}) d/dx + ({b['eta']}) d/dy")
                if a["structure_notes"]:
                    click.echo(f"  structure: {a['structure_notes']}")
            if payload["family"]:
                f = payload["family"]
                click.echo(f"family {f['id']} ({f['kind']}), defaults {f['defaults']}")
                for inv in f["invariants"]:
                    click.echo(f"  {inv['label']} = {inv['expr']}")
        return
    if families:
        rows = [(s.id, s.kind, s.realization_id) for s in cat.list_families()]
        if fmt == "json":
            click.echo(json.dumps(
                [{"id": i, "kind": k, "realization": r} for i, k, r in rows],
                sort_keys=True, indent=2))
        else:
            for i, k, r in rows:
                click.echo(f"{i:10s} {k:10s} realization {r}")
        return
    entries = cat.list_algebras(dim)
    if fmt == "json":
        click.echo(json.dumps(
            [{"id": r.id, "algebra": r.algebra, "dim": r.dim}
             for r in entries], sort_keys=True, indent=2))
    else:
        for r in entries:
            click.echo(f"{r.id:10s} [{r.algebra:9s}] dim {r.dim}  "
                       + "; ".join(f"({xi}, {eta})" for xi, eta in r.pairs))
        if dim is not None:
            classes = cat.algebra_classes(dim)
            click.echo(f"{len(classes)} algebra classes of dimension {dim}"
                       f" ({len(entries)} realizations listed)")


@main.command("export")
@click.option("--format", "fmt", type=click.Choice(["json"]), default="json")
@click.option("--out", type=click.Path(), default=None)
def cmd_export(fmt, out):
    """Emit the full catalog (ids, bases, family forms, parameter ranges)."""
    text = cat.export_json()
    if out:
        Path(out).write_text(text)
        click.echo(f"wrote {out}")
    else:
        click.echo(text)


# ---------------------------------------------------------------------------


def _run_solve(cfg, out_dir, force, tag=""):
    system = _system_from_config(cfg)
    init = cfg.get("initial", {})
    if "phi" not in init or "interval" not in init:
        raise ConfigError("config needs [initial] phi and interval")
    opts = _solver_opts(cfg, force)
    x_end = cfg.get("solver", {}).get("x_end")
    if x_end is None:
        raise ConfigError("config needs solver.x_end")
    sol = solver_mod.solve(system, init["phi"], tuple(init["interval"]),
                           float(x_end), opts)
    rc = cfg.get("residual_check", {})
    n = rc.get("n", DEFAULTS["residual_check.n"])
    tol = rc.get("tol", DEFAULTS["residual_check.tol"])
    res = solver_mod.residual(sol, system, n)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"solution{tag}"
    sol.write_csv(out_dir / f"{stem}.csv")
    (out_dir / f"{stem}_breakpoints.json").write_text(sol.breakpoints_json())
    report = {
        "label": system.label,
        "x_end": sol.x_end,
        "n_segments": len(sol.spans),
        "residual": res,
        "residual_tol": tol,
        "residual_ok": res <= tol,
    }
    (out_dir / f"{stem}_report.json").write_text(
        json.dumps(report, sort_keys=True))
    return sol, res, tol


def _parse_sweep(sweep):
    name, _, rest = sweep.partition("=")
    try:
        lo, hi, n = rest.split(":")
        values = []
        n = int(n)
        lo, hi = float(lo), float(hi)
        for i in range(n):
            values.append(lo + (hi - lo) * i / max(n - 1, 1))
        return name.strip(), values
    except ValueError:
        raise ConfigError(f"bad sweep spec {sweep!r}; expected name=lo:hi:n")


@main.command("solve")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", "out_dir", type=click.Path(), default="out")
@click.option("--force", is_flag=True,
              help="downgrade initial-compatibility errors to warnings")
@click.option("--sweep", default=None, help="param sweep name=lo:hi:n")
@click.option("--verbose", is_flag=True)
def cmd_solve(config_path, out_dir, force, sweep, verbose):
    """Integrate a DODS by the method of steps; write CSV + JSON artifacts."""
    _echo_defaults(verbose)
    cfg = _load_config(config_path)
    try:
        if sweep:
            name, values = _parse_sweep(sweep)
            max_workers = int(os.environ.get("DODS_LAB_THREADS", "4"))

            def one(iv):
                i, v = iv
                sub = json.loads(json.dumps(cfg))  # deep copy
                sub.setdefault("system", {}).setdefault("params", {})[name] = v
                return _run_solve(sub, out_dir, force, tag=f"_{i:03d}")

            with ThreadPoolExecutor(max_workers=max(1, max_workers)) as ex:
                results = list(ex.map(one, enumerate(values)))
            worst = max(r[1] for r in results)
            click.echo(f"sweep {name}: {len(values)} runs, worst residual"
                       f" {worst:.3e}")
            sys.exit(0 if all(r[1] <= r[2] for r in results) else 1)
        sol, res, tol = _run_solve(cfg, out_dir, force)
        click.echo(f"x_end = {sol.x_end!r}, y(x_end) = {sol.value(sol.x_end)!r}")
        click.echo(f"breakpoints: {[float(b) for b in sol.breakpoints]}")
        click.echo(f"residual = {res:.3e} (tol {tol:g})")
        sys.exit(0 if res <= tol else 1)
    except CompatibilityError as exc:
        _fail(EXIT_COMPAT, str(exc))
    except (CausalityError, DelayOrderError) as exc:
        _fail(EXIT_CAUSALITY, str(exc))
    except (ConfigError, UnknownFamily, ParamError, ExprSyntaxError,
            UnknownIdentifier) as exc:
        _fail(EXIT_CONFIG, str(exc))
    except DodsLabError as exc:
        _fail(EXIT_CONFIG, f"run failed: {exc}")


@main.command("check-symmetry")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--json", "as_json", is_flag=True)
@click.option("--verbose", is_flag=True)
def cmd_check_symmetry(config_path, as_json, verbose):
    """Weak/strong invariance verdicts for declared vector fields."""
    _echo_defaults(verbose)
    cfg = _load_config(config_path)
    try:
        system = _system_from_config(cfg)
        sc = cfg.get("check_symmetry", {})
        fields_cfg = sc.get("fields")
        if not fields_cfg:
            raise ConfigError("config needs check_symmetry.fields")
        mode = sc.get("mode", "weak")
        tol = sc.get("tol", DEFAULTS["symmetry.tol"])
        sample = sc.get("sample", DEFAULTS["symmetry.sample"])
        seed = cfg.get("seed", 0)
        rows = []
        for i, pair in enumerate(fields_cfg):
            field = VectorField(pair[0], pair[1], label=f"X{i + 1}")
            ok, worst = sym.is_symmetry(field, system, sample=sample,
                                        seed=seed, tol=tol, mode=mode)
            rows.append({"field": f"({pair[0]}) d/dx + ({pair[1]}) d/dy",
                         "verdict": bool(ok), "max_residual": worst})
        payload = {"mode": mode, "tol": tol, "results": rows}
        if as_json:
            click.echo(json.dumps(payload, sort_keys=True))
        else:
            for r in rows:
                mark = "symmetry " if r["verdict"] else "NOT a symmetry"
                click.echo(f"{mark}  {r['field']}  (max residual"
                           f" {r['max_residual']:.3e})")
        sys.exit(0 if all(r["verdict"] for r in rows) else 1)
    except (ConfigError, UnknownFamily, ParamError, ExprSyntaxError,
            UnknownIdentifier) as exc:
        _fail(EXIT_CONFIG, str(exc))
    except DodsLabError as exc:
        _fail(EXIT_CONFIG, f"run failed: {exc}")


@main.command("invariant-solutions")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--csv-samples", "csv_path", type=click.Path(), default=None,
              help="write x,y samples of each closed form")
@click.option("--verbose", is_flag=True)
def cmd_invariant_solutions(config_path, csv_path, verbose):
    """Group-invariant solutions: constants, closed forms, verification."""
    _echo_defaults(verbose)
    cfg = _load_config(config_path)
    try:
        section = cfg.get("invariant_solutions", {})
        family_id = section.get("family") or cfg.get("system", {}).get("family")
        if not family_id:
            raise ConfigError("config needs invariant_solutions.family")
        params = dict(cfg.get("system", {}).get("params", {}))
        params.update(section.get("params", {}))
        wanted = section.get("subalgebra")
        tol = section.get("tol", DEFAULTS["constraints.tol"])
        ansaetze = isol.subalgebra_catalog(family_id)
        if wanted:
            ansaetze = [a for a in ansaetze if a.label == wanted]
            if not ansaetze:
                raise ConfigError(
                    f"family {family_id} has no subalgebra {wanted!r}")
        system = cat.invariant_family(family_id, validate=False, **params)
        results = []
        total = 0
        for ansatz in ansaetze:
            res = isol.solve_constraints(ansatz, params, tol=tol)
            entry = {"subalgebra": ansatz.label,
                     "numeric_only": ansatz.numeric_only,
                     "assignments": [], "diagnostics": res.diagnostics}
            for assignment in res.assignments:
                total += 1
                sol = isol.build_solution(ansatz, assignment, params)
                record = sol.summary()
                record["verify_residual"] = isol.verify(system, sol)
                entry["assignments"].append(record)
                if csv_path and hasattr(sol, "domain"):
                    import numpy as np
                    with open(csv_path, "a") as fh:
                        fh.write(f"# {family_id} {ansatz.label}\n")
                        for x in np.linspace(*sol.domain, 50):
                            fh.write(f"{float(x)!r},{sol.y(float(x))!r}\n")
            results.append(entry)
        payload = {"family": family_id, "params": params, "results": results}
        click.echo(json.dumps(payload, sort_keys=True))
        sys.exit(0 if total > 0 else EXIT_NO_ROOTS)
    except NoRootFound as exc:
        _fail(EXIT_NO_ROOTS, str(exc))
    except (ConfigError, UnknownFamily, ParamError, ExprSyntaxError,
            UnknownIdentifier) as exc:
        _fail(EXIT_CONFIG, str(exc))
    except DodsLabError as exc:
        _fail(EXIT_CONFIG, f"run failed: {exc}")


@main.command("classify-linear")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--json", "as_json", is_flag=True)
@click.option("--mode", type=click.Choice(["auto", "canonical2", "canonical3"]),
              default="auto")
@click.option("--verbose", is_flag=True)
def cmd_classify_linear(config_path, as_json, mode, verbose):
    """Compatibility verdict, extra symmetry, canonical-form parameters."""
    _echo_defaults(verbose)
    cfg = _load_config(config_path)
    try:
        lc = cfg.get("linear")
        if not lc:
            raise ConfigError("config needs a [linear] table")
        lin = LinearDODS(lc.get("alpha", "0"), lc.get("beta", "1"),
                         lc.get("gamma", "0"), lc["g"],
                         tuple(lc.get("domain", (0.0, 5.0))))
        tol = lc.get("tol", DEFAULTS["linear.tol"])
        grid = lc.get("grid", DEFAULTS["linear.grid"])
        holds, defect = lin_mod.compatibility(lin, grid, tol)
        z, diags = lin_mod.extra_symmetry_report(lin, tol, grid)
        payload = {
            "compatibility_defect": defect,
            "compatibility_holds": bool(holds),
            "tag": "compatible" if z is not None else "incompatible",
            "Z": z.describe() if z is not None else None,
            "diagnostics": diags,
        }
        try:
            cf = lin_mod.canonical_form(lin, mode=mode, tol=tol, grid=grid)
            payload["canonical"] = {"mode": cf.mode, "C": cf.C,
                                    "notes": cf.notes}
        except DodsLabError as exc:
            payload["canonical"] = {"error": str(exc)}
        if as_json:
            click.echo(json.dumps(payload, sort_keys=True))
        else:
            click.echo(f"tag: {payload['tag']}")
            click.echo(f"compatibility defect: {defect:.3e}")
            click.echo(f"Z: {payload['Z']}")
            for d in diags:
                click.echo(f"  {d}")
            if "C" in payload["canonical"]:
                click.echo(f"canonical mode {payload['canonical']['mode']},"
                           f" C = {payload['canonical']['C']}")
        sys.exit(0)
    except (ConfigError, UnknownFamily, ParamError, ExprSyntaxError,
            UnknownIdentifier, KeyError) as exc:
        _fail(EXIT_CONFIG, str(exc))
    except DodsLabError as exc:
        _fail(EXIT_CONFIG, f"run failed: {exc}")


if __name__ == "__main__":
    main()
