import math

import numpy as np
import pytest

from dodslab import catalog, symmetry
from dodslab import exprlang as el
from dodslab.core import JetPoint, validate_system
from dodslab.errors import (DegenerateFamilyError, FamilyValidationError,
                            ParamError, UnknownFamily)


class TestRealizationTable:
    def test_dimension_counts(self):
        assert len(catalog.list_algebras(1)) == 1
        assert len(catalog.list_algebras(2)) == 4
        assert len(catalog.algebra_classes(3)) == 15
        assert len(catalog.list_algebras(4)) == 22
        assert len(catalog.algebra_classes(4)) == 22
        assert catalog.algebra_classes(7) == []

    def test_lookup_a22(self):
        alg = catalog.get_algebra("A2,2")
        assert [el.unparse(f.xi) for f in alg.basis] == ["0.0", "x"]
        assert [el.unparse(f.eta) for f in alg.basis] == ["1.0", "y"]

    def test_lookup_a312(self):
        alg = catalog.get_algebra("A3,12")
        xi1 = el.unparse(alg.basis[0].xi)
        assert xi1 == "1.0 + x ^ 2.0"
        assert el.unparse(alg.basis[0].eta) == "x * y"

    def test_so31_has_six_fields(self):
        alg = catalog.get_algebra("so31")
        assert alg.dim == 6
        # the second-order field (x^2 - y^2) d/dx + 2xy d/dy is present
        assert any("x ^ 2.0 - y ^ 2.0" in el.unparse(f.xi)
                   for f in alg.basis)

    def test_unknown_id(self):
        with pytest.raises(UnknownFamily):
            catalog.get_algebra("A9,9")

    def test_every_basis_linearly_independent(self):
        for spec in catalog.REALIZATIONS:
            alg = spec.build()
            assert alg.basis_rank() == alg.dim, spec.id

    def test_alternative_realizations_fold_into_classes(self):
        ids3 = [r.id for r in catalog.list_algebras(3)]
        assert "A3,8alt" in ids3 and "A3,10alt" in ids3
        assert len(ids3) == 17  # 15 classes + 2 alternative realizations

    def test_param_range_checks(self):
        with pytest.raises(ParamError):
            catalog.get_algebra("A4,4", a=2.0)
        with pytest.raises(ParamError):
            catalog.get_algebra("A4,4", a=0.5, alpha=2.0)  # alpha = 1/(1-a)
        with pytest.raises(ParamError):
            catalog.get_algebra("A4,9", a=1.0)
        with pytest.raises(ParamError):
            catalog.get_algebra("A3,6", b=-1.0)

    def test_a44_restriction_flagged(self):
        spec = [r for r in catalog.REALIZATIONS if r.id == "A4,4"][0]
        assert "additional-restriction-not-reproduced" in spec.flags


class TestFamilies:
    def test_a24_construction(self):
        system = catalog.invariant_family("A2,4", f="z^2", g="1 + w/2")
        jet = system.jet(1.0, 2.0, 1.0)
        # dy = 1 => dx = 1.5, ydot = (1/1.5)^2
        assert jet.x_minus == pytest.approx(-0.5)
        assert jet.ydot == pytest.approx((1.0 / 1.5) ** 2)

    def test_a32_construction(self):
        system = catalog.invariant_family("A3,2", a=2.0, C1=4.0 / 3.0, C2=1.0)
        jet = system.jet(4.0, 16.0 / 3.0, 4.0 / 3.0)
        # on y = x^2/3: dy = 4, dx = 2, ydot = (4/3)*2 = 8/3
        assert jet.x_minus == pytest.approx(2.0)
        assert jet.ydot == pytest.approx(8.0 / 3.0)

    def test_a32_degenerate(self):
        with pytest.raises(DegenerateFamilyError):
            catalog.invariant_family("A3,2", a=1.0)

    def test_param_errors(self):
        with pytest.raises(ParamError):
            catalog.invariant_family("A3,2", a=2.0, C1=0.0)
        with pytest.raises(ParamError):
            catalog.invariant_family("A3,4", C2=0.0)
        with pytest.raises(ParamError):
            catalog.invariant_family("A2,2", nope=1.0)

    def test_family_validation_runs(self):
        # an f that ignores y_ must be rejected by the defining conditions
        with pytest.raises(FamilyValidationError):
            catalog.invariant_family("A1,1", f="x", g="2 + sin(w)")

    def test_all_defaults_validate(self):
        for fid, params, system in catalog.default_instances():
            report = validate_system(system, 200, seed=1)
            assert report.ok, (fid, report.summary())

    def test_at_least_twelve_default_instances(self):
        assert len(catalog.default_instances()) >= 12


class TestElementaryInvariants:
    def test_a34_exponential_invariant(self):
        # chord slope 1 at this jet, so I1 = e/1
        inv = dict((lbl, fn) for lbl, _e, fn
                   in catalog.elementary_invariants("A3,4"))
        assert inv["I1"](JetPoint(1, 1, 0, 0, 2)) == pytest.approx(math.e)

    def test_a22_ratio_invariant(self):
        inv = dict((lbl, fn) for lbl, _e, fn
                   in catalog.elementary_invariants("A2,2"))
        assert inv["I1"](JetPoint(1, 2, 0.5, 1, 2)) == pytest.approx(0.5)

    def test_a38_quadratic_invariant(self):
        inv = dict((lbl, fn) for lbl, _e, fn
                   in catalog.elementary_invariants("A3,8"))
        assert inv["I1"](JetPoint(2, 3, 1, 1, 1)) == pytest.approx(2.0)

    def test_invariant_counts_match_listings(self):
        for spec in catalog.list_families():
            rspec = catalog._REALIZATION_INDEX[spec.realization_id]
            params = {k: v for k, v in spec.defaults.items()
                      if k in rspec.param_spec}
            alg = catalog.get_algebra(spec.realization_id, **params)
            k = symmetry.invariant_count(alg.basis)
            assert k == len(spec.invariant_templates), spec.id

    def test_a32_unit_weight_invariants(self):
        # the degenerate weight still has two listed invariants and the
        # realization at a = 1 has exactly two functionally independent ones
        invs = catalog.elementary_invariants("A3,2(a=1)")
        assert [lbl for lbl, _e, _f in invs] == ["I1", "I2"]
        alg = catalog.get_algebra("A3,2", a=1.0)
        assert symmetry.invariant_count(alg.basis) == 2

    def test_a413_single_invariant(self):
        invs = catalog.elementary_invariants("A4,13")
        assert len(invs) == 1
        alg = catalog.get_algebra("A4,13")
        jets = symmetry._generic_jets(50, 3)
        _lbl, expr, _fn = invs[0]
        worst = max(abs(symmetry.apply_prolonged(f, expr, j))
                    for j in jets for f in alg.basis)
        assert worst <= 1e-8


def test_annihilation_suite():
    """Every basis field annihilates every listed elementary invariant of
    every default family instance at 200 random admissible jets."""
    for spec in catalog.list_families():
        system = spec.make_system(validate=False)
        rspec = catalog._REALIZATION_INDEX[spec.realization_id]
        params = {k: v for k, v in spec.defaults.items()
                  if k in rspec.param_spec}
        alg = catalog.get_algebra(spec.realization_id, **params)
        jets = symmetry._strong_jets(system, 200, seed=13)
        for label, expr, _fn in spec.invariants():
            worst = 0.0
            for field in alg.basis:
                for jet in jets:
                    worst = max(worst,
                                abs(symmetry.apply_prolonged(field, expr, jet)))
            assert worst <= 1e-8, (spec.id, label, worst)


def test_dim3_jacobian_completeness():
    """For dimension-3 families the two listed invariants have a rank-2
    Jacobian with respect to (x_, yd) at generic manifold jets, so they can
    define the system implicitly."""
    for fid in ("A3,2", "A3,4", "A3,6", "A3,8", "A3,8alt", "A3,9", "A3,10",
                "A3,10alt", "A3,12"):
        spec = catalog.get_family(fid)
        system = spec.make_system(validate=False)
        invs = spec.invariants()
        jets = symmetry.manifold_jets(system, 25, 11)
        for jet in jets[:10]:
            env = jet.env()
            M = np.array([[el.diff_eval(expr, env, "x_")[1],
                           el.diff_eval(expr, env, "yd")[1]]
                          for _lbl, expr, _fn in invs])
            s = np.linalg.svd(M, compute_uv=False)
            assert s[-1] > 1e-9 * max(s[0], 1.0), (fid, jet)


def test_export_json_schema():
    import json

    payload = json.loads(catalog.export_json())
    assert payload["schema_version"] == 1
    ids = {a["id"] for a in payload["algebras"]}
    assert {"A1,1", "A2,2", "A3,12", "A4,22", "so31"} <= ids
    fam = {f["id"]: f for f in payload["families"]}
    assert fam["A3,4"]["invariants"][0]["label"] == "I1"
    assert fam["A2,2"]["kind"] == "functions"
