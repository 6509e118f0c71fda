import math

import numpy as np
import pytest

from dodslab import catalog, solver
from dodslab import exprlang as el
from dodslab import invariant_solutions as isol
from dodslab.errors import ConstraintViolated, NumericOnlyAnsatz, UnknownFamily


def get_ansatz(fid, label):
    matches = [a for a in isol.subalgebra_catalog(fid) if a.label == label]
    assert matches, (fid, label)
    return matches[0]


class TestSubalgebraCatalog:
    def test_a22_single_ansatz(self):
        assert [a.label for a in isol.subalgebra_catalog("A2,2")] == ["X2"]

    def test_a38alt_three_ansaetze(self):
        assert [a.label for a in isol.subalgebra_catalog("A3,8alt")] \
            == ["X1", "X2", "X1+X3"]

    def test_a11_empty(self):
        assert isol.subalgebra_catalog("A1,1") == []

    def test_linear_families_empty(self):
        assert isol.subalgebra_catalog("A2,1") == []
        assert isol.subalgebra_catalog("A2,3") == []

    def test_unknown_family(self):
        with pytest.raises(UnknownFamily):
            isol.subalgebra_catalog("A7,7")

    def test_a32_list(self):
        assert [a.label for a in isol.subalgebra_catalog("A3,2")] \
            == ["X1", "X1+X2", "X1-X2", "X3"]


class TestSolveConstraints:
    def test_a22_square_map(self):
        # A = f(A) = A^2 has roots 0 and 1; A = 0 forces B = g(0) = 0 which
        # the admissibility filter removes, leaving {A = 1, B = 1/2}
        res = isol.solve_constraints(get_ansatz("A2,2", "X2"))
        assert len(res.assignments) == 1
        a = res.assignments[0]
        assert a["A"] == pytest.approx(1.0, abs=1e-12)
        assert a["B"] == pytest.approx(0.5, abs=1e-12)

    def test_a24_defaults(self):
        res = isol.solve_constraints(get_ansatz("A2,4", "X1+a*X2"))
        assert len(res.assignments) == 1
        a = res.assignments[0]
        assert a["a"] == pytest.approx(1.0, abs=1e-12)
        assert a["B"] == pytest.approx(2.0, abs=1e-12)
        # the degenerate slope a = 0 is filtered because f'(0) = 0 removes
        # the delayed argument along that candidate
        assert any("df/dy_" in d for d in res.diagnostics)

    def test_a32_x3(self):
        res = isol.solve_constraints(get_ansatz("A3,2", "X3"))
        a = res.assignments[0]
        assert a["A"] == pytest.approx(1.0 / 3.0, abs=1e-12)
        assert a["B"] == pytest.approx(0.5, abs=1e-12)

    def test_a32_x1_always_empty(self):
        res = isol.solve_constraints(get_ansatz("A3,2", "X1"))
        assert not res.assignments
        assert res.diagnostics

    def test_a34_x1_both_branches(self):
        ansatz = get_ansatz("A3,4", "X1")
        # C1 != 0: the gate 0 = C1 fails
        res = isol.solve_constraints(ansatz, {"C1": 1.0, "C2": 1.5})
        assert not res.assignments
        assert any("gate" in d for d in res.diagnostics)
        # C1 = 0: B = C2
        res = isol.solve_constraints(ansatz, {"C1": 0.0, "C2": 1.5})
        assert len(res.assignments) == 1
        assert res.assignments[0]["B"] == pytest.approx(1.5, abs=1e-12)

    def test_numeric_only_reports(self):
        res = isol.solve_constraints(get_ansatz("A3,9", "X1+X3"))
        assert not res.assignments
        assert "numeric-only" in res.diagnostics[0]


class TestBuildAndVerify:
    def test_a32_closed_form(self):
        ansatz = get_ansatz("A3,2", "X3")
        res = isol.solve_constraints(ansatz)
        sol = isol.build_solution(ansatz, res.assignments[0])
        assert sol.y(2.0) == pytest.approx(4.0 / 3.0, rel=1e-12)
        assert sol.x_minus(2.0) == pytest.approx(1.0, rel=1e-12)
        system = catalog.invariant_family("A3,2", validate=False)
        assert isol.verify(system, sol) <= 1e-12

    def test_a24_closed_form_and_free_constant(self):
        ansatz = get_ansatz("A2,4", "X1+a*X2")
        res = isol.solve_constraints(ansatz)
        sol = isol.build_solution(ansatz, res.assignments[0])
        # y = x + 5 with the default free constant
        assert sol.y(1.0) == pytest.approx(6.0)
        assert sol.x_minus(1.0) == pytest.approx(-1.0)
        system = catalog.invariant_family("A2,4", validate=False)
        assert isol.verify(system, sol) <= 1e-14

    def test_perturbed_form_fails_verification(self):
        ansatz = get_ansatz("A3,2", "X3")
        res = isol.solve_constraints(ansatz)
        sol = isol.build_solution(ansatz, res.assignments[0])
        sol.y_expr = el.parse("1.01*x^2/3", ("x",))
        system = catalog.invariant_family("A3,2", validate=False)
        assert isol.verify(system, sol) >= 1e-3

    def test_numeric_only_build_raises(self):
        ansatz = get_ansatz("A3,9", "X1+X3")
        with pytest.raises(NumericOnlyAnsatz):
            isol.build_solution(ansatz, {})

    def test_every_solvable_ansatz_verifies(self):
        """Shipped ansaetze with closed forms verify at 1e-10 for parameter
        sets known to admit solutions."""
        cases = [
            ("A2,2", "X2", None),
            ("A2,4", "X1+a*X2", None),
            ("A3,2", "X1+X2", {"a": 2.0, "C1": 1.0, "C2": 1.0}),
            ("A3,2", "X3", None),
            ("A3,4", "X1", {"C1": 0.0, "C2": 1.5}),
            ("A3,4", "X3", {"C1": 1.0 + 0.5 * math.log(0.5) / 0.5,
                            "C2": 0.5 * 0.5 ** 1.0}),
            ("A3,6", "X1", {"C1": 0.0, "C2": 1.2, "b": 0.5}),
            ("A3,6", "X3", None),
            ("A3,8alt", "X1", {"C1": 0.0, "C2": 0.5}),
            ("A3,8alt", "X2", {"C1": -1.0, "C2": 0.25}),
            ("A3,8alt", "X1+X3", None),
            ("A3,9", "X2", {"C1": 3.0, "C2": 1.0}),
            ("A3,10alt", "X1", {"C1": 4.0 / 9.0, "C2": 4.0}),
            ("A3,10alt", "X2", {"C1": 0.12, "C2": 0.375}),
            # constants placing the Moebius pole of y(x) outside the domain
            ("A3,10alt", "X1+X3", {"C1": 1.16 / 2.25,
                                   "C2": 0.7424 / 0.2624}),
            ("A3,12", "X1", None),
        ]
        for fid, label, params in cases:
            ansatz = get_ansatz(fid, label)
            res = isol.solve_constraints(ansatz, params)
            assert res.assignments, (fid, label, res.diagnostics)
            system = catalog.invariant_family(fid, validate=False,
                                              **(params or {}))
            for assignment in res.assignments[:3]:
                sol = isol.build_solution(ansatz, assignment, params)
                worst = isol.verify(system, sol)
                assert worst <= 1e-10, (fid, label, assignment, worst)

    def test_a36_polar_oracle(self):
        # for pitch b = 0 the constraints reduce to tan(B/2) = C1 and
        # 2 A |sin(B/2)| = C2 (positive chord branch)
        params = {"b": 0.0, "C1": math.tan(0.4), "C2": 1.0}
        ansatz = get_ansatz("A3,6", "X3")
        res = isol.solve_constraints(ansatz, params)
        assert res.assignments
        a = res.assignments[0]
        assert a["B"] == pytest.approx(0.8, abs=1e-10)
        assert a["A"] == pytest.approx(1.0 / (2.0 * math.sin(0.4)), abs=1e-10)
        sol = isol.build_solution(ansatz, a, params)
        system = catalog.invariant_family("A3,6", validate=False, **params)
        assert isol.verify(system, sol) <= 1e-10


class TestOrbitExtension:
    def test_a22_translation_is_free(self):
        ansatz = get_ansatz("A2,2", "X2")
        res = isol.solve_constraints(ansatz)
        sol = isol.build_solution(ansatz, res.assignments[0])
        ext = isol.orbit_extend(ansatz, sol, {"alpha": 3.0})
        assert ext.y(1.0) == pytest.approx(sol.y(1.0) + 3.0)
        system = catalog.invariant_family("A2,2", validate=False)
        assert isol.verify(system, ext) <= 1e-12

    def test_identity_orbit_is_noop(self):
        ansatz = get_ansatz("A3,2", "X3")
        res = isol.solve_constraints(ansatz)
        sol = isol.build_solution(ansatz, res.assignments[0])
        same = isol.orbit_extend(ansatz, sol, {})
        assert same.constants == sol.constants

    def test_a32_shift_orbit_reverified(self):
        # y -> y + 1 maps invariant solutions to solutions (the shift is
        # itself in the symmetry algebra); the mechanical re-check accepts it
        ansatz = get_ansatz("A3,2", "X3")
        res = isol.solve_constraints(ansatz)
        sol = isol.build_solution(ansatz, res.assignments[0])
        ext = isol.orbit_extend(ansatz, sol, {"alpha": 1.0})
        assert ext.y(2.0) == pytest.approx(1.0 + 4.0 / 3.0, rel=1e-12)
        system = catalog.invariant_family("A3,2", validate=False)
        assert isol.verify(system, ext) <= 1e-12

    def test_a34_x1_orbit_respects_delay_scaling(self):
        # tilting y = A by exp(eps X3) forces the delay constant to follow
        # B = C2 e^alpha; the re-solve discovers that automatically
        ansatz = get_ansatz("A3,4", "X1")
        params = {"C1": 0.0, "C2": 1.5}
        res = isol.solve_constraints(ansatz, params)
        sol = isol.build_solution(ansatz, res.assignments[0], params)
        ext = isol.orbit_extend(ansatz, sol, {"alpha": 0.3},
                                family_params=params)
        assert ext.constants["B"] == pytest.approx(1.5 * math.exp(0.3),
                                                   rel=1e-10)
        system = catalog.invariant_family("A3,4", validate=False, **params)
        assert isol.verify(system, ext) <= 1e-10

    def test_unknown_orbit_parameter(self):
        ansatz = get_ansatz("A2,2", "X2")
        res = isol.solve_constraints(ansatz)
        sol = isol.build_solution(ansatz, res.assignments[0])
        with pytest.raises(ConstraintViolated):
            isol.orbit_extend(ansatz, sol, {"gamma": 1.0})


class TestJacobianCondition:
    def test_all_shipped_ansaetze(self):
        for fid in ("A2,2", "A2,4", "A3,2", "A3,4", "A3,6", "A3,8alt",
                    "A3,9", "A3,10alt", "A3,12"):
            for ansatz in isol.subalgebra_catalog(fid):
                best = isol.jacobian_condition_min(ansatz, n=50)
                assert best > 1e-8, (fid, ansatz.label, best)


class TestRoundTrips:
    def test_a32_numerical_round_trip(self):
        ansatz = get_ansatz("A3,2", "X3")
        res = isol.solve_constraints(ansatz)
        sol = isol.build_solution(ansatz, res.assignments[0])
        system = catalog.invariant_family("A3,2", validate=False)
        phi, interval = sol.as_initial_data(1.0)
        num = solver.solve(system, phi, interval, 8.0)
        errs = [abs(num.value(float(x)) - sol.y(float(x)))
                for x in np.linspace(1.0, 8.0, 80)]
        assert max(errs) <= 1e-7

    def test_a24_numerical_round_trip(self):
        ansatz = get_ansatz("A2,4", "X1+a*X2")
        res = isol.solve_constraints(ansatz)
        sol = isol.build_solution(ansatz, res.assignments[0])
        system = catalog.invariant_family("A2,4", validate=False)
        phi, interval = sol.as_initial_data(0.0)
        num = solver.solve(system, phi, interval, 6.0)
        errs = [abs(num.value(float(x)) - sol.y(float(x)))
                for x in np.linspace(0.0, 6.0, 80)]
        assert max(errs) <= 1e-7
