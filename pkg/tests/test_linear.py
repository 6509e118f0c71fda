import math
import random

import numpy as np
import pytest

from dodslab import catalog, linear, solver
from dodslab import exprlang as el
from dodslab import symmetry as sym
from dodslab.core import LinearDODS, VectorField
from dodslab.errors import ConfigError, DomainError, NotAParticularSolution


@pytest.fixture()
def canonical_linear():
    """ydot = y_, x_ = x - 1."""
    return LinearDODS("0", "1", "0", "x - 1", (0.0, 5.0), label="canonical")


@pytest.fixture()
def beta_x_linear():
    """ydot = x y_, x_ = x - 1: violates the compatibility condition."""
    return LinearDODS("0", "x", "0", "x - 1", (2.0, 6.0), label="beta=x")


@pytest.fixture()
def halving_linear():
    """ydot = y_, x_ = x/2: zero compatibility defect but no extra symmetry."""
    return LinearDODS("0", "1", "0", "x/2", (1.0, 8.0), label="halving")


class TestKFunction:
    def test_all_terms_vanish(self, canonical_linear):
        for x in (0.5, 2.0, 4.5):
            assert linear.k_function(canonical_linear, x) == 0.0

    def test_beta_slope(self, beta_x_linear):
        # K = -betadot/beta = -1/x
        assert linear.k_function(beta_x_linear, 2.0) == pytest.approx(-0.5)

    def test_constant_alpha_cancels(self):
        lin = LinearDODS("1", "1", "0", "x - 1", (0.0, 5.0))
        assert linear.k_function(lin, 3.3) == pytest.approx(0.0, abs=1e-15)

    def test_beta_zero_is_domain_error(self):
        lin = LinearDODS("0", "x - 1.0000001", "0", "x/2", (1.0, 4.0))
        with pytest.raises(DomainError):
            linear.k_function(lin, 1.0000001)


class TestCompatibility:
    def test_constant_delay_constant_beta(self, canonical_linear):
        holds, defect = linear.compatibility(canonical_linear)
        assert holds and defect == 0.0

    def test_beta_x_defect_matches_hand_formula(self, beta_x_linear):
        holds, defect = linear.compatibility(beta_x_linear)
        assert not holds
        # defect(x) = |K(x-1) - K(x)| = |1/x - 1/(x-1)|, maximal at x = 2
        assert defect == pytest.approx(abs(1.0 / 2.0 - 1.0), abs=1e-10)

    def test_halving_has_zero_defect(self, halving_linear):
        holds, defect = linear.compatibility(halving_linear)
        assert holds and defect == 0.0

    def test_grid_guard(self, canonical_linear):
        with pytest.raises(ConfigError):
            linear.compatibility(canonical_linear, grid=5)


class TestExtraSymmetry:
    def test_translation_recovered(self, canonical_linear):
        z = linear.extra_symmetry(canonical_linear)
        assert z is not None
        assert z.describe() == "d/dx"
        assert z.coeffs(1.7, 2.3) == (1.0, 0.0)
        ok, worst = sym.is_symmetry(z, canonical_linear.as_dods(), sample=100,
                                    seed=4, tol=1e-7)
        assert ok, worst

    def test_incompatible_returns_none(self, beta_x_linear):
        z, diags = linear.extra_symmetry_report(beta_x_linear)
        assert z is None
        assert any("violated" in d for d in diags)

    def test_functional_equation_rejection(self, halving_linear):
        # the compatibility condition alone is necessary, not sufficient:
        # xi = 1 solves the ODE but xi(x/2) = xi(x)/2 admits only xi = 0
        z, diags = linear.extra_symmetry_report(halving_linear)
        assert z is None
        assert any("functional equation" in d for d in diags)
        assert any("no constant rescaling" in d for d in diags)

    def test_inhomogeneous_b_equation(self):
        # ydot = y_ + 1, x_ = x - 1 is compatible; B solves the driven
        # B-equation and Z = d/dx + B(x) d/dy must be a weak symmetry
        lin = LinearDODS("0", "1", "1", "x - 1", (0.0, 5.0))
        z = linear.extra_symmetry(lin)
        assert z is not None
        ok, worst = sym.is_symmetry(z, lin.as_dods(), sample=80, seed=5,
                                    tol=1e-7)
        assert ok, worst

    def test_transform_solution_along_z(self, canonical_linear):
        z = linear.extra_symmetry(canonical_linear)
        system = canonical_linear.as_dods()
        sol = solver.solve(system, "1", (-1.0, 0.0), 2.5)
        moved = sym.transform_solution(z, 0.1, sol)
        res = solver.solution_residual(system, moved.evaluate, 0.2,
                                       moved.x_end, n=60,
                                       cover_lo=moved.x_start)
        assert res <= 1e-6


class TestHomogenize:
    def test_constant_particular_solution(self):
        lin = LinearDODS("0", "1", "1", "x - 1", (0.0, 5.0))
        homo, record = linear.homogenize(lin, "-1")
        assert homo.is_homogeneous()
        assert record["residual"] <= 1e-12

    def test_identity_on_homogeneous(self, canonical_linear):
        homo, _rec = linear.homogenize(canonical_linear, "0")
        assert homo.is_homogeneous()

    def test_not_a_particular_solution(self):
        lin = LinearDODS("0", "1", "1", "x - 1", (0.0, 5.0))
        with pytest.raises(NotAParticularSolution):
            linear.homogenize(lin, "x")


class TestCanonicalForm:
    def test_already_canonical(self, canonical_linear):
        cf = linear.canonical_form(canonical_linear)
        assert cf.tag == "compatible"
        assert cf.C == pytest.approx(1.0, abs=1e-10)

    def test_roundtrip_of_maps(self, canonical_linear):
        cf = linear.canonical_form(canonical_linear)
        for x in np.linspace(0.1, 4.9, 25):
            xb = cf.x_map(float(x))
            assert abs(cf.x_map.inverse(xb) - float(x)) <= 1e-9

    def test_compatible_nontrivial_coefficients(self):
        # alpha = 1/x with beta = 1/x and g = x/2 compatible?  build one
        # known-compatible family instead: scale x so K is constant
        lin = LinearDODS("1", "exp(1)*1", "0", "x - 1", (0.0, 4.0))
        holds, defect = linear.compatibility(lin)
        assert holds
        cf = linear.canonical_form(lin)
        assert cf.tag == "compatible"
        assert cf.C == pytest.approx(1.0, rel=1e-8)

    def test_delay_straightening(self, beta_x_linear):
        cf = linear.canonical_form(beta_x_linear, mode="canonical2")
        assert cf.tag == "incompatible"
        assert cf.C == 1.0
        fvals = [v for (_, v) in cf.coeff_samples["f"]]
        assert max(fvals) - min(fvals) > 1e-3  # f nonconstant as required
        for x in np.linspace(2.1, 5.9, 20):
            xb = cf.x_map(float(x))
            assert abs(cf.x_map.inverse(xb) - float(x)) <= 1e-9

    def test_coefficient_absorption_on_halving(self, halving_linear):
        # the halving system stays linear-delay after absorption: the
        # canonical-3 restriction gdd != 0 cannot be met here; the honest
        # outcome is tag incompatible with gbar'' = 0 reported
        cf = linear.canonical_form(halving_linear, mode="canonical3")
        assert cf.tag == "incompatible"
        gdd = max(abs(r[3]) for r in cf.coeff_samples["gbar"])
        assert gdd <= 1e-8
        hvals = [v for (_, v) in cf.coeff_samples["h"]]
        assert max(abs(v) for v in hvals) <= 1e-12  # DODE unchanged

    def test_absorption_with_varying_beta(self, beta_x_linear):
        cf = linear.canonical_form(beta_x_linear, mode="canonical3")
        assert cf.tag == "incompatible"
        gdd = max(abs(r[3]) for r in cf.coeff_samples["gbar"])
        assert gdd > 1e-6  # genuinely curved delay map


class TestSuperposition:
    def test_linear_combinations(self, canonical_linear, omega):
        system = canonical_linear.as_dods()
        s1 = solver.solve(system, "1", (-1.0, 0.0), 2.5)
        s2 = solver.solve(system, f"exp({omega!r}*x)", (-1.0, 0.0), 2.5)
        rng = random.Random(12)
        for _ in range(5):
            c = [rng.uniform(-3, 3), rng.uniform(-3, 3)]
            res = linear.superposition_check(canonical_linear, [s1, s2], c)
            assert res <= 1e-8, (c, res)

    def test_single_solution_coefficient_one(self, canonical_linear):
        system = canonical_linear.as_dods()
        s1 = solver.solve(system, "1", (-1.0, 0.0), 2.0)
        own = solver.residual(s1, system, 100)
        combo = linear.superposition_check(canonical_linear, [s1], [1.0])
        assert combo <= max(10 * own, 1e-12)

    def test_nonlinear_negative_control(self):
        system = catalog.invariant_family("A2,4", validate=False)
        s1 = solver.solve(system, "x + 5", (-2.0, 0.0), 2.2)
        # second solution with the same initial interval: any phi with
        # phi(0) - phi(-2) = 2 is compatible with the delay relation (the
        # sine perturbation keeps chord slopes near 1 so the z^2 right-hand
        # side does not steepen toward blow-up on this horizon)
        s2 = solver.solve(system, "x + 0.1*sin(pi*x)", (-2.0, 0.0), 2.2)
        res = linear.superposition_check(system, [s1, s2], [0.7, 0.6], n=60)
        assert res >= 1e-2

    def test_mismatched_intervals_rejected(self, canonical_linear):
        system = canonical_linear.as_dods()
        s1 = solver.solve(system, "1", (-1.0, 0.0), 2.0)
        s2 = solver.solve(system, "1", (0.0, 1.0), 2.5)
        with pytest.raises(ConfigError):
            linear.superposition_check(canonical_linear, [s1, s2], [1.0, 1.0])


class TestScalingFlowProperty:
    def test_y_scaling_maps_solutions_to_solutions(self, canonical_linear,
                                                   omega):
        # a non-polynomial solution exercises the transform's resampling;
        # the residual is dominated by the table density, so a fine grid
        # brings it well below 10x the solver tolerance scale
        system = canonical_linear.as_dods()
        sol = solver.solve(system, f"exp({omega!r}*x)", (-1.0, 0.0), 2.5)
        moved = sym.transform_solution(VectorField("0", "y"), 0.35, sol,
                                       grid=1200)
        res = solver.solution_residual(system, moved.evaluate, 0.0,
                                       moved.x_end, n=80,
                                       cover_lo=moved.x_start)
        assert res <= 1e-8


class TestLinearizableFamilies:
    def test_families_accepted_verbatim(self):
        # the two linearly-connected dimension-2 families are linear systems
        for fid in ("A2,1", "A2,3"):
            lin = linear.linear_from_family(fid)
            assert isinstance(lin, LinearDODS)

    def test_superposition_after_homogenization(self):
        # A2,3 default: ydot = (y - y_)/(x - x/2) + 1; sigma = c x log x with
        # c (1 - log 2) = 1 solves it (hand derivation: both sides equal
        # c log x + c), so homogenization strips the inhomogeneity
        sigmas = {"A2,1": None, "A2,3": "x*log(x)/(1 - log(2))"}
        for fid in ("A2,1", "A2,3"):
            lin = linear.linear_from_family(fid)
            if not lin.is_homogeneous():
                lin, _rec = linear.homogenize(lin, sigmas[fid])
            assert lin.is_homogeneous()
            system = lin.as_dods()
            x0 = 2.0
            xm1 = lin.g_at(x0)
            s1 = solver.solve(system, "1", (xm1, x0), 5.0)
            s2 = solver.solve(system, "x/2", (xm1, x0), 5.0)
            res = linear.superposition_check(lin, [s1, s2], [1.3, -0.4])
            assert res <= 1e-7, fid
