import math

import pytest

from dodslab.core import (Box, DODSystem, JetPoint, LinearDODS, VectorField,
                          jet_on_manifold, validate_system)
from dodslab.errors import ConfigError, DelayOrderError


def test_validate_constant_delay_passes(const_delay_system):
    report = validate_system(const_delay_system)
    assert report.ok, report.summary()


def test_validate_no_delay_dependence_fails():
    system = DODSystem(f="y", g="x - 1", domain=(0.0, 5.0), label="no delay")
    report = validate_system(system)
    failed = [c.name for c in report.conditions if not c.passed]
    assert "df/dy_ not identically zero" in failed


def test_validate_future_delay_fails():
    system = DODSystem(f="y_", g="x + 1", domain=(0.0, 5.0), label="future")
    report = validate_system(system)
    failed = [c.name for c in report.conditions if not c.passed]
    assert not report.ok
    # every point violates the ordering, so sampling collapses or the
    # ordering condition itself is flagged
    assert failed


def test_validate_constant_g_fails():
    system = DODSystem(f="y_", g="0 - 1", domain=(0.0, 5.0), label="const g")
    report = validate_system(system)
    failed = [c.name for c in report.conditions if not c.passed]
    assert "g not identically constant" in failed


def test_validate_sample_size_guard(const_delay_system):
    with pytest.raises(ConfigError):
        validate_system(const_delay_system, sample_size=5)


def test_jet_on_manifold_chord_system():
    system = DODSystem(f="(y - y_)/(x - x_)", g="x/2", domain=(0.5, 4.0))
    jet = jet_on_manifold(system, 1.0, 2.0, 1.0)
    # ydot = (2 - 1)/(1 - 0.5) = 2
    assert jet == JetPoint(1.0, 2.0, 0.5, 1.0, 2.0)
    assert jet.dx == 0.5 and jet.dy == 1.0


def test_jet_on_manifold_direct_substitution(const_delay_system):
    jet = jet_on_manifold(const_delay_system, 0.0, 7.0, 3.0)
    assert jet == JetPoint(0.0, 7.0, -1.0, 3.0, 3.0)


def test_jet_on_manifold_precondition():
    system = DODSystem(f="y_", g="x + 1", domain=(0.0, 5.0))
    with pytest.raises(DelayOrderError):
        jet_on_manifold(system, 0.0, 1.0, 1.0)


def test_jets_satisfy_defining_equations_exactly(const_delay_system,
                                                 chord_halving_system):
    for system, pts in ((const_delay_system, [(0.3, 1.5, -0.2)]),
                        (chord_halving_system, [(2.0, 3.0, 1.0)])):
        for (x, y, ym) in pts:
            jet = system.jet(x, y, ym)
            e1, e2 = system.residuals_at(jet)
            assert e1 == 0.0 and abs(e2) < 1e-12


def test_residual_delay_resolution_rightmost_root():
    # delay relation with two roots below x: (x - x_)^2 = 1 has x_ = x -+ 1;
    # the causally admissible resolution takes the largest root x - 1
    system = DODSystem(f="y_", delay_residual="(x - x_)^2 - 1",
                       domain=(0.0, 5.0), delta_max=5.0)
    assert system.resolve_delay(3.0, 1.0, 1.0) == pytest.approx(2.0, abs=1e-10)


def test_implicit_dode_residual_rhs():
    # residual yd^3 - y_ = 0 resolves ydot = y_^(1/3)
    system = DODSystem(dode_residual="yd^3 - y_", g="x - 1",
                       domain=(0.0, 5.0))
    assert system.rhs(1.0, 0.0, 8.0) == pytest.approx(2.0, abs=1e-12)


def test_perturbed_dode(const_delay_system):
    pert = const_delay_system.perturbed_dode("0.1*y")
    jet = pert.jet(0.0, 7.0, 3.0)
    assert jet.ydot == pytest.approx(3.0 + 0.7)


def test_vector_field_partials():
    field = VectorField("x^2", "x*y", label="X3")
    assert field.coeffs(1.0, 2.0) == (1.0, 2.0)
    assert field.partials(1.0, 2.0) == (2.0, 0.0, 2.0, 1.0)


def test_linear_dods_accepts_and_rejects():
    lin = LinearDODS("0", "1", "0", "x - 1", (0.0, 5.0))
    assert lin.is_homogeneous()
    with pytest.raises(ConfigError):
        LinearDODS("1", "0", "0", "x - 1", (0.0, 5.0))  # beta = 0
    with pytest.raises(ConfigError):
        LinearDODS("0", "1", "0", "x + 1", (0.0, 5.0))  # g >= x
    with pytest.raises(ConfigError):
        LinearDODS("0", "1", "0", "0 - 1", (0.0, 5.0))  # g constant


def test_linear_as_dods_round_trip():
    lin = LinearDODS("1/x", "x", "sin(x)", "x/2", (1.0, 4.0))
    system = lin.as_dods()
    jet = system.jet(2.0, 3.0, 0.5)
    assert jet.ydot == pytest.approx(3.0 / 2.0 + 2.0 * 0.5 + math.sin(2.0))
    assert jet.x_minus == 1.0


def test_degenerate_box_rejected():
    box = Box(x=(1.0, 1.0))
    with pytest.raises(ConfigError):
        box.validate()
