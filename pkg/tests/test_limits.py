import numpy as np
import pytest

from dumbbell.errors import PreconditionError
from dumbbell.geometry import NeckProfile
from dumbbell.limits import (
    LimitDomain, LimitSolution, flux_through_section, linear_slope_fit, log_slope_fit, oddness_defect,
    slope_identity, solve_limit,
)


@pytest.fixture(scope="module")
def halfstrip():
    return solve_limit(LimitDomain("halfstrip", R=50.0), 1.0)


@pytest.fixture(scope="module")
def normal():
    return solve_limit(LimitDomain("normal", R=50.0), 1.0)


def manufactured(sol, values):
    return LimitSolution(sol.domain, sol.mesh, sol.op, sol.op.field(values), sol.log_coef)


def test_zero_data_gives_zero():
    sol = solve_limit(LimitDomain("normal", R=20.0), 0.0)
    assert np.max(np.abs(sol.v)) == 0.0


def test_normal_odd(normal):
    assert oddness_defect(normal) <= 1e-4


def test_normal_discrete_harmonic(normal):
    assert normal.diagnostics["harmonic_residual_max"] <= 1e-9


def test_log_slope_of_manufactured_field(normal):
    x, y = normal.mesh.nodes.T
    v = 3.0 * np.log(np.maximum(np.hypot(x, y), 1e-300))
    fit = log_slope_fit(manufactured(normal, v), (-np.pi / 3, np.pi / 3), (5.0, 30.0))
    assert fit == pytest.approx(3.0, rel=1e-3)


def test_linear_slope_and_flux(halfstrip):
    x = halfstrip.mesh.nodes[:, 0]
    sol = manufactured(halfstrip, 2.0 * x)
    L = halfstrip.domain.strip_length
    assert linear_slope_fit(sol, (-0.7 * L, -0.3 * L)) == pytest.approx(2.0, rel=1e-12)
    assert flux_through_section(sol, -0.5 * L) == pytest.approx(2.0 * halfstrip.domain.width, rel=1e-12)


def test_halfstrip_slope_identity(halfstrip):
    d = slope_identity(halfstrip)
    assert d["flux_spread"] <= 1e-3
    assert d["ratio"] == pytest.approx(1.0, abs=0.1)
    assert d["arc_vs_section"] <= 0.01


def test_thick_domain_solves():
    sol = solve_limit(LimitDomain("thick", R=20.0, neck=NeckProfile.constant(0.5)), 1.0)
    assert np.isfinite(sol.v).all()
    assert sol.probe(np.array([[0.0, 0.0]]))[0] == pytest.approx(0.0, abs=1e-12)


def test_bad_domains():
    with pytest.raises(PreconditionError):
        LimitDomain("annulus")
    with pytest.raises(PreconditionError):
        LimitDomain("normal", R=5.0)
    with pytest.raises(PreconditionError):
        LimitDomain("halfstrip", L=2.0)


def test_fit_range_inside_truncation(normal):
    with pytest.raises(PreconditionError):
        log_slope_fit(normal, (0, 1), (5.0, 49.0))
