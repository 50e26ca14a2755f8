import numpy as np
import pytest

from dumbbell.errors import GeometryError, PreconditionError
from dumbbell.geometry import (
    CRITICAL, NORMAL, SUBCRITICAL, SUPERCRITICAL, THICK, BulkDomain, DumbbellSpec, NeckProfile, Regime,
    ScalingFamily, assemble_dumbbell, classify_regime, polygon_area,
)


def unit_square_spec(neck=None):
    right = BulkDomain(np.array([[0, -0.5], [1, -0.5], [1, 0.5], [0, 0.5]], float), "right", 0.25)
    return DumbbellSpec(right.mirrored(), right, neck or NeckProfile.constant(0.5), convex_bulks=True)


def test_constant_neck_is_rectangle():
    g = assemble_dumbbell(unit_square_spec(), 0.1, 0.05)
    neck = g.regions["neck"]
    assert np.allclose(neck[:, 0].min(), -0.1) and np.allclose(neck[:, 0].max(), 0.1)
    assert np.allclose(neck[:, 1].min(), -0.025) and np.allclose(neck[:, 1].max(), 0.025)
    assert polygon_area(neck) == pytest.approx(0.2 * 0.05, rel=1e-13)


def test_bulks_translate_by_eps():
    g = assemble_dumbbell(unit_square_spec(), 0.05, 0.01)
    left = g.regions["left"]
    assert left[:, 0].min() == pytest.approx(-1.05)
    assert left[:, 0].max() == pytest.approx(-0.05)
    assert left[:, 1].min() == pytest.approx(-0.5) and left[:, 1].max() == pytest.approx(0.5)


def test_quadratic_top_profile():
    neck = NeckProfile(lambda x: (1 + x**2) / 2, 0.5)
    g = assemble_dumbbell(unit_square_spec(neck), 0.1, 0.01)
    top = g.regions["neck"]
    top = top[top[:, 1] > 0]
    for x, y in [(0.0, 0.005), (0.1, 0.01), (-0.1, 0.01)]:
        i = np.argmin(np.abs(top[:, 0] - x))
        assert top[i, 0] == pytest.approx(x, abs=1e-15)
        assert top[i, 1] == pytest.approx(y, rel=1e-12)


def test_area_is_sum_of_regions():
    g = assemble_dumbbell(unit_square_spec(), 0.1, 0.05)
    parts = sum(g.region_area(k) for k in ("left", "neck", "right"))
    assert g.area == pytest.approx(parts, rel=1e-13)
    assert g.region_area("neck") == pytest.approx(g.neck_area_exact(), rel=1e-12)


def test_delta_too_large_rejected():
    spec = unit_square_spec()
    with pytest.raises(PreconditionError, match="too large"):
        assemble_dumbbell(spec, 0.1, spec.max_delta() * 1.01)


def test_nonpositive_parameters_rejected():
    with pytest.raises(PreconditionError):
        assemble_dumbbell(unit_square_spec(), 0.0, 0.01)


def test_bulk_without_flat_mouth_rejected():
    tri = np.array([[0, -1], [2, 0], [0, 1]], float)
    BulkDomain(tri, "right", 0.2)
    with pytest.raises(GeometryError):
        BulkDomain(np.array([[0.1, -1], [2, 0], [0.0, 1]], float), "right", 0.2)


def test_clockwise_bulk_rejected():
    with pytest.raises(GeometryError, match="oriented"):
        BulkDomain(np.array([[0, 0.5], [1, 0.5], [1, -0.5], [0, -0.5]], float), "right", 0.2)


def test_mirror_symmetry():
    assert unit_square_spec().is_mirror_symmetric()
    lop = NeckProfile(lambda x: 0.5 + 0.1 * x, 0.5)
    assert not unit_square_spec(lop).is_mirror_symmetric()


def test_nonpositive_profile_rejected():
    with pytest.raises((GeometryError, PreconditionError)):
        NeckProfile(lambda x: x, 0.5)


def test_boundary_csv(tmp_path):
    g = assemble_dumbbell(unit_square_spec(), 0.1, 0.05)
    g.save_csv(tmp_path / "b.csv")
    back = np.loadtxt(tmp_path / "b.csv", delimiter=",", skiprows=1)
    assert np.array_equal(back, g.boundary)


@pytest.mark.parametrize(
    "family, expected",
    [
        (ScalingFamily("power", 0.5, 1.0), Regime(NORMAL, 0.5)),
        (ScalingFamily("power", 1.0, 0.5), Regime(THICK)),
        (ScalingFamily("logpower", 2.0, 1.0), Regime(CRITICAL, 2.0)),
        (ScalingFamily("power", 1.0, 2.0), Regime(SUBCRITICAL)),
        (ScalingFamily("logpower", 1.0, 0.5), Regime(SUPERCRITICAL)),
    ],
)
def test_classify_regime(family, expected):
    assert classify_regime(family) == expected


def test_regime_needs_ell():
    with pytest.raises(PreconditionError):
        Regime(NORMAL)
    with pytest.raises(PreconditionError):
        Regime(THICK, 1.0)


def test_family_delta():
    assert ScalingFamily("power", 1.0, 2.0).delta(0.1) == pytest.approx(0.01)
    f = ScalingFamily("logpower", np.pi, 1.0)
    assert f.delta(0.01) == pytest.approx(np.pi * 0.01 / np.log(100))
    with pytest.raises(PreconditionError):
        f.delta(2.0)
