import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dumbbell.errors import MeshMismatchError, PreconditionError
from dumbbell.fem import DiscreteOperator, Field, read_field_csv
from dumbbell.mesh import triangulate_polygon
from dumbbell.potential import polynomial, quartic, sin2, triple

POTENTIALS = [quartic(), triple(), sin2()]
UNIT_SQUARE = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
COARSE = DiscreteOperator(triangulate_polygon(UNIT_SQUARE, 0.1))


def test_constant_well_energy(small_dumbbell, qw):
    _, mesh, op = small_dumbbell
    assert op.energy(qw, np.ones(mesh.n_nodes)) == pytest.approx(0.0, abs=1e-14)
    p = quartic(0.0, 2.0)
    assert op.energy(p, np.zeros(mesh.n_nodes)) == pytest.approx(float(p.w(np.array(0.0))) * op.area, abs=1e-14)


def test_zero_field_unit_square(square_op, qw):
    assert square_op.energy(qw, np.zeros(square_op.mesh.n_nodes)) == pytest.approx(1.0, abs=1e-10)


def test_linear_field_dirichlet(square_op):
    zero = polynomial([0.0], mbar=1.0)
    x = square_op.mesh.nodes[:, 0]
    assert square_op.energy(zero, x) == pytest.approx(0.5, abs=1e-12)


def test_mass_sums_to_area(small_dumbbell):
    geom, _, op = small_dumbbell
    assert op.mass.sum() == pytest.approx(geom.area, abs=1e-10)


def test_well_residual_zero(small_dumbbell, qw):
    _, mesh, op = small_dumbbell
    for a in (-1.0, 1.0):
        assert op.residual_norm(qw, np.full(mesh.n_nodes, a)) <= 1e-12


def test_nonwell_constant_residual(small_dumbbell, qw):
    _, mesh, op = small_dumbbell
    c = 0.3
    expected = abs(float(qw.dw(np.array(c)))) * np.sqrt(op.area)
    assert op.residual_norm(qw, np.full(mesh.n_nodes, c)) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("p", POTENTIALS, ids=lambda p: p.name)
def test_gradient_matches_central_difference(square_op, p, rng):
    n = square_op.mesh.n_nodes
    u, phi = rng.uniform(-1.2, 1.2, n), rng.standard_normal(n)
    h = 1e-5
    fd = (square_op.energy(p, u + h * phi) - square_op.energy(p, u - h * phi)) / (2 * h)
    exact = square_op.gradient(p, u) @ phi
    assert abs(fd - exact) <= 1e-5 * abs(exact)


@pytest.mark.parametrize("p", POTENTIALS, ids=lambda p: p.name)
def test_hessian_symmetric_and_consistent(square_op, p, rng):
    n = square_op.mesh.n_nodes
    u, phi, psi = rng.uniform(-1.2, 1.2, n), rng.standard_normal(n), rng.standard_normal(n)
    a = square_op.hessian_apply(p, u, phi) @ psi
    b = square_op.hessian_apply(p, u, psi) @ phi
    assert abs(a - b) <= 1e-12 * max(abs(a), 1.0)
    h = 1e-5
    fd = (square_op.gradient(p, u + h * phi) - square_op.gradient(p, u - h * phi)) / (2 * h)
    hp = square_op.hessian_apply(p, u, phi)
    assert np.linalg.norm(fd - hp) <= 1e-5 * np.linalg.norm(hp)


def test_hessian_at_well(square_op, qw):
    n = square_op.mesh.n_nodes
    out = square_op.hessian_apply(qw, np.ones(n), np.ones(n))
    assert np.allclose(out, 8.0 * square_op.mass, rtol=1e-12, atol=1e-14)


def test_stiffness_kills_constants(small_dumbbell):
    _, mesh, op = small_dumbbell
    assert np.max(np.abs(op.stiffness_apply(np.full(mesh.n_nodes, 3.7)))) == 0.0


@settings(max_examples=25, deadline=None)
@given(st.floats(-5, 5), st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_probe_constant(c, x, y):
    op = COARSE
    assert op.probe(op.field(c), np.array([x, y])) == pytest.approx(c, abs=1e-13)


def test_probe_linear_exact(square_op):
    x = square_op.mesh.nodes[:, 0] + 2 * square_op.mesh.nodes[:, 1]
    pts = np.array([[0.31, 0.77], [0.5, 0.5]])
    assert np.allclose(square_op.probe(x, pts), pts @ [1.0, 2.0], atol=1e-13)


def test_local_energy_linear(square_op):
    x = square_op.mesh.nodes[:, 0]
    c, r = np.array([0.5, 0.5]), 0.3
    inside = np.hypot(*(square_op.mesh.centroids() - c).T) < r
    assert square_op.local_energy(x, c, r) == pytest.approx(0.5 * square_op.areas[inside].sum(), rel=1e-12)
    with pytest.raises(PreconditionError):
        square_op.local_energy(x, c, 0.0)


def test_region_l1(small_dumbbell):
    _, mesh, op = small_dumbbell
    assert op.region_L1_distance(np.full(mesh.n_nodes, -1.0), "left", -1.0) == 0.0
    assert op.region_L1_distance(np.zeros(mesh.n_nodes), "left", -1.0) == pytest.approx(
        mesh.region_area("left"), rel=1e-12
    )


def test_energy_parts_sum(small_dumbbell, qw, rng):
    _, mesh, op = small_dumbbell
    u = rng.uniform(-1, 1, mesh.n_nodes)
    parts = op.energy_parts(qw, u)
    regions = sum(parts[f"{r}_energy"] for r in ("left", "neck", "right"))
    assert regions == pytest.approx(parts["total"], rel=1e-12)
    assert parts["total"] == pytest.approx(op.energy(qw, u), rel=1e-14)


def test_mesh_mismatch(small_dumbbell, square_op):
    _, mesh, op = small_dumbbell
    f = op.field(np.zeros(mesh.n_nodes))
    with pytest.raises(MeshMismatchError):
        square_op.values(f)
    with pytest.raises(MeshMismatchError):
        op.field(np.zeros(3))


def test_field_is_read_only_and_finite():
    f = Field(np.zeros(4), "t")
    with pytest.raises(ValueError):
        f.values[0] = 1.0
    with pytest.raises(PreconditionError):
        Field(np.array([0.0, np.nan]), "t")


def test_field_csv_round_trip(tmp_path, small_dumbbell, rng):
    _, mesh, op = small_dumbbell
    f = op.field(rng.standard_normal(mesh.n_nodes))
    f.save_csv(tmp_path / "f.csv")
    back = read_field_csv(tmp_path / "f.csv", op.token)
    assert np.array_equal(back.values, f.values)
    assert (tmp_path / "f.csv").read_text().splitlines()[0] == "node,value"


def test_tol_crit(square_op):
    assert square_op.tol_crit() == pytest.approx(1e-9 * np.sqrt(square_op.area))


def test_energy_order_on_smooth_layer():
    # centred transition layer on a rectangle: smooth and one-dimensional
    from dumbbell.minimize import SolverControls, newton

    p = quartic()
    energies = []
    for h in (0.1, 0.05, 0.025, 0.0125):
        op = DiscreteOperator(triangulate_polygon([[-2, 0], [2, 0], [2, 1], [-2, 1]], h))
        u0 = np.tanh(np.sqrt(2.0) * op.mesh.nodes[:, 0])
        u, res, _ = newton(op, p, u0, 1e-11, SolverControls(), {})
        assert res <= 1e-10
        energies.append(op.energy(p, u))
    d = np.abs(np.diff(energies))
    assert np.log2(d[-2] / d[-1]) >= 1.8
