"""Acceptance criteria 1-15, one test each, at the pinned tolerances."""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from dumbbell import config as cfgmod
from dumbbell.closedform import barrier, identity_report, m_f1f2
from dumbbell.fem import DiscreteOperator
from dumbbell.geometry import DumbbellSpec, NeckProfile, assemble_dumbbell
from dumbbell.harness import SweepConfig, evaluate, fem_self_checks, run_sweep
from dumbbell.limits import LimitDomain, oddness_defect, slope_identity, solve_limit
from dumbbell.mesh import MeshParams, triangulate, triangulate_polygon
from dumbbell.minimize import SeedSpec, enumerate_stable, smallest_eigenvalue, solve_critical_point, uniqueness_check
from dumbbell.potential import find_wells, quartic

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
EPS_FIXED = 0.0125


def sweep(name, keep_fields=False):
    cfg = SweepConfig.from_dict(cfgmod.load_config(CONFIGS / f"{name}.toml"))
    cfg.keep_fields = keep_fields
    t0 = time.perf_counter()
    records = run_sweep(cfg)
    elapsed = time.perf_counter() - t0
    fits, checks = evaluate(cfg, records)
    return {"cfg": cfg, "records": records, "fits": fits, "checks": checks, "elapsed": elapsed}


def checks_for(result, cid):
    found = [c for c in result["checks"] if c["criterion"] == cid]
    assert found, f"no checks produced for criterion {cid}"
    return found


def assert_all_pass(checks):
    failed = [f"{c['check']}: value={c['value']:.6g} target={c['target']:.6g}" for c in checks if not c["pass"]]
    assert not failed, "; ".join(failed)


@pytest.fixture(scope="module")
def fixed_eps():
    """Quartic minimiser on the symmetric dumbbell at eps = delta = 0.0125."""
    spec = DumbbellSpec.symmetric_rectangles()
    geom = assemble_dumbbell(spec, EPS_FIXED, EPS_FIXED)
    op = DiscreteOperator(triangulate(geom, MeshParams()))
    p = quartic()
    return spec, op, p, solve_critical_point(op, p, SeedSpec(-1.0, 1.0))


@pytest.fixture(scope="module")
def uniqueness(fixed_eps):
    _, op, p, _ = fixed_eps
    return uniqueness_check(op, p, SeedSpec(-1.0, 1.0), 8, 0.1, rng_seed=0)


@pytest.fixture(scope="module")
def normal_sweep():
    return sweep("normal", keep_fields=True)


def test_criterion_01_closed_form_identities():
    t0 = time.perf_counter()
    rep = identity_report(1000, seed=0)
    elapsed = time.perf_counter() - t0
    assert rep["split_identity_max_err"] <= 1e-12
    assert rep["argmin_max_err"] <= 1e-12
    assert rep["min_value_max_err"] <= 1e-12
    assert elapsed < 1.0


def test_criterion_02_neck_constant_m():
    t0 = time.perf_counter()
    for h in (0.5, 1.0, 0.3):
        assert m_f1f2(NeckProfile.constant(h)) == 1.0 / h
    assert m_f1f2(NeckProfile.constant(0.2, 0.6)) == 2.5
    quad = NeckProfile(lambda x: (1 + x**2) / 2, lambda x: (1 + x**2) / 2)
    assert abs(m_f1f2(quad) - math.pi / 2) <= 1e-10
    assert time.perf_counter() - t0 < 1.0


def test_criterion_03_fem_self_checks():
    t0 = time.perf_counter()
    rep = fem_self_checks(seed=0)
    assert rep["gradient_fd_rel_err"]["value"] <= 1e-5
    assert rep["hessian_asymmetry"]["value"] <= 1e-12
    assert rep["well_residual"]["value"] <= 1e-12
    assert rep["zero_field_energy_err"]["value"] <= 1e-10
    assert time.perf_counter() - t0 < 10.0


def test_criterion_04_stability_baseline(fixed_eps):
    t0 = time.perf_counter()
    _, op_db, p, _ = fixed_eps
    meshes = [
        DiscreteOperator(triangulate_polygon([[0, 0], [1, 0], [1, 1], [0, 1]], 0.05)),
        DiscreteOperator(triangulate_polygon([[0, 0], [3, 0], [1, 2]], 0.1)),
        op_db,
    ]
    for op in meshes:
        lam, _, _ = smallest_eigenvalue(op, p, np.ones(op.mesh.n_nodes))
        assert abs(lam[0] - 8.0) <= 1e-6
    assert time.perf_counter() - t0 < 30.0


def test_criterion_05_existence_and_admissibility(fixed_eps):
    spec, op, _, rep = fixed_eps
    assert rep.residual <= 1e-9 * math.sqrt(op.area)
    assert rep.lambda_min > 0
    bound = 0.05 * 2.0 * min(spec.bulk_areas)
    assert rep.L1_left <= bound and rep.L1_right <= bound
    assert rep.constraint_active is False


def test_criterion_06_uniqueness(uniqueness):
    assert uniqueness.n_runs == 9
    assert uniqueness.max_distance <= 1e-6
    assert not uniqueness.left_basin


def test_criterion_07_classification():
    cfg = cfgmod.load_config(CONFIGS / "classify.toml")
    eps = cfgmod.eps_list(cfg["sweep"])[-1]
    delta = float(cfgmod.build_family(cfg["family"]).delta(eps))
    spec = cfgmod.build_spec(cfg["geometry"])
    assert spec.convex_bulks
    p = cfgmod.build_potential(cfg["potential"])
    wells = find_wells(p, (-p.mbar, p.mbar))
    op = DiscreteOperator(triangulate(assemble_dumbbell(spec, eps, delta), cfgmod.build_mesh_params(cfg["mesh"])))
    states = enumerate_stable(op, p, wells)
    n = len(wells)
    assert n == 3
    assert len(states.nonconstant) == n * (n - 1)
    assert not states.findings
    assert len(states.constants) == n
    for s in states.constants:
        assert np.all(s.u == s.seed.alpha)


def test_criterion_08_maximum_principle(fixed_eps, uniqueness, normal_sweep):
    reports = [fixed_eps[3]] + uniqueness.reports
    # an asymmetric quartic on a non-symmetric neck as well
    p = quartic(-0.5, 2.0)
    spec = DumbbellSpec.symmetric_rectangles(neck=NeckProfile(lambda x: 0.5 + 0.2 * x, 0.3))
    op = DiscreteOperator(triangulate(assemble_dumbbell(spec, 0.05, 0.05), MeshParams(h_bulk=0.08)))
    reports.append(solve_critical_point(op, p, SeedSpec(-0.5, 2.0)))
    reports.append(solve_critical_point(op, p, SeedSpec(2.0, -0.5)))
    fields = [(r.u, r.seed.alpha, r.seed.beta) for r in reports if r.converged]
    fields += [(r.field.values, -1.0, 1.0) for r in normal_sweep["records"] if r.ok]
    assert len(fields) >= 15
    for u, a, b in fields:
        assert u.min() >= min(a, b) - 1e-6
        assert u.max() <= max(a, b) + 1e-6


def test_criterion_09_barrier_sandwich(fixed_eps):
    spec, op, p, rep = fixed_eps
    mesh, u = op.mesh, rep.u
    eps, delta = EPS_FIXED, EPS_FIXED
    rho0, rho1 = spec.M * delta, spec.r0
    centre = np.array([eps, 0.0])

    def arc_range(r):
        t = np.linspace(-np.pi / 2 + 1e-6, np.pi / 2 - 1e-6, 2001)
        vals = op.probe(u, centre + r * np.column_stack([np.cos(t), np.sin(t)]))
        return float(vals.min()), float(vals.max())

    a, b = arc_range(rho0), arc_range(rho1)
    grid = np.linspace(-p.mbar, p.mbar, 4001)
    d = float(np.max(np.abs(p.dw(grid))))
    lower = barrier(rho0, rho1, a[0], b[0], d, -1)
    upper = barrier(rho0, rho1, a[1], b[1], d, +1)

    P = mesh.nodes[mesh.triangles]
    edge = np.max(np.stack([np.linalg.norm(P[:, (k + 1) % 3] - P[:, k], axis=1) for k in range(3)]), axis=0)
    gnorm = np.linalg.norm(op.triangle_gradients(u), axis=1)
    h_loc = np.zeros(mesh.n_nodes)
    g_loc = np.zeros(mesh.n_nodes)
    for k in range(3):
        np.maximum.at(h_loc, mesh.triangles[:, k], edge)
        np.maximum.at(g_loc, mesh.triangles[:, k], gnorm)

    rel = mesh.nodes - centre
    r = np.hypot(rel[:, 0], rel[:, 1])
    sel = (rel[:, 0] >= 0) & (r >= rho0) & (r <= rho1)
    assert sel.sum() > 100
    slack = h_loc[sel] * g_loc[sel]
    assert np.all(u[sel] >= lower(r[sel]) - slack)
    assert np.all(u[sel] <= upper(r[sel]) + slack)


def test_criterion_10_normal_regime(normal_sweep):
    cfg = normal_sweep["cfg"]
    assert cfg.eps == pytest.approx([0.2 * 2.0**-k for k in range(6)])
    assert all(r.ok for r in normal_sweep["records"])
    assert_all_pass(checks_for(normal_sweep, 10))
    assert normal_sweep["elapsed"] <= 30 * 60


def test_criterion_11_critical_thin():
    res = sweep("critical")
    cfg = res["cfg"]
    assert cfg.regime.ell == pytest.approx(math.pi)
    assert m_f1f2(cfg.spec().neck) == pytest.approx(2.0)
    assert_all_pass(checks_for(res, 11))
    assert res["elapsed"] <= 45 * 60


def test_criterion_12_subcritical():
    res = sweep("subcritical")
    assert m_f1f2(res["cfg"].spec().neck) == pytest.approx(2.0)
    assert_all_pass(checks_for(res, 12))
    assert res["elapsed"] <= 20 * 60


def test_criterion_13_supercritical():
    res = sweep("supercritical")
    assert_all_pass(checks_for(res, 13))
    assert res["elapsed"] <= 30 * 60


def test_criterion_14_localization(normal_sweep):
    band = [r.c_eps_scaled for r in normal_sweep["records"] if r.ok]
    assert len(band) == 6
    assert max(band) / min(band) <= 4.0
    assert_all_pass(checks_for(normal_sweep, 14))


def test_criterion_15_limit_problems():
    t0 = time.perf_counter()
    hs = solve_limit(LimitDomain("halfstrip", R=50.0), 1.0)
    ident = slope_identity(hs)
    assert ident["flux_spread"] <= 1e-3
    assert abs(ident["ratio"] - 1.0) <= 0.1
    normal = solve_limit(LimitDomain("normal", R=50.0), 1.0)
    assert oddness_defect(normal) <= 1e-3
    assert time.perf_counter() - t0 <= 10 * 60
