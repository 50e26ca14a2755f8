import csv
import json
import math

import numpy as np
import pytest

from dumbbell.errors import FitError, PreconditionError, SweepError
from dumbbell.geometry import NORMAL, SUBCRITICAL, NeckProfile, Regime
from dumbbell.harness import (
    RECORD_COLUMNS, SweepConfig, SweepRecord, compare_profiles, emit_report, evaluate, fit_log_extrapolation,
    run_sweep,
)
from dumbbell.limits import LimitDomain, solve_limit
from dumbbell.minimize import SeedSpec, solve_critical_point

GRID = [0.2 * 2.0**-k for k in range(6)]


def base(**over):
    cfg = {
        "name": "t",
        "geometry": {"width": 2.0, "height": 2.0, "f1": 0.5, "f2": 0.5},
        "potential": {"name": "quartic"},
        "seed": {"alpha": -1.0, "beta": 1.0},
        "family": {"kind": "power", "c": 1.0, "exponent": 1.0},
        "sweep": {"eps": [0.1]},
        "mesh": {"h_bulk": 0.1},
    }
    for k, v in over.items():
        cfg[k] = v
    return SweepConfig.from_dict(cfg)


def synthetic(values, eps=GRID):
    out = []
    for e, v in zip(eps, values(np.array(eps))):
        r = SweepRecord(e, e, abs(math.log(e)), abs(math.log(e)), abs(math.log(e)))
        r.G = float(v)
        out.append(r)
    return out


def test_fit_exact_model():
    recs = synthetic(lambda e: math.pi + 1.0 / np.abs(np.log(e)))
    C, D, diag = fit_log_extrapolation(recs, "G", Regime(NORMAL, 1.0))
    assert C == pytest.approx(math.pi, abs=1e-10)
    assert D == pytest.approx(1.0, abs=1e-10)
    assert diag.max_abs_residual <= 1e-12


def test_fit_model_error_quantified():
    recs = synthetic(lambda e: math.pi + 1.0 / np.abs(np.log(e)) + 1.0 / np.log(e) ** 2)
    C, _, diag = fit_log_extrapolation(recs, "G", Regime(NORMAL, 1.0))
    assert abs(C - math.pi) <= 0.05
    assert diag.rms > 0


def test_fit_matches_least_squares_projection():
    recs = synthetic(lambda e: math.pi + 1.0 / np.abs(np.log(e)) + 1.0 / np.log(e) ** 2)
    x = 1.0 / np.abs(np.log(GRID))
    A = np.column_stack([np.ones_like(x), x])
    bias = np.linalg.lstsq(A, x**2, rcond=None)[0]
    C, D, _ = fit_log_extrapolation(recs, "G", Regime(NORMAL, 1.0))
    assert C == pytest.approx(math.pi + bias[0], abs=1e-12)
    assert D == pytest.approx(1.0 + bias[1], abs=1e-12)


def test_fit_needs_three_records():
    with pytest.raises(FitError):
        fit_log_extrapolation(synthetic(lambda e: e)[:2], "G")


def test_fit_rank_deficient():
    recs = synthetic(lambda e: e, eps=[0.1, 0.1 * (1 - 1e-15), 0.1 * (1 - 2e-15)])
    with pytest.raises(FitError):
        fit_log_extrapolation(recs, "G", Regime(NORMAL, 1.0))


def test_config_validation():
    with pytest.raises(PreconditionError):
        base(sweep={"eps": [0.05, 0.1]})
    with pytest.raises(PreconditionError):
        base(sweep={"eps": [0.9]})


def test_default_grid():
    cfg = SweepConfig.from_dict({"name": "g"})
    assert cfg.eps == pytest.approx(GRID)


def test_single_eps_record(tmp_path):
    cfg = base()
    recs = run_sweep(cfg)
    assert len(recs) == 1 and recs[0].ok
    r = recs[0]
    assert r.recomputed_G() == pytest.approx(r.G, abs=1e-12)
    assert r.scale == pytest.approx(abs(math.log(0.1)))


def test_equal_seeds_give_constants():
    cfg = base(seed={"alpha": 1.0, "beta": 1.0}, sweep={"eps": [0.1, 0.05]})
    for r in run_sweep(cfg):
        assert abs(r.excess) <= 1e-12
        assert r.u_center == 1.0 and r.u_left_port == 1.0


def test_failures_are_recorded():
    cfg = base(sweep={"eps": [0.1, 0.002]}, mesh={"h_bulk": 0.1, "node_budget": 4000})
    recs = run_sweep(cfg)
    assert recs[0].ok
    assert recs[1].status.startswith("failed")
    with pytest.raises(SweepError):
        run_sweep(base(mesh={"h_bulk": 0.1, "node_budget": 10}))


def test_report_files(tmp_path):
    cfg = base(sweep={"eps": [0.1, 0.07, 0.05]})
    recs = run_sweep(cfg)
    fits, checks = evaluate(cfg, recs)
    paths = emit_report(recs, fits, cfg.targets(), tmp_path, checks)
    rows = list(csv.reader(open(paths["records"])))
    assert rows[0] == RECORD_COLUMNS
    assert len(rows) == 4
    assert float(rows[1][0]) == 0.1
    payload = json.loads(paths["fits"].read_text())
    assert payload["targets"]["constants"]["total_excess"] == pytest.approx(math.pi)
    assert {c["criterion"] for c in payload["checks"]} == {10, 14, "invariant"}
    assert "criterion 10" in paths["summary"].read_text()


def test_report_empty_and_single(tmp_path):
    p = emit_report([], {}, None, tmp_path / "empty")
    assert open(p["records"]).read().strip() == ",".join(RECORD_COLUMNS)
    assert "zero rows" in p["summary"].read_text()
    r = SweepRecord(0.1, 0.1, 2.3, 2.3, 2.3, G=1.0)
    p = emit_report([r], {}, None, tmp_path / "one")
    assert len(open(p["records"]).read().strip().splitlines()) == 2
    assert "insufficient" in json.loads(p["fits"].read_text())["fits"]["note"]


def test_report_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        emit_report([], {}, None, blocker / "sub")


def test_float_serialisation_round_trips():
    r = SweepRecord(0.1, 0.1, 1 / 3, 2 / 3, math.pi, G=math.e)
    row = dict(zip(RECORD_COLUMNS, r.row()))
    assert float(row["G"]) == math.e and float(row["ln_eps"]) == 1 / 3


def test_records_reproducible(tmp_path):
    cfg = base(sweep={"eps": [0.1, 0.05]})
    outs = []
    for k in range(2):
        recs = run_sweep(cfg)
        p = emit_report(recs, {}, cfg.targets(), tmp_path / str(k))
        rows = list(csv.reader(open(p["records"])))
        outs.append([row[:-1] for row in rows])
    assert outs[0] == outs[1]
    assert RECORD_COLUMNS[-1] == "wall_clock"


def test_hash_names_run_dir():
    a, b = base(), base(sweep={"eps": [0.09]})
    assert a.hash() == base().hash()
    assert a.hash() != b.hash()


def test_compare_normal_profile_odd(small_dumbbell, qw):
    _, _, op = small_dumbbell
    rep = solve_critical_point(op, qw, SeedSpec(-1.0, 1.0))
    lim = solve_limit(LimitDomain("normal", R=20.0, ell=1.0, neck=NeckProfile.constant(0.5)), 1.0)
    cmp = compare_profiles(op, rep.field, Regime(NORMAL, 1.0), limit=lim, radius=3.0)
    assert cmp["oddness"] <= 1e-3
    assert np.isfinite(cmp["grad_L2_relative"])


def test_compare_thin_profile():
    cfg = base(family={"kind": "power", "c": 1.0, "exponent": 2.0}, sweep={"eps": [0.2, 0.1]})
    recs = run_sweep(cfg)
    errs = [r.neck_profile_L2 for r in recs]
    assert all(np.isfinite(errs))
    assert errs[1] < errs[0]


def test_compare_thin_needs_ports(small_dumbbell, qw):
    _, mesh, op = small_dumbbell
    with pytest.raises(PreconditionError):
        compare_profiles(op, op.field(np.zeros(mesh.n_nodes)), Regime(SUBCRITICAL))


def test_normal_sweep_excess_decreasing():
    from pathlib import Path

    from dumbbell import config as cfgmod

    cfg = SweepConfig.from_dict(cfgmod.load_config(Path(__file__).resolve().parents[1] / "configs" / "normal.toml"))
    G = [r.G for r in run_sweep(cfg)]
    assert all(b < a for a, b in zip(G, G[1:])), f"G along the default grid: {G}"
