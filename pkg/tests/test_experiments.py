import numpy as np
import pytest

from tcca import experiments as ex


def test_figure3_grid_matches_protocol():
    cfg = ex.Figure3Config()
    assert cfg.ns == (50, 100, 300, 700, 1000, 1500)
    assert cfg.lambdas == (0.8, 0.5, 0.2)
    assert ex.SUCCESS_TOL == 0.01
    assert cfg.restarts == 15 and cfg.trials == 100
    assert ex.DEFAULT_DIMS == (20, 15, 15, 20)


def test_figure2_rho_columns_identical():
    rows = ex.figure2(ex.Figure2Config(inits=3, max_sweeps=100, seed=4))
    assert {r["init"] for r in rows} == {0, 1, 2}
    for r in rows:
        if np.isfinite(r["rho_hopm"]) and np.isfinite(r["rho_shopm"]):
            assert abs(r["rho_hopm"] - r["rho_shopm"]) <= 1e-8
    # the stopping sweep may differ: diff is measured on differently scaled factors
    assert sum(np.isfinite(r["rho_hopm"]) and np.isfinite(r["rho_shopm"]) for r in rows) >= 3


def test_figure3_cell_deterministic():
    cfg = ex.Figure3Config(trials=2, restarts=3, max_sweeps=200)
    a = ex.figure3_cell(cfg, 50, 0.5, 4)
    b = ex.figure3_cell(cfg, 50, 0.5, 4)
    assert a == b
    assert set(a) == {"n", "lambda", "trials", "success_effective", "error_effective",
                      "success_random", "error_random"}


def test_figure3_trial_rho_max_bounds():
    cfg = ex.Figure3Config(restarts=4, max_sweeps=300)
    res = ex.figure3_trial(cfg, 100, 0.8, 9)
    for name in ("effective", "random"):
        rho, ok, err = res[name]
        assert rho <= res["rho_max"] + 1e-15
        assert ok == (abs(rho - res["rho_max"]) <= 0.01)
        assert err >= 0


def test_figure3_cell_subset():
    cfg = ex.Figure3Config(ns=(50, 100), lambdas=(0.5,), trials=1, restarts=2, max_sweeps=100)
    rows = ex.figure3(cfg, cells=[(100, 0.5)])
    assert [(r["n"], r["lambda"]) for r in rows] == [(100, 0.5)]


def test_success_trend_easy_vs_hard():
    cfg = ex.Figure3Config(trials=10, restarts=15)
    easy = ex.figure3_cell(cfg, 1500, 0.8, 17)
    hard = ex.figure3_cell(cfg, 50, 0.2, 12)
    assert easy["success_effective"] >= hard["success_random"]
    assert easy["error_effective"] < hard["error_random"]


def test_inexact_scaling_rows():
    cfg = ex.InexactScalingConfig(sweeps=5, eps=(1e-4, 1e-8))
    rows = ex.inexact_scaling(cfg)
    assert [r["eps"] for r in rows] == [1e-4, 1e-8]
    assert all(r["sweeps"] == 5 for r in rows)
    assert rows[1]["deviation"] < rows[0]["deviation"]
    assert ex.inexact_scaling(cfg) == rows


def test_loglog_slope():
    assert ex.loglog_slope([1e-2, 1e-4, 1e-6], [1e-1, 1e-2, 1e-3]) == pytest.approx(0.5)
