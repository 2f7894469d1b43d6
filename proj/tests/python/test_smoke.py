import json
import math
import os
from pathlib import Path

import numpy as np
import pytest

import inpipe_nav as nav

SCENARIOS = Path(os.environ.get("INPIPE_SCENARIO_DIR", Path(__file__).resolve().parents[2] / "scenarios"))

MAP = {"version": 1, "segments": [{"length_m": 3.0, "diameter_m": 0.3556}], "ct": []}


def scenario(**extra):
    doc = {"version": 1, "map": MAP, "duration_s": 3.0}
    doc.update(extra)
    return nav.parse_scenario(json.dumps(doc))


def test_map_queries():
    m = nav.parse_map(json.dumps({
        "version": 1,
        "segments": [{"length_m": 2.0, "diameter_m": 0.3}, {"length_m": 1.5, "diameter_m": 0.3}],
        "ct": [{"kind": "bend", "desired_exit": "left", "desired_rotation_rad": 1.0}],
    }))
    assert m.route_length == 3.5
    assert m.locate(2.0) == (1, 0.0)
    assert m.distance_to_next_feature(0.5) == pytest.approx(1.5)
    assert m.junction_position(0) == 2.0


def test_schema_errors_surface_as_exceptions():
    with pytest.raises(nav.Error):
        nav.parse_map('{"version": 1, "segments": [], "ct": [], "extra": 1}')
    with pytest.raises(nav.Error):
        scenario(dt_s=0.5)


def test_run_returns_summary_and_columns():
    out = nav.run_scenario(scenario())
    trace = out["trace"]
    n = out["summary"]["ticks"]
    assert len(trace["t"]) == n == len(trace["mode"])
    assert np.all(np.diff(trace["t"]) > 0)
    assert set(trace["mode"]) <= {"cruise", "steer", "stop"}
    assert trace["x"][-1] > 0.0


def test_runs_are_reproducible(tmp_path):
    sc = scenario()
    a = nav.simulate(sc, tmp_path / "a.csv")
    b = nav.simulate(sc, tmp_path / "b.csv")
    assert a == b
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    back = nav.read_trace(tmp_path / "a.csv")
    assert len(back["t"]) == a["ticks"]


def test_fig3_settles():
    sc = nav.load_scenario(SCENARIOS / "fig3.json")
    summary = nav.replicate_fig3(sc)["summary"]
    assert summary["settled_s"] <= 2.0


def test_monte_carlo_and_describe():
    sc = scenario(duration_s=40.0)
    res = nav.monte_carlo(sc, trials=2, seed_base=5)
    assert res["trials"] == 2 and res["failures"] == []
    assert [r["seed"] for r in res["runs"]] == [5, 6]
    stats = nav.describe([1.0, 2.0, 3.0])
    assert stats["mean"] == 2.0 and stats["std"] == 1.0


def test_lqr_design_is_stabilising():
    d = nav.design_lqr()
    acl = d["A"] - d["B"] @ d["K"]
    assert np.all(np.linalg.eigvals(acl).real < 0)
    assert d["residual"] < 1e-9
    assert np.allclose(d["P"], d["P"].T)
    assert math.isfinite(d["K"].sum())
