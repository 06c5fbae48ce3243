import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neurodob.config import parse_config
from neurodob.evaluation import (CaseSpec, RmseReport, case_spec, emit_plots, percent_change, rmse, run_case,
                                 validate)
from neurodob.exceptions import EmptyDataset, InvalidParameters, LengthMismatch
from neurodob.road import builtin_map


def test_rmse_by_hand():
    assert rmse([3.0, 4.0]) == pytest.approx(3.5355339, abs=1e-7)
    assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0
    with pytest.raises(LengthMismatch):
        rmse([1.0], [1.0, 2.0])
    with pytest.raises(EmptyDataset):
        rmse([])


def test_percent_change_convention():
    assert round(percent_change(0.1096, 0.0150), 2) == 86.31
    assert percent_change(1.0, 1.5) == pytest.approx(-50.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=30), st.floats(0.1, 10))
def test_rmse_is_non_negative_and_homogeneous(values, k):
    r = rmse(values)
    assert r >= 0
    assert rmse(np.array(values) * k) == pytest.approx(k * r, rel=1e-9, abs=1e-12)


def test_report_text_and_csv():
    rep = RmseReport("t", {"lqr": {"e_y": 0.1096, "e_psi": 0.02, "delta_vs_driver": 0.01},
                           "lqr_neurodob": {"e_y": 0.0150, "e_psi": 0.02, "delta_vs_driver": 0.005}})
    assert "86.31" in rep.to_text()
    lines = rep.to_csv().splitlines()
    assert lines[0].startswith("stack,rmse_e_y,change_e_y_pct")
    row = lines[2].split(",")
    assert float(row[1]) == 0.0150
    assert float(row[2]) == pytest.approx(86.3138686, abs=1e-6)


def test_case_specs_follow_the_builtin_roles():
    assert (case_spec(1).train_map, case_spec(1).validate_map) == ("map1", "map1")
    assert (case_spec(2).train_map, case_spec(2).validate_map) == ("map1", "map2")
    assert (case_spec(3).train_map, case_spec(3).validate_map) == ("map3", "map2")
    with pytest.raises(InvalidParameters):
        case_spec(8)
    with pytest.raises(InvalidParameters):
        CaseSpec(9, "map7", "map1")


@pytest.fixture(scope="module")
def short_cfg():
    return parse_config("[sim]\nduration = 8\n[nn]\nhidden = 8, 8\nmax_epochs = 3\n")


def test_short_case_is_deterministic(short_cfg):
    a = run_case(case_spec(1, short_cfg), short_cfg, seed=3)
    b = run_case(case_spec(1, short_cfg), short_cfg, seed=3)
    assert a.report.to_csv() == b.report.to_csv()
    for stack in a.logs:
        assert a.logs[stack].to_csv() == b.logs[stack].to_csv()
    assert set(a.logs) == {"lqr", "lqr_neurodob", "lqr_dob", "driver"}


def test_plots_are_deterministic_and_conserve_counts(tmp_path, short_cfg):
    logs = validate(short_cfg, "map2", None, stacks=("lqr", "driver"))
    roads = [builtin_map("map1"), builtin_map("map2")]
    first = emit_plots(logs, tmp_path / "a", roads)
    second = emit_plots(logs, tmp_path / "b", roads)
    assert [p.name for p in first] == [p.name for p in second]
    for p, q in zip(first, second):
        assert p.read_bytes() == q.read_bytes()
    hist = (tmp_path / "a" / "curvature_histogram.csv").read_text().splitlines()
    header = hist[0].split(",")
    counts = np.array([[float(v) for v in line.split(",")] for line in hist[1:]])
    for road in roads:
        assert counts[:, header.index(road.name)].sum() == len(road)
    trace = (tmp_path / "a" / "trace_e_y.csv").read_text().splitlines()
    assert len(trace) == len(logs["lqr"]) + 1
