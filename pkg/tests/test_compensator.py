import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from neurodob.compensator import (CHECKPOINT_MAGIC, FEATURES, CompensationLimits, FeatureVector, NeuroDOB,
                                  build_dataset, final_command, format_checkpoint, format_dataset_csv,
                                  parse_checkpoint, read_dataset_csv)
from neurodob.exceptions import EmptyAfterFiltering, InvalidParameters, MisalignedLog


def synthetic_log(rng, n=400, rule=None):
    t = np.arange(n) * 0.01
    X = rng.normal(size=(n, 4)) * [0.1, 0.2, 0.02, 0.05]
    delta_lqr = -X @ np.array([0.3, 0.02, 0.9, 0.02])
    label = rule(X) if rule else rng.normal(0, 0.01, n)
    return {"t_s": t, "e_y": X[:, 0], "e_y_dot": X[:, 1], "e_psi": X[:, 2], "e_psi_dot": X[:, 3],
            "delta_lqr": delta_lqr, "delta_d": delta_lqr + label}


@pytest.fixture(scope="module")
def small_estimator():
    rng = np.random.default_rng(5)
    log = synthetic_log(rng, 600, rule=lambda X: 0.5 * X[:, 0])
    ds = build_dataset(log)
    return NeuroDOB(hidden_layer_sizes=(16, 16), max_epochs=30, random_state=1).fit_dataset(ds)


def test_labels_reconstruct_driver_steering(rng):
    log = synthetic_log(rng)
    ds = build_dataset(log)
    assert ds.dropped == 0
    assert np.array_equal(ds.labels + ds.features[:, 4], log["delta_d"])
    assert np.array_equal(ds.features, np.column_stack([log[c] for c in FEATURES]))


def test_single_spike_is_removed(rng):
    log = synthetic_log(rng, 2000)
    log["delta_d"][700] += 100 * np.std(log["delta_d"] - log["delta_lqr"])
    ds = build_dataset(log)
    assert ds.dropped == 1
    assert 0.01 * 700 not in ds.t


def test_dataset_validation(rng):
    log = synthetic_log(rng, 50)
    bad = dict(log, t_s=log["t_s"][::-1].copy())
    with pytest.raises(MisalignedLog):
        build_dataset(bad)
    short = dict(log, e_y=log["e_y"][:-1])
    with pytest.raises(MisalignedLog):
        build_dataset(short)
    with pytest.raises(MisalignedLog):
        build_dataset({k: v for k, v in log.items() if k != "delta_d"})
    empty = {k: np.zeros(0) for k in log}
    with pytest.raises(EmptyAfterFiltering):
        build_dataset(empty)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=5, max_size=5))
def test_compensation_is_bounded(small_estimator, values):
    assert abs(small_estimator.compensate(values)) <= small_estimator.epsilon1


def test_predict_clamps_and_raw_does_not(small_estimator):
    X = np.zeros((3, 5))
    X[:, 0] = [-1e3, 0.0, 1e3]
    raw = small_estimator.predict_raw(X)
    assert np.array_equal(small_estimator.predict(X), np.clip(raw, -0.1, 0.1))


def test_linear_rule_is_learned(rng):
    log = synthetic_log(rng, 3000, rule=lambda X: 0.5 * X[:, 0])
    ds = build_dataset(log)
    est = NeuroDOB(hidden_layer_sizes=(32, 32), random_state=0, max_epochs=400).fit_dataset(ds)
    tail = slice(2400, None)
    mse = np.mean((est.predict_raw(ds.features[tail]) - ds.labels[tail]) ** 2)
    assert mse <= 0.01 * np.var(ds.labels)


def test_zero_labels_give_zero_compensation(rng):
    log = synthetic_log(rng, 800, rule=lambda X: np.zeros(len(X)))
    ds = build_dataset(log)
    est = NeuroDOB(hidden_layer_sizes=(16, 16), lr=1e-2, early_stop_delta=1e-12,
                   random_state=0).fit_dataset(ds)
    assert np.max(np.abs(est.predict(ds.features))) <= 1e-3


def test_checkpoint_round_trip_is_exact(small_estimator, tmp_path, rng):
    path = tmp_path / "model.ckpt"
    small_estimator.save(path)
    loaded = NeuroDOB.load(path)
    X = rng.normal(size=(1000, 5)) * [0.2, 0.3, 0.05, 0.1, 0.05]
    assert all(small_estimator.compensate(x) == loaded.compensate(x) for x in X)
    assert path.read_text().splitlines()[0] == CHECKPOINT_MAGIC
    assert format_checkpoint(loaded.model_, loaded.standardizer_) == path.read_text()


def test_checkpoint_rejects_damage(small_estimator):
    text = format_checkpoint(small_estimator.model_, small_estimator.standardizer_)
    with pytest.raises(InvalidParameters):
        parse_checkpoint("garbage\n" + text)
    lines = text.splitlines()
    with pytest.raises(InvalidParameters):
        parse_checkpoint("\n".join(lines[:-1]) + "\n")
    lines[2] = lines[2] + " 1.0"
    with pytest.raises(InvalidParameters):
        parse_checkpoint("\n".join(lines) + "\n")


def test_same_seed_same_model():
    rng = np.random.default_rng(9)
    ds = build_dataset(synthetic_log(rng, 300))
    a = NeuroDOB(hidden_layer_sizes=(8, 8), max_epochs=10, random_state=4).fit_dataset(ds)
    b = clone(a).fit_dataset(ds)
    assert format_checkpoint(a.model_, a.standardizer_) == format_checkpoint(b.model_, b.standardizer_)


def test_estimator_params_round_trip():
    est = NeuroDOB(epsilon1=0.05, weight_decay=1e-3)
    assert clone(est).get_params() == est.get_params()
    with pytest.raises(InvalidParameters):
        NeuroDOB().fit(np.zeros((10, 3)), np.zeros(10))


def test_limits_and_features_validate():
    with pytest.raises(InvalidParameters):
        CompensationLimits(0.0)
    with pytest.raises(InvalidParameters):
        FeatureVector(0, 0, math.inf, 0, 0)


@settings(max_examples=50, deadline=None)
@given(st.floats(-1, 1), st.floats(-0.1, 0.1), st.floats(0.05, 1.0))
def test_final_command_respects_steering_limit(lqr, comp, limit):
    out = final_command(lqr, comp, limit)
    assert abs(out) <= limit
    if abs(lqr + comp) <= limit:
        assert out == lqr + comp


def test_dataset_csv_with_held_channel(tmp_path, rng):
    log = synthetic_log(rng, 20)
    text = format_dataset_csv(log)
    lines = text.splitlines()
    header = lines[0].split(",")
    j = header.index("e_y")
    rows = [line.split(",") for line in lines[1:]]
    for k in range(len(rows)):
        if k % 5:
            rows[k][j] = ""  # lane channel refreshed every fifth row only
    rows[0][header.index("delta_d")] = ""
    path = tmp_path / "ext.csv"
    path.write_text("\n".join([lines[0]] + [",".join(r) for r in rows]) + "\n")
    cols = read_dataset_csv(path)
    assert cols["t_s"].size == 19
    assert cols["e_y"][0] == log["e_y"][0]
    assert cols["e_y"][4] == log["e_y"][5]
    assert cols["e_y"][5] == log["e_y"][5]
