import numpy as np
import pytest

from neurodob.driver import DRIVER_PROFILES
from neurodob.exceptions import DivergedState, InvalidParameters
from neurodob.road import Straight, builtin_map, generate_map
from neurodob.sim import (LOG_COLUMNS, ScenarioAssets, ScenarioConfig, SequenceCompensator, SimLog,
                          ZeroCompensator, collect_training_run, excitation_signal, replay_open_loop,
                          run_scenario)
from neurodob.vehicle import ErrorState, PlantConfig, default_perturbation


@pytest.fixture(scope="module")
def straight():
    return generate_map([Straight(1500.0)], name="straight")


@pytest.fixture(scope="module")
def map1():
    return builtin_map("map1")


def assets_for(vehicle, design, road, **kw):
    return ScenarioAssets(vehicle, design, road, DRIVER_PROFILES["smooth"], **kw)


def test_equilibrium_on_a_straight_road(vehicle, design, straight):
    log = run_scenario(ScenarioConfig("straight", "lqr", 10.0), assets_for(vehicle, design, straight))
    assert not np.any(log.states())
    assert not np.any(log.column("delta_f"))


def test_lqr_contracts_to_zero(vehicle, design, straight, rng):
    x0 = ErrorState.from_array(rng.normal(size=4) * [0.5, 0.2, 0.05, 0.05])
    log = run_scenario(ScenarioConfig("straight", "lqr", 25.0, initial_state=x0),
                       assets_for(vehicle, design, straight))
    norms = np.linalg.norm(log.states(), axis=1)
    assert norms[2000] <= 1e-6 * norms[0]
    # envelope: the running maximum over each second decreases
    per_second = norms[: 2000].reshape(20, 100).max(axis=1)
    assert np.all(np.diff(per_second) < 0)


def test_zero_compensator_reproduces_lqr_exactly(vehicle, design, map1):
    lqr = run_scenario(ScenarioConfig("map1", "lqr", 20.0, default_perturbation()),
                       assets_for(vehicle, design, map1))
    zero = run_scenario(ScenarioConfig("map1", "lqr_neurodob", 20.0, default_perturbation()),
                        assets_for(vehicle, design, map1, compensator=ZeroCompensator()))
    assert np.array_equal(lqr.states(), zero.states())
    assert np.array_equal(lqr.column("delta_f"), zero.column("delta_f"))


def test_input_channel_compensation_cancels_disturbance(vehicle, design, map1, rng):
    n = 10_000
    d = np.cumsum(rng.normal(0, 1e-4, n))
    clean = run_scenario(ScenarioConfig("map1", "lqr", 100.0), assets_for(vehicle, design, map1))
    comp = run_scenario(ScenarioConfig("map1", "lqr_neurodob", 100.0),
                        assets_for(vehicle, design, map1, compensator=SequenceCompensator(-d),
                                   input_disturbance=d))
    assert len(comp) == n
    assert np.max(np.abs(comp.states() - clean.states())) <= 1e-10


def test_same_inputs_same_log(vehicle, design, map1):
    cfg = ScenarioConfig("map1", "driver", 30.0, default_perturbation(), seed=3)
    a = run_scenario(cfg, assets_for(vehicle, design, map1))
    b = run_scenario(cfg, assets_for(vehicle, design, map1))
    assert a.to_csv() == b.to_csv()
    assert a.metadata == b.metadata


def test_replay_reproduces_the_trajectory(vehicle, design, map1):
    for plant in (PlantConfig(), default_perturbation()):
        log = run_scenario(ScenarioConfig("map1", "lqr", 30.0, plant), assets_for(vehicle, design, map1))
        replayed = replay_open_loop(log, vehicle, plant)
        assert np.max(np.abs(replayed - log.states())) <= 1e-12


def test_log_layout(vehicle, design, map1, rng):
    values = rng.uniform(-0.05, 0.05, 1000)
    log = run_scenario(ScenarioConfig("map1", "lqr_neurodob", 10.0),
                       assets_for(vehicle, design, map1, compensator=SequenceCompensator(values)))
    assert tuple(log.columns) == LOG_COLUMNS
    assert len(log) == 1000
    assert np.all(np.diff(log.column("t_s")) > 0)
    assert np.allclose(log.column("delta_f"), log.column("delta_lqr") + log.column("delta_c"), atol=0)
    assert np.array_equal(log.column("delta_c"), values)
    assert np.allclose(log.column("psi_dot_des"), vehicle.Vx * log.column("kappa"))


def test_steering_clamp_is_flagged(vehicle, design, map1):
    log = run_scenario(ScenarioConfig("map1", "lqr_neurodob", 1.0, steer_limit=0.05),
                       assets_for(vehicle, design, map1, compensator=SequenceCompensator(np.full(100, 0.1))))
    flagged = log.column("steer_clamped") == 1.0
    raw = log.column("delta_lqr") + log.column("delta_c")
    assert flagged[0]
    assert np.all(np.abs(log.column("delta_f")[flagged]) == 0.05)
    assert np.array_equal(log.column("delta_f")[~flagged], raw[~flagged])
    assert log.metadata["steer_clamped_rows"] == int(flagged.sum())


def test_collection_labels_vary(vehicle, design, map1):
    log = collect_training_run(map1, "smooth", default_perturbation(), assets_for(vehicle, design, map1),
                               100.0, seed=1, excitation_std=0.01)
    labels = log.column("delta_d") - log.column("delta_lqr")
    assert np.var(labels) > 0
    # the driver steers: applied command is the driver's own, the LQR is only logged
    assert np.array_equal(log.column("delta_f"), log.column("delta_d"))
    assert log.metadata["stack"] == "driver"


def test_excitation_statistics():
    x = excitation_signal(200_000, 0.01, 0.3, 0.01, np.random.default_rng(0))
    assert np.std(x[5000:]) == pytest.approx(0.01, rel=0.05)
    lag = int(0.3 / 0.01)
    r = np.corrcoef(x[5000:-lag], x[5000 + lag:])[0, 1]
    assert r == pytest.approx(np.exp(-1.0), abs=0.05)


def test_map_too_short(vehicle, design):
    road = generate_map([Straight(100.0)])
    with pytest.raises(InvalidParameters):
        run_scenario(ScenarioConfig("custom", "lqr", 100.0), assets_for(vehicle, design, road))


def test_divergence_keeps_partial_log(vehicle, design, map1):
    push = SequenceCompensator(np.full(10_000, 0.1))
    with pytest.raises(DivergedState) as info:
        run_scenario(ScenarioConfig("map1", "lqr_neurodob", 100.0, steer_limit=10.0),
                     ScenarioAssets(vehicle, design, map1, DRIVER_PROFILES["smooth"], compensator=push,
                                    input_disturbance=np.full(10_000, 5.0)))
    partial = info.value.log
    assert isinstance(partial, SimLog)
    assert partial.diverged and 0 < len(partial) < 10_000


def test_stack_requirements(vehicle, design, map1):
    with pytest.raises(InvalidParameters):
        run_scenario(ScenarioConfig("map1", "lqr_neurodob", 1.0), assets_for(vehicle, design, map1))
    with pytest.raises(InvalidParameters):
        ScenarioConfig("map1", "mpc")


def test_csv_and_sidecar(tmp_path, vehicle, design, map1):
    log = run_scenario(ScenarioConfig("map1", "lqr", 1.0), assets_for(vehicle, design, map1))
    path = tmp_path / "run.csv"
    log.save(path)
    header = path.read_text().splitlines()[0].split(",")
    assert header[:7] == ["t_s", "e_y", "e_y_dot", "e_psi", "e_psi_dot", "delta_lqr", "delta_d"]
    assert path.with_suffix(".meta.json").exists()
