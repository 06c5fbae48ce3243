import numpy as np
import pytest

from neurodob.driver import (DRIVER_PROFILES, DriverParams, driver_command, driver_profile, feedforward_steer,
                             steady_yaw_error)
from neurodob.exceptions import InvalidParameters
from neurodob.lqr import LqrWeights, solve_dare
from neurodob.road import Arc, Clothoid, Straight, builtin_maps, generate_map
from neurodob.sim import ScenarioAssets, ScenarioConfig, run_scenario
from neurodob.vehicle import PlantConfig, build_continuous, discrete_model


def bicycle_steady_steer(kappa, p):
    """Steady-state front steering of the bicycle model: L*kappa plus the slip-angle difference."""
    R = 1.0 / kappa
    Fyf = p.m * p.Vx ** 2 / R * p.lr / (p.lf + p.lr)
    Fyr = p.m * p.Vx ** 2 / R * p.lf / (p.lf + p.lr)
    return (p.lf + p.lr) / R + Fyf / (2 * p.Caf) - Fyr / (2 * p.Car)


def equilibrium(kappa, p):
    """Solve A x + B delta + B2 Vx kappa = 0 with e_y = e_y_dot = e_psi_dot = 0 for (e_psi, delta)."""
    cm = build_continuous(p)
    M = np.column_stack([cm.A[[1, 3], 2], cm.B[[1, 3], 0]])
    rhs = -cm.B2[[1, 3], 0] * p.Vx * kappa
    e_psi, delta = np.linalg.solve(M, rhs)
    return e_psi, delta


@pytest.mark.parametrize("kappa", [0.01, -0.02, 0.05])
def test_settled_output_on_an_arc_is_the_feedforward(vehicle, kappa):
    road = generate_map([Clothoid(20.0, 0.0, kappa), Arc(500.0, kappa)])
    params = DRIVER_PROFILES["smooth"]
    e_psi_ss, delta_ss = equilibrium(kappa, vehicle)
    assert steady_yaw_error(kappa, vehicle) == pytest.approx(e_psi_ss, rel=1e-10)
    assert feedforward_steer(kappa, vehicle) == pytest.approx(delta_ss, rel=1e-10)
    assert delta_ss == pytest.approx(bicycle_steady_steer(kappa, vehicle), rel=1e-10)
    x = np.array([0.0, 0.0, e_psi_ss, 0.0])  # the cornering equilibrium
    state = None
    for _ in range(2000):
        delta, state = driver_command(params, x, road, 300.0, vehicle.Vx, vehicle, state)
    assert delta == pytest.approx(delta_ss, rel=1e-9)


def first_crossing(params, vehicle, road, threshold=0.01):
    state = None
    n = int(road.total_length / vehicle.Vx / vehicle.Ts) - 1
    for k in range(n):
        delta, state = driver_command(params, np.zeros(4), road, vehicle.Vx * vehicle.Ts * k, vehicle.Vx,
                                      vehicle, state)
        if abs(delta) > threshold:
            return k
    return None


def test_preview_steers_earlier(vehicle):
    road = generate_map([Straight(60.0), Clothoid(20.0, 0.0, 0.03), Arc(80.0, 0.03)])
    with_preview = first_crossing(DriverParams(preview_time=0.5), vehicle, road)
    without = first_crossing(DriverParams(preview_time=0.0), vehicle, road)
    assert with_preview is not None and without is not None
    assert with_preview < without


def test_driver_stays_in_lane_on_every_map(vehicle):
    model = discrete_model(vehicle)
    design = solve_dare(model, LqrWeights.diagonal())
    for name, road in builtin_maps().items():
        for profile in DRIVER_PROFILES:
            log = run_scenario(ScenarioConfig(name, "driver", 100.0, PlantConfig(), profile),
                               ScenarioAssets(vehicle, design, road, DRIVER_PROFILES[profile]))
            assert np.max(np.abs(log.column("e_y"))) < 0.5, (name, profile)


def test_profiles_are_distinct():
    smooth, aggressive = DRIVER_PROFILES["smooth"], DRIVER_PROFILES["aggressive"]
    assert smooth.preview_time > aggressive.preview_time
    assert smooth.smoothing_tau > aggressive.smoothing_tau
    assert aggressive.feedback_gain_ey > smooth.feedback_gain_ey


def test_profile_lookup_and_validation():
    assert driver_profile("smooth", preview_time=0.2).preview_time == 0.2
    with pytest.raises(InvalidParameters):
        driver_profile("sleepy")
    with pytest.raises(InvalidParameters):
        DriverParams(smoothing_tau=-0.1)


def test_deterministic(vehicle):
    road = builtin_maps()["map2"]
    a = [driver_command(DriverParams(), np.full(4, 0.01), road, s, vehicle.Vx, vehicle, 0.0) for s in range(0, 900, 7)]
    b = [driver_command(DriverParams(), np.full(4, 0.01), road, s, vehicle.Vx, vehicle, 0.0) for s in range(0, 900, 7)]
    assert a == b
