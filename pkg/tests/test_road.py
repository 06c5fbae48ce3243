import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neurodob.exceptions import CurvatureBoundExceeded, InvalidParameters, OutOfRange
from neurodob.road import (Arc, Clothoid, RoadMap, Straight, builtin_map, builtin_maps, curvature_at,
                           curvature_histogram, generate_map, jensen_shannon, load_map_csv,
                           map_divergence, save_map_csv)
from neurodob.sim import required_length
from neurodob.driver import DRIVER_PROFILES

kappas = st.floats(-0.08, 0.08, allow_nan=False)


@st.composite
def segment_lists(draw):
    """Chains of segments whose curvature is continuous at every joint."""
    segs = []
    k = 0.0
    for _ in range(draw(st.integers(1, 6))):
        kind = draw(st.sampled_from(["straight", "arc", "clothoid"]))
        length = draw(st.floats(5.0, 80.0))
        if kind == "clothoid":
            k_next = draw(kappas)
            length = max(length, abs(k_next - k) / 0.005 + 1.0)
            segs.append(Clothoid(length, k, k_next))
            k = k_next
        elif kind == "arc" and k != 0.0:
            segs.append(Arc(length, k))
        else:
            if k != 0.0:
                segs.append(Clothoid(max(length, abs(k) / 0.005 + 1.0), k, 0.0))
                k = 0.0
            segs.append(Straight(length))
    return segs


@settings(max_examples=40, deadline=None)
@given(segment_lists(), st.sampled_from([0.5, 1.0, 2.0]), st.integers(2, 80))
def test_histogram_conserves_mass(segs, spacing, bins):
    road = generate_map(segs, spacing)
    h = curvature_histogram(road, bins)
    assert h.counts.sum() == len(road)
    assert np.allclose(np.diff(h.bin_edges), h.bin_width)


@settings(max_examples=25, deadline=None)
@given(segment_lists(), st.sampled_from([0.5, 1.0]))
def test_generation_is_deterministic(segs, spacing):
    a = generate_map(segs, spacing)
    b = generate_map(segs, spacing)
    assert np.array_equal(a.curvature, b.curvature)
    assert np.array_equal(a.stations, b.stations)
    assert a.stations[0] == 0.0
    assert a.total_length == pytest.approx(sum(s.length for s in segs))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 100), min_size=3, max_size=12),
       st.lists(st.floats(0, 100), min_size=3, max_size=12))
def test_jensen_shannon_is_bounded_and_symmetric(p, q):
    n = min(len(p), len(q))
    p, q = np.array(p[:n]) + 1e-3, np.array(q[:n]) + 1e-3
    d = jensen_shannon(p, q)
    assert -1e-12 <= d <= 1.0 + 1e-12
    assert d == pytest.approx(jensen_shannon(q, p), abs=1e-12)
    assert jensen_shannon(p, p) == pytest.approx(0.0, abs=1e-12)


def test_disjoint_histograms_have_one_bit():
    assert jensen_shannon([1, 0], [0, 1]) == pytest.approx(1.0)


def test_builtin_map_relationships():
    maps = builtin_maps()
    assert set(maps) == {"map1", "map2", "map3"}
    lo1, hi1 = curvature_histogram(maps["map1"]).support
    lo2, hi2 = curvature_histogram(maps["map2"]).support
    assert lo1 <= lo2 and hi2 <= hi1
    assert map_divergence(maps["map3"], maps["map2"]) < map_divergence(maps["map1"], maps["map2"])


def test_builtin_maps_cover_a_hundred_second_drive(vehicle):
    need = required_length(vehicle, 100.0, max(d.preview_time for d in DRIVER_PROFILES.values()))
    for road in builtin_maps().values():
        assert road.total_length >= need


def test_curvature_bound():
    with pytest.raises(CurvatureBoundExceeded):
        generate_map([Arc(10.0, 0.2)])


def test_curvature_jump_is_rejected():
    with pytest.raises(InvalidParameters):
        generate_map([Straight(10.0), Arc(10.0, 0.05)])


def test_invalid_inputs():
    with pytest.raises(InvalidParameters):
        generate_map([])
    with pytest.raises(InvalidParameters):
        generate_map([Straight(-1.0)])
    with pytest.raises(InvalidParameters):
        RoadMap("x", np.array([0.0, 0.0]), np.zeros(2))


def test_lookup_interpolates_and_checks_range():
    road = generate_map([Clothoid(10.0, 0.0, 0.01)])
    assert curvature_at(road, 5.5) == pytest.approx(0.0055)
    with pytest.raises(OutOfRange):
        curvature_at(road, 10.5)


def test_map_csv_round_trip(tmp_path):
    road = builtin_map("map2")
    path = tmp_path / "map2.csv"
    save_map_csv(road, path)
    back = load_map_csv(path)
    assert np.array_equal(back.curvature, road.curvature)
    assert np.array_equal(back.stations, road.stations)
    assert path.read_text().splitlines()[0] == "station_m,curvature_inv_m"


def test_constant_arc_heading():
    road = generate_map([Clothoid(20.0, 0.0, 0.02), Arc(100.0, 0.02), Clothoid(20.0, 0.02, 0.0)])
    x, y = road.xy()
    heading = np.arctan2(y[-1] - y[-2], x[-1] - x[-2])
    assert heading == pytest.approx(0.2 + 0.2 + 2.0, abs=1e-3)
