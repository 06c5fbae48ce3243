"""Arclength-parameterised road maps described only by curvature.

A map is built from a list of segments (straight, constant arc, clothoid
with a linear curvature ramp) and sampled at a fixed station spacing.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import CurvatureBoundExceeded, InvalidParameters, OutOfRange

MAX_ABS_CURVATURE = 0.1
MAX_CURVATURE_RATE = 0.01  # 1/m per metre of station gap
CSV_HEADER = ("station_m", "curvature_inv_m")


@dataclass(frozen=True)
class Straight:
    length: float

    def curvature(self, s):
        return 0.0

    @property
    def extremes(self):
        return (0.0,)


@dataclass(frozen=True)
class Arc:
    length: float
    kappa: float

    def curvature(self, s):
        return self.kappa

    @property
    def extremes(self):
        return (self.kappa,)


@dataclass(frozen=True)
class Clothoid:
    length: float
    kappa_start: float
    kappa_end: float

    def curvature(self, s):
        return self.kappa_start + (self.kappa_end - self.kappa_start) * (s / self.length)

    @property
    def extremes(self):
        return (self.kappa_start, self.kappa_end)


@dataclass(frozen=True, eq=False)
class RoadMap:
    name: str
    stations: np.ndarray
    curvature: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.stations, dtype=float)
        k = np.asarray(self.curvature, dtype=float)
        if s.ndim != 1 or s.shape != k.shape or s.size < 2:
            raise InvalidParameters("stations and curvature must be 1-D arrays of equal length >= 2")
        if s[0] != 0.0 or np.any(np.diff(s) <= 0.0):
            raise InvalidParameters("stations must start at 0 and increase strictly")
        if not np.all(np.isfinite(k)):
            raise InvalidParameters("curvature must be finite")
        if np.max(np.abs(k)) > MAX_ABS_CURVATURE:
            raise CurvatureBoundExceeded(f"|kappa| exceeds {MAX_ABS_CURVATURE} 1/m on map {self.name!r}")
        if np.any(np.abs(np.diff(k)) >= MAX_CURVATURE_RATE * np.diff(s)):
            raise InvalidParameters(f"curvature jump on map {self.name!r}; insert a clothoid")
        s.setflags(write=False)
        k.setflags(write=False)
        object.__setattr__(self, "stations", s)
        object.__setattr__(self, "curvature", k)

    @property
    def total_length(self):
        return float(self.stations[-1])

    @property
    def max_abs_curvature(self):
        return float(np.max(np.abs(self.curvature)))

    def __len__(self):
        return self.stations.size

    def xy(self):
        """Cartesian centreline obtained by integrating heading (for plots only)."""
        ds = np.diff(self.stations)
        k_mid = 0.5 * (self.curvature[1:] + self.curvature[:-1])
        heading = np.concatenate([[0.0], np.cumsum(k_mid * ds)])
        h_mid = 0.5 * (heading[1:] + heading[:-1])
        x = np.concatenate([[0.0], np.cumsum(np.cos(h_mid) * ds)])
        y = np.concatenate([[0.0], np.cumsum(np.sin(h_mid) * ds)])
        return x, y


def generate_map(segments, sample_spacing=1.0, name="custom"):
    if not segments:
        raise InvalidParameters("at least one segment is required")
    if not sample_spacing > 0.0:
        raise InvalidParameters("sample_spacing must be > 0")
    for seg in segments:
        if not seg.length > 0.0:
            raise InvalidParameters(f"segment length must be > 0: {seg}")
        if any(abs(k) > MAX_ABS_CURVATURE for k in seg.extremes):
            raise CurvatureBoundExceeded(f"segment {seg} exceeds |kappa| <= {MAX_ABS_CURVATURE}")

    starts = np.concatenate([[0.0], np.cumsum([seg.length for seg in segments])])
    total = float(starts[-1])
    n_full = int(math.floor(total / sample_spacing + 1e-9))
    stations = [i * sample_spacing for i in range(n_full + 1)]
    if total - stations[-1] > 1e-9 * max(1.0, total):
        stations.append(total)
    stations = np.array(stations)

    idx = np.searchsorted(starts, stations, side="right") - 1
    idx = np.clip(idx, 0, len(segments) - 1)
    kappa = np.array([segments[i].curvature(s - starts[i]) for i, s in zip(idx, stations)])
    return RoadMap(name, stations, kappa)


def curvature_at(road: RoadMap, s):
    if not (-1e-9 <= s <= road.total_length + 1e-9):
        raise OutOfRange(f"station {s} outside [0, {road.total_length}] on map {road.name!r}")
    return float(np.interp(s, road.stations, road.curvature))


@dataclass(frozen=True)
class CurvatureHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray

    @property
    def bin_width(self):
        return float(self.bin_edges[1] - self.bin_edges[0])

    @property
    def support(self):
        """Closed interval spanned by the non-empty bins."""
        nz = np.flatnonzero(self.counts)
        return float(self.bin_edges[nz[0]]), float(self.bin_edges[nz[-1] + 1])

    def density(self):
        return self.counts / self.counts.sum()


def curvature_histogram(road: RoadMap, bins=50, value_range=None):
    """Uniform-width histogram of curvature over stations.

    ``value_range`` fixes the edges so two maps can share bins; by default
    the bins span the map's own ``[min kappa, max kappa]``.
    """
    if bins < 2:
        raise InvalidParameters("bins must be >= 2")
    if value_range is None:
        value_range = (float(road.curvature.min()), float(road.curvature.max()))
    counts, edges = np.histogram(road.curvature, bins=bins, range=value_range)
    return CurvatureHistogram(edges, counts)


def jensen_shannon(p, q):
    """Jensen-Shannon divergence in bits between two histograms on shared bins."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    p = p / p.sum()
    q = q / q.sum()
    m = 0.5 * (p + q)

    def kl(a, b):
        mask = a > 0
        return float(np.sum(a[mask] * np.log2(a[mask] / b[mask])))

    return 0.5 * kl(p, m) + 0.5 * kl(q, m)


def map_divergence(a: RoadMap, b: RoadMap, bins=50):
    lo = min(a.curvature.min(), b.curvature.min())
    hi = max(a.curvature.max(), b.curvature.max())
    ha = curvature_histogram(a, bins, (lo, hi))
    hb = curvature_histogram(b, bins, (lo, hi))
    return jensen_shannon(ha.counts, hb.counts)


def _turn(kappa, hold, ramp, k_from=0.0, k_to=0.0, ramp_out=None):
    """Clothoid in, constant arc, clothoid out."""
    ramp_out = ramp if ramp_out is None else ramp_out
    return [Clothoid(ramp, k_from, kappa), Arc(hold, kappa), Clothoid(ramp_out, kappa, k_to)]


def _map1_segments():
    # Wide curvature range dominated by long right-hand arcs; left-hand
    # curvature appears mostly in short excursions and S-bend entries.
    segs = [Straight(30.0)]
    segs += _turn(-0.030, 70.0, 40.0)
    segs += [Straight(20.0)]
    segs += [Clothoid(30.0, 0.0, 0.035), Arc(10.0, 0.035), Clothoid(45.0, 0.035, -0.025),
             Arc(60.0, -0.025), Clothoid(40.0, -0.025, 0.0)]
    segs += [Straight(20.0)]
    segs += _turn(-0.012, 60.0, 30.0)
    segs += [Straight(15.0)]
    segs += _turn(-0.035, 55.0, 45.0)
    segs += [Straight(20.0)]
    segs += [Clothoid(30.0, 0.0, 0.030), Arc(10.0, 0.030), Clothoid(45.0, 0.030, -0.020),
             Arc(60.0, -0.020), Clothoid(35.0, -0.020, 0.0)]
    segs += [Straight(20.0)]
    segs += _turn(0.008, 60.0, 25.0)
    segs += [Straight(15.0)]
    segs += _turn(-0.028, 60.0, 40.0)
    segs += [Straight(15.0)]
    segs += _turn(0.025, 15.0, 35.0)
    segs += [Straight(20.0)]
    segs += _turn(-0.016, 70.0, 35.0)
    segs += [Straight(60.0)]
    return segs


def _map2_segments():
    # Narrow curvature range concentrated on a few long, steady arcs.
    segs = [Straight(60.0)]
    segs += _turn(0.018, 120.0, 30.0)
    segs += [Straight(80.0)]
    segs += _turn(-0.016, 130.0, 30.0)
    segs += [Straight(70.0)]
    segs += _turn(0.020, 110.0, 30.0)
    segs += [Straight(90.0)]
    segs += _turn(-0.018, 120.0, 30.0)
    segs += [Straight(70.0)]
    segs += _turn(0.017, 120.0, 30.0)
    segs += [Straight(210.0)]
    return segs


def _map3_segments():
    # Close relative of map2: the same arc curvatures, different lengths and order.
    segs = [Straight(50.0)]
    segs += _turn(-0.016, 110.0, 28.0)
    segs += [Straight(90.0)]
    segs += _turn(0.018, 125.0, 32.0)
    segs += [Straight(60.0)]
    segs += _turn(-0.018, 115.0, 30.0)
    segs += [Straight(80.0)]
    segs += _turn(0.017, 130.0, 28.0)
    segs += [Straight(75.0)]
    segs += _turn(0.020, 100.0, 30.0)
    segs += [Straight(80.0)]
    segs += _turn(-0.016, 40.0, 25.0)
    segs += [Straight(60.0)]
    return segs


BUILTIN_SEGMENTS = {
    "map1": _map1_segments,
    "map2": _map2_segments,
    "map3": _map3_segments,
}


def builtin_maps(sample_spacing=1.0):
    return {name: generate_map(fn(), sample_spacing, name) for name, fn in BUILTIN_SEGMENTS.items()}


def builtin_map(name, sample_spacing=1.0):
    try:
        fn = BUILTIN_SEGMENTS[name]
    except KeyError:
        raise InvalidParameters(f"unknown builtin map {name!r}; choose from {sorted(BUILTIN_SEGMENTS)}") from None
    return generate_map(fn(), sample_spacing, name)


def format_map_csv(road: RoadMap):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for s, k in zip(road.stations, road.curvature):
        writer.writerow((repr(float(s)), repr(float(k))))
    return buf.getvalue()


def save_map_csv(road: RoadMap, path):
    Path(path).write_text(format_map_csv(road), encoding="utf-8", newline="\n")


def load_map_csv(path, name=None):
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != CSV_HEADER:
            raise InvalidParameters(f"{path}: expected header {','.join(CSV_HEADER)}")
        rows = [(float(a), float(b)) for a, b in reader]
    data = np.array(rows, dtype=float).reshape(-1, 2)
    return RoadMap(name or path.stem, data[:, 0], data[:, 1])
