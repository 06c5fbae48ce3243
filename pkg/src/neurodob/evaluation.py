"""Case runner, RMSE reports and figure export."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from .compensator import NeuroDOB, build_dataset
from .config import AppConfig
from .dob import DobDesign
from .exceptions import EmptyDataset, InvalidParameters, LengthMismatch
from .lqr import solve_dare
from .road import BUILTIN_SEGMENTS, builtin_map, curvature_histogram
from .sim import ScenarioAssets, ScenarioConfig, collect_training_run, run_scenario
from .vehicle import PlantConfig, discrete_model

REPORT_STACKS = ("lqr", "lqr_neurodob", "lqr_dob", "driver")
BASELINE = "lqr"


def rmse(series, reference=None):
    """Root mean square of ``series - reference`` (``reference`` defaults to zero)."""
    a = np.asarray(series, dtype=float).ravel()
    b = np.zeros_like(a) if reference is None else np.asarray(reference, dtype=float).ravel()
    if a.size != b.size:
        raise LengthMismatch(f"series of length {a.size} vs reference of length {b.size}")
    if a.size == 0:
        raise EmptyDataset("rmse of an empty series")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def percent_change(base, new):
    """Reduction relative to ``base`` in percent; positive means ``new`` is smaller."""
    if base == 0:
        return 0.0 if new == 0 else -math.inf
    return (base - new) / base * 100.0


@dataclass
class RmseReport:
    """Per-stack RMSE of ``e_y``, ``e_psi`` and steering versus the driver's."""

    title: str
    values: Dict[str, Dict[str, float]] = field(default_factory=dict)
    baseline: str = BASELINE

    SIGNALS = ("e_y", "e_psi", "delta_vs_driver")

    @classmethod
    def from_logs(cls, title, logs, baseline=BASELINE):
        values = {}
        for stack, log in logs.items():
            values[stack] = {
                "e_y": rmse(log.column("e_y")),
                "e_psi": rmse(log.column("e_psi")),
                "delta_vs_driver": rmse(log.column("delta_f"), log.column("delta_d")),
            }
        return cls(title, values, baseline)

    def change(self, stack, signal="e_y"):
        """Percent reduction of ``signal`` for ``stack`` against the baseline."""
        return percent_change(self.values[self.baseline][signal], self.values[stack][signal])

    def rows(self):
        for stack in self.values:
            row = [stack]
            for sig in self.SIGNALS:
                row.append(self.values[stack][sig])
                row.append(None if stack == self.baseline else self.change(stack, sig))
            yield row

    def header(self):
        cols = ["stack"]
        for sig in self.SIGNALS:
            cols += [f"rmse_{sig}", f"change_{sig}_pct"]
        return cols

    def to_text(self):
        head = self.header()
        body = [[r[0]] + ["-" if v is None else (f"{v:.2f}" if j % 2 == 1 else f"{v:.6f}")
                          for j, v in enumerate(r[1:])] for r in self.rows()]
        widths = [max(len(h), *(len(r[i]) for r in body)) for i, h in enumerate(head)]
        lines = [self.title,
                 "  ".join(h.ljust(w) if i == 0 else h.rjust(w) for i, (h, w) in enumerate(zip(head, widths)))]
        for r in body:
            lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))))
        lines.append("change = (baseline - stack) / baseline * 100, baseline = " + self.baseline)
        return "\n".join(lines) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        for r in self.rows():
            w.writerow([r[0]] + ["" if v is None else repr(float(v)) for v in r[1:]])
        return buf.getvalue()


@dataclass(frozen=True)
class CaseSpec:
    case_id: int
    train_map: str
    validate_map: str
    driver_profile: str = "smooth"
    plant: str = "perturbed"

    def __post_init__(self):
        for name in (self.train_map, self.validate_map):
            if name not in BUILTIN_SEGMENTS:
                raise InvalidParameters(f"unknown map {name!r}; choose from {sorted(BUILTIN_SEGMENTS)}")
        if self.plant not in ("nominal", "perturbed"):
            raise InvalidParameters("plant must be nominal or perturbed")


def case_spec(case_id, cfg: AppConfig = None):
    cfg = cfg or AppConfig()
    try:
        c = cfg.cases[int(case_id)]
    except KeyError:
        raise InvalidParameters(f"no case {case_id}; configured cases: {sorted(cfg.cases)}") from None
    return CaseSpec(int(case_id), c.train_map, c.validate_map, c.driver, c.plant)


def build_assets(cfg: AppConfig, road, driver_profile=None, compensator=None):
    model = discrete_model(cfg.vehicle)
    design = solve_dare(model, cfg.lqr_weights)
    dob = DobDesign.from_model(model, q_cutoff_hz=cfg.dob_cutoff_hz)
    return ScenarioAssets(cfg.vehicle, design, road, cfg.driver_params(driver_profile),
                          compensator=compensator, dob=dob)


def collect(cfg: AppConfig, map_name, driver_profile=None, plant: PlantConfig = None, seed=0):
    road = builtin_map(map_name)
    assets = build_assets(cfg, road, driver_profile)
    return collect_training_run(road, driver_profile or cfg.driver_profile,
                                plant or cfg.sim.plant, assets, cfg.sim.duration, seed,
                                cfg.sim.excitation_std, cfg.sim.excitation_tau)


def train_on_log(cfg: AppConfig, log, seed=0):
    dataset = build_dataset(log)
    est = NeuroDOB(epsilon1=cfg.sim.epsilon1, random_state=seed, **cfg.nn.estimator_kwargs())
    return est.fit_dataset(dataset), dataset


def validate(cfg: AppConfig, map_name, compensator, driver_profile=None, plant: PlantConfig = None,
             seed=0, stacks=REPORT_STACKS):
    """Run each stack on ``map_name``; returns ``{stack: SimLog}``."""
    road = builtin_map(map_name)
    assets = build_assets(cfg, road, driver_profile, compensator)
    logs = {}
    for stack in stacks:
        sc = ScenarioConfig(map_name, stack, cfg.sim.duration, plant or cfg.sim.plant,
                            driver_profile or cfg.driver_profile, seed, steer_limit=cfg.sim.steer_limit)
        logs[stack] = run_scenario(sc, assets)
    return logs


@dataclass
class CaseResult:
    spec: CaseSpec
    estimator: NeuroDOB
    train_report: object
    report: RmseReport
    logs: dict
    training_log: Optional[object] = None

    @property
    def e_y_reduction(self):
        return self.report.change("lqr_neurodob", "e_y")

    @property
    def e_psi_change(self):
        """Relative change of e_psi RMSE in percent (positive = larger than LQR)."""
        return -self.report.change("lqr_neurodob", "e_psi")


def run_case(spec: CaseSpec, cfg: AppConfig = None, seed=0, estimator=None, stacks=REPORT_STACKS):
    """Collect on the training map, train, then validate every stack.

    Pass a fitted ``estimator`` to skip collection and training (Case 2
    reuses the Case 1 network this way).
    """
    cfg = cfg or AppConfig()
    plant = cfg.plant_config(spec.plant)
    training_log = None
    train_report = None
    if estimator is None:
        training_log = collect(cfg, spec.train_map, spec.driver_profile, plant, seed)
        estimator, _ = train_on_log(cfg, training_log, seed)
        train_report = estimator.report_
    else:
        train_report = getattr(estimator, "report_", None)
    logs = validate(cfg, spec.validate_map, estimator, spec.driver_profile, plant, seed, stacks)
    title = (f"case {spec.case_id}: train {spec.train_map}, validate {spec.validate_map}, "
             f"driver {spec.driver_profile}, plant {spec.plant}, seed {seed}")
    report = RmseReport.from_logs(title, logs)
    return CaseResult(spec, estimator, train_report, report, logs, training_log)


# ---------------------------------------------------------------- plotting

def _write_series_csv(path, columns):
    names = list(columns)
    n = len(next(iter(columns.values())))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for i in range(n):
        w.writerow([repr(float(columns[c][i])) for c in names])
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="\n")


def _savefig(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})


def emit_plots(logs, out_dir, roads=None):
    """Write one SVG and one CSV per figure; returns the list of paths written.

    Figures: ``e_y`` and ``e_psi`` traces of every stack, the steering
    comparison of the NeuroDOB run, and curvature histograms of ``roads``.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    with matplotlib.rc_context({"svg.hashsalt": "neurodob", "svg.fonttype": "none"}):
        for signal in ("e_y", "e_psi"):
            if not logs:
                break
            t = next(iter(logs.values())).column("t_s")
            cols = {"t_s": t}
            fig, ax = plt.subplots(figsize=(8, 3))
            for stack, log in logs.items():
                if len(log) != len(t):
                    raise LengthMismatch("logs in one figure must share the time base")
                cols[stack] = log.column(signal)
                ax.plot(t, log.column(signal), label=stack, linewidth=0.8)
            ax.set_xlabel("t [s]")
            ax.set_ylabel(f"{signal} [{'m' if signal == 'e_y' else 'rad'}]")
            ax.legend(loc="upper right", fontsize="small")
            fig.tight_layout()
            base = out / f"trace_{signal}"
            _savefig(fig, base.with_suffix(".svg"))
            plt.close(fig)
            _write_series_csv(base.with_suffix(".csv"), cols)
            written += [base.with_suffix(".svg"), base.with_suffix(".csv")]

        if "lqr_neurodob" in logs:
            log = logs["lqr_neurodob"]
            t = log.column("t_s")
            cols = {"t_s": t, "delta_lqr": log.column("delta_lqr"), "delta_f": log.column("delta_f"),
                    "delta_c": log.column("delta_c"), "delta_d": log.column("delta_d")}
            fig, ax = plt.subplots(figsize=(8, 3))
            for name in ("delta_lqr", "delta_f", "delta_d"):
                ax.plot(t, cols[name], label=name, linewidth=0.8)
            ax.set_xlabel("t [s]")
            ax.set_ylabel("steering [rad]")
            ax.legend(loc="upper right", fontsize="small")
            fig.tight_layout()
            base = out / "steering"
            _savefig(fig, base.with_suffix(".svg"))
            plt.close(fig)
            _write_series_csv(base.with_suffix(".csv"), cols)
            written += [base.with_suffix(".svg"), base.with_suffix(".csv")]

        if roads:
            roads = list(roads)
            lo = min(float(r.curvature.min()) for r in roads)
            hi = max(float(r.curvature.max()) for r in roads)
            fig, ax = plt.subplots(figsize=(6, 3))
            cols = {}
            for r in roads:
                h = curvature_histogram(r, value_range=(lo, hi))
                centres = 0.5 * (h.bin_edges[1:] + h.bin_edges[:-1])
                cols.setdefault("bin_lo", h.bin_edges[:-1])
                cols.setdefault("bin_hi", h.bin_edges[1:])
                cols[r.name] = h.counts
                ax.step(centres, h.density(), where="mid", label=r.name, linewidth=0.9)
            ax.set_xlabel("curvature [1/m]")
            ax.set_ylabel("fraction of stations")
            ax.legend(fontsize="small")
            fig.tight_layout()
            base = out / "curvature_histogram"
            _savefig(fig, base.with_suffix(".svg"))
            plt.close(fig)
            _write_series_csv(base.with_suffix(".csv"), cols)
            written += [base.with_suffix(".svg"), base.with_suffix(".csv")]
    return written
