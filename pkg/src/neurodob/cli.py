"""Command-line entry point: ``neurodob <subcommand> [options]``.

Exit codes: 0 success, 2 configuration or parameter error, 3 closed-loop
divergence, 4 acceptance check failed, 1 any other failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as config_mod
from .compensator import NeuroDOB, build_dataset, format_dataset_csv, read_dataset_csv
from .config import AppConfig, format_config, load_config
from .evaluation import (REPORT_STACKS, RmseReport, build_assets, case_spec, collect, emit_plots, run_case,
                         train_on_log, validate)
from .exceptions import ConfigError, DivergedState, InvalidParameters, NeuroDobError
from .road import BUILTIN_SEGMENTS, builtin_map, builtin_maps, load_map_csv, map_divergence, save_map_csv
from .sim import STACKS, ScenarioConfig, SimLog, run_scenario
from .stability import certify, decrement_check, default_eps2, empirical_bound_check
from .vehicle import discrete_model

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_CHECK = 4

CASE_THRESHOLDS = {1: 50.0, 2: 15.0, 3: 0.0}
E_PSI_BAND = 5.0


def _out(path):
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _load_cfg(args) -> AppConfig:
    cfg = load_config(args.config) if args.config else AppConfig()
    sim = cfg.sim
    if getattr(args, "duration", None) is not None:
        sim = replace(sim, duration=args.duration)
    if getattr(args, "excitation_std", None) is not None:
        sim = replace(sim, excitation_std=args.excitation_std)
    if getattr(args, "epsilon1", None) is not None:
        sim = replace(sim, epsilon1=args.epsilon1)
    if getattr(args, "plant", None) is not None:
        sim = replace(sim, plant=cfg.plant_config(args.plant))
    nn = cfg.nn
    if getattr(args, "max_epochs", None) is not None:
        nn = replace(nn, max_epochs=args.max_epochs)
    cfg = replace(cfg, sim=sim, nn=nn)
    if getattr(args, "driver", None) is not None:
        if args.driver not in config_mod.DRIVER_PROFILES:
            raise ConfigError(f"unknown driver profile {args.driver!r}")
        cfg = replace(cfg, driver_profile=args.driver)
    return cfg


def _road(name):
    if name in BUILTIN_SEGMENTS:
        return builtin_map(name)
    return load_map_csv(name)


# ---------------------------------------------------------------- subcommands

def cmd_gen_road(args, cfg):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = sorted(BUILTIN_SEGMENTS) if args.map == "all" else [args.map]
    for name in names:
        road = builtin_map(name, args.spacing)
        save_map_csv(road, out / f"{name}.csv")
        print(f"{name}: {road.total_length:.1f} m, {len(road)} stations, max |kappa| {road.max_abs_curvature:.4f}")
    if args.map == "all":
        maps = builtin_maps(args.spacing)
        for a in ("map1", "map3"):
            print(f"JSD({a}, map2) = {map_divergence(maps[a], maps['map2']):.6f}")
    return EXIT_OK


def cmd_collect(args, cfg):
    log = collect(cfg, args.map, cfg.driver_profile, cfg.sim.plant, args.seed)
    log.save(_out(args.out))
    print(f"wrote {len(log)} rows to {args.out}")
    return EXIT_OK


def cmd_train(args, cfg):
    datasets = [build_dataset(read_dataset_csv(p)) for p in args.data]
    data = datasets[0]
    for extra in datasets[1:]:
        data = data.extend(extra)
    est = NeuroDOB(epsilon1=cfg.sim.epsilon1, random_state=args.seed, **cfg.nn.estimator_kwargs())
    est.fit_dataset(data)
    est.save(_out(args.out))
    r = est.report_
    print(f"trained on {len(data)} samples ({data.dropped} outliers dropped); "
          f"{r.epochs_run} epochs, stop {r.stop_reason}, best val MSE {r.best_val_loss:.6g}")
    return EXIT_OK


def _compensator(args, cfg):
    if getattr(args, "model", None):
        return NeuroDOB.load(args.model, epsilon1=cfg.sim.epsilon1)
    return None


def cmd_simulate(args, cfg):
    road = _road(args.map)
    comp = _compensator(args, cfg)
    assets = build_assets(cfg, road, compensator=comp)
    sc = ScenarioConfig(road.name, args.stack, cfg.sim.duration, cfg.sim.plant, cfg.driver_profile,
                        args.seed, steer_limit=cfg.sim.steer_limit)
    try:
        log = run_scenario(sc, assets)
    except DivergedState as exc:
        if exc.log is not None:
            exc.log.save(_out(args.out))
        raise
    log.save(_out(args.out))
    print(f"wrote {len(log)} rows to {args.out}")
    return EXIT_OK


def cmd_evaluate(args, cfg):
    comp = _compensator(args, cfg)
    stacks = [s for s in REPORT_STACKS if comp is not None or s != "lqr_neurodob"]
    logs = validate(cfg, args.map, comp, seed=args.seed, stacks=stacks)
    report = RmseReport.from_logs(f"map {args.map}, seed {args.seed}", logs)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(report.to_text(), encoding="utf-8", newline="\n")
    (out / "report.csv").write_text(report.to_csv(), encoding="utf-8", newline="\n")
    for stack, log in logs.items():
        log.save(out / f"{stack}.csv")
    sys.stdout.write(report.to_text())
    return EXIT_OK


def _case_check(case_id, result):
    failures = []
    red = result.e_y_reduction
    if red < CASE_THRESHOLDS.get(case_id, 0.0) or red <= 0.0:
        failures.append(f"e_y reduction {red:.2f}% below {CASE_THRESHOLDS.get(case_id, 0.0)}%")
    if abs(result.e_psi_change) > E_PSI_BAND:
        failures.append(f"e_psi change {result.e_psi_change:+.2f}% outside +-{E_PSI_BAND}%")
    return failures


def cmd_case(args, cfg):
    spec = case_spec(args.id, cfg)
    comp = _compensator(args, cfg)
    result = run_case(spec, cfg, args.seed, estimator=comp)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"case{spec.case_id}"
    (out / f"{stem}_report.txt").write_text(result.report.to_text(), encoding="utf-8", newline="\n")
    (out / f"{stem}_report.csv").write_text(result.report.to_csv(), encoding="utf-8", newline="\n")
    result.estimator.save(out / f"{stem}_model.ckpt")
    if result.training_log is not None:
        result.training_log.save(out / f"{stem}_train_{spec.train_map}.csv")
    if result.train_report is not None:
        tr = result.train_report
        lines = ["epoch,train_loss,val_loss,lr"]
        lines += [f"{i},{a!r},{b!r},{c!r}" for i, (a, b, c) in
                  enumerate(zip(tr.train_loss, tr.val_loss, tr.lr_trace))]
        (out / f"{stem}_training_curve.csv").write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    for stack, log in result.logs.items():
        log.save(out / f"{stem}_{stack}.csv")
    if args.plots:
        roads = [builtin_map(n) for n in sorted({spec.train_map, spec.validate_map})]
        emit_plots(result.logs, out / f"{stem}_plots", roads)
    sys.stdout.write(result.report.to_text())
    if args.check:
        failures = _case_check(spec.case_id, result)
        for f in failures:
            print(f"CHECK FAILED: {f}", file=sys.stderr)
        if failures:
            return EXIT_CHECK
        print("CHECK PASSED")
    return EXIT_OK


def cmd_stability(args, cfg):
    model = discrete_model(cfg.vehicle)
    assets = build_assets(cfg, builtin_map("map1") if args.map is None else _road(args.map))
    eps2 = args.eps2 if args.eps2 is not None else default_eps2(cfg.vehicle, assets.road)
    cert = certify(model, assets.lqr, cfg.sim.epsilon1, eps2)
    text = cert.to_text()
    if args.out:
        _out(args.out).write_text(text, encoding="utf-8", newline="\n")
    sys.stdout.write(text)
    if args.log:
        log = _read_sim_log(args.log)
        bound = empirical_bound_check(cert, log, args.burn_in)
        dec = decrement_check(cert, log.states())
        print(f"max |x| after {args.burn_in} s = {bound.max_norm:.6g} (eta {bound.eta:.6g}): "
              f"{'holds' if bound.holds else 'VIOLATED'}")
        print(f"one-step decrement: {dec.steps} steps, {dec.violations} violations")
        if not (bound.holds and dec.holds):
            return EXIT_CHECK
    return EXIT_OK


def _read_sim_log(path):
    import csv

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
        names = reader.fieldnames or []
    columns = {n: np.array([float(r[n]) for r in rows]) for n in names}
    return SimLog(columns, {"source": str(path)})


def cmd_ingest(args, cfg):
    cols = read_dataset_csv(args.input)
    dataset = build_dataset(cols)
    _out(args.out).write_text(format_dataset_csv(cols), encoding="utf-8", newline="\n")
    print(f"ingested {len(cols['t_s'])} rows ({dataset.dropped} would be dropped as outliers)")
    return EXIT_OK


def cmd_plot(args, cfg):
    logs = {Path(p).stem: _read_sim_log(p) for p in args.logs}
    roads = [_road(m) for m in args.maps] if args.maps else None
    written = emit_plots(logs, args.out_dir, roads)
    for path in written:
        print(path)
    return EXIT_OK


# ---------------------------------------------------------------- parser

CONFIG_HELP = config_mod.__doc__


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    # SUPPRESS keeps a subcommand from resetting values given before it.
    common.add_argument("--config", default=argparse.SUPPRESS, help="INI configuration file (see --help-config)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="master seed for every random stream (default 0)")

    parser = argparse.ArgumentParser(
        prog="neurodob", parents=[common], formatter_class=argparse.RawDescriptionHelpFormatter,
        description="Lateral-control workbench: LQR, disturbance observer and learned compensation.",
        epilog=CONFIG_HELP.strip() + "\n\nexit codes: 0 ok, 1 other failure, 2 config error, "
               "3 divergence, 4 acceptance check failed")
    parser.add_argument("--help-config", action="store_true", help="describe the config file and print the defaults")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("gen-road", parents=[common], help="write builtin maps as CSV")
    p.add_argument("--map", default="all", choices=["all", *sorted(BUILTIN_SEGMENTS)])
    p.add_argument("--spacing", type=float, default=1.0, help="station spacing in metres")
    p.add_argument("--out-dir", default="maps")
    p.set_defaults(func=cmd_gen_road)

    def sim_flags(p):
        p.add_argument("--duration", type=float, help="seconds of driving (default from config, 100)")
        p.add_argument("--plant", choices=["nominal", "perturbed"], help="plant variant")
        p.add_argument("--driver", help="driver profile (smooth or aggressive)")
        p.add_argument("--epsilon1", type=float, help="bound on the learned compensation, rad")

    p = sub.add_parser("collect", parents=[common], help="driver-in-the-loop run logging the training data")
    p.add_argument("--map", required=True, choices=sorted(BUILTIN_SEGMENTS))
    p.add_argument("--excitation-std", type=float, help="std of the steering disturbance during collection, rad")
    sim_flags(p)
    p.add_argument("--out", required=True, help="dataset CSV to write")
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("train", parents=[common], help="fit a compensator on dataset CSVs")
    p.add_argument("--data", nargs="+", required=True)
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--epsilon1", type=float)
    p.add_argument("--out", required=True, help="checkpoint to write")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("simulate", parents=[common], help="run one controller stack on a map")
    p.add_argument("--map", required=True, help="builtin map name or map CSV")
    p.add_argument("--stack", required=True, choices=STACKS)
    p.add_argument("--model", help="checkpoint for the lqr_neurodob stack")
    sim_flags(p)
    p.add_argument("--out", required=True, help="log CSV to write (metadata goes to .meta.json)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", parents=[common], help="RMSE table of all stacks on a map")
    p.add_argument("--map", required=True, choices=sorted(BUILTIN_SEGMENTS))
    p.add_argument("--model", help="checkpoint; without it the learned stack is skipped")
    sim_flags(p)
    p.add_argument("--out-dir", default="evaluation")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("case", parents=[common], help="run a full case: collect, train, validate")
    p.add_argument("id", type=int, help="case number (1, 2, 3 or a [case.N] section)")
    p.add_argument("--model", help="reuse this checkpoint instead of training")
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--out-dir", default="cases")
    p.add_argument("--plots", action="store_true", help="also write figures")
    p.add_argument("--check", action="store_true",
                   help="exit 4 unless the e_y reduction meets the case threshold and e_psi stays within 5%%")
    p.set_defaults(func=cmd_case)

    p = sub.add_parser("stability", parents=[common], help="practical-stability certificate")
    p.add_argument("--map", help="map fixing eps2 = Vx * max|kappa| (default map1)")
    p.add_argument("--epsilon1", type=float)
    p.add_argument("--eps2", type=float, help="override the bound on psi_dot_des, rad/s")
    p.add_argument("--log", help="simulation log to check against the certificate")
    p.add_argument("--burn-in", type=float, default=0.0, help="seconds skipped before the bound check")
    p.add_argument("--out", help="write the certificate text here")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("ingest", parents=[common], help="normalise an external log into the dataset CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("plot", parents=[common], help="figures from saved logs")
    p.add_argument("--logs", nargs="+", required=True)
    p.add_argument("--maps", nargs="*", help="maps for the curvature histogram")
    p.add_argument("--out-dir", default="plots")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    args.config = getattr(args, "config", None)
    args.seed = getattr(args, "seed", 0)
    if args.help_config:
        print(CONFIG_HELP)
        print(format_config(AppConfig()), end="")
        return EXIT_OK
    if not args.command:
        parser.print_help()
        return EXIT_CONFIG
    try:
        cfg = _load_cfg(args)
        return args.func(args, cfg)
    except (ConfigError, InvalidParameters) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergedState as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (NeuroDobError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
