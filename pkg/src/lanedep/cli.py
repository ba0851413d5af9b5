"""Command-line entry point.

Subcommands: simulate (one closed-loop run), montecarlo (repeated runs with
aggregate statistics), predict (single prediction + assessment from a given
state), dump-gains (LQR gain table as CSV).

Exit codes: 0 success, 2 usage/config error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .assessment import CornerGeometry, assess
from .config import ConfigError, ResolvedConfig, load_config
from .control import RiccatiError, build_gain_table, gain_table_csv
from .csvio import write_csv, write_run_record, write_summary
from .dynamics import VehicleState
from .estimation import GaussianState, steady_state_posterior
from .lane import PathExhaustedError
from .prediction import (TRAJECTORY_CSV_HEADER, ctrv_from_belief, predict_control,
                         predict_ctrv, predict_kpc, predict_plain,
                         trajectory_csv_rows)
from .simulator import run_monte_carlo, run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _write_manifest(out_dir: str, rc: ResolvedConfig, config_path: str, seed: int,
                    status: str, extra: dict | None = None) -> None:
    manifest = {
        "config_path": os.path.abspath(config_path),
        "config_sha256": rc.digest(),
        "out_dir": os.path.abspath(out_dir),
        "tool_version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "seed": seed,
        "status": status,
    }
    if extra:
        manifest.update(extra)
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _prepare(args) -> tuple:
    rc = load_config(args.config)
    overrides = {}
    if getattr(args, "ts", None) is not None:
        overrides["t_s"] = args.ts
        overrides["prediction"] = dataclasses.replace(rc.scenario.prediction,
                                                      t_s=args.ts)
    if getattr(args, "speed_kmh", None) is not None:
        overrides["v_x"] = args.speed_kmh / 3.6
    if overrides:
        rc = dataclasses.replace(
            rc, scenario=dataclasses.replace(rc.scenario, **overrides))
    seed = args.seed if args.seed is not None else rc.seed
    rc.scenario.resolve(rc.noise)
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "resolved.ini"), "w", encoding="utf-8") as fh:
        fh.write(rc.dump())
    return rc, seed, out_dir


def cmd_simulate(args) -> int:
    rc, seed, out_dir = _prepare(args)
    _write_manifest(out_dir, rc, args.config, seed, "running")
    record = run_scenario(rc.scenario, rc.params, rc.lqr, rc.noise, seed)
    write_run_record(out_dir, record, "run",
                     emit_every=rc.scenario.prediction.emit_every)
    _write_manifest(out_dir, rc, args.config, seed, "ok", {
        "valid": record.valid,
        "invalid_reason": record.invalid_reason,
        "ay_max": record.ay_max,
        "n_emissions": len(record.emissions),
    })
    if not record.valid:
        print(f"run invalid: {record.invalid_reason}")
    print(f"simulate: {record.n_steps} steps, {len(record.emissions)} emissions, "
          f"ay_max={record.ay_max:.3f} -> {out_dir}")
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    rc, seed, out_dir = _prepare(args)
    if args.runs < 2:
        raise ConfigError("montecarlo requires --runs >= 2")
    _write_manifest(out_dir, rc, args.config, seed, "running")
    summary = run_monte_carlo(rc.scenario, rc.params, rc.lqr, rc.noise,
                              n_runs=args.runs, base_seed=seed, jobs=args.jobs,
                              keep_records=args.keep_runs)
    write_summary(out_dir, summary)
    runs_dir = os.path.join(out_dir, "runs")
    os.makedirs(runs_dir, exist_ok=True)
    for rec in summary.exemplars:
        name = "-".join(str(v) for v in rec.seed_key)
        write_run_record(runs_dir, rec, name,
                         emit_every=rc.scenario.prediction.emit_every)
    _write_manifest(out_dir, rc, args.config, seed, "ok", {
        "n_runs": summary.n_runs,
        "n_attempted": summary.n_attempted,
        "n_excluded": summary.n_excluded,
    })
    print(f"montecarlo: {summary.n_runs} valid runs "
          f"({summary.n_excluded} excluded of {summary.n_attempted} attempted) "
          f"-> {out_dir}")
    return EXIT_OK


def cmd_predict(args) -> int:
    rc, seed, out_dir = _prepare(args)
    try:
        vals = [float(v) for v in args.state.split(",")]
    except ValueError as exc:
        raise ConfigError(f"malformed --state {args.state!r}: {exc}") from exc
    if len(vals) != 6:
        raise ConfigError("--state needs 6 values: vy,wr,xc,yc,psi,vx")
    if vals[5] <= 0.0:
        raise ConfigError("--state vx must be > 0")
    state = VehicleState(v_y=vals[0], omega_r=vals[1], x_c=vals[2], y_c=vals[3],
                         psi=vals[4], v_x=vals[5])
    _write_manifest(out_dir, rc, args.config, seed, "running")

    scen = rc.scenario
    pred_cfg = scen.prediction
    if args.horizon is not None:
        pred_cfg = dataclasses.replace(
            pred_cfg, horizon_steps=int(round(args.horizon / pred_cfg.t_s)))
    pred_cfg = dataclasses.replace(pred_cfg, rng_seed=seed)
    gains = build_gain_table(rc.lqr, rc.params)
    # bootstrap from the converged filter covariance at this state
    p_ss, k_ss = steady_state_posterior(state, rc.params, rc.noise, pred_cfg.t_s)
    belief = GaussianState(mean=state, p=p_ss)

    if args.algo == "kpc":
        traj = predict_kpc(belief, k_ss, gains, scen.path, rc.params, rc.noise,
                           pred_cfg)
    elif args.algo == "kp":
        u_k = predict_control(state, gains, scen.path)
        traj = predict_plain(belief, u_k, rc.params, rc.noise, pred_cfg)
    else:
        init, q_ctrv = ctrv_from_belief(belief, rc.noise)
        traj = predict_ctrv(init, q_ctrv, pred_cfg)

    geom = CornerGeometry.from_params(rc.params, l_r=scen.lda.l_r,
                                      margin=scen.lda.contour_margin)
    report = assess(traj, scen.path, geom, scen.lda)
    write_csv(os.path.join(out_dir, "trajectory.csv"), TRAJECTORY_CSV_HEADER,
              trajectory_csv_rows(traj, pred_cfg.t_s, pred_cfg.emit_every))
    if report.first_flag_step is None:
        print("first flag: none")
    else:
        print(f"first flag: {report.first_flag_step * pred_cfg.t_s:.2f} s")
    _write_manifest(out_dir, rc, args.config, seed, "ok", {
        "algo": args.algo,
        "first_flag_step": report.first_flag_step,
    })
    return EXIT_OK


def cmd_dump_gains(args) -> int:
    rc, seed, out_dir = _prepare(args)
    _write_manifest(out_dir, rc, args.config, seed, "running")
    gains = build_gain_table(rc.lqr, rc.params)
    text = gain_table_csv(gains, rc.lqr, rc.params)
    path = os.path.join(out_dir, "gains.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    _write_manifest(out_dir, rc, args.config, seed, "ok")
    print(f"dump-gains: {len(gains.speed_grid)} grid speeds -> {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lanedep",
        description="Closed-loop lane-departure prediction toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="INI scenario configuration file")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--ts", type=float, default=None,
                        help="override the sampling time [s]")
        sp.add_argument("--speed-kmh", type=float, default=None,
                        help="override the longitudinal speed [km/h]")

    sp = sub.add_parser("simulate", help="run one closed-loop incident")
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("montecarlo", help="repeat the scenario and aggregate")
    common(sp)
    sp.add_argument("--runs", type=int, default=500)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--keep-runs", type=int, default=3,
                    help="how many exemplar run records to write")
    sp.set_defaults(func=cmd_montecarlo)

    sp = sub.add_parser("predict", help="one prediction from a given state")
    common(sp)
    sp.add_argument("--state", required=True, help="vy,wr,xc,yc,psi,vx")
    sp.add_argument("--algo", choices=("kpc", "kp", "ctrv"), default="kpc")
    sp.add_argument("--horizon", type=float, default=None,
                    help="prediction horizon [s]")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("dump-gains", help="write the LQR gain table as CSV")
    common(sp)
    sp.set_defaults(func=cmd_dump_gains)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RiccatiError, PathExhaustedError) as exc:
        _mark_failed(args, exc)
        print(f"runtime error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (RuntimeError, ValueError) as exc:
        _mark_failed(args, exc)
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def _mark_failed(args, exc) -> None:
    out_dir = getattr(args, "out", None)
    if not out_dir or not os.path.isdir(out_dir):
        return
    path = os.path.join(out_dir, "manifest.json")
    if not os.path.exists(path):
        return
    try:
        with open(path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
        manifest["status"] = f"failed: {exc}"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError:
        pass


if __name__ == "__main__":
    sys.exit(main())
