"""Deterministic CSV writers for run records and Monte Carlo summaries.

Floats are rendered with repr (shortest round-trip form), so identical
inputs always produce byte-identical files.
"""
from __future__ import annotations

import os

import numpy as np

from .assessment import REPORT_CSV_HEADER, report_csv_rows
from .prediction import TRAJECTORY_CSV_HEADER, trajectory_csv_rows
from .simulator import McSummary, RunRecord


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path: str, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


RUN_CSV_HEADER = (
    ["k", "t"]
    + [f"truth_{n}" for n in ("vy", "wr", "xc", "yc", "psi")]
    + [f"meas_{n}" for n in ("vy", "wr", "xc", "yc", "psi")]
    + [f"est_{n}" for n in ("vy", "wr", "xc", "yc", "psi")]
    + ["delta_f", "nees"])


def run_record_rows(record: RunRecord):
    rows = []
    for k in range(record.truth.shape[0]):
        row = [k, k * record.t_s]
        row += [float(v) for v in record.truth[k]]
        row += [float(v) for v in record.measurements[k]]
        row += [float(v) for v in record.estimates[k]]
        row.append(float(record.applied_delta[k - 1]) if k >= 1 else 0.0)
        row.append(float(record.nees[k - 1]) if k >= 1 else 0.0)
        rows.append(row)
    return rows


def write_run_record(out_dir: str, record: RunRecord, name: str,
                     emit_every: int = 10) -> None:
    """run CSV plus prediction / assessment CSVs for every emission."""
    write_csv(os.path.join(out_dir, f"{name}.csv"), RUN_CSV_HEADER,
              run_record_rows(record))
    traj_rows = []
    report_rows = []
    for em in record.emissions:
        for traj in (em.kpc, em.ctrv):
            traj_rows += trajectory_csv_rows(traj, record.t_s, emit_every)
        for report in (em.kpc_report, em.ctrv_report):
            report_rows += report_csv_rows(report, record.t_s, emit_every)
    write_csv(os.path.join(out_dir, f"{name}_predictions.csv"),
              TRAJECTORY_CSV_HEADER, traj_rows)
    write_csv(os.path.join(out_dir, f"{name}_assessments.csv"),
              REPORT_CSV_HEADER, report_rows)


SUMMARY_CSV_HEADER = ["i", "t", "var_calc", "var_sample", "mse",
                      "acc_kpc", "acc_ctrv"]
SCATTER_CSV_HEADER = ["run", "algo", "i", "t", "corner", "x", "y"]
FLAGS_CSV_HEADER = ["run", "algo", "i", "t", "flag"]
NEES_CSV_HEADER = ["k", "t", "mean_nees"]


def write_summary(out_dir: str, summary: McSummary) -> None:
    rows = []
    for j in range(summary.horizon):
        i = j + 1
        rows.append([i, i * summary.t_s, summary.var_calc[j], summary.var_sample[j],
                     summary.mse[j], summary.acc_kpc[j], summary.acc_ctrv[j]])
    write_csv(os.path.join(out_dir, "summary.csv"), SUMMARY_CSV_HEADER, rows)

    write_csv(os.path.join(out_dir, "scatter.csv"), SCATTER_CSV_HEADER,
              summary.scatter)

    flag_rows = []
    for run in range(summary.n_runs):
        for j in range(summary.horizon):
            i = j + 1
            if i % summary.emit_every:
                continue
            t = i * summary.t_s
            flag_rows.append([run, "kpc", i, t, int(summary.kpc_flags[run, j])])
            flag_rows.append([run, "ctrv", i, t, int(summary.ctrv_flags[run, j])])
            flag_rows.append([run, "truth", i, t, int(summary.truth_flags[run, j])])
    write_csv(os.path.join(out_dir, "flags.csv"), FLAGS_CSV_HEADER, flag_rows)

    nees_rows = [[k + 1, (k + 1) * summary.t_s, summary.nees_mean[k]]
                 for k in range(summary.nees_mean.shape[0])]
    write_csv(os.path.join(out_dir, "nees.csv"), NEES_CSV_HEADER, nees_rows)
