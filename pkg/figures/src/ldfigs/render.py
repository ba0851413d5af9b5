"""Render the result-figure analogs from a Monte Carlo output directory.

figure id  content
f8         one run: trajectories and pose rectangles, truth vs predictions
f9         all runs: predicted corner scatter over the truth CG paths
f10        front-left corner predictions per step vs the left lane line
f11        variance consistency: calculated, error variance, MSE
f12, f13   histogram of predicted front-left ordinate at 1 s / 2 s with
           the calculated Normal overlaid
f14        fraction of runs flagged per prediction time, per algorithm
f15        departure-assessment accuracy per prediction time
"""
from __future__ import annotations

import configparser
import csv
import glob
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

FIGURE_IDS = ("f8", "f9", "f10", "f11", "f12", "f13", "f14", "f15")

ALGO_STYLE = {"kpc": dict(color="tab:blue"), "ctrv": dict(color="tab:red"),
              "truth": dict(color="black")}


class FigureInputError(Exception):
    """Missing, empty, or malformed input file."""


def load_csv(path: str) -> dict:
    """CSV to a dict of numpy arrays (strings where not numeric)."""
    if not os.path.exists(path):
        raise FigureInputError(f"missing input file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FigureInputError(f"empty CSV (no header): {path}") from None
        rows = list(reader)
    if not rows:
        raise FigureInputError(f"empty CSV (no data rows): {path}")
    cols = {}
    for j, name in enumerate(header):
        raw = [row[j] for row in rows]
        try:
            cols[name] = np.array([float(v) for v in raw])
        except ValueError:
            cols[name] = np.array(raw)
    return cols


def col(data: dict, name: str, path: str) -> np.ndarray:
    if name not in data:
        raise FigureInputError(f"column {name!r} missing from {path}")
    return data[name]


def lane_geometry(out_dir: str):
    """(centre_y, half_width, vehicle dims) from resolved.ini."""
    path = os.path.join(out_dir, "resolved.ini")
    if not os.path.exists(path):
        raise FigureInputError(f"missing input file: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.read(path)
    seg = [float(v) for v in cp["lane"]["segment1"].split(",")]
    width = float(cp["lane"]["width"])
    dims = dict(l_f=float(cp["vehicle"]["l_f"]),
                b_half=float(cp["vehicle"]["b_half"]),
                l_r=float(cp["lda"]["l_r"]))
    if seg[2] != 0.0 or seg[4] != 0.0:
        raise FigureInputError("figures support straight East-bound lanes only")
    return seg[1], 0.5 * width, dims


def draw_lane(ax, centre_y, half_width, x_range):
    ax.axhline(centre_y + half_width, color="orange", lw=1.5, label="lane line")
    ax.axhline(centre_y - half_width, color="orange", lw=1.5)
    ax.axhline(centre_y, color="gray", lw=0.8, ls=":", label="centreline")
    ax.set_xlim(*x_range)


def rectangle_xy(x, y, psi, dims):
    lf, lr, b = dims["l_f"], dims["l_r"], dims["b_half"]
    body = np.array([[lf, b], [lf, -b], [-lr, -b], [-lr, b], [lf, b]])
    rot = np.array([[np.cos(psi), -np.sin(psi)], [np.sin(psi), np.cos(psi)]])
    pts = body @ rot.T + np.array([x, y])
    return pts[:, 0], pts[:, 1]


def _exemplar_run(out_dir: str):
    runs = sorted(p for p in glob.glob(os.path.join(out_dir, "runs", "*.csv"))
                  if not p.endswith(("_predictions.csv", "_assessments.csv")))
    if not runs:
        raise FigureInputError(f"no exemplar run CSV under {out_dir}/runs")
    base = runs[0][:-4]
    return runs[0], base + "_predictions.csv"


def fig_f8(out_dir: str):
    run_path, pred_path = _exemplar_run(out_dir)
    run = load_csv(run_path)
    preds = load_csv(pred_path)
    centre_y, half, dims = lane_geometry(out_dir)

    fig, ax = plt.subplots(figsize=(9, 4))
    tx = col(run, "truth_xc", run_path)
    ty = col(run, "truth_yc", run_path)
    tpsi = col(run, "truth_psi", run_path)
    ax.plot(tx, ty, color="black", lw=1.5, label="actual trajectory")

    algos = col(preds, "algo", pred_path)
    k_col = col(preds, "k", pred_path)
    k0 = k_col.astype(float).min()
    sel0 = k_col.astype(float) == k0
    for algo in ("kpc", "ctrv"):
        sel = sel0 & (algos == algo)
        px = col(preds, "xc", pred_path)[sel]
        py = col(preds, "yc", pred_path)[sel]
        ppsi = col(preds, "psi", pred_path)[sel]
        ax.plot(px, py, ls="--", lw=1.2, label=f"{algo} prediction",
                **ALGO_STYLE[algo])
        for x, y, psi in zip(px, py, ppsi):
            rx, ry = rectangle_xy(x, y, psi, dims)
            ax.plot(rx, ry, ls="--", lw=0.6, alpha=0.7, **ALGO_STYLE[algo])
    ks = col(run, "k", run_path)
    horizon_mask = (ks >= k0) & (ks <= k0 + 250) & (ks % 10 == 0)
    for x, y, psi in zip(tx[horizon_mask], ty[horizon_mask], tpsi[horizon_mask]):
        rx, ry = rectangle_xy(x, y, psi, dims)
        ax.plot(rx, ry, color="black", lw=0.6, alpha=0.7)
    draw_lane(ax, centre_y, half, (tx.min() - 2, tx.max() + 4))
    ax.set_xlabel("East X [m]")
    ax.set_ylabel("North Y [m]")
    ax.set_title("Prediction of one simulation run")
    ax.legend(loc="lower right", fontsize=8)
    return fig


def fig_f9(out_dir: str):
    path = os.path.join(out_dir, "scatter.csv")
    data = load_csv(path)
    centre_y, half, _ = lane_geometry(out_dir)
    algos = col(data, "algo", path)
    corners = col(data, "corner", path)
    xs = col(data, "x", path)
    ys = col(data, "y", path)
    runs = col(data, "run", path)

    fig, ax = plt.subplots(figsize=(9, 4))
    sel = (algos == "kpc") & (corners != "cg")
    ax.plot(xs[sel], ys[sel], "o", ms=1.5, alpha=0.3, color="tab:blue",
            label="kpc corners")
    sel = (algos == "ctrv") & (corners != "cg")
    ax.plot(xs[sel], ys[sel], "*", ms=2.5, alpha=0.3, color="tab:red",
            label="ctrv corners")
    first = True
    for run in np.unique(runs):
        sel = (runs == run) & (algos == "truth") & (corners == "cg")
        order = np.argsort(xs[sel])
        ax.plot(xs[sel][order], ys[sel][order], color="black", lw=0.5,
                alpha=0.6, label="actual CG" if first else None)
        first = False
    draw_lane(ax, centre_y, half, (xs.min() - 1, xs.max() + 1))
    ax.set_xlabel("East X [m]")
    ax.set_ylabel("North Y [m]")
    ax.set_title("Corner predictions, all runs")
    ax.legend(loc="lower right", fontsize=8)
    return fig


def fig_f10(out_dir: str):
    path = os.path.join(out_dir, "scatter.csv")
    data = load_csv(path)
    centre_y, half, _ = lane_geometry(out_dir)
    algos = col(data, "algo", path)
    corners = col(data, "corner", path)
    fig, ax = plt.subplots(figsize=(8, 4))
    for algo, marker in (("kpc", "o"), ("ctrv", "*"), ("truth", "+")):
        sel = (algos == algo) & (corners == "fl")
        ax.plot(col(data, "i", path)[sel] * 0.01, col(data, "y", path)[sel],
                marker, ms=2.5, alpha=0.4, label=f"{algo} front-left",
                **ALGO_STYLE[algo])
    ax.axhline(centre_y + half, color="orange", lw=1.5, label="left lane line")
    ax.set_xlabel("prediction time [s]")
    ax.set_ylabel("front-left corner Y [m]")
    ax.set_title("Front-left corner prediction per step")
    ax.legend(loc="upper left", fontsize=8)
    return fig


def fig_f11(out_dir: str):
    path = os.path.join(out_dir, "summary.csv")
    data = load_csv(path)
    t = col(data, "t", path)
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(t, col(data, "var_calc", path), label="calculated variance")
    ax.plot(t, col(data, "var_sample", path), label="sample error variance")
    ax.plot(t, col(data, "mse", path), label="MSE")
    ax.set_xlabel("prediction time [s]")
    ax.set_ylabel("front-left corner Y variance [m$^2$]")
    ax.set_title("Lateral variance of the front-left corner")
    ax.legend(fontsize=8)
    return fig


def _histogram_figure(out_dir: str, step_i: int, label: str):
    spath = os.path.join(out_dir, "scatter.csv")
    scatter = load_csv(spath)
    mpath = os.path.join(out_dir, "summary.csv")
    summary = load_csv(mpath)
    sel = ((col(scatter, "algo", spath) == "kpc")
           & (col(scatter, "corner", spath) == "fl")
           & (col(scatter, "i", spath) == step_i))
    ys = col(scatter, "y", spath)[sel]
    if ys.size == 0:
        raise FigureInputError(
            f"scatter.csv has no kpc fl rows at i={step_i}")
    srow = col(summary, "i", mpath) == step_i
    var_calc = float(col(summary, "var_calc", mpath)[srow][0])
    mu = float(ys.mean())
    sigma = float(np.sqrt(var_calc))

    fig, ax = plt.subplots(figsize=(7, 4))
    # Scott's rule bin count, fixed so re-renders are identical
    bins = max(5, int(np.ceil((ys.max() - ys.min())
                              / (3.49 * ys.std(ddof=1) * ys.size ** (-1 / 3))))
               if ys.std(ddof=1) > 0 else 5)
    ax.hist(ys, bins=bins, density=True, alpha=0.6, color="tab:blue",
            label="predicted positions")
    grid = np.linspace(ys.min() - 3 * sigma, ys.max() + 3 * sigma, 300)
    pdf = np.exp(-0.5 * ((grid - mu) / sigma) ** 2) / (sigma * np.sqrt(2 * np.pi))
    ax.plot(grid, pdf, color="tab:red", lw=1.5, label="calculated Normal")
    ax.set_xlabel("front-left corner Y [m]")
    ax.set_ylabel("density [1/m]")
    ax.set_title(f"Predicted position at {label}")
    ax.legend(fontsize=8)
    return fig


def fig_f12(out_dir: str):
    return _histogram_figure(out_dir, 100, "1 s")


def fig_f13(out_dir: str):
    return _histogram_figure(out_dir, 200, "2 s")


def fig_f14(out_dir: str):
    path = os.path.join(out_dir, "flags.csv")
    data = load_csv(path)
    algos = col(data, "algo", path)
    t = col(data, "t", path)
    flags = col(data, "flag", path)
    fig, ax = plt.subplots(figsize=(8, 4))
    for algo in ("kpc", "ctrv", "truth"):
        sel = algos == algo
        ts = np.unique(t[sel])
        frac = [flags[sel & (t == tv)].mean() for tv in ts]
        ax.step(ts, frac, where="post", label=f"{algo} flagged fraction",
                **ALGO_STYLE[algo])
    ax.set_xlabel("prediction time [s]")
    ax.set_ylabel("fraction of runs flagged")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title("Lane departure assessment of both algorithms")
    ax.legend(fontsize=8)
    return fig


def fig_f15(out_dir: str):
    path = os.path.join(out_dir, "summary.csv")
    data = load_csv(path)
    t = col(data, "t", path)
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(t, col(data, "acc_kpc", path), label="kpc", color="tab:blue")
    ax.plot(t, col(data, "acc_ctrv", path), label="ctrv", color="tab:red")
    ax.set_xlabel("prediction time [s]")
    ax.set_ylabel("departure-assessment accuracy")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title("Departure assessment accuracy of both algorithms")
    ax.legend(fontsize=8)
    return fig


RENDERERS = {fid: globals()[f"fig_{fid}"] for fid in FIGURE_IDS}


def render(fid: str, out_dir: str, target_dir: str | None = None) -> str:
    """Render one figure id; returns the written PNG path."""
    if fid not in RENDERERS:
        raise FigureInputError(f"unknown figure id {fid!r}; "
                               f"choose from {', '.join(FIGURE_IDS)}")
    fig = RENDERERS[fid](out_dir)
    target = os.path.join(target_dir or out_dir, f"fig_{fid}.png")
    fig.savefig(target, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return target


def render_all(out_dir: str, only=None, target_dir: str | None = None):
    fids = list(only) if only else list(FIGURE_IDS)
    return [render(fid, out_dir, target_dir) for fid in fids]
