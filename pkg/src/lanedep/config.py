"""Scenario configuration: flat INI-style files.

One file resolves to the four objects a run needs (vehicle parameters,
LQR configuration, noise spec, scenario). The resolved configuration can
be dumped back to canonical text whose SHA-256 identifies the run exactly;
re-running a dumped config reproduces identical outputs.
"""
from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass

import numpy as np

from .assessment import LdaConfig
from .control import LqrConfig
from .dynamics import VehicleParams
from .estimation import DEFAULT_Q_DIAG, DEFAULT_R_DIAG, NoiseSpec
from .lane import LanePath, Segment
from .prediction import PredictionConfig
from .simulator import Scenario, Stage1


class ConfigError(Exception):
    """Invalid or unreadable configuration."""


@dataclass(frozen=True)
class ResolvedConfig:
    params: VehicleParams
    lqr: LqrConfig
    noise: NoiseSpec
    scenario: Scenario
    seed: int

    def dump(self) -> str:
        return dump_config(self)

    def digest(self) -> str:
        return hashlib.sha256(self.dump().encode()).hexdigest()


def _floats(text: str, n: int | None = None, name: str = "") -> list:
    try:
        vals = [float(v) for v in text.replace(";", ",").split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"{name}: cannot parse float list from {text!r}") from exc
    if n is not None and len(vals) != n:
        raise ConfigError(f"{name}: expected {n} values, got {len(vals)}")
    return vals


def _speed_grid(text: str) -> np.ndarray:
    text = text.strip()
    if ":" in text:
        lo, hi, step = (float(v) for v in text.split(":"))
        grid = np.arange(lo, hi + 1e-9, step)
    else:
        grid = np.array(_floats(text, name="speed_grid_kmh"))
    return grid / 3.6


def load_config(path: str) -> ResolvedConfig:
    """Parse an INI config file into fully-validated run objects."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path!r}: {exc}") from exc
    return resolve_config(cp)


def resolve_config(cp: configparser.ConfigParser) -> ResolvedConfig:
    try:
        return _resolve(cp)
    except ConfigError:
        raise
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def _resolve(cp) -> ResolvedConfig:
    veh = cp["vehicle"] if cp.has_section("vehicle") else {}
    params = VehicleParams(
        m=float(veh.get("m", 2030.0)), i_z=float(veh.get("i_z", 3200.0)),
        a=float(veh.get("a", 1.13)), b=float(veh.get("b", 1.55)),
        c_f=float(veh.get("c_f", 1e5)), c_r=float(veh.get("c_r", 2e5)),
        l_f=float(veh.get("l_f", 2.11)), b_half=float(veh.get("b_half", 0.93)))

    lane = cp["lane"] if cp.has_section("lane") else {}
    width = float(lane.get("width", 4.0))
    segments = []
    idx = 1
    while f"segment{idx}" in lane:
        vals = _floats(lane[f"segment{idx}"], 5, f"lane.segment{idx}")
        segments.append(Segment(x0=vals[0], y0=vals[1], theta=vals[2],
                                length=vals[3], kappa=vals[4]))
        idx += 1
    if not segments:
        segments = [Segment(x0=-50.0, y0=2.0, theta=0.0, length=1000.0, kappa=0.0)]
    path = LanePath(segments=tuple(segments), lane_width=width)
    if width <= 2.0 * params.b_half:
        raise ConfigError(
            "invariant violated: lane_width must exceed vehicle width 2*b_half "
            f"(width={width}, 2*b_half={2 * params.b_half})")

    lqr_s = cp["lqr"] if cp.has_section("lqr") else {}
    if hasattr(lqr_s, "get") and lqr_s.get("speed_grid_mps", "").strip():
        grid = np.array(_floats(lqr_s["speed_grid_mps"], name="lqr.speed_grid_mps"))
    else:
        grid = _speed_grid(lqr_s.get("speed_grid_kmh", "5:60:5"))
    lqr = LqrConfig(
        w1=np.diag(_floats(lqr_s.get("w1_diag", "1, 0, 1, 0"), 4, "lqr.w1_diag")),
        w2=float(lqr_s.get("w2", 200.0)),
        speed_grid=grid,
        max_steer=float(lqr_s.get("max_steer", 0.6)),
        feedback_scale=float(lqr_s.get("feedback_scale", 1.0)))

    noise_s = cp["noise"] if cp.has_section("noise") else {}
    r_diag = _floats(noise_s.get("r_diag", ", ".join(map(str, DEFAULT_R_DIAG))),
                     5, "noise.r_diag")
    q_diag = _floats(noise_s.get("q_diag", ", ".join(map(str, DEFAULT_Q_DIAG))),
                     5, "noise.q_diag")
    noise = NoiseSpec(q=np.diag(q_diag), r=np.diag(r_diag))

    scen_s = cp["scenario"] if cp.has_section("scenario") else {}
    pred_s = cp["prediction"] if cp.has_section("prediction") else {}
    lda_s = cp["lda"] if cp.has_section("lda") else {}

    t_s = float(scen_s.get("t_s", 0.01))
    prediction = PredictionConfig(
        horizon_steps=int(pred_s.get("horizon_steps", 200)), t_s=t_s,
        sim_noise_enabled=_bool(pred_s.get("sim_noise", "true"), "prediction.sim_noise"),
        emit_every=int(pred_s.get("emit_every", 10)))
    lda = LdaConfig(
        delta=float(lda_s.get("delta", 0.0)),
        pi_coverage=float(lda_s.get("pi", 0.9973)),
        l_r=float(lda_s.get("l_r", 2.49)),
        contour_margin=float(lda_s.get("contour_margin", 0.05)))

    stage1 = Stage1(
        mode=scen_s.get("stage1_mode", "steering_pulse").strip(),
        warmup=float(scen_s.get("stage1_warmup", 3.0)),
        pulse_delta=float(scen_s.get("stage1_delta", 0.008)),
        pulse_duration=float(scen_s.get("stage1_duration", 1.0)),
        e1_0=float(scen_s.get("stage1_e1", 0.0)),
        e2_0=float(scen_s.get("stage1_e2", 0.0)))

    def _opt(key):
        raw = scen_s.get(key, "").strip() if hasattr(scen_s, "get") else ""
        return float(raw) if raw else None

    if hasattr(scen_s, "get") and scen_s.get("v_x_mps", "").strip():
        v_x = float(scen_s["v_x_mps"])
    else:
        v_x = float(scen_s.get("v_x_kmh", 30.0)) / 3.6
    scenario = Scenario(
        path=path,
        v_x=v_x,
        start_s=float(scen_s.get("start_s", 50.0)),
        stage1=stage1,
        stage2_time=_opt("stage2_time"),
        duration=_opt("duration"),
        t_s=t_s,
        emission_period=float(scen_s.get("emission_period", 0.1)),
        prediction=prediction,
        lda=lda)
    scenario.resolve(noise)   # validate durations early

    run_s = cp["run"] if cp.has_section("run") else {}
    seed = int(run_s.get("seed", 12345))
    return ResolvedConfig(params=params, lqr=lqr, noise=noise, scenario=scenario,
                          seed=seed)


def _bool(text: str, name: str) -> bool:
    val = text.strip().lower()
    if val in ("1", "true", "yes", "on"):
        return True
    if val in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{name}: expected a boolean, got {text!r}")


def dump_config(rc: ResolvedConfig) -> str:
    """Canonical INI text of every resolved parameter."""
    cp = configparser.ConfigParser()
    p = rc.params
    cp["vehicle"] = {k: repr(getattr(p, k))
                     for k in ("m", "i_z", "a", "b", "c_f", "c_r", "l_f", "b_half")}
    lane = {"width": repr(rc.scenario.path.lane_width)}
    for i, seg in enumerate(rc.scenario.path.segments, start=1):
        lane[f"segment{i}"] = ", ".join(
            repr(v) for v in (seg.x0, seg.y0, seg.theta, seg.length, seg.kappa))
    cp["lane"] = lane
    lqr = rc.lqr
    cp["lqr"] = {
        "w1_diag": ", ".join(repr(float(v)) for v in np.diag(lqr.w1)),
        "w2": repr(lqr.w2),
        "speed_grid_mps": ", ".join(repr(float(v)) for v in lqr.speed_grid),
        "max_steer": repr(lqr.max_steer),
        "feedback_scale": repr(lqr.feedback_scale)}
    cp["noise"] = {
        "r_diag": ", ".join(repr(float(v)) for v in np.diag(rc.noise.r)),
        "q_diag": ", ".join(repr(float(v)) for v in np.diag(rc.noise.q))}
    scen = rc.scenario
    res = scen.resolve(rc.noise)
    cp["scenario"] = {
        "v_x_mps": repr(scen.v_x), "start_s": repr(scen.start_s),
        "stage1_mode": scen.stage1.mode,
        "stage1_warmup": repr(scen.stage1.warmup),
        "stage1_delta": repr(scen.stage1.pulse_delta),
        "stage1_duration": repr(scen.stage1.pulse_duration),
        "stage1_e1": repr(scen.stage1.e1_0), "stage1_e2": repr(scen.stage1.e2_0),
        "stage2_time": repr(res.stage2_time), "duration": repr(res.duration),
        "t_s": repr(scen.t_s), "emission_period": repr(scen.emission_period)}
    cp["prediction"] = {
        "horizon_steps": str(scen.prediction.horizon_steps),
        "sim_noise": str(scen.prediction.sim_noise_enabled).lower(),
        "emit_every": str(scen.prediction.emit_every)}
    cp["lda"] = {
        "delta": repr(scen.lda.delta), "pi": repr(scen.lda.pi_coverage),
        "l_r": repr(scen.lda.l_r), "contour_margin": repr(scen.lda.contour_margin)}
    cp["run"] = {"seed": str(rc.seed)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
