"""Closed-loop scenario engine and Monte Carlo harness.

A run has two stages: a deliberate disturbance drifting the vehicle toward
the left lane line, then LQR lane keeping closed on EKF estimates. Truth
propagates under forward Euler with additive process noise matched to the
filter; measurements add sensor noise per the configured variances. At
each emission step the run produces KPC and CTRV predictions plus their
departure assessments.

Runs whose lateral acceleration breaches the 0.4 g linear-regime guard are
marked invalid; the Monte Carlo driver replaces them so aggregates always
cover the requested number of successful activations.
"""
from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field, replace

import numpy as np

from . import dynamics
from .assessment import (CornerGeometry, DepartureReport, LdaConfig, assess,
                         corner_positions, truth_departure_flag)
from .control import LqrConfig, LqrGains, build_gain_table
from .dynamics import (LINEAR_REGIME_AY_LIMIT, VehicleParams, VehicleState)
from .estimation import GaussianState, NoiseSpec, ekf_init, ekf_step, nees
from .lane import LanePath
from .prediction import (PredictionConfig, PredictedTrajectory, ctrv_from_belief,
                         noise_sqrt, predict_control, predict_ctrv, predict_kpc)


@dataclass(frozen=True)
class Stage1:
    """Disturbance stage: a constant steering pulse or an initial offset.

    The pulse is preceded by a quiet straight-driving warmup so the filter
    has converged before the incident starts.
    """

    mode: str = "steering_pulse"          # "steering_pulse" | "initial_offset"
    warmup: float = 3.0
    pulse_delta: float = 0.008
    pulse_duration: float = 1.0
    e1_0: float = 0.0
    e2_0: float = 0.0

    def __post_init__(self):
        if self.mode not in ("steering_pulse", "initial_offset"):
            raise ValueError(f"unknown stage1 mode {self.mode!r}")
        if self.warmup < 0.0 or self.pulse_duration < 0.0:
            raise ValueError("stage1 durations must be >= 0")

    @property
    def end_time(self) -> float:
        if self.mode == "steering_pulse":
            return self.warmup + self.pulse_duration
        return 0.0


@dataclass(frozen=True)
class Scenario:
    """Full description of one lane-keeping incident."""

    path: LanePath = field(default_factory=LanePath.straight)
    v_x: float = 8.333
    start_s: float = 50.0
    stage1: Stage1 = field(default_factory=Stage1)
    stage2_time: float | None = None      # default: end of the pulse
    duration: float | None = None         # default: stage2 + horizon
    t_s: float = 0.01
    emission_period: float = 0.1
    r_inject: np.ndarray | None = None    # default: measurement noise R
    q_inject: np.ndarray | None = None    # default: filter process noise Q
    prediction: PredictionConfig = field(default_factory=PredictionConfig)
    lda: LdaConfig = field(default_factory=LdaConfig)

    def resolve(self, noise: NoiseSpec) -> "ResolvedScenario":
        stage2 = self.stage2_time
        if stage2 is None:
            stage2 = self.stage1.end_time
        horizon_s = self.prediction.horizon_steps * self.t_s
        duration = self.duration
        if duration is None:
            duration = stage2 + horizon_s
        if duration < stage2 + horizon_s:
            raise ValueError("duration too short: no full prediction horizon after stage 2")
        r_inj = noise.r if self.r_inject is None else np.asarray(self.r_inject, float)
        q_inj = noise.q if self.q_inject is None else np.asarray(self.q_inject, float)
        return ResolvedScenario(scenario=self, stage2_time=stage2, duration=duration,
                                r_inject=r_inj, q_inject=q_inj)


@dataclass(frozen=True)
class ResolvedScenario:
    scenario: Scenario
    stage2_time: float
    duration: float
    r_inject: np.ndarray
    q_inject: np.ndarray


@dataclass
class Emission:
    """Predictions and assessments issued at one emission step."""

    k: int
    kpc: PredictedTrajectory
    ctrv: PredictedTrajectory
    kpc_report: DepartureReport
    ctrv_report: DepartureReport


@dataclass
class RunRecord:
    """Gap-free time-indexed log of a single closed-loop run."""

    seed_key: tuple
    valid: bool
    invalid_reason: str | None
    k_act: int
    n_steps: int
    t_s: float
    truth: np.ndarray          # (n+1, 5)
    measurements: np.ndarray   # (n+1, 5)
    estimates: np.ndarray      # (n+1, 5)
    applied_delta: np.ndarray  # (n,)
    nees: np.ndarray           # (n,)
    ay_max: float
    emissions: list


def _initial_state(res: ResolvedScenario, params: VehicleParams) -> VehicleState:
    scen = res.scenario
    (x0, y0), theta, _ = scen.path.point_at(scen.start_s)
    e1 = e2 = 0.0
    if scen.stage1.mode == "initial_offset":
        e1, e2 = scen.stage1.e1_0, scen.stage1.e2_0
    nx, ny = -np.sin(theta), np.cos(theta)
    return VehicleState(v_y=0.0, omega_r=0.0, x_c=x0 + e1 * nx, y_c=y0 + e1 * ny,
                        psi=theta + e2, v_x=scen.v_x)


def run_scenario(scenario: Scenario, params: VehicleParams, lqr_config: LqrConfig,
                 noise: NoiseSpec, seed, gains: LqrGains | None = None) -> RunRecord:
    """Simulate one closed-loop incident.

    seed may be an int or a numpy SeedSequence; identical seeds give
    bitwise-identical records. Invalid runs (lateral-acceleration guard)
    stop at the violation and carry no emissions.
    """
    if gains is None:
        gains = build_gain_table(lqr_config, params)
    res = scenario.resolve(noise)
    scen = scenario
    t_s = scen.t_s
    n_steps = int(round(res.duration / t_s))
    k_act = int(round(res.stage2_time / t_s))
    emit_period = max(1, int(round(scen.emission_period / t_s)))
    horizon = scen.prediction.horizon_steps

    seed_seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    sim_ss, pred_ss = seed_seq.spawn(2)
    rng = np.random.default_rng(sim_ss)

    q_sqrt = noise_sqrt(res.q_inject)
    r_sqrt = noise_sqrt(res.r_inject)
    geom = CornerGeometry.from_params(params, l_r=scen.lda.l_r,
                                      margin=scen.lda.contour_margin)
    scen.path.check_vehicle_fits(params.b_half)

    truth = np.zeros((n_steps + 1, dynamics.STATE_DIM))
    meas = np.zeros_like(truth)
    est = np.zeros_like(truth)
    applied = np.zeros(n_steps)
    nees_arr = np.zeros(n_steps)

    state = _initial_state(res, params)
    x = state.array()
    v_x = state.v_x
    truth[0] = x
    y0 = x + r_sqrt @ rng.standard_normal(dynamics.STATE_DIM)
    meas[0] = y0
    belief = ekf_init(y0, v_x, noise)
    est[0] = belief.mean.array()
    k_gain = None

    emissions = []
    emission_steps = [k for k in range(k_act, n_steps + 1, emit_period)
                      if k + horizon <= n_steps]
    pred_children = iter(pred_ss.spawn(max(1, len(emission_steps))))

    ay_max = 0.0
    valid = True
    reason = None
    stage1 = scen.stage1
    k_pulse = int(round(stage1.warmup / t_s)) if stage1.mode == "steering_pulse" else 0

    if 0 in emission_steps:
        emissions.append(_emit(0, belief, k_gain, gains, scen, params, noise, geom,
                               next(pred_children)))

    for k in range(1, n_steps + 1):
        if k - 1 < k_act:
            in_pulse = (stage1.mode == "steering_pulse" and k - 1 >= k_pulse)
            delta = stage1.pulse_delta if in_pulse else 0.0
        else:
            delta = predict_control(belief.mean, gains, scen.path)
        applied[k - 1] = delta

        ay = dynamics.lateral_acceleration(x, v_x, delta, params)
        ay_max = max(ay_max, ay)
        if ay >= LINEAR_REGIME_AY_LIMIT:
            valid = False
            reason = (f"linear-regime guard: |a_y|={ay:.2f} m/s^2 >= "
                      f"{LINEAR_REGIME_AY_LIMIT:.2f} at step {k}")
            truth = truth[:k]
            meas = meas[:k]
            est = est[:k]
            applied = applied[:k - 1]
            nees_arr = nees_arr[:k - 1]
            emissions = []
            n_steps = k - 1
            break

        x = dynamics.step_array(x, v_x, delta, params, t_s)
        x = x + q_sqrt @ rng.standard_normal(dynamics.STATE_DIM)
        truth[k] = x
        y = x + r_sqrt @ rng.standard_normal(dynamics.STATE_DIM)
        meas[k] = y
        belief, k_gain = ekf_step(belief, delta, y, params, noise, t_s)
        est[k] = belief.mean.array()
        nees_arr[k - 1] = nees(belief, x)

        if k in emission_steps:
            emissions.append(_emit(k, belief, k_gain, gains, scen, params, noise,
                                   geom, next(pred_children)))

    return RunRecord(
        seed_key=tuple(seed_seq.entropy) if isinstance(seed_seq.entropy, (list, tuple))
        else (seed_seq.entropy,),
        valid=valid, invalid_reason=reason, k_act=k_act, n_steps=n_steps, t_s=t_s,
        truth=truth, measurements=meas, estimates=est, applied_delta=applied,
        nees=nees_arr, ay_max=ay_max, emissions=emissions)


def _emit(k, belief, k_gain, gains, scen, params, noise, geom, pred_seed):
    if k_gain is None:
        k_gain = np.zeros((dynamics.STATE_DIM, dynamics.STATE_DIM))
    rng = np.random.default_rng(pred_seed)
    kpc = predict_kpc(belief, k_gain, gains, scen.path, params, noise,
                      scen.prediction, rng=rng, origin_step=k)
    ctrv_init, q_ctrv = ctrv_from_belief(belief, noise)
    ctrv = predict_ctrv(ctrv_init, q_ctrv, scen.prediction, origin_step=k)
    return Emission(k=k, kpc=kpc, ctrv=ctrv,
                    kpc_report=assess(kpc, scen.path, geom, scen.lda),
                    ctrv_report=assess(ctrv, scen.path, geom, scen.lda))


@dataclass
class McSummary:
    """Aggregates over the first emission of every valid run."""

    n_runs: int
    n_attempted: int
    n_excluded: int
    t_s: float
    horizon: int
    emit_every: int
    # per prediction step i (length = horizon)
    var_calc: np.ndarray        # mean over runs of the Eq.-based Y_fl variance
    var_sample: np.ndarray      # across-run variance of the Y_fl prediction error
    mse: np.ndarray             # across-run mean squared Y_fl prediction error
    acc_kpc: np.ndarray
    acc_ctrv: np.ndarray
    # raw per-run matrices (n_runs x horizon)
    y_fl_pred_kpc: np.ndarray
    y_fl_pred_ctrv: np.ndarray
    y_fl_truth: np.ndarray
    var_calc_runs: np.ndarray
    kpc_flags: np.ndarray
    ctrv_flags: np.ndarray
    truth_flags: np.ndarray
    ctrv_first_flag_time: np.ndarray    # seconds, inf when never
    nees_mean: np.ndarray               # per simulation step
    scatter: list                       # rows for scatter.csv
    exemplars: list                     # RunRecords kept for inspection


def _corner_y_fl(pose_array: np.ndarray, geom: CornerGeometry, v_x: float) -> float:
    pose = VehicleState(v_y=pose_array[0], omega_r=pose_array[1], x_c=pose_array[2],
                        y_c=pose_array[3], psi=pose_array[4], v_x=v_x)
    return corner_positions(pose, geom)["fl"][1]


def summarize_run(record: RunRecord, scen: Scenario, params: VehicleParams):
    """Per-run ingredients of the Monte Carlo aggregates (first emission)."""
    geom = CornerGeometry.from_params(params, l_r=scen.lda.l_r,
                                      margin=scen.lda.contour_margin)
    em = record.emissions[0]
    horizon = scen.prediction.horizon_steps
    k = em.k
    v_x = scen.v_x

    y_pred_kpc = np.zeros(horizon)
    y_pred_ctrv = np.zeros(horizon)
    y_true = np.zeros(horizon)
    var_calc = np.zeros(horizon)
    truth_flags = np.zeros(horizon, dtype=int)
    for j, step in enumerate(em.kpc.steps):
        mean = step.state.mean
        p = step.state.p
        bear = geom.bearing("fl", mean.psi)
        var_calc[j] = p[3, 3] + geom.l_fb ** 2 * np.cos(bear) ** 2 * p[4, 4]
        y_pred_kpc[j] = _corner_y_fl(mean.array(), geom, v_x)
    for j, step in enumerate(em.ctrv.steps):
        y_pred_ctrv[j] = _corner_y_fl(step.state.mean.array(), geom, v_x)
    for j in range(horizon):
        pose = record.truth[k + 1 + j]
        y_true[j] = _corner_y_fl(pose, geom, v_x)
        truth_flags[j] = truth_departure_flag(
            VehicleState(v_y=pose[0], omega_r=pose[1], x_c=pose[2], y_c=pose[3],
                         psi=pose[4], v_x=v_x),
            scen.path, geom, delta=scen.lda.delta)
    kpc_flags = em.kpc_report.aggregate_flags()
    ctrv_flags = em.ctrv_report.aggregate_flags()
    ff = em.ctrv_report.first_flag_step
    ff_time = np.inf if ff is None else ff * scen.t_s
    return dict(y_pred_kpc=y_pred_kpc, y_pred_ctrv=y_pred_ctrv, y_true=y_true,
                var_calc=var_calc, kpc_flags=kpc_flags, ctrv_flags=ctrv_flags,
                truth_flags=truth_flags, ctrv_first_flag_time=ff_time)


def _scatter_rows(run_idx, record, scen, params):
    """Rows (run, algo, i, t, corner, x, y) at the emission cadence."""
    geom = CornerGeometry.from_params(params, l_r=scen.lda.l_r,
                                      margin=scen.lda.contour_margin)
    em = record.emissions[0]
    rows = []
    every = scen.prediction.emit_every
    for algo, traj in (("kpc", em.kpc), ("ctrv", em.ctrv)):
        for step in traj.steps:
            if step.i % every:
                continue
            t = (em.k + step.i) * scen.t_s
            for cid, (cx, cy) in corner_positions(step.state.mean, geom).items():
                rows.append([run_idx, algo, step.i, t, cid, cx, cy])
            m = step.state.mean
            rows.append([run_idx, algo, step.i, t, "cg", m.x_c, m.y_c])
    for i in range(every, scen.prediction.horizon_steps + 1, every):
        pose = record.truth[em.k + i]
        t = (em.k + i) * scen.t_s
        st = VehicleState(v_y=pose[0], omega_r=pose[1], x_c=pose[2], y_c=pose[3],
                          psi=pose[4], v_x=scen.v_x)
        for cid, (cx, cy) in corner_positions(st, geom).items():
            rows.append([run_idx, "truth", i, t, cid, cx, cy])
        rows.append([run_idx, "truth", i, t, "cg", st.x_c, st.y_c])
    return rows


def _attempt(args):
    scenario, params, lqr_config, noise, gains, base_seed, idx = args
    seed_seq = np.random.SeedSequence([base_seed, idx])
    return idx, run_scenario(scenario, params, lqr_config, noise, seed_seq,
                             gains=gains)


def run_monte_carlo(scenario: Scenario, params: VehicleParams, lqr_config: LqrConfig,
                    noise: NoiseSpec, n_runs: int = 500, base_seed: int = 0,
                    jobs: int = 1, keep_records: int = 3,
                    max_attempt_factor: int = 4) -> McSummary:
    """Repeat the scenario until n_runs valid activations are collected.

    Per-run seeds derive from (base_seed, run_index) through numpy's
    SeedSequence, so serial and parallel execution aggregate identically.
    Invalid runs (guard violations) are excluded and replaced; if a full
    first wave produces no valid run the scenario is rejected.
    """
    if n_runs < 2:
        raise ValueError("n_runs must be >= 2")
    gains = build_gain_table(lqr_config, params)
    scenario.resolve(noise)   # validate early

    records = []   # (idx, record) for valid runs, in index order
    n_excluded = 0
    next_idx = 0
    max_attempts = max_attempt_factor * n_runs

    def handle(idx, record):
        nonlocal n_excluded
        if record.valid:
            records.append((idx, record))
        else:
            n_excluded += 1

    pool = None
    try:
        if jobs > 1:
            pool = concurrent.futures.ProcessPoolExecutor(max_workers=jobs)
        while len(records) < n_runs and next_idx < max_attempts:
            missing = n_runs - len(records)
            wave = list(range(next_idx, min(next_idx + max(missing, jobs), max_attempts)))
            next_idx = wave[-1] + 1
            args = [(scenario, params, lqr_config, noise, gains, base_seed, i)
                    for i in wave]
            if pool is not None:
                for idx, rec in pool.map(_attempt, args):
                    handle(idx, rec)
            else:
                for a in args:
                    handle(*_attempt(a))
            if not records and next_idx >= n_runs:
                raise RuntimeError("all runs invalid: scenario breaches the "
                                   "linear-regime guard on every attempt")
    finally:
        if pool is not None:
            pool.shutdown()
    if len(records) < n_runs:
        raise RuntimeError(
            f"only {len(records)} valid runs out of {max_attempts} attempts")

    records.sort(key=lambda pair: pair[0])
    records = records[:n_runs]

    horizon = scenario.prediction.horizon_steps
    per = [summarize_run(rec, scenario, params) for _, rec in records]
    y_kpc = np.array([p["y_pred_kpc"] for p in per])
    y_ctrv = np.array([p["y_pred_ctrv"] for p in per])
    y_true = np.array([p["y_true"] for p in per])
    var_calc_runs = np.array([p["var_calc"] for p in per])
    kpc_flags = np.array([p["kpc_flags"] for p in per])
    ctrv_flags = np.array([p["ctrv_flags"] for p in per])
    truth_flags = np.array([p["truth_flags"] for p in per])
    ff_times = np.array([p["ctrv_first_flag_time"] for p in per])

    err = y_kpc - y_true
    summary = McSummary(
        n_runs=n_runs, n_attempted=next_idx, n_excluded=n_excluded,
        t_s=scenario.t_s, horizon=horizon, emit_every=scenario.prediction.emit_every,
        var_calc=var_calc_runs.mean(axis=0),
        var_sample=err.var(axis=0, ddof=1),
        mse=(err ** 2).mean(axis=0),
        acc_kpc=(kpc_flags == truth_flags).mean(axis=0),
        acc_ctrv=(ctrv_flags == truth_flags).mean(axis=0),
        y_fl_pred_kpc=y_kpc, y_fl_pred_ctrv=y_ctrv, y_fl_truth=y_true,
        var_calc_runs=var_calc_runs, kpc_flags=kpc_flags, ctrv_flags=ctrv_flags,
        truth_flags=truth_flags, ctrv_first_flag_time=ff_times,
        nees_mean=np.mean([rec.nees for _, rec in records], axis=0),
        scatter=[row for idx, rec in records
                 for row in _scatter_rows(idx, rec, scenario, params)],
        exemplars=[rec for _, rec in records[:keep_records]])
    return summary


def accuracy_curve(summary: McSummary) -> dict:
    """Fraction of runs whose predicted flag matches the truth flag, per step."""
    return {
        "kpc": (summary.kpc_flags == summary.truth_flags).mean(axis=0),
        "ctrv": (summary.ctrv_flags == summary.truth_flags).mean(axis=0),
    }
