"""Multi-step trajectory predictors.

Three algorithms over a 2 s horizon:

* plain Kalman predictor (KP): control frozen at its origin value,
  open-loop covariance recursion;
* Kalman predictor with control (KPC): the deployed lane-keeping law is
  re-evaluated on the predicted states each step, the transition matrix
  takes its closed-loop form, and the covariance picks up an extra term
  for the control noise induced by future estimation error;
* CTRV: constant turn rate and velocity, the open-loop baseline.

All predictors are pure given an explicit RNG.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dynamics
from .control import LqrGains, control_law, error_jacobian, tracking_error
from .dynamics import STATE_DIM, VehicleParams, VehicleState
from .estimation import GaussianState, NoiseSpec, symmetrize_psd
from .lane import LanePath

OMEGA_STRAIGHT_EPS = 1e-6


@dataclass(frozen=True)
class PredictionConfig:
    horizon_steps: int = 200
    t_s: float = 0.01
    sim_noise_enabled: bool = True
    rng_seed: int = 0
    emit_every: int = 10   # output cadence for CSV rows (0.1 s at default t_s)

    def __post_init__(self):
        if self.horizon_steps < 1:
            raise ValueError("horizon_steps must be >= 1")
        if self.t_s <= 0.0:
            raise ValueError("t_s must be > 0")


@dataclass(frozen=True)
class PredictionStep:
    """One horizon step: index i, predicted belief, predicted control."""

    i: int
    state: GaussianState
    u_pred: float


@dataclass(frozen=True)
class PredictedTrajectory:
    algo: str                 # "kp" | "kpc" | "ctrv"
    origin_step: int
    steps: tuple

    def means(self) -> np.ndarray:
        return np.array([s.state.mean.array() for s in self.steps])

    def covariances(self) -> np.ndarray:
        return np.array([s.state.p for s in self.steps])

    def controls(self) -> np.ndarray:
        return np.array([s.u_pred for s in self.steps])


@dataclass(frozen=True)
class CtrvState:
    """CTRV state (x, y, speed, heading, turn rate) with 5x5 covariance."""

    x: float
    y: float
    v: float
    psi: float
    omega: float
    p_ctrv: np.ndarray = field(default_factory=lambda: np.zeros((5, 5)))

    def __post_init__(self):
        if self.v < 0.0:
            raise ValueError("CTRV speed must be >= 0")


def noise_sqrt(r: np.ndarray) -> np.ndarray:
    """Matrix square root of a PSD covariance for sampling."""
    try:
        return np.linalg.cholesky(r)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(r)
        return v * np.sqrt(np.clip(w, 0.0, None))


def simulate_estimation(x_hat: VehicleState, k_gain: np.ndarray, noise: NoiseSpec,
                        rng: np.random.Generator, r_sqrt=None) -> VehicleState:
    """Steady-state re-estimation of a noisy measurement of x_hat.

    Draws v_sim ~ N(0, R) and returns x_hat + K v_sim, with K the filter
    gain frozen at the prediction origin. The heading component is treated
    linearly (small-noise regime).
    """
    if r_sqrt is None:
        r_sqrt = noise_sqrt(noise.r)
    v_sim = r_sqrt @ rng.standard_normal(STATE_DIM)
    return x_hat.with_array(x_hat.array() + k_gain @ v_sim)


def predict_control(x_hat_sim: VehicleState, gains: LqrGains, path: LanePath) -> float:
    """Deployed control law evaluated on a (simulated-estimate) state."""
    err = tracking_error(x_hat_sim, path)
    kappa = path.project(x_hat_sim.x_c, x_hat_sim.y_c).kappa
    return control_law(err, gains, x_hat_sim.v_x, kappa)


def predict_plain(belief: GaussianState, u_k: float, params: VehicleParams,
                  noise: NoiseSpec, config: PredictionConfig,
                  origin_step: int = 0) -> PredictedTrajectory:
    """Multi-step predictor with the control input frozen at u_k."""
    t_s = config.t_s
    x = belief.mean.array()
    v_x = belief.mean.v_x
    p = belief.p.copy()
    mean = belief.mean
    steps = []
    for i in range(1, config.horizon_steps + 1):
        f_jac, _ = dynamics.jacobians(x, v_x, params)
        phi = np.eye(STATE_DIM) + f_jac * t_s
        x = x + t_s * dynamics.derivatives_array(x, v_x, u_k, params)
        p = symmetrize_psd(phi @ p @ phi.T + noise.q)
        mean = mean.with_array(x)
        steps.append(PredictionStep(i=i, state=GaussianState(mean=mean, p=p),
                                    u_pred=float(u_k)))
    return PredictedTrajectory(algo="kp", origin_step=origin_step, steps=tuple(steps))


def closed_loop_jacobian(state: VehicleState, gains: LqrGains, path: LanePath,
                         params: VehicleParams, saturated: bool = False):
    """d f_cl / d x with the feedback law folded in: F + B (du/dx).

    du/dx = -K_fb dE/dx, zero while the steering command is saturated.
    """
    x = state.array()
    f_jac, b_jac = dynamics.jacobians(x, state.v_x, params)
    if saturated:
        return f_jac
    du_dx = -gains.k_fb(state.v_x) @ error_jacobian(state, path)
    return f_jac + np.outer(b_jac, du_dx)


def predict_kpc(belief: GaussianState, k_gain: np.ndarray, gains: LqrGains,
                path: LanePath, params: VehicleParams, noise: NoiseSpec,
                config: PredictionConfig, rng: np.random.Generator | None = None,
                origin_step: int = 0) -> PredictedTrajectory:
    """Kalman predictor with control prediction and simulated estimation.

    Per step: a simulated estimate of the running mean (skipped when
    sim_noise_enabled is false), the control law on that estimate, an Euler
    state step, and the closed-loop covariance update

        P <- Phi_cl P Phi_cl^T + Q
             + t_s^2 (df/du) K_fb (dE/dx) P0 (dE/dx)^T K_fb^T (df/du)^T

    where P0 is the estimation covariance frozen at the origin step.
    """
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    t_s = config.t_s
    r_sqrt = noise_sqrt(noise.r)
    p0 = belief.p.copy()
    k_fb = gains.k_fb(belief.mean.v_x)
    _, b_jac = dynamics.jacobians(belief.mean.array(), belief.mean.v_x, params)
    bk = np.outer(b_jac, k_fb)   # 5x4, constant over the horizon

    mean = belief.mean
    p = p0.copy()
    steps = []
    for i in range(1, config.horizon_steps + 1):
        if config.sim_noise_enabled:
            x_sim = simulate_estimation(mean, k_gain, noise, rng, r_sqrt=r_sqrt)
        else:
            x_sim = mean
        u = predict_control(x_sim, gains, path)
        # saturation freezes du/dx: check the unsaturated command
        err = tracking_error(mean, path)
        kappa = path.project(mean.x_c, mean.y_c).kappa
        u_raw = gains.delta_ff(mean.v_x, kappa) - float(k_fb @ err.array())
        saturated = abs(u_raw) > gains.max_steer
        e_jac = error_jacobian(mean, path)
        f_cl = closed_loop_jacobian(mean, gains, path, params, saturated=saturated)
        phi_cl = np.eye(STATE_DIM) + t_s * f_cl
        inject = bk @ e_jac
        p = phi_cl @ p @ phi_cl.T + noise.q + (t_s * t_s) * (inject @ p0 @ inject.T)
        p = symmetrize_psd(p)
        mean = mean.with_array(
            mean.array() + t_s * dynamics.derivatives_array(
                mean.array(), mean.v_x, u, params))
        steps.append(PredictionStep(i=i, state=GaussianState(mean=mean, p=p),
                                    u_pred=float(u)))
    return PredictedTrajectory(algo="kpc", origin_step=origin_step, steps=tuple(steps))


def ctrv_from_belief(belief: GaussianState, q_scale: NoiseSpec) -> tuple:
    """Initial CTRV state and its process noise from an EKF posterior.

    Speed is sqrt(v_x^2 + v_y^2); heading and turn rate are taken directly.
    The covariance diagonal is permuted from the 5-state frame; the CTRV Q
    matches the 5-state Q magnitudes channel by channel.
    """
    m = belief.mean
    p5 = belief.p
    perm = (2, 3, 0, 4, 1)   # (x, y, v, psi, omega) <- 5-state indices
    p_ctrv = p5[np.ix_(perm, perm)]
    q5 = q_scale.q
    q_ctrv = np.diag([q5[2, 2], q5[3, 3], q5[0, 0], q5[4, 4], q5[1, 1]])
    init = CtrvState(x=m.x_c, y=m.y_c, v=float(np.hypot(m.v_x, m.v_y)),
                     psi=m.psi, omega=m.omega_r, p_ctrv=p_ctrv)
    return init, q_ctrv


def ctrv_transition(state: CtrvState, t_s: float):
    """One CTRV step: next state plus the 5x5 transition Jacobian.

    Switches to the straight-line form when |omega| < 1e-6 rad/s.
    """
    x, y, v, psi, w = state.x, state.y, state.v, state.psi, state.omega
    jac = np.eye(5)
    if abs(w) < OMEGA_STRAIGHT_EPS:
        sin_p, cos_p = np.sin(psi), np.cos(psi)
        nx = x + v * t_s * cos_p
        ny = y + v * t_s * sin_p
        jac[0, 2] = t_s * cos_p
        jac[0, 3] = -v * t_s * sin_p
        jac[0, 4] = -0.5 * v * t_s * t_s * sin_p
        jac[1, 2] = t_s * sin_p
        jac[1, 3] = v * t_s * cos_p
        jac[1, 4] = 0.5 * v * t_s * t_s * cos_p
    else:
        psi1 = psi + w * t_s
        sin0, cos0 = np.sin(psi), np.cos(psi)
        sin1, cos1 = np.sin(psi1), np.cos(psi1)
        nx = x + v / w * (sin1 - sin0)
        ny = y + v / w * (cos0 - cos1)
        jac[0, 2] = (sin1 - sin0) / w
        jac[0, 3] = v / w * (cos1 - cos0)
        jac[0, 4] = v * t_s * cos1 / w - v / (w * w) * (sin1 - sin0)
        jac[1, 2] = (cos0 - cos1) / w
        jac[1, 3] = v / w * (sin1 - sin0)
        jac[1, 4] = v * t_s * sin1 / w - v / (w * w) * (cos0 - cos1)
    jac[3, 4] = t_s
    nxt = CtrvState(x=float(nx), y=float(ny), v=v, psi=psi + w * t_s, omega=w,
                    p_ctrv=state.p_ctrv)
    return nxt, jac


def _ctrv_to_vehicle(state: CtrvState) -> tuple:
    """Map a CTRV state to the shared 5-state frame (v_y = 0 body frame)."""
    mean = VehicleState(v_y=0.0, omega_r=state.omega, x_c=state.x, y_c=state.y,
                        psi=state.psi, v_x=max(state.v, 1e-9))
    perm = (2, 4, 0, 1, 3)   # 5-state (v_y, w, X, Y, psi) <- ctrv indices
    p5 = state.p_ctrv[np.ix_(perm, perm)]
    return mean, p5


def predict_ctrv(init: CtrvState, noise_ctrv: np.ndarray, config: PredictionConfig,
                 origin_step: int = 0) -> PredictedTrajectory:
    """Open-loop CTRV rollout with EKF-style covariance propagation."""
    state = init
    p = init.p_ctrv.copy()
    steps = []
    for i in range(1, config.horizon_steps + 1):
        state, jac = ctrv_transition(state, config.t_s)
        p = symmetrize_psd(jac @ p @ jac.T + noise_ctrv)
        state = CtrvState(x=state.x, y=state.y, v=state.v, psi=state.psi,
                          omega=state.omega, p_ctrv=p)
        mean, p5 = _ctrv_to_vehicle(state)
        steps.append(PredictionStep(i=i, state=GaussianState(mean=mean, p=p5),
                                    u_pred=0.0))
    return PredictedTrajectory(algo="ctrv", origin_step=origin_step, steps=tuple(steps))


def trajectory_csv_rows(traj: PredictedTrajectory, t_s: float, emit_every: int = 10):
    """Downsampled CSV rows: algo,k,i,t,vy,wr,xc,yc,psi,u_pred,p00..p44."""
    rows = []
    for s in traj.steps:
        if s.i % emit_every != 0:
            continue
        m = s.state.mean.array()
        flat = s.state.p.reshape(-1)
        rows.append(
            [traj.algo, traj.origin_step, s.i, (traj.origin_step + s.i) * t_s]
            + [float(v) for v in m] + [float(s.u_pred)] + [float(v) for v in flat])
    return rows


TRAJECTORY_CSV_HEADER = (
    ["algo", "k", "i", "t", "vy", "wr", "xc", "yc", "psi", "u_pred"]
    + [f"p{r}{c}" for r in range(5) for c in range(5)])
