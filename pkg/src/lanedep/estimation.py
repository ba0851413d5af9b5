"""Extended Kalman filter over the five-state single-track model.

Euler-discretized transition, full-state measurement (H = I), heading
innovation wrapped to (-pi, pi]. Beliefs are immutable values: every
update returns a new GaussianState.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dynamics
from .dynamics import STATE_DIM, VehicleParams, VehicleState
from .lane import wrap_angle

PSI_INDEX = 4

DEFAULT_R_DIAG = (1e-6, 1e-6, 1.0, 1.0, 1e-2)
# Process noise models mild position/heading disturbances (road
# irregularities, wind) and matches the simulator's truth injection so the
# filter stays chi-square consistent.
DEFAULT_Q_DIAG = (1e-8, 1e-8, 3e-5, 3e-5, 1e-7)


def _check_cov(mat: np.ndarray, name: str) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    if mat.shape != (STATE_DIM, STATE_DIM):
        raise ValueError(f"{name} must be {STATE_DIM}x{STATE_DIM}")
    if not np.allclose(mat, mat.T, atol=1e-10):
        raise ValueError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(mat).min() < -1e-10:
        raise ValueError(f"{name} must be positive semi-definite")
    return 0.5 * (mat + mat.T)


@dataclass(frozen=True)
class NoiseSpec:
    """Process / measurement noise covariances (both 5x5, PSD)."""

    q: np.ndarray = field(default_factory=lambda: np.diag(DEFAULT_Q_DIAG))
    r: np.ndarray = field(default_factory=lambda: np.diag(DEFAULT_R_DIAG))

    def __post_init__(self):
        object.__setattr__(self, "q", _check_cov(self.q, "Q"))
        object.__setattr__(self, "r", _check_cov(self.r, "R"))


@dataclass(frozen=True)
class GaussianState:
    """A vehicle-state mean with its 5x5 error covariance."""

    mean: VehicleState
    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        object.__setattr__(self, "p", 0.5 * (p + p.T))


def symmetrize_psd(p: np.ndarray) -> np.ndarray:
    """Symmetrize and clamp tiny negative eigenvalues to zero."""
    p = 0.5 * (p + p.T)
    if np.linalg.eigvalsh(p).min() < 0.0:
        w, v = np.linalg.eigh(p)
        p = (v * np.clip(w, 0.0, None)) @ v.T
        p = 0.5 * (p + p.T)
    return p


def ekf_init(y0: np.ndarray, v_x: float, noise: NoiseSpec) -> GaussianState:
    """Bootstrap the belief from the first measurement with P0 = R."""
    mean = VehicleState(v_x=v_x).with_array(np.asarray(y0, dtype=float))
    return GaussianState(mean=mean, p=noise.r.copy())


def ekf_predict(belief: GaussianState, delta_f: float, params: VehicleParams,
                noise: NoiseSpec, t_s: float) -> GaussianState:
    """Time update: Euler mean propagation, P <- Phi P Phi^T + Q.

    Phi is linearized at the prior mean. t_s == 0 returns the belief
    unchanged (identity case).
    """
    if t_s == 0.0:
        return belief
    x = belief.mean.array()
    v_x = belief.mean.v_x
    f_jac, _ = dynamics.jacobians(x, v_x, params)
    phi = np.eye(STATE_DIM) + f_jac * t_s
    x_pred = x + t_s * dynamics.derivatives_array(x, v_x, delta_f, params)
    p_pred = phi @ belief.p @ phi.T + noise.q
    return GaussianState(mean=belief.mean.with_array(x_pred),
                         p=symmetrize_psd(p_pred))


def ekf_correct(belief: GaussianState, y: np.ndarray, noise: NoiseSpec):
    """Measurement update with H = I; returns (posterior, gain K).

    The heading component of the innovation is wrapped to (-pi, pi].
    """
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("measurement must be finite")
    x = belief.mean.array()
    innovation = y - x
    innovation[PSI_INDEX] = wrap_angle(innovation[PSI_INDEX])
    s_mat = belief.p + noise.r
    try:
        gain = np.linalg.solve(s_mat.T, belief.p.T).T
    except np.linalg.LinAlgError as exc:
        raise ValueError("singular innovation covariance") from exc
    x_post = x + gain @ innovation
    p_post = (np.eye(STATE_DIM) - gain) @ belief.p
    posterior = GaussianState(mean=belief.mean.with_array(x_post),
                              p=symmetrize_psd(p_post))
    return posterior, gain


def ekf_step(belief: GaussianState, delta_f: float, y: np.ndarray,
             params: VehicleParams, noise: NoiseSpec, t_s: float):
    """One full predict-correct iteration; returns (posterior, gain K)."""
    prior = ekf_predict(belief, delta_f, params, noise, t_s)
    return ekf_correct(prior, y, noise)


def nees(belief: GaussianState, truth: np.ndarray) -> float:
    """Normalized estimation error squared against a known truth state."""
    err = belief.mean.array() - np.asarray(truth, dtype=float)
    err[PSI_INDEX] = wrap_angle(err[PSI_INDEX])
    return float(err @ np.linalg.solve(belief.p, err))


def steady_state_posterior(state: VehicleState, params: VehicleParams,
                           noise: NoiseSpec, t_s: float, iters: int = 2000,
                           tol: float = 1e-12):
    """Converged filter covariance and gain at a frozen linearization point.

    Iterates the predict/update covariance recursion until it stops moving;
    used to bootstrap predictions from states that never went through a
    filter pass.
    """
    f_jac, _ = dynamics.jacobians(state.array(), state.v_x, params)
    phi = np.eye(STATE_DIM) + f_jac * t_s
    p_post = noise.r.copy()
    gain = np.zeros((STATE_DIM, STATE_DIM))
    for _ in range(iters):
        p_prior = phi @ p_post @ phi.T + noise.q
        gain = np.linalg.solve((p_prior + noise.r).T, p_prior.T).T
        p_new = symmetrize_psd((np.eye(STATE_DIM) - gain) @ p_prior)
        if np.abs(p_new - p_post).max() < tol:
            p_post = p_new
            break
        p_post = p_new
    return p_post, gain
