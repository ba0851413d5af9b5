"""LQR lane-keeping controller.

Tracking-error model in x_err = [e1, e1', e2, e2'], continuous algebraic
Riccati feedback, curvature feedforward from the 2x2 equilibrium system,
and a speed-indexed gain table with linear interpolation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .dynamics import VehicleParams, VehicleState
from .lane import LanePath, wrap_angle

ERROR_DIM = 4


class RiccatiError(Exception):
    """Riccati solve failed or left an unacceptable residual."""


@dataclass(frozen=True)
class TrackingError:
    """Lateral / heading tracking errors and their rates.

    e1 > 0 means the CG is left of the centreline.
    """

    e1: float
    e1_dot: float
    e2: float
    e2_dot: float

    def array(self) -> np.ndarray:
        return np.array([self.e1, self.e1_dot, self.e2, self.e2_dot])


@dataclass(frozen=True)
class LqrConfig:
    """LQR weights plus the speed grid the gain table is built on."""

    w1: np.ndarray = field(default_factory=lambda: np.diag([1.0, 0.0, 1.0, 0.0]))
    w2: float = 200.0
    speed_grid: np.ndarray = field(
        default_factory=lambda: np.arange(5.0, 60.0 + 1e-9, 5.0) / 3.6)
    max_steer: float = 0.6
    feedback_scale: float = 1.0   # debug knob; 0 reduces the law to feedforward

    def __post_init__(self):
        w1 = np.asarray(self.w1, dtype=float)
        grid = np.asarray(self.speed_grid, dtype=float)
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "speed_grid", grid)
        if w1.shape != (ERROR_DIM, ERROR_DIM):
            raise ValueError("w1 must be 4x4")
        if not np.allclose(w1, w1.T):
            raise ValueError("w1 must be symmetric")
        if np.linalg.eigvalsh(w1).min() < -1e-12:
            raise ValueError("w1 must be positive semi-definite")
        if self.w2 <= 0.0:
            raise ValueError("w2 must be > 0")
        if grid.ndim != 1 or grid.size < 1 or np.any(np.diff(grid) <= 0.0):
            raise ValueError("speed_grid must be ascending with length >= 1")


def error_model(v_x: float, params: VehicleParams):
    """(A, B1, B2) of  x_err' = A x_err + B1 delta_f + B2 psi_dot_des."""
    if v_x <= 0.0:
        raise ValueError("error_model requires v_x > 0")
    m, i_z, a, b = params.m, params.i_z, params.a, params.b
    c_f, c_r = params.c_f, params.c_r
    a_mat = np.zeros((ERROR_DIM, ERROR_DIM))
    a_mat[0, 1] = 1.0
    a_mat[1, 1] = -(c_f + c_r) / (m * v_x)
    a_mat[1, 2] = (c_f + c_r) / m
    a_mat[1, 3] = -(a * c_f - b * c_r) / (m * v_x)
    a_mat[2, 3] = 1.0
    a_mat[3, 1] = -(a * c_f - b * c_r) / (i_z * v_x)
    a_mat[3, 2] = (a * c_f - b * c_r) / i_z
    a_mat[3, 3] = -(a * a * c_f + b * b * c_r) / (i_z * v_x)
    b1 = np.array([0.0, c_f / m, 0.0, a * c_f / i_z])
    b2 = np.array([
        0.0,
        -(a * c_f - b * c_r) / (m * v_x) - v_x,
        0.0,
        -(a * a * c_f + b * b * c_r) / (i_z * v_x),
    ])
    return a_mat, b1, b2


def riccati_residual(p_star, a_mat, b1, w1, w2) -> float:
    b1c = b1.reshape(-1, 1)
    res = (-p_star @ a_mat - a_mat.T @ p_star
           + p_star @ b1c @ b1c.T @ p_star / w2 - w1)
    return float(np.abs(res).max())


def solve_riccati(a_mat, b1, w1, w2, residual_tol: float = 1e-8) -> np.ndarray:
    """Stabilizing solution of the continuous algebraic Riccati equation.

    Delegates to scipy and rejects any result whose max-norm residual
    exceeds residual_tol.
    """
    b1c = np.asarray(b1, dtype=float).reshape(-1, 1)
    try:
        p_star = scipy.linalg.solve_continuous_are(
            a_mat, b1c, np.asarray(w1, dtype=float), np.array([[float(w2)]]))
    except Exception as exc:
        raise RiccatiError(f"Riccati solve failed: {exc}") from exc
    p_star = 0.5 * (p_star + p_star.T)
    residual = riccati_residual(p_star, a_mat, b1c.ravel(), np.asarray(w1), w2)
    if not np.isfinite(residual) or residual > residual_tol:
        raise RiccatiError(f"Riccati failed: residual {residual:.3e} > {residual_tol:.1e}")
    return p_star


def feedforward(v_x: float, kappa: float, params: VehicleParams) -> float:
    """Equilibrium steering for path curvature kappa at speed v_x.

    Solves the stationary error model with e1 = e1' = e2' = 0 for the two
    unknowns (e2_eq, delta_eq) using the two dynamic rows, with the desired
    yaw rate v_x * kappa.
    """
    if kappa == 0.0:
        return 0.0
    a_mat, b1, b2 = error_model(v_x, params)
    lhs = np.array([[a_mat[1, 2], b1[1]],
                    [a_mat[3, 2], b1[3]]])
    rhs = -v_x * kappa * np.array([b2[1], b2[3]])
    try:
        _, delta_eq = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise RiccatiError(f"singular feedforward equilibrium at v_x={v_x}") from exc
    return float(delta_eq)


@dataclass(frozen=True)
class LqrGains:
    """Immutable gain table: one feedback row-vector per grid speed.

    Queries interpolate linearly per component between grid speeds and
    clamp outside the grid.
    """

    speed_grid: np.ndarray
    k_table: np.ndarray          # n_speeds x 4
    params: VehicleParams
    max_steer: float = 0.6

    def k_fb(self, v_x: float) -> np.ndarray:
        grid = self.speed_grid
        if v_x <= grid[0]:
            return self.k_table[0]
        if v_x >= grid[-1]:
            return self.k_table[-1]
        j = int(np.searchsorted(grid, v_x)) - 1
        if grid[j + 1] == v_x:
            return self.k_table[j + 1]
        frac = (v_x - grid[j]) / (grid[j + 1] - grid[j])
        return (1.0 - frac) * self.k_table[j] + frac * self.k_table[j + 1]

    def delta_ff(self, v_x: float, kappa: float) -> float:
        return feedforward(v_x, kappa, self.params)


def build_gain_table(config: LqrConfig, params: VehicleParams) -> LqrGains:
    """Solve the Riccati equation per grid speed and assemble the table.

    With feedback_scale == 1 the closed-loop error matrix A - B1 K must be
    Hurwitz at every grid speed; a failure names the offending speed.
    """
    rows = []
    for v in config.speed_grid:
        a_mat, b1, _ = error_model(float(v), params)
        try:
            p_star = solve_riccati(a_mat, b1, config.w1, config.w2)
        except RiccatiError as exc:
            raise RiccatiError(f"gain table failed at v_x={v:.3f} m/s: {exc}") from exc
        k_row = config.feedback_scale * (b1 @ p_star) / config.w2
        if config.feedback_scale == 1.0:
            eig = np.linalg.eigvals(a_mat - np.outer(b1, k_row))
            if eig.real.max() >= 0.0:
                raise RiccatiError(
                    f"closed loop not Hurwitz at v_x={v:.3f} m/s (max Re {eig.real.max():.3e})")
        rows.append(k_row)
    return LqrGains(speed_grid=np.asarray(config.speed_grid, dtype=float),
                    k_table=np.array(rows), params=params,
                    max_steer=config.max_steer)


def tracking_error(state: VehicleState, path: LanePath) -> TrackingError:
    """Tracking errors of a vehicle state against the lane centreline."""
    p = path.project(state.x_c, state.y_c)
    e2 = wrap_angle(state.psi - p.theta)
    return TrackingError(
        e1=p.offset_left,
        e1_dot=state.v_y + state.v_x * e2,
        e2=e2,
        e2_dot=state.omega_r - state.v_x * p.kappa,
    )


def error_jacobian(state: VehicleState, path: LanePath) -> np.ndarray:
    """4x5 Jacobian dE/dx of the tracking error wrt [v_y, w_r, X, Y, psi].

    For straight segments the position block is constant; on arcs the
    heading-error rows pick up the curvature of the projection point.
    """
    p = path.project(state.x_c, state.y_c)
    sin_t, cos_t = np.sin(p.theta), np.cos(p.theta)
    # de2/d(x,y): the projection heading turns with arc length on arcs
    denom = 1.0 - p.kappa * p.offset_left
    if abs(denom) < 1e-9:
        denom = np.copysign(1e-9, denom)
    de2_dx = -p.kappa * cos_t / denom
    de2_dy = -p.kappa * sin_t / denom
    jac = np.zeros((ERROR_DIM, 5))
    jac[0, 2] = -sin_t
    jac[0, 3] = cos_t
    jac[1, 0] = 1.0
    jac[1, 2] = state.v_x * de2_dx
    jac[1, 3] = state.v_x * de2_dy
    jac[1, 4] = state.v_x
    jac[2, 2] = de2_dx
    jac[2, 3] = de2_dy
    jac[2, 4] = 1.0
    jac[3, 1] = 1.0
    return jac


def control_law(error: TrackingError, gains: LqrGains, v_x: float,
                kappa: float) -> float:
    """Total steering: feedforward minus state feedback, saturated."""
    delta = gains.delta_ff(v_x, kappa) - float(gains.k_fb(v_x) @ error.array())
    return float(np.clip(delta, -gains.max_steer, gains.max_steer))


def gain_table_csv(gains: LqrGains, config: LqrConfig, params: VehicleParams) -> str:
    """Render the gain table as CSV: speed_mps, k1..k4, note."""
    lines = ["speed_mps,k1,k2,k3,k4,note"]
    for v, k_row in zip(gains.speed_grid, gains.k_table):
        a_mat, b1, _ = error_model(float(v), params)
        if config.feedback_scale == 1.0:
            p_star = solve_riccati(a_mat, b1, config.w1, config.w2)
            note = f"residual={riccati_residual(p_star, a_mat, b1, config.w1, config.w2):.2e}"
        else:
            note = f"feedback_scale={config.feedback_scale}"
        vals = ",".join(repr(float(k)) for k in k_row)
        lines.append(f"{float(v)!r},{vals},{note}")
    return "\n".join(lines) + "\n"
