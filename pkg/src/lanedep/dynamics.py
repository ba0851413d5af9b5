"""Nonlinear single-track vehicle plant.

Lateral/yaw dynamics with linear tyres, planar kinematics in an inertial
East-North frame, forward-Euler stepping, and the analytic Jacobians used
by the estimator and the predictors.

State vector order everywhere: [v_y, omega_r, X_c, Y_c, psi].
Longitudinal speed v_x is constant within a run and is carried alongside
the state, never integrated.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

STATE_DIM = 5
GRAVITY = 9.81


@dataclass(frozen=True)
class VehicleParams:
    """Single-track parameters. Defaults are a mid-size sedan.

    m: mass [kg]; i_z: yaw inertia [kg m^2]; a/b: CG to front/rear axle [m];
    c_f/c_r: front/rear axle cornering stiffness [N/rad]; l_f: CG to front
    contour edge [m]; b_half: half vehicle width [m].
    """

    m: float = 2030.0
    i_z: float = 3200.0
    a: float = 1.13
    b: float = 1.55
    c_f: float = 1e5
    c_r: float = 2e5
    l_f: float = 2.11
    b_half: float = 0.93

    def __post_init__(self):
        for name in ("m", "i_z", "a", "b", "c_f", "c_r", "l_f", "b_half"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"VehicleParams.{name} must be > 0")


@dataclass(frozen=True)
class VehicleState:
    """Vehicle state: lateral velocity, yaw rate, CG position, heading.

    psi is stored unwrapped; consumers must tolerate any real value.
    """

    v_y: float = 0.0
    omega_r: float = 0.0
    x_c: float = 0.0
    y_c: float = 0.0
    psi: float = 0.0
    v_x: float = 8.333

    def __post_init__(self):
        if self.v_x <= 0.0:
            raise ValueError("VehicleState.v_x must be > 0")

    def array(self) -> np.ndarray:
        return np.array([self.v_y, self.omega_r, self.x_c, self.y_c, self.psi])

    def with_array(self, x) -> "VehicleState":
        return replace(
            self, v_y=float(x[0]), omega_r=float(x[1]), x_c=float(x[2]),
            y_c=float(x[3]), psi=float(x[4]),
        )


@dataclass(frozen=True)
class TireState:
    alpha_f: float
    alpha_r: float
    f_yf: float
    f_yr: float


@dataclass(frozen=True)
class LinearizedModel:
    """State/input Jacobians of the plant and the Euler transition matrix."""

    f_jac: np.ndarray   # 5x5, d f / d x
    b_jac: np.ndarray   # 5,   d f / d u
    phi: np.ndarray     # 5x5, I + f_jac * t_s


def tire_forces(state: VehicleState, delta_f: float, params: VehicleParams) -> TireState:
    """Front/rear slip angles and linear lateral tyre forces."""
    if state.v_x <= 0.0:
        raise ValueError("tire_forces requires v_x > 0")
    alpha_f = (state.v_y + params.a * state.omega_r) / state.v_x - delta_f
    alpha_r = (state.v_y - params.b * state.omega_r) / state.v_x
    return TireState(
        alpha_f=alpha_f,
        alpha_r=alpha_r,
        f_yf=-params.c_f * alpha_f,
        f_yr=-params.c_r * alpha_r,
    )


def derivatives_array(x: np.ndarray, v_x: float, delta_f: float,
                      params: VehicleParams) -> np.ndarray:
    """Time derivatives of the raw state array (hot path, no dataclass)."""
    if v_x <= 0.0:
        raise ValueError("derivatives requires v_x > 0")
    v_y, omega_r, _, _, psi = x
    m, i_z, a, b = params.m, params.i_z, params.a, params.b
    c_f, c_r = params.c_f, params.c_r
    sin_psi = np.sin(psi)
    cos_psi = np.cos(psi)
    return np.array([
        -(c_f + c_r) / (m * v_x) * v_y
        - ((a * c_f - b * c_r) / (m * v_x) + v_x) * omega_r
        + c_f / m * delta_f,
        -(a * c_f - b * c_r) / (i_z * v_x) * v_y
        - (a * a * c_f + b * b * c_r) / (i_z * v_x) * omega_r
        + a * c_f / i_z * delta_f,
        v_x * cos_psi - v_y * sin_psi,
        v_x * sin_psi + v_y * cos_psi,
        omega_r,
    ])


def derivatives(state: VehicleState, delta_f: float, params: VehicleParams) -> np.ndarray:
    """Time derivatives [v_y', omega_r', X_c', Y_c', psi'] of the state."""
    return derivatives_array(state.array(), state.v_x, delta_f, params)


def step_array(x: np.ndarray, v_x: float, delta_f: float, params: VehicleParams,
               t_s: float) -> np.ndarray:
    """One forward-Euler step on the raw state array."""
    if t_s < 0.0:
        raise ValueError("step requires t_s >= 0")
    if t_s == 0.0:
        return x.copy()
    return x + t_s * derivatives_array(x, v_x, delta_f, params)


def step(state: VehicleState, delta_f: float, params: VehicleParams,
         t_s: float) -> VehicleState:
    """Forward-Euler step; v_x is carried through unchanged."""
    return state.with_array(step_array(state.array(), state.v_x, delta_f, params, t_s))


def jacobians(x: np.ndarray, v_x: float, params: VehicleParams):
    """Analytic (d f/d x, d f/d u) at a raw state array.

    Rows 0-1 are state independent; rows 2-3 depend on (v_y, psi).
    """
    if v_x <= 0.0:
        raise ValueError("linearize requires v_x > 0")
    v_y, _, _, _, psi = x
    m, i_z, a, b = params.m, params.i_z, params.a, params.b
    c_f, c_r = params.c_f, params.c_r
    sin_psi = np.sin(psi)
    cos_psi = np.cos(psi)

    f_jac = np.zeros((STATE_DIM, STATE_DIM))
    f_jac[0, 0] = -(c_f + c_r) / (m * v_x)
    f_jac[0, 1] = -((a * c_f - b * c_r) / (m * v_x) + v_x)
    f_jac[1, 0] = -(a * c_f - b * c_r) / (i_z * v_x)
    f_jac[1, 1] = -(a * a * c_f + b * b * c_r) / (i_z * v_x)
    f_jac[2, 0] = -sin_psi
    f_jac[2, 4] = -v_x * sin_psi - v_y * cos_psi
    f_jac[3, 0] = cos_psi
    f_jac[3, 4] = v_x * cos_psi - v_y * sin_psi
    f_jac[4, 1] = 1.0

    b_jac = np.array([c_f / m, a * c_f / i_z, 0.0, 0.0, 0.0])
    return f_jac, b_jac


def linearize(state: VehicleState, delta_f: float, params: VehicleParams,
              t_s: float) -> LinearizedModel:
    """Jacobians at the given state plus the Euler transition Phi = I + F*t_s.

    delta_f is accepted for interface symmetry; the plant is affine in the
    input so the Jacobians do not depend on it.
    """
    f_jac, b_jac = jacobians(state.array(), state.v_x, params)
    phi = np.eye(STATE_DIM) + f_jac * t_s
    return LinearizedModel(f_jac=f_jac, b_jac=b_jac, phi=phi)


def lateral_acceleration(x: np.ndarray, v_x: float, delta_f: float,
                         params: VehicleParams) -> float:
    """|a_y| = |v_y' + v_x * omega_r|, the linear-regime guard quantity."""
    dx = derivatives_array(x, v_x, delta_f, params)
    return abs(dx[0] + v_x * x[1])


LINEAR_REGIME_AY_LIMIT = 0.4 * GRAVITY
