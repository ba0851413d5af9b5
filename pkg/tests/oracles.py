"""Independent reference implementations used only by tests.

These deliberately avoid the library's own code paths: a classical RK4
integrator for the plant ODE, central finite differences for Jacobians,
and a brute-force steady-state probe for the feedforward steering.
"""
import numpy as np


def plant_rhs(x, v_x, delta_f, params):
    """Plant ODE written out independently of lanedep.dynamics."""
    v_y, w, _, _, psi = x
    m, i_z, a, b = params.m, params.i_z, params.a, params.b
    c_f, c_r = params.c_f, params.c_r
    f_yf = -c_f * ((v_y + a * w) / v_x - delta_f)
    f_yr = -c_r * (v_y - b * w) / v_x
    return np.array([
        (f_yf + f_yr) / m - v_x * w,
        (a * f_yf - b * f_yr) / i_z,
        v_x * np.cos(psi) - v_y * np.sin(psi),
        v_x * np.sin(psi) + v_y * np.cos(psi),
        w,
    ])


def rk4_step(x, v_x, delta_f, params, h):
    k1 = plant_rhs(x, v_x, delta_f, params)
    k2 = plant_rhs(x + 0.5 * h * k1, v_x, delta_f, params)
    k3 = plant_rhs(x + 0.5 * h * k2, v_x, delta_f, params)
    k4 = plant_rhs(x + h * k3, v_x, delta_f, params)
    return x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_integrate(x0, v_x, delta_profile, params, t_end, h):
    """Integrate with RK4 at step h; delta_profile maps time -> steering."""
    n = int(round(t_end / h))
    x = np.array(x0, dtype=float)
    for i in range(n):
        x = rk4_step(x, v_x, delta_profile(i * h), params, h)
    return x


def central_difference_jacobian(fun, x, eps=1e-6):
    """Central finite-difference Jacobian of fun: R^n -> R^m."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(fun(x))
    jac = np.zeros((f0.size, x.size))
    for j in range(x.size):
        hi = x.copy()
        lo = x.copy()
        hi[j] += eps
        lo[j] -= eps
        jac[:, j] = (np.asarray(fun(hi)) - np.asarray(fun(lo))) / (2.0 * eps)
    return jac


def steady_state_steering(v_x, kappa, params):
    """Equilibrium steering on a circle straight from the plant equations.

    On a steady orbit the yaw rate is v_x * kappa; solve the two lateral
    rows for (v_y, delta).
    """
    m, i_z, a, b = params.m, params.i_z, params.a, params.b
    c_f, c_r = params.c_f, params.c_r
    omega = v_x * kappa
    lhs = np.array([
        [-(c_f + c_r) / (m * v_x), c_f / m],
        [-(a * c_f - b * c_r) / (i_z * v_x), a * c_f / i_z],
    ])
    rhs = np.array([
        ((a * c_f - b * c_r) / (m * v_x) + v_x) * omega,
        (a * a * c_f + b * b * c_r) / (i_z * v_x) * omega,
    ])
    _, delta = np.linalg.solve(lhs, rhs)
    return float(delta)
