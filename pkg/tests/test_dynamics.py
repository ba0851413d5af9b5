import numpy as np
import pytest

from lanedep.dynamics import (VehicleParams, VehicleState, derivatives, jacobians,
                              linearize, step, tire_forces)

from oracles import (central_difference_jacobian, plant_rhs, rk4_integrate,
                     rk4_step)

PARAMS = VehicleParams()


def test_params_defaults():
    assert PARAMS.a == 1.13
    assert PARAMS.b == 1.55
    assert PARAMS.b_half == 0.93
    assert PARAMS.c_f == 1e5
    assert PARAMS.c_r == 2e5
    assert PARAMS.i_z == 3200.0
    assert PARAMS.l_f == 2.11
    assert PARAMS.m == 2030.0


def test_params_reject_nonpositive():
    with pytest.raises(ValueError):
        VehicleParams(m=-1.0)
    with pytest.raises(ValueError):
        VehicleParams(c_f=0.0)


def test_tire_forces_zero_state():
    ts = tire_forces(VehicleState(v_x=10.0), 0.0, PARAMS)
    assert ts.alpha_f == 0.0 and ts.alpha_r == 0.0
    assert ts.f_yf == 0.0 and ts.f_yr == 0.0


def test_tire_forces_direct_substitution():
    ts = tire_forces(VehicleState(v_y=0.5, v_x=10.0), 0.0, PARAMS)
    assert ts.alpha_f == pytest.approx(0.05)
    assert ts.alpha_r == pytest.approx(0.05)
    assert ts.f_yf == pytest.approx(-5000.0)
    assert ts.f_yr == pytest.approx(-10000.0)


def test_tire_forces_scalar_oracle():
    # frozen from a scalar evaluation of the slip/force law
    ts = tire_forces(VehicleState(omega_r=0.1, v_x=8.333), 0.02, PARAMS)
    assert ts.alpha_f == pytest.approx(-0.006439457578303134, abs=1e-15)
    assert ts.alpha_r == pytest.approx(-0.018600744029761192, abs=1e-15)
    assert ts.f_yf == pytest.approx(643.9457578303134, rel=1e-12)
    assert ts.f_yr == pytest.approx(3720.1488059522385, rel=1e-12)


def test_tire_forces_linear_law_identity():
    rng = np.random.default_rng(1)
    for _ in range(20):
        st = VehicleState(v_y=rng.normal(0, 0.5), omega_r=rng.normal(0, 0.1),
                          v_x=rng.uniform(2, 20))
        ts = tire_forces(st, rng.normal(0, 0.05), PARAMS)
        assert ts.f_yf == -PARAMS.c_f * ts.alpha_f
        assert ts.f_yr == -PARAMS.c_r * ts.alpha_r


def test_tire_forces_rejects_bad_vx():
    with pytest.raises(ValueError):
        VehicleState(v_x=0.0)
    with pytest.raises(ValueError):
        VehicleState(v_x=-3.0)


def test_derivatives_straight_coasting():
    dx = derivatives(VehicleState(v_x=8.333), 0.0, PARAMS)
    np.testing.assert_allclose(dx, [0, 0, 8.333, 0, 0], atol=1e-14)


def test_derivatives_rotated_heading():
    dx = derivatives(VehicleState(psi=np.pi / 2, v_x=8.333), 0.0, PARAMS)
    assert abs(dx[2]) < 1e-12
    assert dx[3] == pytest.approx(8.333)


def test_derivatives_match_reference_rhs():
    rng = np.random.default_rng(2)
    for _ in range(50):
        x = rng.normal(0, 1, 5)
        v_x = rng.uniform(3, 20)
        delta = rng.normal(0, 0.05)
        st = VehicleState(v_y=x[0], omega_r=x[1], x_c=x[2], y_c=x[3], psi=x[4],
                          v_x=v_x)
        np.testing.assert_allclose(derivatives(st, delta, PARAMS),
                                   plant_rhs(x, v_x, delta, PARAMS), rtol=1e-12)


def test_derivatives_match_differentiated_trajectory():
    # d/dt of a fine-step RK4 trajectory equals the reported derivative
    rng = np.random.default_rng(3)
    h = 3e-5
    for _ in range(10):
        x = rng.normal(0, 0.3, 5)
        v_x = rng.uniform(5, 15)
        delta = rng.normal(0, 0.03)
        st = VehicleState(v_y=x[0], omega_r=x[1], x_c=x[2], y_c=x[3], psi=x[4],
                          v_x=v_x)
        fwd = rk4_step(x, v_x, delta, PARAMS, h)
        bwd = rk4_step(x, v_x, delta, PARAMS, -h)
        num = (fwd - bwd) / (2 * h)
        scale = np.maximum(np.abs(num), 1.0)
        assert np.max(np.abs(derivatives(st, delta, PARAMS) - num) / scale) < 1e-6


def test_step_advances_position():
    st = step(VehicleState(v_x=8.333), 0.0, PARAMS, 0.01)
    assert st.x_c == pytest.approx(0.08333)
    assert st.v_y == 0.0 and st.psi == 0.0


def test_step_zero_dt_is_identity():
    st0 = VehicleState(v_y=0.3, omega_r=0.05, x_c=1.0, y_c=2.0, psi=0.2)
    assert step(st0, 0.04, PARAMS, 0.0) == st0


def test_step_keeps_vx():
    st = step(VehicleState(v_x=12.5), 0.1, PARAMS, 0.01)
    assert st.v_x == 12.5


def test_step_rejects_negative_dt():
    with pytest.raises(ValueError):
        step(VehicleState(), 0.0, PARAMS, -0.01)


def test_euler_vs_rk4_step_steer():
    # 2 s of Euler at 10 ms against RK4 at 0.1 ms on a 0.05 rad step steer;
    # measured discretization gap is 1.1 cm in Y, bounded at 2 cm
    x = np.zeros(5)
    st = VehicleState(v_x=8.333)
    for _ in range(200):
        st = step(st, 0.05, PARAMS, 0.01)
    ref = rk4_integrate(x, 8.333, lambda t: 0.05, PARAMS, 2.0, 1e-4)
    assert abs(st.x_c - ref[2]) < 0.02
    assert abs(st.y_c - ref[3]) < 0.02


def test_euler_vs_rk4_default_incident():
    # the default scenario's open-loop stage: pulse then release
    def profile(t):
        return 0.008 if t < 1.0 else 0.0

    st = VehicleState(v_x=8.333)
    for k in range(200):
        st = step(st, profile(k * 0.01), PARAMS, 0.01)
    ref = rk4_integrate(np.zeros(5), 8.333, profile, PARAMS, 2.0, 1e-4)
    assert abs(st.x_c - ref[2]) < 0.02
    assert abs(st.y_c - ref[3]) < 0.02
    assert abs(st.psi - ref[4]) < 1e-3


def test_linearize_known_entries():
    st = VehicleState(v_x=8.333)
    model = linearize(st, 0.0, PARAMS, 0.01)
    assert model.f_jac[0, 0] == pytest.approx(-17.73469953576468)
    np.testing.assert_allclose(model.b_jac,
                               [49.26108374384237, 35.3125, 0.0, 0.0, 0.0],
                               rtol=1e-12)
    np.testing.assert_allclose(model.phi, np.eye(5) + model.f_jac * 0.01)


def test_jacobians_match_finite_differences():
    rng = np.random.default_rng(4)
    for _ in range(100):
        x = rng.normal(0, 1, 5)
        v_x = rng.uniform(3, 20)
        delta = rng.normal(0, 0.05)
        f_jac, b_jac = jacobians(x, v_x, PARAMS)

        num_f = central_difference_jacobian(
            lambda xx: plant_rhs(xx, v_x, delta, PARAMS), x)
        assert np.max(np.abs(f_jac - num_f)) < 1e-4

        num_b = central_difference_jacobian(
            lambda dd: plant_rhs(x, v_x, dd[0], PARAMS), np.array([delta]))
        assert np.max(np.abs(b_jac - num_b[:, 0])) < 1e-4


def test_zero_lateral_state_is_equilibrium():
    rng = np.random.default_rng(5)
    for _ in range(20):
        st = VehicleState(x_c=rng.normal(0, 10), y_c=rng.normal(0, 10),
                          v_x=rng.uniform(2, 25))
        dx = derivatives(st, 0.0, PARAMS)
        assert dx[0] == 0.0 and dx[1] == 0.0 and dx[4] == 0.0
