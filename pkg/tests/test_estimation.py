import numpy as np
import pytest
from scipy import stats

from lanedep.dynamics import VehicleParams, VehicleState, step
from lanedep.estimation import (GaussianState, NoiseSpec, ekf_correct, ekf_init,
                                ekf_predict, ekf_step, nees, symmetrize_psd)

PARAMS = VehicleParams()
VX = 8.333
TS = 0.01


def belief_at(x=None, p=None, v_x=VX) -> GaussianState:
    mean = VehicleState(v_x=v_x) if x is None else VehicleState(v_x=v_x).with_array(x)
    return GaussianState(mean=mean, p=np.eye(5) if p is None else p)


def test_noise_defaults():
    spec = NoiseSpec()
    np.testing.assert_array_equal(np.diag(spec.r), [1e-6, 1e-6, 1.0, 1.0, 1e-2])
    assert (np.diag(spec.q) > 0).all()


def test_noise_rejects_asymmetric():
    bad = np.eye(5)
    bad[0, 1] = 0.5
    with pytest.raises(ValueError):
        NoiseSpec(q=bad)


def test_predict_zero_dt_identity():
    noise = NoiseSpec(q=np.zeros((5, 5)))
    b = belief_at(x=np.array([0.1, 0.02, 1.0, 2.0, 0.05]))
    out = ekf_predict(b, 0.01, PARAMS, noise, 0.0)
    assert out is b


def test_predict_covariance_is_phi_phi_t():
    noise = NoiseSpec(q=np.zeros((5, 5)))
    b = belief_at(x=np.array([0.1, 0.02, 1.0, 2.0, 0.05]))
    out = ekf_predict(b, 0.0, PARAMS, noise, TS)
    from lanedep.dynamics import jacobians
    f_jac, _ = jacobians(b.mean.array(), VX, PARAMS)
    phi = np.eye(5) + f_jac * TS
    np.testing.assert_allclose(out.p, phi @ phi.T, atol=1e-12)


def test_predict_mean_matches_step():
    noise = NoiseSpec()
    b = belief_at(x=np.array([0.2, -0.05, 3.0, 1.5, -0.1]))
    out = ekf_predict(b, 0.03, PARAMS, noise, TS)
    expect = step(b.mean, 0.03, PARAMS, TS)
    np.testing.assert_array_equal(out.mean.array(), expect.array())


def test_correct_zero_innovation():
    noise = NoiseSpec()
    b = belief_at(x=np.array([0.1, 0.0, 5.0, 2.0, 0.02]), p=0.1 * np.eye(5))
    post, _ = ekf_correct(b, b.mean.array(), noise)
    np.testing.assert_allclose(post.mean.array(), b.mean.array(), atol=1e-15)


def test_correct_no_trust_limit():
    noise = NoiseSpec(r=1e12 * np.eye(5))
    b = belief_at(p=np.eye(5))
    y = b.mean.array() + 1.0
    post, gain = ekf_correct(b, y, noise)
    assert np.abs(gain).max() < 1e-9
    np.testing.assert_allclose(post.mean.array(), b.mean.array(), atol=1e-9)


def test_correct_scalar_algebra():
    # diagonal P and R reduce to the scalar gain p / (p + r) per channel
    noise = NoiseSpec(r=np.eye(5))
    b = belief_at(p=np.eye(5))
    y = b.mean.array() + np.array([1.0, 0.5, -1.0, 2.0, 0.1])
    post, gain = ekf_correct(b, y, noise)
    np.testing.assert_allclose(np.diag(gain), 0.5 * np.ones(5), atol=1e-12)
    np.testing.assert_allclose(np.diag(post.p), 0.5 * np.ones(5), atol=1e-12)


def test_correct_wraps_heading_innovation():
    noise = NoiseSpec()
    b = belief_at(x=np.array([0.0, 0.0, 0.0, 0.0, 0.1]), p=np.eye(5))
    y = b.mean.array().copy()
    y[4] += 2 * np.pi   # same physical heading
    post, _ = ekf_correct(b, y, noise)
    assert abs(post.mean.psi - 0.1) < 1e-9


def test_correct_rejects_nonfinite():
    noise = NoiseSpec()
    with pytest.raises(ValueError):
        ekf_correct(belief_at(), np.array([np.nan, 0, 0, 0, 0]), noise)


def test_gain_diag_in_unit_interval():
    noise = NoiseSpec()
    rng = np.random.default_rng(8)
    b = ekf_init(rng.normal(0, 1, 5), VX, noise)
    for _ in range(50):
        b = ekf_predict(b, 0.0, PARAMS, noise, TS)
        b, gain = ekf_correct(b, b.mean.array() + rng.normal(0, 0.01, 5), noise)
        d = np.diag(gain)
        assert (d >= 0).all() and (d <= 1.0 + 1e-12).all()


def test_noise_free_tracking_is_exact():
    # zero process noise, perfect initial state, perfect measurements
    noise = NoiseSpec(q=np.zeros((5, 5)))
    truth = VehicleState(v_y=0.05, omega_r=0.01, y_c=2.0, psi=0.02, v_x=VX)
    belief = GaussianState(mean=truth, p=np.zeros((5, 5)))
    for k in range(100):
        delta = 0.01 * np.sin(0.05 * k)
        truth = step(truth, delta, PARAMS, TS)
        belief, _ = ekf_step(belief, delta, truth.array(), PARAMS, noise, TS)
        np.testing.assert_allclose(belief.mean.array(), truth.array(),
                                   rtol=1e-12, atol=1e-14)


def test_covariance_stays_symmetric_psd():
    noise = NoiseSpec()
    rng = np.random.default_rng(9)
    b = ekf_init(rng.normal(0, 1, 5), VX, noise)
    for _ in range(200):
        b = ekf_predict(b, rng.normal(0, 0.02), PARAMS, noise, TS)
        b, _ = ekf_correct(b, b.mean.array() + rng.normal(0, 0.1, 5), noise)
        np.testing.assert_allclose(b.p, b.p.T, atol=1e-14)
        assert np.linalg.eigvalsh(b.p).min() >= -1e-10


def test_joseph_form_equivalence():
    # (I - K) P equals the Joseph form for the optimal gain
    rng = np.random.default_rng(10)
    noise = NoiseSpec()
    for _ in range(50):
        sqrt_p = rng.normal(0, 1, (5, 5))
        p = symmetrize_psd(sqrt_p @ sqrt_p.T)
        b = belief_at(p=p)
        post, gain = ekf_correct(b, b.mean.array() + rng.normal(0, 1, 5), noise)
        i_k = np.eye(5) - gain
        joseph = i_k @ p @ i_k.T + gain @ noise.r @ gain.T
        np.testing.assert_allclose(post.p, joseph, atol=1e-10)


def test_filter_beats_raw_measurements():
    # Monte Carlo: position RMSE of the posterior beats the raw measurement
    # RMSE after a 1 s warmup
    noise = NoiseSpec()
    r_sqrt = np.sqrt(np.diag(noise.r))
    q_sqrt = np.sqrt(np.diag(noise.q))
    est_sq = meas_sq = 0.0
    for run in range(50):
        rng = np.random.default_rng(100 + run)
        truth = VehicleState(y_c=2.0, v_x=VX)
        belief = ekf_init(truth.array() + rng.normal(0, 1, 5) * r_sqrt, VX, noise)
        for k in range(1, 200):
            delta = 0.01 if k < 100 else -0.01
            truth = truth.with_array(
                step(truth, delta, PARAMS, TS).array()
                + rng.normal(0, 1, 5) * q_sqrt)
            y = truth.array() + rng.normal(0, 1, 5) * r_sqrt
            belief, _ = ekf_step(belief, delta, y, PARAMS, noise, TS)
            if k >= 100:
                err = belief.mean.array() - truth.array()
                est_sq += err[2] ** 2 + err[3] ** 2
                meas_sq += (y[2] - truth.x_c) ** 2 + (y[3] - truth.y_c) ** 2
    assert est_sq < meas_sq


def test_nees_consistency_quick():
    # 100-run average NEES within the 95% chi-square band on a matched
    # linear-ish segment (straight driving)
    noise = NoiseSpec()
    r_sqrt = np.sqrt(np.diag(noise.r))
    q_sqrt = np.sqrt(np.diag(noise.q))
    n_runs, n_steps = 100, 150
    acc = np.zeros(n_steps)
    for run in range(n_runs):
        rng = np.random.default_rng(2000 + run)
        truth = VehicleState(y_c=2.0, v_x=VX)
        belief = ekf_init(truth.array() + rng.normal(0, 1, 5) * r_sqrt, VX, noise)
        for k in range(n_steps):
            truth = truth.with_array(
                step(truth, 0.0, PARAMS, TS).array() + rng.normal(0, 1, 5) * q_sqrt)
            y = truth.array() + rng.normal(0, 1, 5) * r_sqrt
            belief, _ = ekf_step(belief, 0.0, y, PARAMS, noise, TS)
            acc[k] += nees(belief, truth.array())
    mean_nees = acc / n_runs
    lo = stats.chi2.ppf(0.025, 5 * n_runs) / n_runs
    hi = stats.chi2.ppf(0.975, 5 * n_runs) / n_runs
    frac = ((mean_nees >= lo) & (mean_nees <= hi)).mean()
    assert frac >= 0.9
