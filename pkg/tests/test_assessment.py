import numpy as np
import pytest
from scipy.stats import norm

from lanedep.assessment import (CornerGeometry, LdaConfig, assess,
                                corner_distribution, corner_positions,
                                departure_flag, marginal_distance,
                                truth_departure_flag)
from lanedep.dynamics import VehicleParams, VehicleState
from lanedep.estimation import GaussianState
from lanedep.lane import LanePath, Segment
from lanedep.prediction import PredictedTrajectory, PredictionStep

PARAMS = VehicleParams()
GEOM = CornerGeometry.from_params(PARAMS)          # no inflation margin
PATH = LanePath.straight(y=2.0, lane_width=4.0)


def pose(x=0.0, y=0.0, psi=0.0):
    return VehicleState(x_c=x, y_c=y, psi=psi, v_x=8.333)


def make_trajectory(states, variances):
    steps = []
    for i, (st, var) in enumerate(zip(states, variances), start=1):
        p = np.zeros((5, 5))
        p[2, 2], p[3, 3], p[4, 4] = var
        steps.append(PredictionStep(i=i, state=GaussianState(mean=st, p=p),
                                    u_pred=0.0))
    return PredictedTrajectory(algo="kpc", origin_step=0, steps=tuple(steps))


# --- corner positions --------------------------------------------------------

def test_front_left_corner_at_zero_heading():
    corners = corner_positions(pose(), GEOM)
    assert corners["fl"][0] == pytest.approx(2.11)
    assert corners["fl"][1] == pytest.approx(0.93)
    assert corners["fr"] == pytest.approx((2.11, -0.93))


def test_corners_rotate_ninety_degrees():
    corners = corner_positions(pose(psi=np.pi / 2), GEOM)
    assert corners["fl"][0] == pytest.approx(-0.93)
    assert corners["fl"][1] == pytest.approx(2.11)


def test_corners_match_rotation_matrix_oracle():
    rng = np.random.default_rng(1)
    body = {"fl": (PARAMS.l_f, PARAMS.b_half), "fr": (PARAMS.l_f, -PARAMS.b_half),
            "rl": (-2.49, PARAMS.b_half), "rr": (-2.49, -PARAMS.b_half)}
    for _ in range(50):
        psi = rng.normal(0, 1.5)
        x, y = rng.normal(0, 10, 2)
        rot = np.array([[np.cos(psi), -np.sin(psi)], [np.sin(psi), np.cos(psi)]])
        corners = corner_positions(pose(x, y, psi), GEOM)
        for cid, off in body.items():
            expect = np.array([x, y]) + rot @ np.array(off)
            np.testing.assert_allclose(corners[cid], expect, atol=1e-12)


def test_inflation_margin_grows_contour():
    inflated = CornerGeometry.from_params(PARAMS, margin=0.05)
    assert inflated.l_fb > GEOM.l_fb
    assert inflated.l_rb > GEOM.l_rb
    c0 = corner_positions(pose(), GEOM)["fl"]
    c1 = corner_positions(pose(), inflated)["fl"]
    assert c1[0] > c0[0] and c1[1] > c0[1]


# --- corner distributions ----------------------------------------------------

def test_corner_variance_zero_heading_noise():
    _, vx, vy = corner_distribution(pose(), 0.01, 0.02, 0.0, GEOM, "fl")
    assert vx == pytest.approx(0.01)
    assert vy == pytest.approx(0.02)


def test_corner_variance_bearing_at_ninety():
    # bearing psi+phi = pi/2 makes cos^2 vanish: var_y is the CG variance
    psi = np.pi / 2 - GEOM.phi_front
    _, vx, vy = corner_distribution(pose(psi=psi), 0.01, 0.02, 0.04, GEOM, "fl")
    assert vy == pytest.approx(0.02)
    assert vx == pytest.approx(0.01 + GEOM.l_fb ** 2 * 0.04)


@pytest.mark.parametrize("sigma_psi", [0.02, 0.05])
def test_corner_variance_monte_carlo(sigma_psi):
    rng = np.random.default_rng(42)
    base = pose(x=3.0, y=1.0, psi=0.3)
    sx, sy = 0.1, 0.12
    n = 100_000
    xs = base.x_c + sx * rng.standard_normal(n)
    ys = base.y_c + sy * rng.standard_normal(n)
    psis = base.psi + sigma_psi * rng.standard_normal(n)
    bear = psis + GEOM.phi_front
    cx = xs + GEOM.l_fb * np.cos(bear)
    cy = ys + GEOM.l_fb * np.sin(bear)
    _, vx, vy = corner_distribution(base, sx ** 2, sy ** 2, sigma_psi ** 2,
                                    GEOM, "fl")
    assert vx == pytest.approx(cx.var(ddof=1), rel=0.02)
    assert vy == pytest.approx(cy.var(ddof=1), rel=0.02)


# --- marginal distance -------------------------------------------------------

def test_marginal_distance_axis_aligned():
    d_hat, s2 = marginal_distance((0.0, 3.0), 0.5, 0.04, PATH, "left")
    assert d_hat == pytest.approx(1.0)
    assert s2 == pytest.approx(0.04)   # dD/dx = 0 on the East-bound line


def test_marginal_distance_on_the_line():
    d_hat, _ = marginal_distance((0.0, 4.0), 0.1, 0.1, PATH, "left")
    assert d_hat == pytest.approx(0.0)


def test_marginal_distance_rotated_line_oracle():
    theta = 0.3
    path = LanePath(segments=(Segment(x0=0.0, y0=0.0, theta=theta, length=200.0),),
                    lane_width=4.0)
    rng = np.random.default_rng(2)
    n_vec = np.array([-np.sin(theta), np.cos(theta)])
    t_vec = np.array([np.cos(theta), np.sin(theta)])
    for _ in range(100):
        p = rng.uniform(5, 150) * t_vec + rng.uniform(-1.8, 1.8) * n_vec
        d_hat, s2 = marginal_distance((p[0], p[1]), 0.09, 0.16, path, "left")
        # independent point-line arithmetic
        expect = 2.0 - float(n_vec @ p)
        assert d_hat == pytest.approx(expect, abs=1e-9)
        assert s2 == pytest.approx(
            np.sin(theta) ** 2 * 0.09 + np.cos(theta) ** 2 * 0.16)


# --- flag rule ---------------------------------------------------------------

def test_flag_rule_examples():
    lda = LdaConfig()
    assert departure_flag(1.0, 0.2, lda) == 0   # 1.0 - 0.6 >= 0
    assert departure_flag(0.5, 0.2, lda) == 1   # 0.5 - 0.6 < 0


def test_z_sigma_from_coverage():
    assert LdaConfig().z_sigma == pytest.approx(3.0, abs=1e-3)
    assert LdaConfig(pi_coverage=0.95).z_sigma == pytest.approx(
        norm.ppf(0.975), abs=1e-12)


def test_flag_rule_exhaustive_grid():
    for d_hat in np.linspace(-1.0, 2.0, 21):
        for sigma in (0.01, 0.05, 0.1, 0.2, 0.4):
            for delta in (0.0, 0.1, 0.3):
                for pi_c in (0.9, 0.95, 0.9973, 0.999):
                    lda = LdaConfig(delta=delta, pi_coverage=pi_c)
                    z = norm.ppf(0.5 * (1 + pi_c))
                    expect = int(d_hat - z * sigma < delta)
                    assert departure_flag(d_hat, sigma, lda) == expect


def test_flag_monotone_in_delta_and_pi():
    rng = np.random.default_rng(3)
    for _ in range(200):
        d_hat = rng.uniform(-0.5, 1.5)
        sigma = rng.uniform(0.01, 0.4)
        deltas = (0.0, 0.1, 0.2, 0.4)
        flags = [departure_flag(d_hat, sigma, LdaConfig(delta=d)) for d in deltas]
        assert all(b >= a for a, b in zip(flags, flags[1:]))
        pis = (0.8, 0.9, 0.9973, 0.9999)
        flags = [departure_flag(d_hat, sigma, LdaConfig(pi_coverage=p))
                 for p in pis]
        assert all(b >= a for a, b in zip(flags, flags[1:]))


# --- assess ------------------------------------------------------------------

def test_assess_aggregate_and_first_flag():
    states = [pose(x=1.0, y=2.0), pose(x=2.0, y=3.4), pose(x=3.0, y=2.0)]
    variances = [(1e-4, 1e-4, 1e-6)] * 3
    report = assess(make_trajectory(states, variances), PATH, GEOM, LdaConfig())
    flags = report.aggregate_flags()
    assert flags[0] == 0
    assert flags[1] == 1        # fl corner at 3.4 + 0.93 = 4.33 > 4
    assert report.first_flag_step == 2
    step2 = report.steps[1]
    assert step2.aggregate_flag == int(any(step2.corner_flags.values()))


def test_assess_checks_both_lines():
    # drifting right: the right line must trip while d_left stays large
    states = [pose(y=0.5)]
    report = assess(make_trajectory(states, [(1e-4, 1e-4, 1e-6)]), PATH, GEOM,
                    LdaConfig())
    assert report.aggregate_flags()[0] == 1
    fr = next(c for c in report.steps[0].corners if c.corner == "fr")
    assert fr.line == "right"


def test_assess_translation_invariance():
    states = [pose(x=1.0, y=2.5, psi=0.1), pose(x=2.0, y=3.0, psi=0.2)]
    variances = [(2e-3, 3e-3, 1e-4)] * 2
    r0 = assess(make_trajectory(states, variances), PATH, GEOM, LdaConfig())
    dx, dy = 37.0, -4.0
    path2 = LanePath(segments=(Segment(x0=-50.0 + dx, y0=2.0 + dy, theta=0.0,
                                       length=1000.0),), lane_width=4.0)
    shifted = [pose(s.x_c + dx, s.y_c + dy, s.psi) for s in states]
    r1 = assess(make_trajectory(shifted, variances), path2, GEOM, LdaConfig())
    for s0, s1 in zip(r0.steps, r1.steps):
        for c0, c1 in zip(s0.corners, s1.corners):
            assert c0.d_hat == pytest.approx(c1.d_hat, abs=1e-9)
            assert c0.sigma_d == pytest.approx(c1.sigma_d, abs=1e-12)
            assert s0.corner_flags == s1.corner_flags


def test_assess_rotation_invariance_isotropic():
    # with isotropic position covariance (and no heading variance, which
    # would introduce a bearing-aligned cross term the marginal model
    # drops) distances and flags are invariant under a world rotation
    theta = 0.7
    rot = np.array([[np.cos(theta), -np.sin(theta)],
                    [np.sin(theta), np.cos(theta)]])
    states = [pose(x=5.0, y=2.8, psi=0.05), pose(x=8.0, y=3.2, psi=-0.1)]
    variances = [(4e-3, 4e-3, 0.0)] * 2   # sigma_x == sigma_y
    r0 = assess(make_trajectory(states, variances), PATH, GEOM, LdaConfig())
    start = rot @ np.array([-50.0, 2.0])
    path2 = LanePath(segments=(Segment(x0=start[0], y0=start[1], theta=theta,
                                       length=1000.0),), lane_width=4.0)
    rotated = []
    for s in states:
        p = rot @ np.array([s.x_c, s.y_c])
        rotated.append(pose(p[0], p[1], s.psi + theta))
    r1 = assess(make_trajectory(rotated, variances), path2, GEOM, LdaConfig())
    for s0, s1 in zip(r0.steps, r1.steps):
        for c0, c1 in zip(s0.corners, s1.corners):
            assert c0.d_hat == pytest.approx(c1.d_hat, abs=1e-9)
            assert c0.sigma_d == pytest.approx(c1.sigma_d, abs=1e-9)


def test_truth_departure_flag():
    assert truth_departure_flag(pose(y=2.0), PATH, GEOM) == 0
    assert truth_departure_flag(pose(y=3.2), PATH, GEOM) == 1   # fl at 4.13
    assert truth_departure_flag(pose(y=0.8), PATH, GEOM) == 1   # fr at -0.13
