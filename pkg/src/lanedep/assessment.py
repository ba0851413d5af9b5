"""Lane departure assessment.

Propagates a predicted Gaussian pose to the four contour corners, forms
Normal marginal-distance distributions to the adjacent lane lines (cross
covariances between pose states ignored), and raises departure flags when
the distance minus a z-sigma band falls below the distance threshold.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .dynamics import VehicleParams, VehicleState
from .lane import LanePath
from .prediction import PredictedTrajectory

CORNER_IDS = ("fl", "fr", "rl", "rr")
LINE_SIDES = ("left", "right")

DEFAULT_REAR_CONTOUR = 2.49   # CG to rear contour edge [m]; 4.6 m total length
DEFAULT_CONTOUR_MARGIN = 0.05


@dataclass(frozen=True)
class CornerGeometry:
    """Polar description of the four contour corners about the CG.

    Front corners sit at radius l_fb and bearings psi +- phi_front; rear
    corners at radius l_rb and bearings psi + pi -+ phi_rear.
    """

    l_fb: float
    phi_front: float
    l_rb: float
    phi_rear: float

    def __post_init__(self):
        if self.l_fb <= 0.0 or self.l_rb <= 0.0:
            raise ValueError("corner radii must be > 0")
        for phi in (self.phi_front, self.phi_rear):
            if not 0.0 < phi < 0.5 * np.pi:
                raise ValueError("corner bearing offsets must be in (0, pi/2)")

    @staticmethod
    def from_params(params: VehicleParams, l_r: float = DEFAULT_REAR_CONTOUR,
                    margin: float = 0.0) -> "CornerGeometry":
        """Geometry from vehicle dimensions plus an optional safety margin
        inflating the contour on all sides."""
        l_f = params.l_f + margin
        l_r = l_r + margin
        b = params.b_half + margin
        return CornerGeometry(
            l_fb=float(np.hypot(l_f, b)), phi_front=float(np.arctan2(b, l_f)),
            l_rb=float(np.hypot(l_r, b)), phi_rear=float(np.arctan2(b, l_r)))

    def bearing(self, corner: str, psi: float) -> float:
        """World bearing of a corner from the CG at heading psi."""
        if corner == "fl":
            return psi + self.phi_front
        if corner == "fr":
            return psi - self.phi_front
        if corner == "rl":
            return psi + np.pi - self.phi_rear
        if corner == "rr":
            return psi + np.pi + self.phi_rear
        raise ValueError(f"unknown corner {corner!r}")

    def radius(self, corner: str) -> float:
        return self.l_fb if corner in ("fl", "fr") else self.l_rb


@dataclass(frozen=True)
class LdaConfig:
    """Departure rule parameters.

    z_sigma is derived from the coverage probability pi_coverage through the
    inverse standard-normal CDF unless given explicitly.
    """

    delta: float = 0.0
    pi_coverage: float = 0.9973
    z_sigma: float | None = None
    l_r: float = DEFAULT_REAR_CONTOUR
    contour_margin: float = DEFAULT_CONTOUR_MARGIN

    def __post_init__(self):
        if not 0.0 < self.pi_coverage < 1.0:
            raise ValueError("pi_coverage must be in (0, 1)")
        if self.delta < 0.0:
            raise ValueError("delta must be >= 0")
        if self.z_sigma is None:
            object.__setattr__(
                self, "z_sigma", float(norm.ppf(0.5 * (1.0 + self.pi_coverage))))


@dataclass(frozen=True)
class CornerDistribution:
    """Normal model of one corner position and its marginal distance."""

    corner: str
    mean_x: float
    mean_y: float
    var_x: float
    var_y: float
    d_hat: float
    sigma_d: float
    line: str        # adjacent (riskier) lane line id


@dataclass(frozen=True)
class StepAssessment:
    i: int
    corners: tuple            # four CornerDistribution
    corner_flags: dict        # corner id -> 0/1
    aggregate_flag: int


@dataclass(frozen=True)
class DepartureReport:
    algo: str
    origin_step: int
    steps: tuple              # StepAssessment per horizon step
    first_flag_step: int | None

    def aggregate_flags(self) -> np.ndarray:
        return np.array([s.aggregate_flag for s in self.steps], dtype=int)


def corner_positions(pose: VehicleState, geom: CornerGeometry) -> dict:
    """World coordinates of the four contour corners for a crisp pose."""
    out = {}
    for cid in CORNER_IDS:
        rho = geom.radius(cid)
        bear = geom.bearing(cid, pose.psi)
        out[cid] = (pose.x_c + rho * np.cos(bear), pose.y_c + rho * np.sin(bear))
    return out


def corner_distribution(mean_pose: VehicleState, var_x: float, var_y: float,
                        var_psi: float, geom: CornerGeometry, corner: str):
    """First-order Normal model of a corner position.

    var_X = var_Xc + rho^2 sin^2(bearing) var_psi and the Y analog with
    cos^2; pose cross covariances are ignored.
    """
    rho = geom.radius(corner)
    bear = geom.bearing(corner, mean_pose.psi)
    mean_x = mean_pose.x_c + rho * np.cos(bear)
    mean_y = mean_pose.y_c + rho * np.sin(bear)
    vx = var_x + rho * rho * np.sin(bear) ** 2 * var_psi
    vy = var_y + rho * rho * np.cos(bear) ** 2 * var_psi
    return (float(mean_x), float(mean_y)), float(vx), float(vy)


def marginal_distance(corner_mean, var_x: float, var_y: float, path: LanePath,
                      side: str):
    """(d_hat, sigma_d^2) of the signed distance to one lane line.

    First-order propagation through the distance gradient; positive inside
    the lane.
    """
    cx, cy = corner_mean
    d_left, d_right = path.signed_line_distances(cx, cy)
    d_hat = d_left if side == "left" else d_right
    gx, gy = path.line_distance_gradient(cx, cy, side)
    sigma_d2 = gx * gx * var_x + gy * gy * var_y
    return float(d_hat), float(sigma_d2)


def departure_flag(d_hat: float, sigma_d: float, lda: LdaConfig) -> int:
    """Core rule: flag when d_hat - z(Pi) sigma_d < Delta."""
    return int(d_hat - lda.z_sigma * sigma_d < lda.delta)


def assess(trajectory: PredictedTrajectory, path: LanePath, geom: CornerGeometry,
           lda: LdaConfig) -> DepartureReport:
    """Departure report over a predicted trajectory.

    Every corner is tested against both lane lines; a corner's reported
    distribution is the riskier line (smaller d_hat - z sigma_d) and its
    flag is the OR over the two lines.
    """
    steps = []
    first = None
    for pstep in trajectory.steps:
        mean = pstep.state.mean
        p = pstep.state.p
        var_xc, var_yc, var_psi = p[2, 2], p[3, 3], p[4, 4]
        corners = []
        flags = {}
        for cid in CORNER_IDS:
            cmean, vx, vy = corner_distribution(mean, var_xc, var_yc, var_psi,
                                                geom, cid)
            worst = None
            for side in LINE_SIDES:
                d_hat, s2 = marginal_distance(cmean, vx, vy, path, side)
                margin = d_hat - lda.z_sigma * np.sqrt(s2)
                if worst is None or margin < worst[2]:
                    worst = (d_hat, np.sqrt(s2), margin, side)
            d_hat, sigma_d, _, side = worst
            flags[cid] = departure_flag(d_hat, sigma_d, lda)
            corners.append(CornerDistribution(
                corner=cid, mean_x=cmean[0], mean_y=cmean[1], var_x=vx, var_y=vy,
                d_hat=d_hat, sigma_d=sigma_d, line=side))
        agg = int(any(flags.values()))
        if agg and first is None:
            first = pstep.i
        steps.append(StepAssessment(i=pstep.i, corners=tuple(corners),
                                    corner_flags=flags, aggregate_flag=agg))
    return DepartureReport(algo=trajectory.algo, origin_step=trajectory.origin_step,
                           steps=tuple(steps), first_flag_step=first)


def truth_departure_flag(pose: VehicleState, path: LanePath, geom: CornerGeometry,
                         delta: float = 0.0) -> int:
    """Ground-truth label: Delta rule on crisp corner distances, no band."""
    for cid, (cx, cy) in corner_positions(pose, geom).items():
        d_left, d_right = path.signed_line_distances(cx, cy)
        if d_left < delta or d_right < delta:
            return 1
    return 0


def report_csv_rows(report: DepartureReport, t_s: float, emit_every: int = 10):
    """CSV rows: algo,k,i,t,corner,d_hat,sigma_d,flag,aggregate_flag."""
    rows = []
    for s in report.steps:
        if s.i % emit_every != 0:
            continue
        t = (report.origin_step + s.i) * t_s
        for c in s.corners:
            rows.append([report.algo, report.origin_step, s.i, t, c.corner,
                         c.d_hat, c.sigma_d, s.corner_flags[c.corner],
                         s.aggregate_flag])
    return rows


REPORT_CSV_HEADER = ["algo", "k", "i", "t", "corner", "d_hat", "sigma_d",
                     "flag", "aggregate_flag"]
