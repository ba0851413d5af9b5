"""Lane geometry: piecewise straight / constant-curvature centreline,
point projection, and signed distances to the lane lines.

Sign convention: lateral offsets are positive to the LEFT of the path
(facing along the path heading). The left lane line sits at
+lane_width/2, the right at -lane_width/2.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class PathExhaustedError(Exception):
    """Raised when a query point projects beyond the end of the path."""


def wrap_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = (angle + np.pi) % (2.0 * np.pi) - np.pi
    if wrapped == -np.pi:
        wrapped = np.pi
    return wrapped


@dataclass(frozen=True)
class Segment:
    """One centreline piece: a straight (kappa == 0) or a circular arc."""

    x0: float
    y0: float
    theta: float
    length: float
    kappa: float = 0.0

    def __post_init__(self):
        if self.length <= 0.0:
            raise ValueError("segment length must be > 0")

    def end_point(self):
        if self.kappa == 0.0:
            return (self.x0 + self.length * np.cos(self.theta),
                    self.y0 + self.length * np.sin(self.theta))
        dpsi = self.kappa * self.length
        r = 1.0 / self.kappa
        # arc center is at distance 1/kappa along the left normal
        cx = self.x0 - r * np.sin(self.theta)
        cy = self.y0 + r * np.cos(self.theta)
        return (cx + r * np.sin(self.theta + dpsi),
                cy - r * np.cos(self.theta + dpsi))

    def end_theta(self) -> float:
        return self.theta + self.kappa * self.length


@dataclass(frozen=True)
class PathPoint:
    """Projection result on the centreline."""

    s: float             # arc length from path start [m]
    theta: float         # path heading at the projection [rad]
    kappa: float         # curvature at the projection [1/m]
    offset_left: float   # signed lateral offset of the query point [m]
    segment_index: int


@dataclass(frozen=True)
class LanePath:
    """Target centreline plus lane width.

    Segments must chain C0 (each starts where the previous ends).
    """

    segments: tuple = field(default_factory=tuple)
    lane_width: float = 4.0

    def __post_init__(self):
        if not self.segments:
            raise ValueError("LanePath needs at least one segment")
        if self.lane_width <= 0.0:
            raise ValueError("lane_width must be > 0")
        for prev, cur in zip(self.segments, self.segments[1:]):
            ex, ey = prev.end_point()
            if abs(ex - cur.x0) > 1e-6 or abs(ey - cur.y0) > 1e-6:
                raise ValueError("segments are not C0-continuous")

    @staticmethod
    def straight(y: float = 2.0, lane_width: float = 4.0, x0: float = -50.0,
                 length: float = 1000.0, theta: float = 0.0) -> "LanePath":
        """Single straight segment, default East-bound centreline Y = y."""
        return LanePath(
            segments=(Segment(x0=x0, y0=y, theta=theta, length=length),),
            lane_width=lane_width,
        )

    def check_vehicle_fits(self, b_half: float) -> None:
        if self.lane_width <= 2.0 * b_half:
            raise ValueError(
                "invariant violated: lane_width must exceed vehicle width 2*b_half")

    def _project_segment(self, seg: Segment, x: float, y: float):
        """(s_local, theta, offset_left, in_extent) for one segment."""
        if seg.kappa == 0.0:
            tx, ty = np.cos(seg.theta), np.sin(seg.theta)
            dx, dy = x - seg.x0, y - seg.y0
            s = dx * tx + dy * ty
            offset = -dx * ty + dy * tx
            return s, seg.theta, offset, 0.0 <= s <= seg.length
        r = 1.0 / seg.kappa
        cx = seg.x0 - r * np.sin(seg.theta)
        cy = seg.y0 + r * np.cos(seg.theta)
        # polar angle of the query point about the arc center, measured from
        # the angle of the segment start
        ang0 = np.arctan2(seg.y0 - cy, seg.x0 - cx)
        ang = np.arctan2(y - cy, x - cx)
        dang = wrap_angle(ang - ang0)
        if seg.kappa < 0.0:
            dang = -dang
        s = dang * abs(r)
        theta = seg.theta + seg.kappa * s
        dist_c = float(np.hypot(x - cx, y - cy))
        # for a left turn (kappa > 0) points left of the path are nearer the center
        offset = (abs(r) - dist_c) if seg.kappa > 0.0 else (dist_c - abs(r))
        return s, theta, offset, 0.0 <= s <= seg.length

    def project(self, x: float, y: float) -> PathPoint:
        """Project (x, y) onto the centreline.

        The segment is chosen by minimal unsigned offset among segments whose
        projection falls inside their extent, ties broken toward the later
        segment. A point projecting past the final segment end raises
        PathExhaustedError.
        """
        best = None
        s_base = 0.0
        bases = []
        for idx, seg in enumerate(self.segments):
            bases.append(s_base)
            s, theta, offset, inside = self._project_segment(seg, x, y)
            if inside:
                if best is None or abs(offset) <= abs(best[3]):
                    best = (idx, s_base + s, theta, offset, seg.kappa)
            s_base += seg.length
        if best is not None:
            idx, s, theta, offset, kappa = best
            return PathPoint(s=s, theta=theta, kappa=kappa,
                             offset_left=offset, segment_index=idx)
        # off every segment extent: clamp to the start if before the path,
        # otherwise the path is exhausted
        first = self.segments[0]
        s0, theta0, offset0, _ = self._project_segment(first, x, y)
        if s0 < 0.0:
            return PathPoint(s=0.0, theta=first.theta, kappa=first.kappa,
                             offset_left=offset0, segment_index=0)
        raise PathExhaustedError(
            f"point ({x:.2f}, {y:.2f}) projects beyond the path end")

    @property
    def total_length(self) -> float:
        return sum(seg.length for seg in self.segments)

    def point_at(self, s: float):
        """Centreline point at arc length s: ((x, y), theta, kappa)."""
        if s < 0.0 or s > self.total_length:
            raise PathExhaustedError(f"arc length {s:.2f} outside [0, {self.total_length:.2f}]")
        remaining = s
        for seg in self.segments:
            if remaining <= seg.length:
                if seg.kappa == 0.0:
                    x = seg.x0 + remaining * np.cos(seg.theta)
                    y = seg.y0 + remaining * np.sin(seg.theta)
                    return (x, y), seg.theta, 0.0
                r = 1.0 / seg.kappa
                cx = seg.x0 - r * np.sin(seg.theta)
                cy = seg.y0 + r * np.cos(seg.theta)
                theta = seg.theta + seg.kappa * remaining
                return (cx + r * np.sin(theta), cy - r * np.cos(theta)), theta, seg.kappa
            remaining -= seg.length
        raise PathExhaustedError("unreachable")  # guarded by the range check

    def signed_line_distances(self, x: float, y: float):
        """Signed perpendicular distances (left_line, right_line) from a point.

        Both are positive inside the lane, negative outside, via the
        centreline projection: d_left = w/2 - offset, d_right = offset + w/2.
        """
        p = self.project(x, y)
        half = 0.5 * self.lane_width
        return half - p.offset_left, p.offset_left + half

    def line_distance_gradient(self, x: float, y: float, side: str):
        """(dD/dx, dD/dy) of the signed distance to one lane line.

        For a line at local heading theta this is +-(sin theta, -cos theta),
        signed so that the inside of the lane is positive.
        """
        p = self.project(x, y)
        sin_t, cos_t = np.sin(p.theta), np.cos(p.theta)
        if side == "left":
            return sin_t, -cos_t
        if side == "right":
            return -sin_t, cos_t
        raise ValueError(f"unknown lane line side {side!r}")
