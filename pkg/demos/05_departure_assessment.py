"""Departure flags from predicted corner distributions.

Sweeps a vehicle pose from the centreline toward the left lane line and
shows how the front-left marginal distance, its sigma band, and the
departure flag respond. The flag trips before the corner touches the
line because of the 3-sigma confidence band.
"""
import numpy as np

from lanedep import (CornerGeometry, LanePath, LdaConfig, VehicleParams,
                     VehicleState, corner_distribution, marginal_distance)
from lanedep.assessment import departure_flag

params = VehicleParams()
path = LanePath.straight(y=2.0, lane_width=4.0)
geom = CornerGeometry.from_params(params)
lda = LdaConfig()
var_x, var_y, var_psi = 4e-3, 4e-3, 1e-4

print(f"z-sigma from {lda.pi_coverage:.4%} coverage: {lda.z_sigma:.4f}\n")
print(f"{'Y_c [m]':>8} {'d_hat [m]':>10} {'sigma_d':>9} {'d-3sigma':>9} {'flag':>5}")
for y_c in np.linspace(2.0, 3.2, 13):
    pose = VehicleState(x_c=20.0, y_c=float(y_c), psi=0.02, v_x=8.333)
    mean, vx, vy = corner_distribution(pose, var_x, var_y, var_psi, geom, "fl")
    d_hat, s2 = marginal_distance(mean, vx, vy, path, "left")
    sigma_d = float(np.sqrt(s2))
    flag = departure_flag(d_hat, sigma_d, lda)
    print(f"{y_c:8.2f} {d_hat:10.3f} {sigma_d:9.3f} "
          f"{d_hat - lda.z_sigma * sigma_d:9.3f} {flag:5d}")
