"""LQR gain scheduling across the speed grid.

Builds the default gain table (5 to 60 km/h), prints the feedback rows,
the closed-loop pole set per speed, and the feedforward steering needed
to hold a 100 m radius curve.
"""
import numpy as np

from lanedep import LqrConfig, VehicleParams, build_gain_table, error_model, feedforward

params = VehicleParams()
config = LqrConfig()
gains = build_gain_table(config, params)

print(f"{'v [km/h]':>9} {'k1':>8} {'k2':>8} {'k3':>8} {'k4':>8} "
      f"{'slowest pole':>14} {'ff@kappa=0.01':>14}")
for v, k_row in zip(gains.speed_grid, gains.k_table):
    a_mat, b1, _ = error_model(float(v), params)
    eig = np.linalg.eigvals(a_mat - np.outer(b1, k_row))
    slow = eig[np.argmax(eig.real)]
    ff = feedforward(float(v), 0.01, params)
    print(f"{v * 3.6:9.1f} {k_row[0]:8.4f} {k_row[1]:8.4f} {k_row[2]:8.4f} "
          f"{k_row[3]:8.4f} {slow.real:8.3f}{slow.imag:+6.3f}j {ff:14.5f}")

v_q = 8.333
print(f"\ninterpolated gains at {v_q} m/s: {np.round(gains.k_fb(v_q), 5)}")
