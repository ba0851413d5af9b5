"""Step-steer response of the single-track plant.

Applies a constant 0.03 rad front steering at 30 km/h and prints the
lateral velocity, yaw rate and CG path every 0.2 s. The yaw rate settles
at the steady cornering value within about half a second.
"""
import numpy as np

from lanedep import VehicleParams, VehicleState, derivatives, step, tire_forces

params = VehicleParams()
state = VehicleState(v_x=30 / 3.6)
delta_f = 0.03

print(f"steady tyre forces at t=0+: {tire_forces(state, delta_f, params)}")
print(f"{'t [s]':>6} {'v_y':>8} {'omega_r':>8} {'X_c':>8} {'Y_c':>8} {'psi':>8} {'a_y':>8}")
for k in range(201):
    if k % 20 == 0:
        dx = derivatives(state, delta_f, params)
        a_y = dx[0] + state.v_x * state.omega_r
        print(f"{k * 0.01:6.2f} {state.v_y:8.4f} {state.omega_r:8.4f} "
              f"{state.x_c:8.3f} {state.y_c:8.3f} {state.psi:8.4f} {a_y:8.3f}")
    state = step(state, delta_f, params, 0.01)

omega_ss = state.omega_r
print(f"\nsteady-state yaw rate: {omega_ss:.4f} rad/s "
      f"(turn radius {state.v_x / omega_ss:.1f} m)")
