"""One lane-keeping incident: closed-loop prediction against the baseline.

Runs the default scenario (warmup, leftward steering pulse, then LQR lane
keeping) and compares the front-left corner trajectory predicted at the
moment the controller engages: the control-aware predictor follows the
recovery, the constant-turn-rate baseline extrapolates the drift out of
the lane.
"""
import numpy as np

from lanedep import (CornerGeometry, LqrConfig, NoiseSpec, Scenario,
                     VehicleParams, VehicleState, corner_positions, run_scenario)

params = VehicleParams()
scen = Scenario()
record = run_scenario(scen, params, LqrConfig(), NoiseSpec(), seed=7)
em = record.emissions[0]
geom = CornerGeometry.from_params(params, l_r=scen.lda.l_r,
                                  margin=scen.lda.contour_margin)


def corner_y(pose_arr):
    st = VehicleState(v_y=pose_arr[0], omega_r=pose_arr[1], x_c=pose_arr[2],
                      y_c=pose_arr[3], psi=pose_arr[4], v_x=scen.v_x)
    return corner_positions(st, geom)["fl"][1]


print(f"controller engages at t = {em.k * scen.t_s:.2f} s; "
      f"left lane line at Y = 4.0 m\n")
print(f"{'lead [s]':>9} {'truth Y_fl':>11} {'KPC Y_fl':>10} {'CTRV Y_fl':>10} "
      f"{'KPC flag':>9} {'CTRV flag':>10}")
kpc_flags = em.kpc_report.aggregate_flags()
ctrv_flags = em.ctrv_report.aggregate_flags()
for j in range(19, scen.prediction.horizon_steps, 20):
    truth_y = corner_y(record.truth[em.k + 1 + j])
    kpc_y = corner_y(em.kpc.steps[j].state.mean.array())
    ctrv_y = corner_y(em.ctrv.steps[j].state.mean.array())
    print(f"{(j + 1) * scen.t_s:9.2f} {truth_y:11.3f} {kpc_y:10.3f} "
          f"{ctrv_y:10.3f} {kpc_flags[j]:9d} {ctrv_flags[j]:10d}")

ff = em.ctrv_report.first_flag_step
print(f"\nCTRV first departure flag: "
      f"{'none' if ff is None else f'{ff * scen.t_s:.2f} s'}; "
      f"KPC first flag: "
      f"{'none' if em.kpc_report.first_flag_step is None else em.kpc_report.first_flag_step}")
