"""Small Monte Carlo batch with the statistics of the full study.

Repeats the default incident 60 times, then prints the predicted-variance
consistency table (calculated vs realized error statistics of the
front-left corner ordinate) and the departure-assessment accuracy of both
predictors over the horizon. Use the CLI for the full 500-run batch.
"""
import numpy as np

from lanedep import (LqrConfig, NoiseSpec, Scenario, VehicleParams,
                     accuracy_curve, run_monte_carlo)

scen = Scenario()
summary = run_monte_carlo(scen, VehicleParams(), LqrConfig(), NoiseSpec(),
                          n_runs=60, base_seed=2024, jobs=2)
print(f"{summary.n_runs} valid runs, {summary.n_excluded} excluded "
      f"(linear-regime guard)\n")

print(f"{'lead [s]':>9} {'var calc':>10} {'err var':>10} {'mse':>10} "
      f"{'acc KPC':>8} {'acc CTRV':>9}")
for j in range(9, summary.horizon, 20):
    print(f"{(j + 1) * summary.t_s:9.2f} {summary.var_calc[j]:10.5f} "
          f"{summary.var_sample[j]:10.5f} {summary.mse[j]:10.5f} "
          f"{summary.acc_kpc[j]:8.2f} {summary.acc_ctrv[j]:9.2f}")

acc = accuracy_curve(summary)
ff = summary.ctrv_first_flag_time
print(f"\nCTRV median first-flag time: {np.median(ff[np.isfinite(ff)]):.2f} s")
print(f"KPC flags raised beyond 0.5 s: "
      f"{int(summary.kpc_flags[:, 50:].sum())} (of {summary.n_runs} runs)")
print(f"accuracy at 2 s: KPC {acc['kpc'][-1]:.2f}, CTRV {acc['ctrv'][-1]:.2f}")
