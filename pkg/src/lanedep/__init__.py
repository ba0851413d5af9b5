"""Closed-loop lane-departure prediction toolkit.

Simulates a noisy single-track vehicle under LQR lane keeping, estimates
its states with an EKF, predicts future trajectories with a Kalman
predictor that re-evaluates the deployed control law (and a CTRV
baseline), and converts predicted corner-position distributions into
probabilistic lane-departure flags.
"""

__version__ = "0.1.0"

from .assessment import (CornerGeometry, DepartureReport, LdaConfig, assess,
                         corner_distribution, corner_positions, departure_flag,
                         marginal_distance)
from .control import (LqrConfig, LqrGains, RiccatiError, TrackingError,
                      build_gain_table, control_law, error_jacobian, error_model,
                      feedforward, solve_riccati, tracking_error)
from .dynamics import (LinearizedModel, TireState, VehicleParams, VehicleState,
                       derivatives, linearize, step, tire_forces)
from .estimation import (GaussianState, NoiseSpec, ekf_correct, ekf_init,
                         ekf_predict, ekf_step)
from .lane import LanePath, PathExhaustedError, Segment
from .prediction import (CtrvState, PredictedTrajectory, PredictionConfig,
                         ctrv_from_belief, predict_control, predict_ctrv,
                         predict_kpc, predict_plain, simulate_estimation)
from .simulator import (McSummary, RunRecord, Scenario, Stage1, accuracy_curve,
                        run_monte_carlo, run_scenario)

__all__ = [name for name in dir() if not name.startswith("_")]
