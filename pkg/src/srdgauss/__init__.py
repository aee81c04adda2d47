"""Sequential rate-distortion of Gauss-Markov sources under MSE distortion."""

from .closed_forms import (CounterexampleReport, WaterfillingSolution, counterexample_model,
                           counterexample_report, iid_waterfilling, srd_rwf_vector, srd_scalar)
from .convex import LogDetProgram, SolverConfig, SolverReport, gradient_check, solve
from .model import (GaussMarkovModel, SpectralSummary, load_model, scalar_model, spectral_summary,
                    stationary_state_covariance, unstable_rate_lower_bound, validate_model)
from .montecarlo import SimulationConfig, SimulationReport, empirical_information_rate, simulate
from .realization import (KalmanState, SensorRealization, information_rate_from_covariances,
                          riccati_correct, riccati_predict, sensor_from_covariances,
                          stationary_sensor)
from .solvers import (BoundParams, FiniteHorizonSolution, SrdPoint, lemma4_bound,
                      make_bound_params, srd_finite_horizon, srd_stationary, sweep_curve)

__version__ = "0.1.0"
