"""Sequential rate-distortion programs mapped onto the log-det engine.

Three programs share the same building blocks:

* stationary:  min 1/2 logdet(A P A^T + W) - 1/2 logdet P
               s.t. P <= A P A^T + W, trace P <= D
* finite horizon over P_0..P_n (averaged by 1/(n+1)):
               1/2 logdet Sx0 - 1/2 logdet P_0
               + sum_t [1/2 logdet(A P_{t-1} A^T + W) - 1/2 logdet P_t]
               s.t. P_0 <= Sx0, P_t <= A P_{t-1} A^T + W, trace P_t <= D
* lower bound: the stationary program with the LMI relaxed by delta*I and
               the objective shifted by -epsilon.

The auxiliary Q variables of the Schur-complement formulation are
eliminated; they are recovered afterwards from
``Q^-1 = P^-1 + A^T W^-1 A``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import closed_forms
from .convex import (AffineMatrix, Congruence, LogDetProgram, LogDetTerm, SolverConfig,
                     SolverError, SolverReport, solve, var_term)
from .model import GaussMarkovModel, unstable_rate_lower_bound


class NonConvergenceError(SolverError):
    def __init__(self, message, report: SolverReport):
        super().__init__(message)
        self.report = report


@dataclass
class SrdPoint:
    D: float
    rate: float
    P_opt: np.ndarray
    report: SolverReport


@dataclass
class FiniteHorizonSolution:
    n: int
    P_seq: list[np.ndarray]
    Q_seq: list[np.ndarray]
    rate: float
    report: SolverReport | None = None


@dataclass(frozen=True)
class BoundParams:
    n: int
    epsilon_n: float
    delta_n: float
    gamma: float


class Method(str, enum.Enum):
    STATIONARY_SDP = "stationary_sdp"
    RWF_VECTOR = "rwf_vector"
    SCALAR_CLOSED_FORM = "scalar_closed_form"


@dataclass(frozen=True)
class CurvePoint:
    D: float
    rate: float
    valid: bool
    method: str


def _check_D(D):
    if not np.isfinite(D) or D <= 0:
        raise ValueError(f"distortion must be a positive finite number, got {D}")


def _start_scale(model: GaussMarkovModel, D: float, include_x0: bool) -> float:
    eig_floor = np.linalg.eigvalsh(model.sigma_w)[0]
    if include_x0:
        eig_floor = min(eig_floor, np.linalg.eigvalsh(model.sigma_x0)[0])
    return 0.5 * min(D / (2 * model.p), eig_floor)


def _prediction(model: GaussMarkovModel, var: int, extra: np.ndarray | None = None) -> AffineMatrix:
    """A X_var A^T + W (+ extra)."""
    C = model.sigma_w if extra is None else model.sigma_w + extra
    return AffineMatrix(np.array(C), (Congruence(var, model.A, 1.0),))


def _slack(model: GaussMarkovModel, prev: int, cur: int, extra=None) -> AffineMatrix:
    """A X_prev A^T + W - X_cur (+ extra), required PSD."""
    C = model.sigma_w if extra is None else model.sigma_w + extra
    return AffineMatrix(np.array(C), (Congruence(prev, model.A, 1.0), var_term(cur, model.p, -1.0)))


def stationary_program(model: GaussMarkovModel, D: float, delta: float = 0.0,
                       epsilon: float = 0.0) -> LogDetProgram:
    p = model.p
    extra = delta * np.eye(p) if delta else None
    return LogDetProgram(
        variable_shapes=[p],
        objective=[
            LogDetTerm(0.5, _prediction(model, 0)),
            LogDetTerm(-0.5, AffineMatrix(np.zeros((p, p)), (var_term(0, p),))),
        ],
        lmi_constraints=[_slack(model, 0, 0, extra)],
        trace_constraints=[(0, float(D))],
        objective_constant=-float(epsilon),
        initial_scale=_start_scale(model, D, include_x0=False),
    )


def finite_horizon_program(model: GaussMarkovModel, D: float, n: int) -> LogDetProgram:
    """Program over P_0..P_n with the objective already divided by n+1."""
    p = model.p
    w = 1.0 / (n + 1)
    zero = np.zeros((p, p))
    _, logdet_x0 = np.linalg.slogdet(model.sigma_x0)
    objective = [LogDetTerm(-0.5 * w, AffineMatrix(zero, (var_term(t, p),))) for t in range(n + 1)]
    objective += [LogDetTerm(0.5 * w, _prediction(model, t - 1)) for t in range(1, n + 1)]
    lmis = [AffineMatrix(np.array(model.sigma_x0), (var_term(0, p, -1.0),))]
    lmis += [_slack(model, t - 1, t) for t in range(1, n + 1)]
    return LogDetProgram(
        variable_shapes=[p] * (n + 1),
        objective=objective,
        lmi_constraints=lmis,
        trace_constraints=[(t, float(D)) for t in range(n + 1)],
        objective_constant=0.5 * w * float(logdet_x0),
        initial_scale=_start_scale(model, D, include_x0=True),
    )


def _require_converged(report: SolverReport, what: str):
    if not report.converged:
        raise NonConvergenceError(
            f"{what}: solver did not converge after {report.outer_iterations} outer "
            f"iterations (gap bound {report.gap_bound:.2e}, decrement "
            f"{report.final_gradient_norm:.2e})", report)


def srd_stationary(model: GaussMarkovModel, D: float, config: SolverConfig | None = None) -> SrdPoint:
    """Stationary SRD rate (nats) and the optimal error covariance."""
    _check_D(D)
    report = solve(stationary_program(model, D), config)
    _require_converged(report, f"stationary SRD at D={D}")
    P = report.variables[0]
    return SrdPoint(D=float(D), rate=max(report.objective_value, 0.0), P_opt=P, report=report)


def recover_Q(model: GaussMarkovModel, P_seq) -> list[np.ndarray]:
    """``Q_t^-1 = P_t^-1 + A^T W^-1 A`` for t < n and ``Q_n = P_n``."""
    info = model.A.T @ np.linalg.solve(model.sigma_w, model.A)
    Q = []
    for P in P_seq[:-1]:
        Qi = np.linalg.inv(np.linalg.inv(P) + info)
        Q.append(0.5 * (Qi + Qi.T))
    Q.append(np.array(P_seq[-1]))
    return Q


def srd_finite_horizon(model: GaussMarkovModel, D: float, n: int,
                       config: SolverConfig | None = None) -> FiniteHorizonSolution:
    """Averaged finite-horizon SRD rate R_{0,n}(D), solved jointly over all steps."""
    _check_D(D)
    if int(n) != n or n < 0:
        raise ValueError(f"horizon index must be a non-negative integer, got {n}")
    n = int(n)
    report = solve(finite_horizon_program(model, D, n), config)
    _require_converged(report, f"finite-horizon SRD at D={D}, n={n}")
    P_seq = report.variables
    return FiniteHorizonSolution(n=n, P_seq=P_seq, Q_seq=recover_Q(model, P_seq),
                                 rate=max(report.objective_value, 0.0), report=report)


def finite_horizon_objective(model: GaussMarkovModel, P_seq) -> float:
    """Averaged objective of the P-form program at the given covariances."""
    n = len(P_seq) - 1
    total = 0.5 * np.linalg.slogdet(model.sigma_x0)[1] - 0.5 * np.linalg.slogdet(P_seq[0])[1]
    for t in range(1, n + 1):
        pred = model.A @ P_seq[t - 1] @ model.A.T + model.sigma_w
        total += 0.5 * np.linalg.slogdet(pred)[1] - 0.5 * np.linalg.slogdet(P_seq[t])[1]
    return float(total / (n + 1))


def finite_horizon_q_objective(model: GaussMarkovModel, Q_seq) -> float:
    """Averaged objective of the Q-form program: (c - sum 1/2 logdet Q_t)/(n+1).

    ``c = 1/2 logdet Sx0 + (n/2) logdet W``.  With this sign the value equals
    :func:`finite_horizon_objective` at ``Q = recover_Q(model, P_seq)``.
    """
    n = len(Q_seq) - 1
    c = 0.5 * np.linalg.slogdet(model.sigma_x0)[1] + 0.5 * n * np.linalg.slogdet(model.sigma_w)[1]
    s = sum(0.5 * np.linalg.slogdet(Q)[1] for Q in Q_seq)
    return float((c - s) / (n + 1))


def make_bound_params(model: GaussMarkovModel, D: float, n: int, P00) -> BoundParams:
    p = model.p
    smax = np.linalg.norm(model.A @ model.A.T, 2)
    arg = (smax * D + np.trace(model.sigma_w)) / p
    _, logdet_x0 = np.linalg.slogdet(model.sigma_x0)
    gamma = max(0.0, 0.5 * p * np.log(arg) - 0.5 * logdet_x0)
    delta = np.linalg.norm(np.asarray(P00), 2) / (n + 1)
    return BoundParams(n=int(n), epsilon_n=gamma / (n + 1), delta_n=float(delta), gamma=float(gamma))


def lemma4_bound(model: GaussMarkovModel, D: float, params: BoundParams,
                 config: SolverConfig | None = None) -> float:
    """Relaxed stationary program whose value lower-bounds R_{0,n}(D)."""
    _check_D(D)
    if params.epsilon_n < 0 or params.delta_n < 0:
        raise ValueError("bound parameters must be non-negative")
    report = solve(stationary_program(model, D, params.delta_n, params.epsilon_n), config)
    _require_converged(report, f"lower-bound program at D={D}")
    return report.objective_value


def sweep_curve(model: GaussMarkovModel, D_grid, method, config: SolverConfig | None = None
                ) -> list[CurvePoint]:
    """Rate at every grid point for one method, in grid order."""
    method = Method(method)
    grid = np.asarray(D_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("D grid must be a non-empty 1-D sequence")
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("D grid must be strictly positive and strictly increasing")
    if method is Method.SCALAR_CLOSED_FORM and model.p != 1:
        raise ValueError("scalar_closed_form requires a scalar model")
    out = []
    for D in grid:
        D = float(D)
        if method is Method.STATIONARY_SDP:
            out.append(CurvePoint(D, srd_stationary(model, D, config).rate, True, method.value))
        elif method is Method.RWF_VECTOR:
            rate, valid = closed_forms.srd_rwf_vector(model, D)
            out.append(CurvePoint(D, rate, valid, method.value))
        else:
            rate = closed_forms.srd_scalar(model.A[0, 0], model.sigma_w[0, 0], D)
            out.append(CurvePoint(D, rate, True, method.value))
    return out


def check_srd_point(model: GaussMarkovModel, point: SrdPoint, tol: float = 1e-8) -> bool:
    """Feasibility of P_opt and the unstable-mode rate floor."""
    P = point.P_opt
    slack = model.A @ P @ model.A.T + model.sigma_w - P
    return (np.trace(P) <= point.D + tol
            and np.linalg.eigvalsh(0.5 * (slack + slack.T))[0] >= -tol
            and point.rate >= unstable_rate_lower_bound(model) - 1e-6)
