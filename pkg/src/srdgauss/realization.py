"""Linear-Gaussian sensor realizing an optimal covariance sequence.

Given posterior error covariances P_t (from a finite-horizon or stationary
solve), the sensor ``p_t = E_t x_t + z_t`` with ``z_t ~ N(0, Sigma_z_t)``
followed by a Kalman filter reproduces them whenever

    E_t^T Sigma_z_t^-1 E_t = P_t^-1 - (A P_{t-1} A^T + W)^-1,

with the initial-state covariance standing in for the prediction at t = 0.
The factorization used here is the eigendecomposition of the right-hand
side: orthonormal rows for E_t and a diagonal noise covariance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import GaussMarkovModel

RANK_RTOL = 1e-9
# increments this small relative to ||P^-1|| are solver residue, not information
NOISE_FLOOR = 1e-8
NEGATIVE_TOL = 1e-6


class InconsistentCovarianceError(ValueError):
    """The information increment has a clearly negative eigenvalue."""


@dataclass
class SensorRealization:
    E_seq: list[np.ndarray]
    Sigma_z_seq: list[np.ndarray]
    ranks: list[int] = field(default_factory=list)
    # a stationary realization holds one (E, Sigma_z) applied at every step
    stationary: bool = False

    def __post_init__(self):
        if not self.ranks:
            self.ranks = [E.shape[0] for E in self.E_seq]

    def __len__(self):
        return len(self.E_seq)

    def step(self, t: int):
        if self.stationary:
            return self.E_seq[0], self.Sigma_z_seq[0]
        if t >= len(self.E_seq):
            raise IndexError(f"realization covers {len(self.E_seq)} steps, asked for step {t}")
        return self.E_seq[t], self.Sigma_z_seq[t]

    def to_dict(self) -> dict:
        return {
            "stationary": self.stationary,
            "steps": [{"E": E.tolist(), "sigma_z": S.tolist()}
                      for E, S in zip(self.E_seq, self.Sigma_z_seq)],
        }

    @classmethod
    def from_dict(cls, raw: dict, p: int | None = None) -> "SensorRealization":
        steps = [(np.array(st["E"], dtype=float), np.array(st["sigma_z"], dtype=float))
                 for st in raw["steps"]]
        if p is None:
            # empty steps carry no width; borrow it from any non-empty one
            p = next((E.shape[1] for E, _ in steps if E.size), 0)
        E_seq, S_seq = [], []
        for E, S in steps:
            if E.size == 0:
                E, S = np.zeros((0, p)), np.zeros((0, 0))
            E_seq.append(np.atleast_2d(E))
            S_seq.append(np.atleast_2d(S))
        return cls(E_seq, S_seq, stationary=bool(raw.get("stationary", False)))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path, p: int | None = None) -> "SensorRealization":
        return cls.from_dict(json.loads(Path(path).read_text()), p)


@dataclass
class KalmanState:
    P_pred: np.ndarray
    P_post: np.ndarray
    gain: np.ndarray
    estimate: np.ndarray


def _sym(M):
    return 0.5 * (M + M.T)


def riccati_predict(P_post, model: GaussMarkovModel) -> np.ndarray:
    """``A P A^T + W``."""
    return _sym(model.A @ np.asarray(P_post, float) @ model.A.T + model.sigma_w)


def riccati_correct(P_pred, E, Sigma_z):
    """Measurement update; returns (P_post, Kalman gain).

    P_post uses the information form ``(P_pred^-1 + E^T Sz^-1 E)^-1``.
    """
    P_pred = np.asarray(P_pred, float)
    E = np.atleast_2d(np.asarray(E, float))
    p = P_pred.shape[0]
    if E.shape[0] == 0:
        return P_pred.copy(), np.zeros((p, 0))
    Sz = np.atleast_2d(np.asarray(Sigma_z, float))
    if E.shape[1] != p or Sz.shape != (E.shape[0], E.shape[0]):
        raise ValueError(f"shape mismatch: P {P_pred.shape}, E {E.shape}, Sigma_z {Sz.shape}")
    innov = _sym(E @ P_pred @ E.T + Sz)
    try:
        gain = np.linalg.solve(innov, E @ P_pred).T
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("singular innovation covariance") from exc
    info = np.linalg.inv(P_pred) + E.T @ np.linalg.solve(Sz, E)
    return _sym(np.linalg.inv(info)), gain


def prediction_sequence(model: GaussMarkovModel, P_seq) -> list[np.ndarray]:
    """Prior covariance before each step: Sx0 at t=0, then A P_{t-1} A^T + W."""
    preds = [np.array(model.sigma_x0)]
    preds += [riccati_predict(P, model) for P in P_seq[:-1]]
    return preds


def _factor_increment(M, info_scale):
    M = _sym(M)
    lam, U = np.linalg.eigh(M)
    if lam[0] < -NEGATIVE_TOL:
        raise InconsistentCovarianceError(
            f"information increment has eigenvalue {lam[0]:.3e} < -{NEGATIVE_TOL}")
    top = max(lam[-1], 0.0)
    keep = lam > max(RANK_RTOL * top, NOISE_FLOOR * info_scale)
    lam, U = lam[keep][::-1], U[:, keep][:, ::-1]
    # fix eigenvector signs: largest-magnitude entry positive
    for k in range(U.shape[1]):
        if U[np.argmax(np.abs(U[:, k])), k] < 0:
            U[:, k] = -U[:, k]
    return U.T.copy(), np.diag(1.0 / lam)


def sensor_from_covariances(model: GaussMarkovModel, P_seq) -> SensorRealization:
    """Factor each information increment into (E_t, Sigma_z_t)."""
    P_seq = [np.asarray(P, float) for P in P_seq]
    E_seq, S_seq = [], []
    for P, pred in zip(P_seq, prediction_sequence(model, P_seq)):
        Pinv = np.linalg.inv(P)
        E, Sz = _factor_increment(Pinv - np.linalg.inv(pred), np.linalg.norm(Pinv, 2))
        E_seq.append(E)
        S_seq.append(Sz)
    return SensorRealization(E_seq, S_seq)


def stationary_sensor(model: GaussMarkovModel, P) -> SensorRealization:
    """Time-invariant sensor whose Riccati fixed point is P."""
    P = np.asarray(P, float)
    Pinv = np.linalg.inv(P)
    E, Sz = _factor_increment(Pinv - np.linalg.inv(riccati_predict(P, model)),
                              np.linalg.norm(Pinv, 2))
    return SensorRealization([E], [Sz], stationary=True)


def information_rate_from_covariances(model: GaussMarkovModel, P_seq) -> list[float]:
    """Per-step ``1/2 logdet(prediction) - 1/2 logdet P_t`` in nats."""
    P_seq = [np.asarray(P, float) for P in P_seq]
    return [0.5 * (np.linalg.slogdet(pred)[1] - np.linalg.slogdet(P)[1])
            for P, pred in zip(P_seq, prediction_sequence(model, P_seq))]


def run_riccati(model: GaussMarkovModel, realization: SensorRealization, steps: int | None = None):
    """Covariances produced by the filter fed with the realized sensor.

    Starts from the initial-state covariance.  Returns (P_pred list,
    P_post list, gain list).
    """
    if steps is None:
        if realization.stationary:
            raise ValueError("a stationary realization needs an explicit number of steps")
        steps = len(realization)
    preds, posts, gains = [], [], []
    pred = np.array(model.sigma_x0)
    for t in range(steps):
        E, Sz = realization.step(t)
        post, K = riccati_correct(pred, E, Sz)
        preds.append(pred)
        posts.append(post)
        gains.append(K)
        pred = riccati_predict(post, model)
    return preds, posts, gains


def kalman_step(model: GaussMarkovModel, estimate, P_post, E, Sigma_z, measurement) -> KalmanState:
    """One predict + correct step of the estimator for a single trajectory.

    ``estimate``/``P_post`` describe step t-1; pass ``estimate=None`` to
    start from the zero-mean prior with covariance Sx0.
    """
    if estimate is None:
        y_pred = np.zeros(model.p)
        P_pred = np.array(model.sigma_x0)
    else:
        y_pred = model.A @ np.asarray(estimate, float)
        P_pred = riccati_predict(P_post, model)
    P_new, K = riccati_correct(P_pred, E, Sigma_z)
    E = np.atleast_2d(np.asarray(E, float))
    y = y_pred if E.shape[0] == 0 else y_pred + K @ (np.asarray(measurement, float) - E @ y_pred)
    return KalmanState(P_pred=P_pred, P_post=P_new, gain=K, estimate=y)
