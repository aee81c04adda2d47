"""Monte Carlo check of a realized sensor + Kalman estimator.

Randomness is keyed by step: the draws for step t come from a generator
seeded with ``SeedSequence(seed, spawn_key=(t,))`` and fill a
``(trajectories, k)`` block in which row i always belongs to trajectory i.
Any partition of the work over trajectories therefore sees the same
numbers.  Reductions are plain numpy sums over the trajectory axis in a
fixed order.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .model import GaussMarkovModel
from .realization import SensorRealization, riccati_correct, riccati_predict, run_riccati

STATIONARY_RTOL = 1e-10
CONSISTENCY_RTOL = 1e-6


@dataclass(frozen=True)
class SimulationConfig:
    trajectories: int
    horizon: int
    seed: int = 0

    def __post_init__(self):
        if int(self.trajectories) != self.trajectories or self.trajectories < 1:
            raise ValueError("trajectories must be a positive integer")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError("horizon must be a positive integer")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass
class SimulationReport:
    empirical_mse: list[tuple[float, float]]
    theoretical_mse: list[float]
    max_z_score: float
    # first step whose filter covariance has settled (None if never)
    stationary_start: int | None = None

    @property
    def z_scores(self) -> list[float]:
        return [(m - th) / se if se > 0 else 0.0
                for (m, se), th in zip(self.empirical_mse, self.theoretical_mse)]

    def to_dict(self) -> dict:
        return {
            "empirical_mse": [{"mean": m, "stderr": se} for m, se in self.empirical_mse],
            "theoretical_mse": self.theoretical_mse,
            "max_z_score": self.max_z_score,
            "stationary_start": self.stationary_start,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "empirical_mse", "stderr", "theoretical_mse"])
        for t, ((m, se), th) in enumerate(zip(self.empirical_mse, self.theoretical_mse)):
            w.writerow([t, repr(m), repr(se), repr(th)])
        return buf.getvalue()


def _step_rng(seed: int, t: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(t,)))


class _FactorCache:
    def __init__(self):
        self._cache = {}

    def __call__(self, S):
        key = (S.shape, S.tobytes())
        if key not in self._cache:
            self._cache[key] = np.linalg.cholesky(S) if S.size else S
        return self._cache[key]


def _check_consistency(model, realization, P_seq, posts):
    """Raise if the realized filter does not reproduce P_seq."""
    if P_seq is None:
        return
    P_seq = [np.asarray(P, float) for P in P_seq]
    if realization.stationary:
        P = P_seq[-1]
        E, Sz = realization.step(0)
        P_fix, _ = riccati_correct(riccati_predict(P, model), E, Sz)
        pairs = [(P_fix, P)]
    else:
        pairs = list(zip(posts[:len(P_seq)], P_seq))
    for got, want in pairs:
        if got.shape != want.shape:
            raise ValueError("covariance shapes do not match the model")
        if np.linalg.norm(got - want) > CONSISTENCY_RTOL * np.linalg.norm(want):
            raise ValueError("realization does not reproduce the given covariances")


def _validate(model, realization, horizon):
    p = model.p
    if not realization.stationary and horizon > len(realization):
        raise ValueError(
            f"horizon {horizon} exceeds the {len(realization)}-step realization")
    for E, Sz in zip(realization.E_seq, realization.Sigma_z_seq):
        if E.ndim != 2 or E.shape[1] != p or Sz.shape != (E.shape[0], E.shape[0]):
            raise ValueError(f"sensor shapes {E.shape}, {Sz.shape} inconsistent with p={p}")


def simulate(model: GaussMarkovModel, realization: SensorRealization, P_seq,
             config: SimulationConfig, gain_scale: float = 1.0) -> SimulationReport:
    """Simulate source, sensor and Kalman estimator; compare MSE with theory.

    ``gain_scale`` multiplies every Kalman gain (1.0 is the optimal filter);
    the theoretical column always refers to the optimal filter.
    """
    T, N, p = config.horizon, config.trajectories, model.p
    _validate(model, realization, T)
    preds, posts, gains = run_riccati(model, realization, T)
    _check_consistency(model, realization, P_seq, posts)

    chol = _FactorCache()
    L0, Lw = chol(np.asarray(model.sigma_x0)), chol(np.asarray(model.sigma_w))
    A = model.A
    x = y = None
    mse = []
    for t in range(T):
        E, Sz = realization.step(t)
        m = E.shape[0]
        noise = _step_rng(config.seed, t).standard_normal((N, p + m))
        if t == 0:
            x = noise[:, :p] @ L0.T
            y_pred = np.zeros((N, p))
        else:
            x = x @ A.T + noise[:, :p] @ Lw.T
            y_pred = y @ A.T
        if m:
            obs = x @ E.T + noise[:, p:] @ chol(Sz).T
            y = y_pred + (obs - y_pred @ E.T) @ (gain_scale * gains[t]).T
        else:
            y = y_pred
        err = np.einsum("ij,ij->i", x - y, x - y)
        mse.append((float(err.mean()), float(err.std(ddof=1) / np.sqrt(N)) if N > 1 else 0.0))

    theory = [float(np.trace(P)) for P in posts]
    start = None
    for t in range(1, T):
        if np.linalg.norm(posts[t] - posts[t - 1]) <= STATIONARY_RTOL * np.linalg.norm(posts[t]):
            start = t
            break
    report = SimulationReport(mse, theory, 0.0, start)
    report.max_z_score = float(max(abs(z) for z in report.z_scores))
    return report


def empirical_information_rate(model: GaussMarkovModel, realization: SensorRealization,
                               P_seq=None) -> float:
    """Average Gaussian information rate of the realized sensor (nats/step).

    Computed through the Riccati recursion, not from samples.  A stationary
    realization is evaluated at its fixed point (the last entry of P_seq).
    """
    if realization.stationary:
        if P_seq is None:
            raise ValueError("a stationary realization needs its fixed-point covariance")
        P = np.asarray(P_seq[-1], float)
        _check_consistency(model, realization, [P], None)
        pred = riccati_predict(P, model)
        post, _ = riccati_correct(pred, *realization.step(0))
        return float(0.5 * (np.linalg.slogdet(pred)[1] - np.linalg.slogdet(post)[1]))
    preds, posts, _ = run_riccati(model, realization)
    _check_consistency(model, realization, P_seq, posts)
    rates = [0.5 * (np.linalg.slogdet(a)[1] - np.linalg.slogdet(b)[1]) for a, b in zip(preds, posts)]
    return float(np.mean(rates))
