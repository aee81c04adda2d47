"""Gauss-Markov source model, validation and spectral helpers.

The source is ``x[t+1] = A x[t] + w[t]`` with ``w[t] ~ N(0, sigma_w)`` and
``x[0] ~ N(0, sigma_x0)``.  All rates in this package are in nats.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SYMMETRY_RTOL = 1e-10
LYAPUNOV_RTOL = 1e-12
LYAPUNOV_MAX_ITERS = 100_000


class ModelError(ValueError):
    """Raised when a model fails validation."""


class DimensionError(ModelError):
    pass


class AsymmetricCovarianceError(ModelError):
    pass


class NotPositiveDefiniteError(ModelError):
    pass


class DivergentCovarianceError(RuntimeError):
    """The state covariance has no stationary fixed point."""


@dataclass(frozen=True, eq=False)
class GaussMarkovModel:
    p: int
    A: np.ndarray
    sigma_w: np.ndarray
    sigma_x0: np.ndarray

    def __post_init__(self):
        for name in ("A", "sigma_w", "sigma_x0"):
            getattr(self, name).setflags(write=False)

    def __eq__(self, other):
        if not isinstance(other, GaussMarkovModel):
            return NotImplemented
        return (self.p == other.p
                and np.array_equal(self.A, other.A)
                and np.array_equal(self.sigma_w, other.sigma_w)
                and np.array_equal(self.sigma_x0, other.sigma_x0))

    __hash__ = None

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "A": self.A.tolist(),
            "sigma_w": self.sigma_w.tolist(),
            "sigma_x0": self.sigma_x0.tolist(),
        }


@dataclass(frozen=True)
class SpectralSummary:
    eigenvalue_magnitudes: list[float]
    unstable_log_sum: float
    is_stable: bool


def _as_square(name, M, p):
    M = np.array(M, dtype=float)
    if M.ndim == 0 and p == 1:
        M = M.reshape(1, 1)
    if M.shape != (p, p):
        raise DimensionError(f"{name} has shape {M.shape}, expected ({p}, {p})")
    if not np.all(np.isfinite(M)):
        raise ModelError(f"{name} has non-finite entries")
    return M


def _checked_covariance(name, S, p):
    S = _as_square(name, S, p)
    norm = np.linalg.norm(S)
    if np.linalg.norm(S - S.T) > SYMMETRY_RTOL * max(norm, np.finfo(float).tiny):
        raise AsymmetricCovarianceError(f"{name} is not symmetric")
    S = 0.5 * (S + S.T)
    if np.linalg.eigvalsh(S)[0] <= 0.0:
        raise NotPositiveDefiniteError(f"{name} is not positive definite")
    return S


def validate_model(A, sigma_w, sigma_x0=None, p: int | None = None) -> GaussMarkovModel:
    """Build a :class:`GaussMarkovModel` from raw array-likes.

    ``sigma_x0`` defaults to ``sigma_w``.  Covariances with a relative
    asymmetry below 1e-10 are symmetrized; anything worse is rejected.
    """
    A_arr = np.array(A, dtype=float)
    if p is None:
        p = 1 if A_arr.ndim == 0 else A_arr.shape[0]
    if not isinstance(p, (int, np.integer)) or p < 1:
        raise DimensionError(f"p must be a positive integer, got {p!r}")
    p = int(p)
    A_arr = _as_square("A", A_arr, p)
    sw = _checked_covariance("sigma_w", sigma_w, p)
    sx0 = sw.copy() if sigma_x0 is None else _checked_covariance("sigma_x0", sigma_x0, p)
    return GaussMarkovModel(p, A_arr, sw, sx0)


def scalar_model(a: float, sigma_w: float = 1.0, sigma_x0: float | None = None) -> GaussMarkovModel:
    return validate_model([[a]], [[sigma_w]], None if sigma_x0 is None else [[sigma_x0]])


def load_model(path) -> GaussMarkovModel:
    """Read a model from the JSON schema ``{"p", "A", "sigma_w", "sigma_x0"}``."""
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelError(f"cannot read model file {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ModelError("model file must hold a JSON object")
    missing = {"p", "A", "sigma_w", "sigma_x0"} - raw.keys()
    if missing:
        raise ModelError(f"model file is missing keys: {sorted(missing)}")
    try:
        return validate_model(raw["A"], raw["sigma_w"], raw["sigma_x0"], p=raw["p"])
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(str(exc)) from exc


def spectral_summary(model: GaussMarkovModel) -> SpectralSummary:
    mags = np.abs(np.linalg.eigvals(model.A))
    unstable = mags[mags > 1.0]
    return SpectralSummary(
        eigenvalue_magnitudes=sorted(mags.tolist(), reverse=True),
        unstable_log_sum=float(np.sum(np.log(unstable))),
        is_stable=bool(np.all(mags < 1.0)),
    )


def unstable_rate_lower_bound(model: GaussMarkovModel) -> float:
    """Sum of ``log|lambda|`` over eigenvalues of A with ``|lambda| > 1``."""
    return spectral_summary(model).unstable_log_sum


def stationary_state_covariance(model: GaussMarkovModel) -> np.ndarray:
    """Solve ``S = A S A^T + sigma_w`` by fixed-point iteration.

    Raises :class:`DivergentCovarianceError` when A is not stable or the
    iteration stalls (marginal stability).
    """
    if not spectral_summary(model).is_stable:
        raise DivergentCovarianceError("A has an eigenvalue of magnitude >= 1")
    A, W = model.A, model.sigma_w
    S = W.copy()
    for _ in range(LYAPUNOV_MAX_ITERS):
        S_next = A @ S @ A.T + W
        S_next = 0.5 * (S_next + S_next.T)
        if np.linalg.norm(S_next - S) <= LYAPUNOV_RTOL * np.linalg.norm(S_next):
            return S_next
        S = S_next
    raise DivergentCovarianceError(
        f"Lyapunov iteration did not converge in {LYAPUNOV_MAX_ITERS} steps")
