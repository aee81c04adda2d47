"""Analytic rate-distortion expressions.

Includes the scalar Gauss-Markov formula, the published multidimensional
"dynamic reverse water-filling" formula (which is wrong for A != 0 and is
kept here only so it can be compared against the correct value), classical
reverse water-filling for i.i.d. Gaussian vectors, and the two-mode
counterexample that exposes the vector formula.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import GaussMarkovModel, validate_model

CONTRADICTION_TOL = 1e-12
WATERLEVEL_TOL = 1e-12


@dataclass(frozen=True)
class WaterfillingSolution:
    theta: float
    per_mode_distortions: list[float]
    rate: float


@dataclass(frozen=True)
class CounterexampleReport:
    a: float
    D: float
    split: tuple[float, float]
    lhs_rate: float
    rhs_rate: float
    contradiction: bool

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "D": self.D,
            "split": list(self.split),
            "lhs_rate": self.lhs_rate,
            "rhs_rate": self.rhs_rate,
            "contradiction": self.contradiction,
        }


def srd_scalar(a: float, sigma_w: float, D: float) -> float:
    """``max{0, 1/2 log(a^2 + sigma_w / D)}`` for a scalar source."""
    if D <= 0:
        raise ValueError(f"distortion must be positive, got {D}")
    if sigma_w <= 0:
        raise ValueError(f"noise variance must be positive, got {sigma_w}")
    return max(0.0, 0.5 * np.log(a * a + sigma_w / D))


def srd_rwf_vector(model: GaussMarkovModel, D: float) -> tuple[float, bool]:
    """Rate from the published vector formula and its claimed validity region.

    Returns ``(1/2 logdet(A A^T + (p/D) sigma_w), in_region)``.  This formula
    is NOT the sequential rate-distortion function unless A = 0; it exists
    for side-by-side comparison.  The rate is returned even outside the
    low-distortion region, flagged invalid.
    """
    if D <= 0:
        raise ValueError(f"distortion must be positive, got {D}")
    p, A, W = model.p, model.A, model.sigma_w
    AAt = A @ A.T
    _, logdet = np.linalg.slogdet(AAt + (p / D) * W)
    lam_min = np.linalg.eigvalsh((D / p) * AAt + W)[0]
    return 0.5 * float(logdet), bool(D / p <= lam_min)


def iid_waterfilling(source_cov, D: float) -> WaterfillingSolution:
    """Classical reverse water-filling over the eigenmodes of ``source_cov``."""
    if D <= 0:
        raise ValueError(f"distortion must be positive, got {D}")
    sig = np.linalg.eigvalsh(np.atleast_2d(np.asarray(source_cov, dtype=float)))
    budget = min(D, float(sig.sum()))
    lo, hi = 0.0, float(sig.max())
    # sum(min(theta, sig)) is increasing in theta
    while hi - lo > WATERLEVEL_TOL:
        mid = 0.5 * (lo + hi)
        if np.minimum(mid, sig).sum() < budget:
            lo = mid
        else:
            hi = mid
    theta = 0.5 * (lo + hi)
    if budget >= sig.sum():
        theta = float(sig.max())
    d = np.minimum(theta, sig)
    rate = float(np.sum(np.maximum(0.0, 0.5 * np.log(sig / theta))))
    return WaterfillingSolution(theta, d.tolist(), rate)


def counterexample_model(a: float) -> GaussMarkovModel:
    """The R^2 source with A = diag(a, 0) and unit noise."""
    return validate_model([[a, 0.0], [0.0, 0.0]], np.eye(2), np.eye(2))


def counterexample_report(a: float, D: float, split) -> CounterexampleReport:
    D1, D2 = (float(s) for s in split)
    if D1 <= 0 or D2 <= 0:
        raise ValueError("split components must be positive")
    if abs(D1 + D2 - D) > 1e-12 * max(1.0, abs(D)):
        raise ValueError(f"split {D1} + {D2} does not sum to D={D}")
    lhs, _ = srd_rwf_vector(counterexample_model(a), D)
    rhs = srd_scalar(a, 1.0, D1) + srd_scalar(0.0, 1.0, D2)
    return CounterexampleReport(
        a=float(a), D=float(D), split=(D1, D2),
        lhs_rate=lhs, rhs_rate=rhs,
        contradiction=bool(lhs - rhs > CONTRADICTION_TOL),
    )
