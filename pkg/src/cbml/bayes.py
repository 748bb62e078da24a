"""Gaussian modelling of pair similarities and the resulting posteriors.

Positive and negative pair similarities are each fitted by a Gaussian. The
likelihood ratio of the two fits has a quadratic exponent,
``phi_n(z) = varsigma * exp(zeta1 z^2 + zeta2 z + zeta3)``, which collapses
to an affine exponent when both standard deviations agree. Combined with the
prior ratio ``theta = |P_i| / |N_i|`` this gives closed-form posteriors for
a pair being positive or negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientPairs, InsufficientVariance

# Beyond this exponent magnitude phi values are formed in log space.
LOG_SPACE_THRESHOLD = 500.0


@dataclass(frozen=True)
class GaussianFit:
    mu_pos: float
    sigma_pos: float
    mu_neg: float
    sigma_neg: float

    def __post_init__(self):
        if not (self.sigma_pos > 0 and self.sigma_neg > 0):
            raise InsufficientVariance("standard deviations must be positive")
        for mu in (self.mu_pos, self.mu_neg):
            if not -1.0 - 1e-9 <= mu <= 1.0 + 1e-9:
                raise ValueError(f"mean {mu} outside [-1, 1]")


@dataclass(frozen=True)
class RatioFit:
    varsigma: float
    zeta1: float
    zeta2: float
    zeta3: float

    def log_phi_n(self, z):
        z = np.asarray(z, dtype=np.float64)
        return math.log(self.varsigma) + (self.zeta1 * z + self.zeta2) * z + self.zeta3


@dataclass(frozen=True)
class LinearRatioFit:
    """Affine-exponent ratio ``phi_n(z) = exp(zeta * z - zeta0)``."""

    zeta: float
    zeta0: float

    def log_phi_n(self, z):
        return self.zeta * np.asarray(z, dtype=np.float64) - self.zeta0


def pair_similarities(sims: np.ndarray, positive: np.ndarray, negative: np.ndarray):
    """Similarities of unique unordered positive and negative pairs (i < j)."""
    upper = np.triu(np.ones(sims.shape, dtype=bool), 1)
    return sims[positive & upper], sims[negative & upper]


def fit_similarity_gaussians(
    sims: np.ndarray, positive: np.ndarray, negative: np.ndarray
) -> GaussianFit:
    pos, neg = pair_similarities(np.asarray(sims, dtype=np.float64), positive, negative)
    return fit_from_samples(pos, neg)


def fit_from_samples(pos, neg) -> GaussianFit:
    """Moment-matched fit with the unbiased (n - 1) standard deviation."""
    pos = np.asarray(pos, dtype=np.float64)
    neg = np.asarray(neg, dtype=np.float64)
    if pos.size < 2 or neg.size < 2:
        raise InsufficientPairs(
            f"need >= 2 positive and >= 2 negative pairs, got {pos.size} and {neg.size}"
        )
    sd_pos = float(np.std(pos, ddof=1))
    sd_neg = float(np.std(neg, ddof=1))
    if sd_pos <= 0 or sd_neg <= 0:
        raise InsufficientVariance("constant similarity sample")
    return GaussianFit(float(pos.mean()), sd_pos, float(neg.mean()), sd_neg)


def ratio_fit(fit: GaussianFit) -> RatioFit:
    vp = fit.sigma_pos**2
    vn = fit.sigma_neg**2
    return RatioFit(
        varsigma=fit.sigma_neg / fit.sigma_pos,
        zeta1=1.0 / (2 * vn) - 1.0 / (2 * vp),
        zeta2=fit.mu_pos / vp - fit.mu_neg / vn,
        zeta3=fit.mu_neg**2 / (2 * vn) - fit.mu_pos**2 / (2 * vp),
    )


def linear_ratio_fit(fit: GaussianFit) -> LinearRatioFit:
    """Affine-exponent simplification using the pooled variance of both fits."""
    var = 0.5 * (fit.sigma_pos**2 + fit.sigma_neg**2)
    return LinearRatioFit(
        zeta=(fit.mu_pos - fit.mu_neg) / var,
        zeta0=(fit.mu_pos**2 - fit.mu_neg**2) / (2 * var),
    )


def _exp_guarded(log_value):
    log_value = np.asarray(log_value, dtype=np.float64)
    big = np.abs(log_value) > LOG_SPACE_THRESHOLD
    if not big.any():
        return np.exp(log_value)
    # Saturate instead of raising an overflow warning; callers that need the
    # exact magnitude should use log_phi_n directly.
    return np.exp(np.clip(log_value, -745.0, 709.0))


def phi_n(z, rf: RatioFit | LinearRatioFit):
    """Likelihood ratio p(z | positive) / p(z | negative)."""
    out = _exp_guarded(rf.log_phi_n(z))
    return float(out) if out.ndim == 0 else out


def phi_p(z, rf: RatioFit | LinearRatioFit):
    """Likelihood ratio p(z | negative) / p(z | positive), the reciprocal of phi_n."""
    out = _exp_guarded(-rf.log_phi_n(z))
    return float(out) if out.ndim == 0 else out


def prior_ratio(n_pos: int, n_neg: int) -> float:
    if n_pos <= 0 or n_neg <= 0:
        raise InsufficientPairs("prior ratio needs nonempty positive and negative sets")
    return n_pos / n_neg


def posteriors(phi_n_value, theta):
    """Return ``(p_pos, p_neg)`` for a pair with likelihood ratio ``phi_n_value``.

    ``p_neg = 1 / (1 + phi_n * theta)``. ``p_pos`` is taken as its complement
    written in the symmetric form ``1 / (1 + 1 / (phi_n * theta))``.
    """
    phi = np.asarray(phi_n_value, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if np.any(phi <= 0) or np.any(theta <= 0):
        raise ValueError("phi_n and theta must be positive")
    odds = phi * theta
    p_neg = 1.0 / (1.0 + odds)
    p_pos = odds / (1.0 + odds)
    if p_neg.ndim == 0:
        return float(p_pos), float(p_neg)
    return p_pos, p_neg


def harmonic_mean(values) -> float:
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0 or np.any(values <= 0):
        raise ValueError("harmonic mean needs a nonempty set of positive numbers")
    return float(1.0 / np.mean(1.0 / values))
