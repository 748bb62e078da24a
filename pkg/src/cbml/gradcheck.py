"""Central finite-difference checks of analytical gradients."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .loss import FINE_GRAINED_DEFAULTS, LARGE_SCALE_DEFAULTS, VARIANTS, LossConfig, cbml_loss_and_grad, loss_values, select
from .geometry import normalize_rows, similarity_matrix

REL_TOL = 1e-4
ABS_TOL = 1e-7
SMALL_GRAD = 1e-6


def numerical_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences of a scalar function, one coordinate at a time."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + h
        up = f(x)
        flat[k] = orig - h
        down = f(x)
        flat[k] = orig
        out[k] = (up - down) / (2 * h)
    return grad


def stacked_numerical_gradient(f_stack: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences where ``f_stack`` evaluates a stack of inputs at once."""
    x = np.asarray(x, dtype=np.float64)
    size = x.size
    steps = (np.eye(size) * h).reshape((size,) + x.shape)
    up = f_stack(x[None] + steps)
    down = f_stack(x[None] - steps)
    return ((up - down) / (2 * h)).reshape(x.shape)


def gradient_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Worst relative error; entries with magnitude below 1e-6 are judged absolutely.

    Returned on the relative scale so one threshold covers both: a small entry
    passes when its absolute error is under 1e-7.
    """
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    diff = np.abs(analytic - numeric)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    small = scale < SMALL_GRAD
    rel = np.where(small, diff / ABS_TOL * REL_TOL, diff / np.where(small, 1.0, scale))
    return float(rel.max()) if rel.size else 0.0


def check_loss_gradient(raw: np.ndarray, labels, cfg: LossConfig, h: float = 1e-5) -> float:
    sel = select(similarity_matrix(normalize_rows(raw)), labels, cfg)
    report = cbml_loss_and_grad(raw, labels, cfg, selection=sel)
    numeric = stacked_numerical_gradient(lambda r: loss_values(r, sel, cfg), raw, h)
    return gradient_error(report.grad, numeric)


@dataclass(frozen=True)
class GradcheckResult:
    max_error: float
    checks: int

    @property
    def passed(self) -> bool:
        return self.max_error < REL_TOL


def random_batch(rng: np.random.Generator, n: int = 16, d: int = 8, classes: int = 4):
    labels = np.arange(n) % classes
    rng.shuffle(labels)
    return rng.normal(size=(n, d)), labels


def run_gradcheck(trials: int = 20, seed: int = 0, n: int = 16, d: int = 8, classes: int = 4) -> GradcheckResult:
    """Check every variant with and without the variance term on ``trials`` batches."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    checks = 0
    for t in range(trials):
        raw, labels = random_batch(rng, n, d, classes)
        base = FINE_GRAINED_DEFAULTS if t % 2 == 0 else LARGE_SCALE_DEFAULTS
        for variant in VARIANTS:
            for lam in (0.0, 1.0):
                cfg = replace(base, variant=variant, lambda_=lam)
                worst = max(worst, check_loss_gradient(raw, labels, cfg))
                checks += 1
    return GradcheckResult(worst, checks)
