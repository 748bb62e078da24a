"""The contrastive Bayesian loss family and its analytical gradient.

Per anchor ``i`` the hard positive and hard negative sets contribute

    S_P = delta_P * sum_{j in P_i*} exp((alpha_P - m_ij) / beta_P)
    S_N = delta_N * sum_{j in N_i*} exp((m_ij - alpha_N) / beta_N)

which pass through an outer transform ``g`` (``log(1 + S)`` by default) and
are averaged over all anchors. A metric variance term pulls every negative
similarity of an anchor towards a target ``xi_i`` mixing the anchor's mean
positive and mean negative similarity:

    L = L_P + L_N + lambda * L_2

Hard-set membership and ``xi_i`` are per-batch constants: gradients do not
flow through the Gamma thresholds or the targets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bayes import GaussianFit
from .errors import DegenerateFit, NonFiniteLoss
from .geometry import normalize_rows, similarity_matrix
from .pairs import DEFAULT_EPSILON, PairIndex, build_pair_index

VARIANTS = ("log", "const", "sqrt")
DELTA_MODES = ("constant_one", "batch_ratio")


@dataclass(frozen=True)
class LossConfig:
    alpha_pos: float = 0.5
    beta_pos: float = 0.5
    alpha_neg: float = 1.0
    beta_neg: float = 0.01
    delta_pos: float = 1.0
    delta_neg: float = 1.0
    lambda_: float = 1.0
    gamma: float = 0.2
    epsilon: float = DEFAULT_EPSILON
    variant: str = "log"
    delta_mode: str = "constant_one"

    def __post_init__(self):
        if not (self.beta_pos > 0 and self.beta_neg > 0):
            raise ValueError("beta_pos and beta_neg must be positive")
        if not (self.delta_pos > 0 and self.delta_neg > 0):
            raise ValueError("delta_pos and delta_neg must be positive")
        if self.lambda_ < 0:
            raise ValueError("lambda must be >= 0")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.delta_mode not in DELTA_MODES:
            raise ValueError(f"delta_mode must be one of {DELTA_MODES}")


# Presets for few-class fine-grained data and for large many-class data.
FINE_GRAINED_DEFAULTS = LossConfig()
LARGE_SCALE_DEFAULTS = LossConfig(alpha_pos=0.5, beta_pos=0.25, alpha_neg=0.5, beta_neg=0.05, lambda_=0.001)


@dataclass(frozen=True)
class Selection:
    """Per-batch constants of the loss: pair sets, hard sets and targets."""

    pairs: PairIndex
    xi: np.ndarray


@dataclass(frozen=True)
class LossReport:
    total: float
    pos_term: float
    neg_term: float
    mvc_term: float
    grad: np.ndarray
    xi: np.ndarray = field(repr=False)


def target_values(sims: np.ndarray, positive: np.ndarray, negative: np.ndarray, gamma: float) -> np.ndarray:
    """Per-anchor target ``gamma * mean_pos + (1 - gamma) * mean_neg``.

    Anchors with an empty positive or negative set get NaN.
    """
    sims = np.asarray(sims, dtype=np.float64)
    n_pos = positive.sum(axis=-1)
    n_neg = negative.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_pos = np.where(positive, sims, 0.0).sum(axis=-1) / n_pos
        mean_neg = np.where(negative, sims, 0.0).sum(axis=-1) / n_neg
    xi = gamma * mean_pos + (1.0 - gamma) * mean_neg
    return np.where((n_pos == 0) | (n_neg == 0), np.nan, xi)


def _mvc(sims: np.ndarray, negative: np.ndarray, xi: np.ndarray):
    """Variance term and its gradient; ``sims`` may carry leading stack axes."""
    valid = ~np.isnan(xi)
    n_valid = int(valid.sum())
    if n_valid == 0:
        return np.zeros(sims.shape[:-2]), np.zeros_like(sims)
    n_neg = np.maximum(negative.sum(axis=-1), 1)
    mask = negative & valid[:, None]
    resid = np.where(mask, sims - np.where(valid, xi, 0.0)[:, None], 0.0)
    value = ((resid**2).sum(axis=-1) / n_neg).sum(axis=-1) / n_valid
    grad = 2.0 * resid / (n_neg[:, None] * n_valid)
    return value, grad


def mvc_loss(sims: np.ndarray, negative: np.ndarray, xi: np.ndarray) -> float:
    """Mean over valid anchors of the mean squared deviation of negatives from ``xi``."""
    return float(_mvc(np.asarray(sims, dtype=np.float64), negative, np.asarray(xi, dtype=np.float64))[0])


def _masked_logsumexp(exponents: np.ndarray, mask: np.ndarray):
    """Row-wise log-sum-exp over masked entries and the matching softmax weights."""
    e = np.where(mask, exponents, -np.inf)
    has_any = mask.any(axis=-1)
    shift = np.where(has_any, e.max(axis=-1), 0.0)
    w = np.exp(e - shift[..., None])
    total = np.where(has_any, w.sum(axis=-1), 1.0)
    lse = np.where(has_any, shift + np.log(total), -np.inf)
    return lse, w / total[..., None]


def _transform(log_s: np.ndarray, variant: str):
    """Apply ``g`` to ``S = exp(log_s)``; return ``g(S)`` and ``dg/dlog_s``.

    Empty sets (``log_s = -inf``) map to 0 with zero derivative for every variant.
    """
    with np.errstate(over="ignore"):
        soft = np.logaddexp(0.0, log_s)
        if variant == "log":
            return soft, np.exp(log_s - soft)
        if variant == "const":
            s = np.exp(log_s)
            return s, s
        half = 0.5 * soft
        return np.expm1(half), 0.5 * np.exp(log_s - half)


def _deltas(pairs: PairIndex, cfg: LossConfig) -> tuple[np.ndarray, np.ndarray]:
    n = pairs.n
    if cfg.delta_mode == "constant_one":
        return np.full(n, cfg.delta_pos), np.full(n, cfg.delta_neg)
    n_pos = pairs.positive.sum(axis=1).astype(np.float64)
    n_neg = pairs.negative.sum(axis=1).astype(np.float64)
    # A zero delta only arises when the matching hard set is empty; use 1 there.
    d_pos = np.where((n_pos > 0) & (n_neg > 0), n_neg / np.maximum(n_pos, 1) ** 2, 1.0)
    d_neg = np.where((n_pos > 0) & (n_neg > 0), n_pos / np.maximum(n_neg, 1) ** 2, 1.0)
    return d_pos, d_neg


def _bayes_terms(sims: np.ndarray, pairs: PairIndex, cfg: LossConfig):
    n = sims.shape[-1]
    d_pos, d_neg = _deltas(pairs, cfg)

    lse_p, w_p = _masked_logsumexp((cfg.alpha_pos - sims) / cfg.beta_pos, pairs.hard_positive)
    lse_n, w_n = _masked_logsumexp((sims - cfg.alpha_neg) / cfg.beta_neg, pairs.hard_negative)
    g_p, dg_p = _transform(np.log(d_pos) + lse_p, cfg.variant)
    g_n, dg_n = _transform(np.log(d_neg) + lse_n, cfg.variant)

    grad = (-(dg_p[..., None] * w_p) / cfg.beta_pos + (dg_n[..., None] * w_n) / cfg.beta_neg) / n
    return g_p.sum(axis=-1) / n, g_n.sum(axis=-1) / n, grad


def contrastive_bayes_term(sims: np.ndarray, pairs: PairIndex, cfg: LossConfig) -> tuple[float, float]:
    """Return ``(pos_term, neg_term)`` averaged over every anchor of the batch."""
    pos, neg, _ = _bayes_terms(np.asarray(sims, dtype=np.float64), pairs, cfg)
    return float(pos), float(neg)


def select(sims: np.ndarray, labels, cfg: LossConfig) -> Selection:
    """Mine hard pairs and compute targets for the current batch."""
    pairs = build_pair_index(sims, labels, cfg.epsilon)
    return Selection(pairs, target_values(sims, pairs.positive, pairs.negative, cfg.gamma))


def similarity_loss(sims: np.ndarray, selection: Selection, cfg: LossConfig):
    """Loss components and ``dL/dsims`` with the selection held fixed.

    ``sims`` may be a stack of similarity matrices sharing one selection.
    Gradient entry ``[i, j]`` is the derivative w.r.t. the similarity as seen
    from anchor ``i``.
    """
    pos, neg, grad = _bayes_terms(sims, selection.pairs, cfg)
    mvc, grad_mvc = _mvc(sims, selection.pairs.negative, selection.xi)
    return pos, neg, mvc, grad + cfg.lambda_ * grad_mvc


def loss_values(raw: np.ndarray, selection: Selection, cfg: LossConfig) -> np.ndarray:
    """Total loss for a stack of raw embedding matrices ``(..., n, d)``."""
    raw = np.asarray(raw, dtype=np.float64)
    x = raw / np.linalg.norm(raw, axis=-1, keepdims=True)
    sims = x @ np.swapaxes(x, -1, -2)
    pos, neg, mvc, _ = similarity_loss(sims, selection, cfg)
    return pos + neg + cfg.lambda_ * mvc


def cbml_loss_and_grad(raw: np.ndarray, labels, cfg: LossConfig, selection: Selection | None = None) -> LossReport:
    """Total loss and its gradient w.r.t. the raw (un-normalized) embeddings.

    When ``selection`` is given, its hard sets and targets are reused instead
    of being mined from ``raw``; this is how finite-difference checks keep the
    discrete choices fixed.
    """
    raw = np.asarray(raw, dtype=np.float64)
    x = normalize_rows(raw)
    sims = similarity_matrix(x)
    if selection is None:
        selection = select(sims, labels, cfg)
    # Overflow is reported below as NonFiniteLoss, not as a floating-point trap.
    with np.errstate(over="ignore", invalid="ignore"):
        pos, neg, mvc, grad_s = similarity_loss(sims, selection, cfg)
    pos, neg, mvc = float(pos), float(neg), float(mvc)
    total = pos + neg + cfg.lambda_ * mvc
    if not all(math.isfinite(v) for v in (pos, neg, mvc, total)):
        raise NonFiniteLoss(f"non-finite loss: L_P={pos}, L_N={neg}, L2={mvc}; check beta values")

    # sims = x x^T, so each entry feeds both its row and its column.
    grad_x = (grad_s + grad_s.T) @ x
    norms = np.linalg.norm(raw, axis=1)
    radial = np.einsum("ij,ij->i", x, grad_x)
    grad_raw = (grad_x - x * radial[:, None]) / norms[:, None]
    if not np.all(np.isfinite(grad_raw)):
        raise NonFiniteLoss("non-finite gradient")
    return LossReport(total, pos, neg, mvc, grad_raw, selection.xi)


def suggest_parameters(fit: GaussianFit, delta_pos: float = 1.0, delta_neg: float = 1.0):
    """Initial ``(alpha_pos, beta_pos, alpha_neg, beta_neg)`` from a Gaussian fit.

    Both offsets sit at the midpoint of the two means; the scales follow from
    matching ``alpha / beta`` to the equal-variance ratio exponent.
    """
    if fit.mu_pos == fit.mu_neg:
        raise DegenerateFit("equal means leave beta undefined")
    alpha = 0.5 * (fit.mu_pos + fit.mu_neg)
    spread = fit.mu_pos**2 - fit.mu_neg**2
    ratio_pos = spread / (2 * fit.sigma_pos**2) + math.log(delta_pos)
    ratio_neg = spread / (2 * fit.sigma_neg**2) - math.log(delta_neg)
    if ratio_pos == 0 or ratio_neg == 0:
        raise DegenerateFit("alpha/beta ratio is zero")
    beta_pos = alpha / ratio_pos
    beta_neg = alpha / ratio_neg
    if beta_pos <= 0 or beta_neg <= 0:
        raise DegenerateFit(f"fit implies non-positive beta ({beta_pos}, {beta_neg})")
    return alpha, beta_pos, alpha, beta_neg
