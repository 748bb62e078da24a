"""Per-anchor positive/negative pair sets and hard-pair mining.

All sets are stored as boolean ``n x n`` masks where row ``i`` describes
anchor ``i``. Index lists for a single anchor are available through
:meth:`PairIndex.positives` and friends.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_EPSILON = 0.1


def partition_pairs(labels) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(positive, negative)`` masks for every anchor.

    ``positive[i, j]`` is true when ``labels[j] == labels[i]`` and ``j != i``;
    ``negative[i, j]`` when the labels differ.
    """
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size < 2:
        raise ValueError("need at least two labels")
    same = labels[:, None] == labels[None, :]
    positive = same.copy()
    np.fill_diagonal(positive, False)
    return positive, ~same


@dataclass(frozen=True)
class PairIndex:
    positive: np.ndarray
    negative: np.ndarray
    hard_positive: np.ndarray
    hard_negative: np.ndarray
    gamma_max_neg: np.ndarray
    gamma_min_pos: np.ndarray

    @property
    def n(self) -> int:
        return self.positive.shape[0]

    def positives(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.positive[i])

    def negatives(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.negative[i])

    def hard_positives(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.hard_positive[i])

    def hard_negatives(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.hard_negative[i])


def mine_hard_pairs(
    sims: np.ndarray,
    positive: np.ndarray,
    negative: np.ndarray,
    epsilon: float = DEFAULT_EPSILON,
) -> PairIndex:
    """Select hard positives and negatives per anchor from one mini-batch.

    A positive ``j`` is hard when ``sims[i, j] < max_neg_i + epsilon``; a
    negative ``j`` is hard when ``sims[i, j] > min_pos_i - epsilon``. An anchor
    without negatives has no hard positives and vice versa, which falls out
    of using -inf/+inf as the empty max/min.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    sims = np.asarray(sims, dtype=np.float64)
    gamma_max_neg = np.where(negative, sims, -np.inf).max(axis=1)
    gamma_min_pos = np.where(positive, sims, np.inf).min(axis=1)
    with np.errstate(invalid="ignore"):
        # -inf + inf gives nan, and nan comparisons are False: the empty case.
        hard_pos = positive & (sims < (gamma_max_neg + epsilon)[:, None])
        hard_neg = negative & (sims > (gamma_min_pos - epsilon)[:, None])
    return PairIndex(positive, negative, hard_pos, hard_neg, gamma_max_neg, gamma_min_pos)


def build_pair_index(sims: np.ndarray, labels, epsilon: float = DEFAULT_EPSILON) -> PairIndex:
    positive, negative = partition_pairs(labels)
    return mine_hard_pairs(sims, positive, negative, epsilon)
