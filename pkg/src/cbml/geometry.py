"""Row normalization and cosine similarity on dense embedding matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ZeroNormRow

MIN_NORM = 1e-12


def normalize_rows(raw: np.ndarray) -> np.ndarray:
    """Scale every row of ``raw`` to unit Euclidean norm.

    Raises ``ZeroNormRow`` for the first row whose norm is <= 1e-12.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {raw.shape}")
    norms = np.linalg.norm(raw, axis=1)
    bad = np.flatnonzero(norms <= MIN_NORM)
    if bad.size:
        raise ZeroNormRow(int(bad[0]))
    return raw / norms[:, None]


@dataclass(frozen=True)
class EmbeddingBatch:
    """Unit-norm embedding rows with integer class labels."""

    data: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        labels = np.asarray(self.labels)
        if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] < 1:
            raise ValueError(f"need an n x d matrix with n >= 2, d >= 1; got {data.shape}")
        if labels.shape != (data.shape[0],):
            raise ValueError("labels length must equal the number of rows")
        if labels.size and (not np.issubdtype(labels.dtype, np.integer) or labels.min() < 0):
            raise ValueError("labels must be non-negative integers")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "labels", labels.astype(np.int64))

    @classmethod
    def from_raw(cls, raw: np.ndarray, labels) -> "EmbeddingBatch":
        return cls(normalize_rows(raw), np.asarray(labels))

    @property
    def n(self) -> int:
        return self.data.shape[0]


def similarity_matrix(batch: EmbeddingBatch | np.ndarray) -> np.ndarray:
    """Cosine similarity matrix of unit-norm rows.

    The upper triangle is mirrored so the result is exactly symmetric.
    """
    data = batch.data if isinstance(batch, EmbeddingBatch) else np.asarray(batch, dtype=np.float64)
    sims = data @ data.T
    upper = np.triu(sims)
    return upper + np.triu(sims, 1).T
