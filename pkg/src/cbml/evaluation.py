"""Retrieval and clustering metrics plus similarity-distribution summaries."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import KOutOfRange, LengthMismatch, NoPairs
from .geometry import EmbeddingBatch, normalize_rows, similarity_matrix
from .pairs import partition_pairs
from .pseudo import kmeans
from .trainer import forward

DEFAULT_KS = (1, 2, 4, 8)


def _rank(sims: np.ndarray) -> np.ndarray:
    # Stable sort on negated similarity: equal scores keep ascending index order.
    return np.argsort(-sims, axis=1, kind="stable")


def recall_at_k(embeddings: EmbeddingBatch, ks=DEFAULT_KS) -> dict[int, float]:
    """Leave-one-out Recall@K: every row queries all other rows."""
    n = embeddings.n
    ks = [int(k) for k in ks]
    if not ks or min(ks) < 1 or max(ks) >= n:
        raise KOutOfRange(f"every K must satisfy 1 <= K < n = {n}; got {ks}")
    sims = similarity_matrix(embeddings).copy()
    np.fill_diagonal(sims, -np.inf)
    order = _rank(sims)[:, : n - 1]
    labels = embeddings.labels
    hits = labels[order] == labels[:, None]
    first_hit = np.where(hits.any(axis=1), hits.argmax(axis=1), n)
    return {k: float(np.mean(first_hit < k)) for k in ks}


def recall_at_k_split(query: EmbeddingBatch, gallery: EmbeddingBatch, ks=DEFAULT_KS) -> dict[int, float]:
    """Recall@K with a separate gallery (query rows are not in the gallery)."""
    ks = [int(k) for k in ks]
    if not ks or min(ks) < 1 or max(ks) > gallery.n:
        raise KOutOfRange(f"every K must satisfy 1 <= K <= gallery size {gallery.n}; got {ks}")
    order = _rank(query.data @ gallery.data.T)
    hits = gallery.labels[order] == query.labels[:, None]
    first_hit = np.where(hits.any(axis=1), hits.argmax(axis=1), gallery.n)
    return {k: float(np.mean(first_hit < k)) for k in ks}


def _entropy(counts: np.ndarray) -> float:
    # Sorted summation makes the result independent of count order, so nmi is exactly symmetric.
    counts = np.sort(counts[counts > 0])
    p = counts / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi(pred, truth) -> float:
    """Normalized mutual information ``2 I / (H(pred) + H(truth))`` (natural log).

    Two single-cluster partitions score 1; if exactly one is single-cluster the
    score is 0.
    """
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise LengthMismatch(f"lengths differ: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise LengthMismatch("need at least one label")
    _, p_idx = np.unique(pred, return_inverse=True)
    _, t_idx = np.unique(truth, return_inverse=True)
    joint = np.zeros((p_idx.max() + 1, t_idx.max() + 1))
    np.add.at(joint, (p_idx, t_idx), 1.0)
    h_p = _entropy(joint.sum(axis=1))
    h_t = _entropy(joint.sum(axis=0))
    if h_p == 0.0 and h_t == 0.0:
        return 1.0
    if h_p == 0.0 or h_t == 0.0:
        return 0.0
    mi = h_p + h_t - _entropy(joint.ravel())
    return float(min(max(2.0 * mi / (h_p + h_t), 0.0), 1.0))


def pair_similarity_samples(sims: np.ndarray, labels):
    """Similarities of unique (i < j) positive and negative pairs."""
    positive, negative = partition_pairs(labels)
    upper = np.triu(np.ones(sims.shape, dtype=bool), 1)
    return sims[positive & upper], sims[negative & upper]


@dataclass(frozen=True)
class RetrievalReport:
    recall_at: dict[int, float]
    nmi: float
    neg_sim_variance: float
    pos_sim_mean: float
    neg_sim_mean: float

    def to_dict(self) -> dict:
        out = {f"recall_at_{k}": v for k, v in sorted(self.recall_at.items())}
        out.update(
            nmi=self.nmi,
            neg_sim_variance=self.neg_sim_variance,
            pos_sim_mean=self.pos_sim_mean,
            neg_sim_mean=self.neg_sim_mean,
        )
        return out

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def retrieval_report(raw_embeddings: np.ndarray, labels, ks=DEFAULT_KS, seed: int = 0) -> RetrievalReport:
    """Recall@K, NMI of a k-means clustering (k = number of classes), pair statistics."""
    batch = EmbeddingBatch.from_raw(raw_embeddings, labels)
    recalls = recall_at_k(batch, ks)
    k = len(np.unique(batch.labels))
    clusters = kmeans(batch.data, k, np.random.default_rng(seed))
    sims = similarity_matrix(batch)
    pos, neg = pair_similarity_samples(sims, batch.labels)
    return RetrievalReport(
        recall_at=recalls,
        nmi=nmi(clusters.assignments, batch.labels),
        neg_sim_variance=float(np.var(neg)) if neg.size else 0.0,
        pos_sim_mean=float(np.mean(pos)) if pos.size else math.nan,
        neg_sim_mean=float(np.mean(neg)) if neg.size else math.nan,
    )


@dataclass(frozen=True)
class HistogramReport:
    bin_centers: np.ndarray
    pos_density: np.ndarray
    neg_density: np.ndarray
    log_ratio: np.ndarray

    def write_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_center", "pos_density", "neg_density", "log_ratio"])
            for row in zip(self.bin_centers, self.pos_density, self.neg_density, self.log_ratio):
                w.writerow(["" if math.isnan(v) else repr(float(v)) for v in row])


def histogram_from_samples(pos, neg, bins: int = 64) -> HistogramReport:
    pos = np.asarray(pos, dtype=np.float64)
    neg = np.asarray(neg, dtype=np.float64)
    if bins < 2:
        raise ValueError("bins must be >= 2")
    if pos.size == 0 or neg.size == 0:
        raise NoPairs("need at least one positive and one negative pair")
    lo = min(pos.min(), neg.min())
    hi = max(pos.max(), neg.max())
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    width = edges[1] - edges[0]
    pos_d = np.histogram(pos, edges)[0] / (pos.size * width)
    neg_d = np.histogram(neg, edges)[0] / (neg.size * width)
    both = (pos_d > 0) & (neg_d > 0)
    log_ratio = np.full(bins, np.nan)
    log_ratio[both] = np.log(pos_d[both] / neg_d[both])
    return HistogramReport(0.5 * (edges[:-1] + edges[1:]), pos_d, neg_d, log_ratio)


def similarity_histogram(sims: np.ndarray, labels, bins: int = 64) -> HistogramReport:
    """Separately normalized pos/neg densities over equal-width bins and their log ratio."""
    pos, neg = pair_similarity_samples(np.asarray(sims, dtype=np.float64), labels)
    return histogram_from_samples(pos, neg, bins)


def embed_and_normalize(encoder, features: np.ndarray) -> np.ndarray:
    return normalize_rows(forward(encoder, features))
