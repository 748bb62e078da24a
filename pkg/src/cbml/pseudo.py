"""k-means pseudo-labels and the iterative pseudo-supervised training loop."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import KTooLarge
from .geometry import normalize_rows
from .trainer import Encoder, TraceRow, TrainConfig, forward, train


@dataclass(frozen=True)
class Clustering:
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    inertia_history: tuple[float, ...] = ()
    iterations: int = 0


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    d = (x * x).sum(axis=1)[:, None] - 2.0 * x @ c.T + (c * c).sum(axis=1)[None, :]
    return np.maximum(d, 0.0)


def _kmeanspp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = [int(rng.integers(n))]
    closest = _sq_dists(x, x[centers])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            # Every point already coincides with a center; pick any unused row.
            unused = np.setdiff1d(np.arange(n), centers)
            nxt = int(rng.choice(unused))
        else:
            nxt = int(rng.choice(n, p=closest / total))
        centers.append(nxt)
        closest = np.minimum(closest, _sq_dists(x, x[[nxt]])[:, 0])
    return x[centers].copy()


def kmeans(features: np.ndarray, k: int, rng: np.random.Generator, max_iter: int = 100, n_init: int = 1) -> Clustering:
    """Lloyd's algorithm from k-means++ seeds.

    Stops at an assignment fixpoint or after ``max_iter`` updates. An empty
    cluster is re-seeded at the point farthest from its assigned centroid.
    With ``n_init > 1`` the lowest-inertia run is returned.
    """
    x = np.asarray(features, dtype=np.float64)
    n = x.shape[0]
    if k < 1 or k > n:
        raise KTooLarge(f"k={k} must lie in [1, n={n}]")
    if max_iter < 1 or n_init < 1:
        raise ValueError("max_iter and n_init must be >= 1")
    best = None
    for _ in range(n_init):
        run = _lloyd(x, k, rng, max_iter)
        if best is None or run.inertia < best.inertia:
            best = run
    return best


def _lloyd(x: np.ndarray, k: int, rng: np.random.Generator, max_iter: int) -> Clustering:
    n = x.shape[0]
    centroids = _kmeanspp(x, k, rng)
    d = _sq_dists(x, centroids)
    assign = d.argmin(axis=1)
    history = [float(d[np.arange(n), assign].sum())]
    it = 0
    for it in range(1, max_iter + 1):
        for c in range(k):
            members = assign == c
            if members.any():
                centroids[c] = x[members].mean(axis=0)
        counts = np.bincount(assign, minlength=k)
        for c in np.flatnonzero(counts == 0):
            own = _sq_dists(x, centroids)[np.arange(n), assign]
            far = int(own.argmax())
            centroids[c] = x[far]
            assign[far] = c
        d = _sq_dists(x, centroids)
        new_assign = d.argmin(axis=1)
        history.append(float(d[np.arange(n), new_assign].sum()))
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    inertia = float(d[np.arange(n), assign].sum())
    return Clustering(assign, centroids, inertia, tuple(history), it)


@dataclass(frozen=True)
class PseudoConfig:
    k: int = 4
    rounds: int = 2
    hard_mining: bool = False
    kmeans_iter: int = 100
    kmeans_restarts: int = 10
    # When set, each round draws the per-class batch count from this inclusive range.
    per_class_range: tuple[int, int] | None = None


@dataclass
class PseudoResult:
    encoder: Encoder
    pseudo_labels: np.ndarray
    rounds: list[Clustering] = field(default_factory=list)
    traces: list[list[TraceRow]] = field(default_factory=list)


def pseudo_train(features: np.ndarray, encoder: Encoder, cfg: TrainConfig, pcfg: PseudoConfig) -> PseudoResult:
    """Alternate k-means on the current embeddings with CBML training on the clusters."""
    if pcfg.rounds < 1:
        raise ValueError("rounds must be >= 1")
    features = np.asarray(features, dtype=np.float64)
    loss_cfg = cfg.loss if pcfg.hard_mining else replace(cfg.loss, epsilon=np.inf)
    cfg = replace(cfg, loss=loss_cfg)
    ss = np.random.SeedSequence(cfg.seed)
    km_seed, train_seed = ss.spawn(2)
    km_rng = np.random.default_rng(km_seed)
    train_rng = np.random.default_rng(train_seed)
    result = PseudoResult(encoder, np.zeros(features.shape[0], dtype=np.int64))
    for _ in range(pcfg.rounds):
        emb = normalize_rows(forward(result.encoder, features))
        clusters = kmeans(emb, pcfg.k, km_rng, pcfg.kmeans_iter, pcfg.kmeans_restarts)
        round_cfg = cfg
        if pcfg.per_class_range is not None:
            lo, hi = pcfg.per_class_range
            round_cfg = replace(cfg, batch_per_class=int(train_rng.integers(lo, hi + 1)))
        round_cfg = replace(round_cfg, batch_classes=min(round_cfg.batch_classes, len(np.unique(clusters.assignments))))
        trained, trace = train(features, clusters.assignments, result.encoder, round_cfg, rng=train_rng)
        result.encoder = trained
        result.pseudo_labels = clusters.assignments
        result.rounds.append(clusters)
        result.traces.append(trace)
    return result


def write_labels_csv(path, labels) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("index,cluster\n")
        for i, c in enumerate(np.asarray(labels)):
            fh.write(f"{i},{int(c)}\n")
