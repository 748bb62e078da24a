"""Train-and-evaluate runs on class-disjoint splits, and one-parameter sweeps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import FeatureDataset, SplitSpec, parse_config, split_by_class
from .evaluation import DEFAULT_KS, RetrievalReport, retrieval_report
from .trainer import Encoder, TraceRow, TrainConfig, forward, init_encoder, train


@dataclass
class RunOutcome:
    encoder: Encoder
    trace: list[TraceRow]
    train_report: RetrievalReport
    test_report: RetrievalReport


def run_rngs(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent generators for encoder init and batch sampling."""
    init_ss, sample_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(init_ss), np.random.default_rng(sample_ss)


def initial_encoder(cfg: TrainConfig, d_in: int) -> Encoder:
    init_rng, _ = run_rngs(cfg.seed)
    return init_encoder(cfg.encoder, d_in, cfg.embedding_dim, cfg.hidden_dim, init_rng)


def evaluate(encoder: Encoder, dataset: FeatureDataset, ks=DEFAULT_KS, seed: int = 0) -> RetrievalReport:
    ks = [k for k in ks if k < dataset.n]
    return retrieval_report(forward(encoder, dataset.features), dataset.labels, ks, seed)


def train_and_evaluate(
    dataset: FeatureDataset, cfg: TrainConfig, split: float | SplitSpec = 0.5, ks=DEFAULT_KS
) -> RunOutcome:
    train_ds, test_ds = split_by_class(dataset, split)
    encoder = initial_encoder(cfg, dataset.dim)
    _, sample_rng = run_rngs(cfg.seed)
    encoder, trace = train(train_ds.features, train_ds.labels, encoder, cfg, rng=sample_rng)
    return RunOutcome(
        encoder,
        trace,
        evaluate(encoder, train_ds, ks, cfg.seed),
        evaluate(encoder, test_ds, ks, cfg.seed),
    )


SWEEP_COLUMNS = [
    "key",
    "value",
    "seeds",
    "train_recall_at_1",
    "test_recall_at_1",
    "test_recall_at_2",
    "test_recall_at_4",
    "test_recall_at_8",
    "test_nmi",
    "test_neg_sim_variance",
]


def sweep(
    dataset: FeatureDataset,
    base: TrainConfig,
    key: str,
    values: list[str],
    seeds: list[int],
    split: float | SplitSpec = 0.5,
) -> list[dict]:
    """Seed-averaged train/test metrics for each value of one config key."""
    rows = []
    for value in values:
        cfg = parse_config(f"{key} = {value}", base)
        outcomes = [train_and_evaluate(dataset, parse_config(f"seed = {s}", cfg), split) for s in seeds]
        tr = [o.train_report.to_dict() for o in outcomes]
        te = [o.test_report.to_dict() for o in outcomes]
        row = {"key": key, "value": value, "seeds": len(seeds)}
        row["train_recall_at_1"] = float(np.mean([r["recall_at_1"] for r in tr]))
        for name in SWEEP_COLUMNS[4:]:
            row[name] = float(np.mean([r.get(name[len("test_"):], np.nan) for r in te]))
        rows.append(row)
    return rows
