"""Feature datasets: CSV I/O, synthetic blobs, class-disjoint splits, config files."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimMismatch, EmptySide, ParseError
from .loss import LossConfig
from .trainer import TrainConfig


@dataclass(frozen=True)
class FeatureDataset:
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2:
            raise ValueError("features must be an n x d matrix")
        if labels.shape != (features.shape[0],):
            raise ValueError("labels length must equal the number of rows")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def classes(self) -> list[int]:
        return [int(c) for c in np.unique(self.labels)]

    @property
    def class_index(self) -> dict[int, list[int]]:
        return {c: np.flatnonzero(self.labels == c).tolist() for c in self.classes}

    def subset(self, idx) -> "FeatureDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return FeatureDataset(self.features[idx], self.labels[idx])


def load_csv(path) -> FeatureDataset:
    """Read ``label,f0,...,f{d-1}`` rows; line numbers in errors are 1-based."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise ParseError(1, "empty file")
    header = [h.strip() for h in lines[0].split(",")]
    if header[0] != "label" or len(header) < 2 or header[1:] != [f"f{k}" for k in range(len(header) - 1)]:
        raise ParseError(1, "header must be label,f0,...,f{d-1}")
    d = len(header) - 1
    labels, rows = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != d + 1:
            raise DimMismatch(f"expected {d} features, found {len(cells) - 1}", line=lineno)
        try:
            label = int(cells[0])
        except ValueError:
            raise ParseError(lineno, f"label {cells[0]!r} is not an integer") from None
        if label < 0:
            raise ParseError(lineno, "labels must be non-negative")
        try:
            values = [float(c) for c in cells[1:]]
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from None
        if not all(math.isfinite(v) for v in values):
            raise ParseError(lineno, "non-finite feature value")
        labels.append(label)
        rows.append(values)
    if not rows:
        raise ParseError(2, "no data rows")
    return FeatureDataset(np.array(rows), np.array(labels))


def save_csv(path, dataset: FeatureDataset) -> None:
    d = dataset.dim
    with open(Path(path), "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(["label"] + [f"f{k}" for k in range(d)]) + "\n")
        for label, row in zip(dataset.labels, dataset.features):
            fh.write(",".join([str(int(label))] + [f"{v:.17g}" for v in row]) + "\n")


def synth_blobs(
    classes: int,
    per_class: int,
    dim: int,
    center_scale: float = 1.0,
    noise_sigma: float = 0.5,
    seed: int = 0,
) -> FeatureDataset:
    """Isotropic Gaussian blobs around centers drawn uniformly on a sphere."""
    if classes < 2 or per_class < 2:
        raise ValueError("need classes >= 2 and per_class >= 2")
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(classes, dim))
    centers *= center_scale / np.linalg.norm(centers, axis=1, keepdims=True)
    labels = np.repeat(np.arange(classes), per_class)
    features = centers[labels] + noise_sigma * rng.normal(size=(labels.size, dim))
    return FeatureDataset(features, labels)


@dataclass(frozen=True)
class SplitSpec:
    train_classes: frozenset[int]
    test_classes: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "train_classes", frozenset(int(c) for c in self.train_classes))
        object.__setattr__(self, "test_classes", frozenset(int(c) for c in self.test_classes))
        overlap = self.train_classes & self.test_classes
        if overlap:
            raise EmptySide(f"train and test classes overlap: {sorted(overlap)}")


def split_by_class(dataset: FeatureDataset, split: float | SplitSpec = 0.5):
    """Class-disjoint ``(train, test)`` split.

    A fraction sends the first ``ceil(fraction * n_classes)`` class ids (in
    sorted order) to train and the rest to test.
    """
    classes = dataset.classes
    if len(classes) < 2:
        raise EmptySide("need at least two classes to split")
    if isinstance(split, SplitSpec):
        unknown = (split.train_classes | split.test_classes) - set(classes)
        if unknown:
            raise EmptySide(f"split names classes absent from the dataset: {sorted(unknown)}")
        train_c, test_c = split.train_classes, split.test_classes
    else:
        if not 0.0 < split < 1.0:
            raise EmptySide("split fraction must lie strictly between 0 and 1")
        cut = math.ceil(split * len(classes))
        train_c, test_c = set(classes[:cut]), set(classes[cut:])
    if not train_c or not test_c:
        raise EmptySide("one side of the split has no classes")
    train_mask = np.isin(dataset.labels, sorted(train_c))
    test_mask = np.isin(dataset.labels, sorted(test_c))
    return dataset.subset(np.flatnonzero(train_mask)), dataset.subset(np.flatnonzero(test_mask))


# Config keys that differ from the dataclass field names.
_KEY_ALIASES = {"lambda": "lambda_"}


def _coerce(raw: str, current, key: str, lineno: int):
    try:
        if isinstance(current, bool):
            if raw.lower() not in ("true", "false", "1", "0"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1")
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"line {lineno}: bad value {raw!r} for {key}") from None


def parse_config(text: str, base: TrainConfig | None = None) -> TrainConfig:
    """Parse flat ``key = value`` lines into a :class:`TrainConfig`.

    Keys are the field names of ``TrainConfig`` and ``LossConfig`` (``lambda``
    for the variance weight). ``#`` starts a comment; unknown keys are errors.
    """
    base = TrainConfig() if base is None else base
    train_keys = {f.name for f in fields(TrainConfig)} - {"loss"}
    loss_keys = {f.name for f in fields(LossConfig)}
    train_upd: dict = {}
    loss_upd: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        name = _KEY_ALIASES.get(key, key)
        if name in train_keys:
            train_upd[name] = _coerce(value, getattr(base, name), key, lineno)
        elif name in loss_keys:
            loss_upd[name] = _coerce(value, getattr(base.loss, name), key, lineno)
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    try:
        return replace(base, loss=replace(base.loss, **loss_upd), **train_upd)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> TrainConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def config_items(cfg: TrainConfig) -> dict:
    """Flat mapping of every config key to its value, defaults included."""
    out = {f.name: getattr(cfg, f.name) for f in fields(TrainConfig) if f.name != "loss"}
    for f in fields(LossConfig):
        key = next((k for k, v in _KEY_ALIASES.items() if v == f.name), f.name)
        out[key] = getattr(cfg.loss, f.name)
    return out


def format_config(cfg: TrainConfig) -> str:
    return "".join(f"{k} = {v!r}\n" if isinstance(v, float) else f"{k} = {v}\n" for k, v in config_items(cfg).items())
