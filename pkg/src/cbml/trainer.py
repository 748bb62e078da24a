"""Encoders over precomputed features, Adam, balanced sampling and the training loop."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DimMismatch, InsufficientClasses, NonFiniteGradient
from .loss import LossConfig, cbml_loss_and_grad

ENCODER_KINDS = ("identity", "linear", "mlp2")


@dataclass
class Encoder:
    """A small feed-forward embedding head.

    ``params`` holds ``W1``/``b1`` for ``linear`` and additionally
    ``W2``/``b2`` for ``mlp2`` (affine -> ReLU -> affine). Weights map rows:
    ``out = x @ W + b``.
    """

    kind: str
    d_in: int
    d_emb: int
    hidden: int = 0
    params: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ENCODER_KINDS:
            raise ValueError(f"unknown encoder kind {self.kind!r}")
        if self.kind == "identity" and self.d_in != self.d_emb:
            raise DimMismatch("identity encoder needs d_emb == d_in")
        if self.d_emb < 2:
            raise ValueError("embedding dimension must be >= 2")
        for name, shape in self.param_shapes().items():
            if name not in self.params:
                raise ValueError(f"missing parameter {name}")
            arr = np.asarray(self.params[name], dtype=np.float64)
            if arr.shape != shape:
                raise DimMismatch(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
            self.params[name] = arr

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        if self.kind == "identity":
            return {}
        if self.kind == "linear":
            return {"W1": (self.d_in, self.d_emb), "b1": (self.d_emb,)}
        return {
            "W1": (self.d_in, self.hidden),
            "b1": (self.hidden,),
            "W2": (self.hidden, self.d_emb),
            "b2": (self.d_emb,),
        }

    def copy(self) -> "Encoder":
        return replace(self, params={k: v.copy() for k, v in self.params.items()})


def init_encoder(kind: str, d_in: int, d_emb: int, hidden: int = 32, rng: np.random.Generator | None = None) -> Encoder:
    """Gaussian init scaled by fan-in; biases start at zero."""
    rng = np.random.default_rng(0) if rng is None else rng
    if kind == "identity":
        return Encoder("identity", d_in, d_in)
    if kind == "linear":
        params = {"W1": rng.normal(size=(d_in, d_emb)) / np.sqrt(d_in), "b1": np.zeros(d_emb)}
        return Encoder("linear", d_in, d_emb, 0, params)
    params = {
        "W1": rng.normal(size=(d_in, hidden)) * np.sqrt(2.0 / d_in),
        "b1": np.zeros(hidden),
        "W2": rng.normal(size=(hidden, d_emb)) / np.sqrt(hidden),
        "b2": np.zeros(d_emb),
    }
    return Encoder("mlp2", d_in, d_emb, hidden, params)


def forward(encoder: Encoder, inputs: np.ndarray) -> np.ndarray:
    return _forward(encoder, inputs)[0]


def _forward(encoder: Encoder, inputs: np.ndarray):
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != encoder.d_in:
        raise DimMismatch(f"input has shape {x.shape}, encoder expects (*, {encoder.d_in})")
    p = encoder.params
    if encoder.kind == "identity":
        return x.copy(), None
    if encoder.kind == "linear":
        return x @ p["W1"] + p["b1"], None
    pre = x @ p["W1"] + p["b1"]
    hidden = np.maximum(pre, 0.0)
    return hidden @ p["W2"] + p["b2"], (pre, hidden)


def parameter_gradients(encoder: Encoder, inputs: np.ndarray, grad_out: np.ndarray) -> dict[str, np.ndarray]:
    """Chain ``dL/d(outputs)`` back to every encoder parameter."""
    x = np.asarray(inputs, dtype=np.float64)
    _, cache = _forward(encoder, x)
    if encoder.kind == "identity":
        return {}
    if encoder.kind == "linear":
        return {"W1": x.T @ grad_out, "b1": grad_out.sum(axis=0)}
    pre, hidden = cache
    grad_hidden = (grad_out @ encoder.params["W2"].T) * (pre > 0)
    return {
        "W1": x.T @ grad_hidden,
        "b1": grad_hidden.sum(axis=0),
        "W2": hidden.T @ grad_out,
        "b2": grad_out.sum(axis=0),
    }


class Adam:
    """Adam with bias correction; moments are keyed by parameter name."""

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float | None = None) -> dict[str, np.ndarray]:
        lr = self.lr if lr is None else lr
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        updated = {}
        for name, value in params.items():
            g = grads[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(value)
                self.v[name] = np.zeros_like(value)
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            m_hat = self.m[name] / bc1
            v_hat = self.v[name] / bc2
            updated[name] = value - lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return updated


def backward_and_step(encoder: Encoder, inputs: np.ndarray, grad_embeddings: np.ndarray, adam: Adam, lr: float | None = None) -> Encoder:
    grads = parameter_gradients(encoder, inputs, grad_embeddings)
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"non-finite gradient for {name}")
    out = encoder.copy()
    if grads:
        out.params = adam.step(encoder.params, grads, lr)
    return out


@dataclass(frozen=True)
class TrainConfig:
    batch_classes: int = 4
    batch_per_class: int = 8
    steps: int = 300
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    encoder: str = "linear"
    embedding_dim: int = 8
    hidden_dim: int = 32
    loss: LossConfig = field(default_factory=LossConfig)

    def __post_init__(self):
        if self.batch_classes < 2 or self.batch_per_class < 2:
            raise ValueError("batch_classes and batch_per_class must both be >= 2")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.encoder not in ENCODER_KINDS:
            raise ValueError(f"encoder must be one of {ENCODER_KINDS}")


def sample_batch(labels, n_classes: int, per_class: int, rng: np.random.Generator) -> np.ndarray:
    """Pick ``n_classes`` distinct classes, then ``per_class`` members of each.

    Classes smaller than ``per_class`` are sampled with replacement.
    """
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if classes.size < n_classes:
        raise InsufficientClasses(f"dataset has {classes.size} classes, batch needs {n_classes}")
    chosen = rng.choice(classes, size=n_classes, replace=False)
    out = []
    for c in chosen:
        members = np.flatnonzero(labels == c)
        out.append(rng.choice(members, size=per_class, replace=members.size < per_class))
    return np.concatenate(out)


@dataclass(frozen=True)
class TraceRow:
    step: int
    pos_term: float
    neg_term: float
    mvc_term: float
    total: float


def train(features: np.ndarray, labels, encoder: Encoder, cfg: TrainConfig, rng: np.random.Generator | None = None):
    """Run ``cfg.steps`` iterations of sample -> embed -> loss -> Adam update.

    Returns the trained encoder and one :class:`TraceRow` per step, holding
    the loss of the batch before that step's update.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    adam = Adam(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    trace: list[TraceRow] = []
    for step in range(cfg.steps):
        idx = sample_batch(labels, cfg.batch_classes, cfg.batch_per_class, rng)
        x = features[idx]
        report = cbml_loss_and_grad(forward(encoder, x), labels[idx], cfg.loss)
        trace.append(TraceRow(step, report.pos_term, report.neg_term, report.mvc_term, report.total))
        encoder = backward_and_step(encoder, x, report.grad, adam)
    return encoder, trace


def write_trace_csv(path, trace: list[TraceRow]) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "L_P", "L_N", "L2", "L"])
        for r in trace:
            w.writerow([r.step, repr(r.pos_term), repr(r.neg_term), repr(r.mvc_term), repr(r.total)])
