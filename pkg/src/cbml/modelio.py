"""Plain-text encoder files.

Layout (one item per line, values as 17-significant-digit decimals)::

    CBML-MODEL 1
    kind <identity|linear|mlp2>
    dims <d_in> <hidden> <d_emb>
    param <name> <rows> <cols>
    <rows lines of cols space-separated values>
    ...
    end

Biases are written as ``1 x d`` parameters. ``hidden`` is 0 unless the
kind is ``mlp2``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ModelFormatError
from .trainer import Encoder

MAGIC = "CBML-MODEL"
VERSION = 1


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def dumps_model(encoder: Encoder) -> str:
    lines = [f"{MAGIC} {VERSION}", f"kind {encoder.kind}", f"dims {encoder.d_in} {encoder.hidden} {encoder.d_emb}"]
    for name in encoder.param_shapes():
        arr = np.atleast_2d(encoder.params[name])
        lines.append(f"param {name} {arr.shape[0]} {arr.shape[1]}")
        lines.extend(" ".join(_fmt(v) for v in row) for row in arr)
    lines.append("end")
    return "\n".join(lines) + "\n"


def loads_model(text: str) -> Encoder:
    lines = text.splitlines()
    pos = 0

    def take() -> list[str]:
        nonlocal pos
        if pos >= len(lines):
            raise ModelFormatError("unexpected end of model file")
        pos += 1
        return lines[pos - 1].split()

    head = take()
    if len(head) != 2 or head[0] != MAGIC:
        raise ModelFormatError("not a model file (bad magic line)")
    if head[1] != str(VERSION):
        raise ModelFormatError(f"unsupported model version {head[1]}")
    kind_line = take()
    dims_line = take()
    if kind_line[:1] != ["kind"] or len(kind_line) != 2 or dims_line[:1] != ["dims"] or len(dims_line) != 4:
        raise ModelFormatError("expected 'kind' and 'dims' lines")
    kind = kind_line[1]
    try:
        d_in, hidden, d_emb = (int(v) for v in dims_line[1:])
    except ValueError:
        raise ModelFormatError("dims must be integers") from None
    params = {}
    while True:
        parts = take()
        if parts == ["end"]:
            break
        if len(parts) != 4 or parts[0] != "param":
            raise ModelFormatError(f"line {pos}: expected 'param <name> <rows> <cols>'")
        name, rows, cols = parts[1], int(parts[2]), int(parts[3])
        try:
            arr = np.array([[float(v) for v in take()] for _ in range(rows)])
        except ValueError:
            raise ModelFormatError(f"bad numeric value in parameter {name}") from None
        if arr.shape != (rows, cols):
            raise ModelFormatError(f"parameter {name} does not match its declared shape")
        params[name] = arr[0] if name.startswith("b") else arr
    try:
        return Encoder(kind, d_in, d_emb, hidden, params)
    except ValueError as exc:
        raise ModelFormatError(str(exc)) from None


def save_model(path, encoder: Encoder) -> None:
    Path(path).write_text(dumps_model(encoder), encoding="utf-8")


def load_model(path) -> Encoder:
    return loads_model(Path(path).read_text(encoding="utf-8"))
