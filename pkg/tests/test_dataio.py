import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cbml.dataio import (
    FeatureDataset,
    SplitSpec,
    config_items,
    format_config,
    load_config,
    load_csv,
    parse_config,
    save_csv,
    split_by_class,
    synth_blobs,
)
from cbml.errors import ConfigError, DimMismatch, EmptySide, ParseError
from cbml.trainer import TrainConfig


def test_load_small_file(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("label,f0,f1\n0,1.5,2\n3,-1e-3,0\n")
    ds = load_csv(p)
    assert (ds.n, ds.dim) == (2, 2)
    assert ds.labels.tolist() == [0, 3]
    assert ds.class_index == {0: [0], 3: [1]}


def test_short_row(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("label,f0,f1\n0,1.5,2\n1,0.5\n")
    with pytest.raises(DimMismatch) as info:
        load_csv(p)
    assert info.value.line == 3


@pytest.mark.parametrize("body", ["x,1,2\n", "-1,1,2\n", "0,abc,2\n", "0,nan,1\n"])
def test_bad_rows(tmp_path, body):
    p = tmp_path / "d.csv"
    p.write_text("label,f0,f1\n" + body)
    with pytest.raises(ParseError) as info:
        load_csv(p)
    assert info.value.line == 2


def test_bad_header(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("label,a,b\n0,1,2\n")
    with pytest.raises(ParseError):
        load_csv(p)


@given(arrays(np.float64, (5, 3), elements=st.floats(-1e6, 1e6, allow_nan=False)))
def test_csv_round_trip(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("rt") / "d.csv"
    ds = FeatureDataset(values, np.array([0, 1, 1, 2, 0]))
    save_csv(path, ds)
    back = load_csv(path)
    assert np.array_equal(back.features, ds.features)
    assert np.array_equal(back.labels, ds.labels)


def test_synth_zero_noise():
    ds = synth_blobs(3, 4, 5, noise_sigma=0.0, seed=1)
    for c, idx in ds.class_index.items():
        assert np.all(ds.features[idx] == ds.features[idx[0]])
    np.testing.assert_allclose(np.linalg.norm(ds.features[::4], axis=1), 1.0, atol=1e-12)


def test_synth_reproducible():
    a = synth_blobs(4, 5, 3, seed=7)
    b = synth_blobs(4, 5, 3, seed=7)
    assert np.array_equal(a.features, b.features)
    assert not np.array_equal(a.features, synth_blobs(4, 5, 3, seed=8).features)


def test_synth_separable_blobs():
    ds = synth_blobs(4, 25, 6, center_scale=10.0, noise_sigma=0.1, seed=0)
    centroids = np.array([ds.features[ds.labels == c].mean(axis=0) for c in ds.classes])
    d = ((ds.features[:, None] - centroids[None]) ** 2).sum(axis=2)
    assert np.mean(d.argmin(axis=1) == ds.labels) == 1.0


def test_synth_validation():
    with pytest.raises(ValueError):
        synth_blobs(1, 5, 3)


def test_fraction_split():
    ds = synth_blobs(4, 3, 2, seed=0)
    train, test = split_by_class(ds, 0.5)
    assert train.classes == [0, 1] and test.classes == [2, 3]
    assert train.n + test.n == ds.n


def test_explicit_split():
    ds = synth_blobs(4, 3, 2, seed=0)
    train, test = split_by_class(ds, SplitSpec({3}, {0, 2}))
    assert train.classes == [3] and test.classes == [0, 2]


def test_overlapping_split():
    with pytest.raises(EmptySide):
        SplitSpec({0, 1}, {1, 2})
    ds = synth_blobs(4, 3, 2, seed=0)
    with pytest.raises(EmptySide):
        split_by_class(ds, SplitSpec({0}, {9}))
    with pytest.raises(EmptySide):
        split_by_class(ds, 1.0)


@given(st.integers(2, 12), st.floats(0.01, 0.99))
def test_split_disjoint_and_complete(classes, frac):
    ds = synth_blobs(classes, 2, 2, seed=classes)
    assume(math.ceil(frac * classes) < classes)
    train, test = split_by_class(ds, frac)
    assert not set(train.classes) & set(test.classes)
    assert train.n + test.n == ds.n


def test_parse_config():
    cfg = parse_config("# comment\nsteps = 12\nlambda = 0.5  # weight\nvariant=sqrt\nencoder = mlp2\n")
    assert cfg.steps == 12 and cfg.encoder == "mlp2"
    assert cfg.loss.lambda_ == 0.5 and cfg.loss.variant == "sqrt"
    assert cfg.learning_rate == TrainConfig().learning_rate


@pytest.mark.parametrize("text", ["bogus = 1\n", "steps = many\n", "steps\n", "variant = max\n", "batch_classes = 1\n"])
def test_parse_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_format_round_trip(tmp_path):
    cfg = parse_config("gamma = 0.3\nseed = 4\nlearning_rate = 0.1\n")
    p = tmp_path / "c.cfg"
    p.write_text(format_config(cfg))
    assert load_config(p) == cfg
    assert "lambda" in config_items(cfg) and "lambda_" not in config_items(cfg)


def test_shipped_config_loads():
    from pathlib import Path

    cfg = load_config(Path(__file__).resolve().parents[1] / "configs" / "mvc_trend.cfg")
    assert cfg.steps == 500 and cfg.embedding_dim == 16
