import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbml.dataio import synth_blobs
from cbml.errors import KTooLarge
from cbml.evaluation import nmi
from cbml.pseudo import PseudoConfig, kmeans, pseudo_train, write_labels_csv
from cbml.trainer import Encoder, TrainConfig, init_encoder


def _same_partition(a, b):
    return nmi(a, b) == 1.0


def test_k_equals_n(rng):
    x = rng.normal(size=(7, 3))
    c = kmeans(x, 7, rng)
    assert sorted(c.assignments.tolist()) == list(range(7))
    assert c.inertia == 0.0


def test_two_far_blobs(rng):
    left = np.array([-10.0, 0.0]) + 0.1 * rng.normal(size=(20, 2))
    right = np.array([10.0, 0.0]) + 0.1 * rng.normal(size=(20, 2))
    x = np.vstack([left, right])
    c = kmeans(x, 2, rng)
    truth = np.repeat([0, 1], 20)
    assert _same_partition(c.assignments, truth)
    # brute-force nearest-centroid check
    d = ((x[:, None, :] - c.centroids[None]) ** 2).sum(axis=2)
    assert np.array_equal(d.argmin(axis=1), c.assignments)


def test_single_cluster_is_mean(rng):
    x = rng.normal(size=(30, 4))
    c = kmeans(x, 1, rng)
    np.testing.assert_allclose(c.centroids[0], x.mean(axis=0), atol=1e-12)


def test_restarts_never_worse(rng):
    x = np.vstack([rng.normal(c, 0.2, size=(15, 2)) for c in ([0, 0], [0, 1.5], [5, 0], [5, 1.5])])
    single = [kmeans(x, 4, np.random.default_rng(s)).inertia for s in range(10)]
    multi = kmeans(x, 4, np.random.default_rng(0), n_init=10).inertia
    assert multi <= single[0]
    assert multi <= np.median(single) + 1e-9


def test_k_too_large(rng):
    with pytest.raises(KTooLarge):
        kmeans(rng.normal(size=(3, 2)), 4, rng)
    with pytest.raises(KTooLarge):
        kmeans(rng.normal(size=(3, 2)), 0, rng)


def test_duplicate_points_stay_valid(rng):
    # only two distinct points exist, so a third cluster cannot reduce inertia
    x = np.vstack([np.zeros((5, 2)), np.ones((5, 2))])
    c = kmeans(x, 3, rng)
    assert ((c.assignments >= 0) & (c.assignments < 3)).all()
    assert np.all(np.isfinite(c.centroids))
    assert c.inertia == 0.0


@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_inertia_non_increasing(seed, k):
    gen = np.random.default_rng(seed)
    x = gen.normal(size=(40, 3))
    c = kmeans(x, k, gen)
    hist = np.array(c.inertia_history)
    assert np.all(np.diff(hist) <= 1e-9 * max(1.0, hist[0]))
    assert ((c.assignments >= 0) & (c.assignments < k)).all()


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1))
def test_rotation_invariance(seed):
    gen = np.random.default_rng(seed)
    ds = synth_blobs(3, 15, 4, center_scale=5.0, noise_sigma=0.3, seed=seed % 1000)
    q, _ = np.linalg.qr(gen.normal(size=(4, 4)))
    a = kmeans(ds.features, 3, np.random.default_rng(1)).assignments
    b = kmeans(ds.features @ q, 3, np.random.default_rng(1)).assignments
    assert _same_partition(a, b)


def _cfg(steps):
    return TrainConfig(batch_classes=4, batch_per_class=4, steps=steps, learning_rate=0.01, embedding_dim=8)


def test_one_round_identity_recovers_blobs():
    ds = synth_blobs(4, 20, 8, center_scale=10.0, noise_sigma=0.1, seed=3)
    res = pseudo_train(ds.features, Encoder("identity", 8, 8), _cfg(5), PseudoConfig(k=4, rounds=1))
    assert _same_partition(res.pseudo_labels, ds.labels)


def test_zero_steps_keeps_encoder():
    ds = synth_blobs(4, 10, 6, seed=0)
    enc = init_encoder("linear", 6, 8)
    res = pseudo_train(ds.features, enc, _cfg(0), PseudoConfig(k=4, rounds=3))
    assert all(np.array_equal(res.encoder.params[k], enc.params[k]) for k in enc.params)
    assert len(res.rounds) == 3


def test_pipeline_deterministic():
    ds = synth_blobs(4, 10, 6, noise_sigma=0.3, seed=0)
    enc = init_encoder("linear", 6, 8)
    pc = PseudoConfig(k=4, rounds=2, per_class_range=(2, 5))
    a = pseudo_train(ds.features, enc, _cfg(20), pc)
    b = pseudo_train(ds.features, enc, _cfg(20), pc)
    assert np.array_equal(a.pseudo_labels, b.pseudo_labels)
    assert a.traces == b.traces
    assert all(np.array_equal(a.encoder.params[k], b.encoder.params[k]) for k in enc.params)


def test_rounds_validated():
    with pytest.raises(ValueError):
        pseudo_train(np.zeros((4, 2)), Encoder("identity", 2, 2), _cfg(0), PseudoConfig(rounds=0))


def test_labels_csv(tmp_path):
    path = tmp_path / "labels.csv"
    write_labels_csv(path, np.array([2, 0, 1]))
    assert path.read_text() == "index,cluster\n0,2\n1,0\n2,1\n"
