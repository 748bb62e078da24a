import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cbml.errors import ZeroNormRow
from cbml.geometry import EmbeddingBatch, normalize_rows, similarity_matrix


def test_normalize_three_four_five():
    np.testing.assert_allclose(normalize_rows([[3.0, 4.0]]), [[0.6, 0.8]], atol=1e-15)


def test_normalize_keeps_unit_rows():
    eye = np.eye(2)
    np.testing.assert_array_equal(normalize_rows(eye), eye)


def test_zero_row_rejected():
    with pytest.raises(ZeroNormRow) as err:
        normalize_rows([[1.0, 0.0], [0.0, 0.0]])
    assert err.value.index == 1


@pytest.mark.parametrize(
    "rows, expected",
    [
        ([[1, 0], [0, 1]], 0.0),
        ([[1, 0], [1, 0]], 1.0),
        ([[0.6, 0.8], [0.8, 0.6]], 0.96),
    ],
)
def test_pairwise_examples(rows, expected):
    sims = similarity_matrix(np.array(rows, dtype=float))
    assert sims[0, 1] == pytest.approx(expected, abs=1e-15)


def test_batch_validation():
    with pytest.raises(ValueError):
        EmbeddingBatch(np.ones((1, 2)), [0])
    with pytest.raises(ValueError):
        EmbeddingBatch(np.ones((3, 2)), [0, 1])
    with pytest.raises(ValueError):
        EmbeddingBatch(np.ones((2, 2)), [0, -1])


def test_from_raw_rows_are_unit_norm(rng):
    batch = EmbeddingBatch.from_raw(rng.normal(size=(20, 5)) * 7, np.arange(20) % 3)
    np.testing.assert_allclose(np.linalg.norm(batch.data, axis=1), 1.0, atol=1e-9)


@given(st.integers(2, 30), st.integers(1, 10), st.integers(0, 2**32 - 1))
def test_range_symmetry_diagonal(n, d, seed):
    gen = np.random.default_rng(seed)
    sims = similarity_matrix(normalize_rows(gen.normal(size=(n, d)) + 1e-3))
    assert np.array_equal(sims, sims.T)
    assert np.all(np.abs(sims) <= 1 + 1e-9)
    np.testing.assert_allclose(np.diag(sims), 1.0, atol=1e-9)


@given(st.integers(2, 20), st.integers(0, 2**32 - 1))
def test_permutation_equivariance(n, seed):
    gen = np.random.default_rng(seed)
    x = normalize_rows(gen.normal(size=(n, 4)))
    perm = gen.permutation(n)
    np.testing.assert_allclose(similarity_matrix(x[perm]), similarity_matrix(x)[np.ix_(perm, perm)], atol=1e-15)
