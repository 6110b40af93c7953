import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import composition_matrices, compositions
from simplex_combine.coda import center, closure
from simplex_combine.combine import average_forecast, combine_row, s_stc_weights
from simplex_combine.errors import DimensionMismatch


def test_combine_row_example():
    assert combine_row([0.5, 0.25, 0.25], [2.0, 4.0, 8.0]) == pytest.approx(4.0)


def test_average_example():
    assert average_forecast([1.0, 2.0, 6.0]) == 3.0


def test_combine_row_rejects_mismatch():
    with pytest.raises(DimensionMismatch):
        combine_row([0.5, 0.5], [1.0, 2.0, 3.0])


def test_uniform_weights_give_average(rng):
    f = rng.normal(size=7)
    assert combine_row(np.full(7, 1 / 7), f) == pytest.approx(average_forecast(f), abs=1e-12)


def test_s_stc_of_constant_history_is_that_row():
    row = closure(np.array([1.0, 2.0, 7.0]))
    np.testing.assert_allclose(s_stc_weights(np.tile(row, (5, 1))), row, atol=1e-15)


def test_s_stc_of_uniform_history_is_average(rng):
    W = np.full((4, 6), 1 / 6)
    f = rng.normal(size=6)
    assert combine_row(s_stc_weights(W), f) == pytest.approx(average_forecast(f), abs=1e-12)


def test_s_stc_is_geometric_center():
    W = closure(np.array([[1.0, 4.0], [4.0, 1.0]]))
    np.testing.assert_allclose(s_stc_weights(W), [0.5, 0.5])


@settings(max_examples=100)
@given(compositions(), st.floats(-10, 10), st.floats(0.1, 10), st.data())
def test_affine_equivariance(w, a, b, data):
    f = data.draw(arrays(np.float64, len(w), elements=st.floats(-100, 100)))
    assert combine_row(w, a + b * f) == pytest.approx(a + b * combine_row(w, f), abs=1e-9)


@settings(max_examples=100)
@given(compositions(), st.data())
def test_convex_combination(w, data):
    f = data.draw(arrays(np.float64, len(w), elements=st.floats(-1e3, 1e3)))
    value = combine_row(w, f)
    assert f.min() - 1e-9 <= value <= f.max() + 1e-9


@settings(max_examples=60)
@given(composition_matrices(), st.randoms(use_true_random=False))
def test_s_stc_permutation_equivariant(W, r):
    perm = list(range(W.shape[1]))
    r.shuffle(perm)
    np.testing.assert_allclose(s_stc_weights(W)[perm], s_stc_weights(W[:, perm]), rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(s_stc_weights(W), center(W))
