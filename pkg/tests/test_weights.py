from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from simplex_combine.panel import ForecastPanel
from simplex_combine.weights import (
    DEFAULT_EPSILON,
    accuracy,
    accuracy_matrix,
    euclidean_stc_weights,
    weight_matrix,
)


def panel_of(F, y=None):
    F = np.atleast_2d(np.asarray(F, dtype=float))
    y = np.zeros(F.shape[0]) if y is None else y
    return ForecastPanel("X", 1, tuple(range(2000, 2000 + F.shape[0])), tuple(f"F{j}" for j in range(F.shape[1])),
                         F, y)


def test_accuracy_example():
    np.testing.assert_allclose(accuracy([1.0, 2.0, 4.0], 0.0), [1.0, 0.25, 0.0625], rtol=0, atol=1e-15)


def test_weight_row_example():
    W = weight_matrix(accuracy([[1.0, 2.0, 4.0]], [0.0]))
    np.testing.assert_allclose(W[0], [16 / 21, 4 / 21, 1 / 21], atol=1e-15)
    np.testing.assert_allclose(W[0], [0.761905, 0.190476, 0.047619], atol=5e-7)


def test_exact_hit_uses_floor():
    a = accuracy([3.0, 4.0], 3.0)
    assert a[0] == pytest.approx(DEFAULT_EPSILON ** -2) == pytest.approx(1e16)
    assert a[1] == 1.0


def test_accuracy_matrix_shape():
    p = panel_of([[1.0, 2.0], [3.0, 5.0], [0.0, 0.5]], [1.5, 4.0, 1.0])
    A = accuracy_matrix(p)
    assert A.shape == (3, 2)
    np.testing.assert_allclose(A[1], [1.0, 1.0])


def test_non_positive_epsilon():
    with pytest.raises(ValueError):
        accuracy([1.0], 0.0, epsilon=0.0)


def test_weight_rows_are_compositions(rng):
    W = weight_matrix(accuracy(rng.normal(size=(6, 5)), rng.normal(size=6)))
    assert (W > 0).all()
    np.testing.assert_allclose(W.sum(axis=1), 1.0, atol=1e-14)


def euclidean_oracle(means):
    means = [Fraction(m) for m in means]
    grand = sum(means) / len(means)
    inv = [1 / (m - grand) ** 2 for m in means]
    return [float(x / sum(inv)) for x in inv]


def test_euclidean_example():
    w = euclidean_stc_weights(panel_of([[1.0, 2.0, 5.0]])).weights
    np.testing.assert_allclose(w, euclidean_oracle([1, 2, 5]), atol=1e-15)
    np.testing.assert_allclose(w, [0.1289, 0.8054, 0.0657], atol=5e-5)


def test_euclidean_uses_window_means_only():
    F = [[0.0, 2.0, 4.0], [2.0, 2.0, 6.0], [100.0, -50.0, 3.0]]
    res = euclidean_stc_weights(panel_of(F, [9.0, 9.0, 9.0]), T1=2)
    np.testing.assert_allclose(res.weights, euclidean_oracle([1, 2, 5]), atol=1e-15)
    assert res.as_of == 2001


def test_euclidean_symmetric_pair():
    w = euclidean_stc_weights(panel_of([[1.0, 3.0]])).weights
    np.testing.assert_allclose(w, [0.5, 0.5])


def test_euclidean_mean_at_grand_mean_dominates():
    w = euclidean_stc_weights(panel_of([[1.0, 2.0, 3.0]])).weights
    assert w[1] > 1 - 1e-12


def test_euclidean_needs_two():
    with pytest.raises(ValueError):
        euclidean_stc_weights(panel_of([[1.0]]))
    with pytest.raises(ValueError):
        euclidean_stc_weights(panel_of([[1.0, 2.0]]), T1=0)


forecast_rows = arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(2, 6)), elements=st.floats(-50, 50))


@settings(max_examples=80)
@given(forecast_rows, st.floats(-100, 100))
def test_euclidean_shift_invariant(F, c):
    a = euclidean_stc_weights(panel_of(F)).weights
    b = euclidean_stc_weights(panel_of(F + c)).weights
    # the floor makes near-ties sensitive to rounding in the shifted means
    dev = np.abs(F.mean(axis=0) - F.mean())
    if dev.min() > 1e-3:
        np.testing.assert_allclose(a, b, rtol=1e-6, atol=1e-9)


@settings(max_examples=80)
@given(forecast_rows, st.randoms(use_true_random=False))
def test_euclidean_permutation_equivariant(F, r):
    perm = list(range(F.shape[1]))
    r.shuffle(perm)
    a = euclidean_stc_weights(panel_of(F)).weights
    b = euclidean_stc_weights(panel_of(F[:, perm])).weights
    np.testing.assert_allclose(a[perm], b, rtol=1e-9, atol=1e-12)


@settings(max_examples=80)
@given(arrays(np.float64, st.integers(1, 8), elements=st.floats(-1e3, 1e3)), st.floats(-1e3, 1e3))
def test_accuracy_decreases_with_error(f, y):
    a = accuracy(f, y)
    err = np.abs(f - y)
    order = np.argsort(err, kind="stable")
    assert (np.diff(a[order]) <= 0).all()
    assert (a <= DEFAULT_EPSILON ** -2).all()
