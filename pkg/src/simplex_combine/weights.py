"""Accuracy panels and the two flavours of Split-Then-Combine weights."""
from dataclasses import dataclass

import numpy as np

from .coda import closure

__all__ = [
    "DEFAULT_EPSILON",
    "EuclideanWeights",
    "accuracy",
    "accuracy_matrix",
    "weight_matrix",
    "euclidean_stc_weights",
]

# floor on |error| in units of the target variable; guards exact hits
DEFAULT_EPSILON = 1e-8


@dataclass(frozen=True)
class EuclideanWeights:
    weights: np.ndarray
    as_of: int


def accuracy(forecasts, actuals, epsilon=DEFAULT_EPSILON):
    """Inverse squared errors ``max(|f - y|, epsilon) ** -2``.

    ``forecasts`` is T x J (or length J for one period) and ``actuals``
    length T (or a scalar).
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    f = np.asarray(forecasts, dtype=np.float64)
    y = np.asarray(actuals, dtype=np.float64)
    if f.ndim == 2:
        y = y.reshape(-1, 1)
    err = np.maximum(np.abs(f - y), epsilon)
    return err ** -2.0


def accuracy_matrix(panel, epsilon=DEFAULT_EPSILON):
    """T x J prediction accuracies of a balanced panel."""
    return accuracy(panel.forecasts, panel.actuals, epsilon)


def weight_matrix(A):
    """Close each accuracy row into a composition of combination weights."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError("accuracy matrix must be 2-D")
    return closure(A)


def euclidean_stc_weights(panel, T1=None, epsilon=DEFAULT_EPSILON):
    """Fixed Euclidean STC weights from the first ``T1`` rows of ``panel``.

    Each forecaster's weight is proportional to the inverse squared distance
    between its time-average forecast and the grand average of all forecasts
    in the window. Actuals are not used.
    """
    T1 = panel.T if T1 is None else int(T1)
    if not 1 <= T1 <= panel.T:
        raise ValueError(f"T1 must lie in [1, {panel.T}], got {T1}")
    if panel.J < 2:
        raise ValueError("need at least two forecasters")
    window = panel.forecasts[:T1]
    means = window.mean(axis=0)
    grand = window.mean()
    dev = np.maximum(np.abs(means - grand), epsilon)
    return EuclideanWeights(weights=closure(dev ** -2.0), as_of=panel.times[T1 - 1])
