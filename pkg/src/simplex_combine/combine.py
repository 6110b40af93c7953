"""Point combinations of competing forecasts."""
from dataclasses import dataclass

import numpy as np

from .coda import center
from .errors import DimensionMismatch

__all__ = [
    "METHODS",
    "CombinationForecast",
    "combine_row",
    "average_forecast",
    "s_stc_weights",
]

METHODS = ("AVE", "E_STC", "S_STC", "CAS")


@dataclass(frozen=True)
class CombinationForecast:
    method: str
    time: int
    value: float
    weights_used: np.ndarray
    included_ids: tuple


def combine_row(weights, forecasts):
    """Weighted sum of one period's forecasts."""
    w = np.asarray(weights, dtype=np.float64)
    f = np.asarray(forecasts, dtype=np.float64)
    if w.shape != f.shape or w.ndim != 1:
        raise DimensionMismatch(f"weights {w.shape} and forecasts {f.shape} must be equal-length vectors")
    return float(w @ f)


def average_forecast(forecasts):
    f = np.asarray(forecasts, dtype=np.float64)
    if f.size < 1:
        raise ValueError("need at least one forecast")
    return float(f.mean())


def s_stc_weights(W_history):
    """Simplex STC combination vector: the center of the weight history."""
    return center(W_history)
