"""Aitchison geometry on the simplex.

Compositions are plain float arrays: a 1-D array is a single composition,
a 2-D array is a matrix whose rows are compositions (time along axis 0,
parts along axis 1). Every function here is pure.
"""
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    InsufficientRows,
    NonPositiveEntry,
    NotZeroSum,
    ZeroVariation,
)

__all__ = [
    "VariationMatrix",
    "closure",
    "clr",
    "clr_inv",
    "perturb",
    "perturb_inverse",
    "power",
    "center",
    "variation_matrix",
    "total_variation",
    "center_and_scale",
    "uniform",
    "is_composition",
]

COMPOSITION_TOL = 1e-12
ZERO_SUM_TOL = 1e-8
# total variation at or below this is treated as "all forecasters identical"
_ZERO_VARIATION = 1e-24


@dataclass(frozen=True)
class VariationMatrix:
    """Pairwise log-ratio variances and their upper-triangle total."""

    entries: np.ndarray
    total: float

    @property
    def distances(self):
        return np.sqrt(self.entries)


def _as_parts(v):
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim not in (1, 2):
        raise DimensionMismatch(f"expected a 1-D or 2-D array, got ndim={arr.ndim}")
    if arr.shape[-1] < 2:
        raise DimensionMismatch(f"a composition needs at least 2 parts, got {arr.shape[-1]}")
    return arr


def _check_positive(arr):
    bad = ~(np.isfinite(arr) & (arr > 0))
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise NonPositiveEntry(
            f"entry {idx} = {arr[idx]!r} is not strictly positive and finite; "
            "floor or clean the input before closing it"
        )


def uniform(J):
    """The neutral element of the simplex, ``(1/J, ..., 1/J)``."""
    return np.full(int(J), 1.0 / J)


def is_composition(w, tol=COMPOSITION_TOL):
    arr = np.asarray(w, dtype=np.float64)
    if arr.ndim not in (1, 2) or arr.shape[-1] < 2:
        return False
    if not (np.isfinite(arr).all() and (arr > 0).all()):
        return False
    return bool(np.all(np.abs(arr.sum(axis=-1) - 1.0) <= tol))


def closure(v):
    """Divide each positive vector by its sum.

    Parameters
    ----------
    v : array_like
        1-D vector or 2-D matrix (closed row by row) of strictly positive,
        finite entries with at least two parts.

    Returns
    -------
    ndarray
        Same shape as ``v``, each row summing to one.

    Raises
    ------
    NonPositiveEntry
        If any entry is zero, negative or non-finite.
    """
    arr = _as_parts(v)
    _check_positive(arr)
    return arr / arr.sum(axis=-1, keepdims=True)


def _close_logs(logs):
    # exp after subtracting the row max keeps every part in (0, 1]
    shifted = logs - logs.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def clr(w):
    """Centered log-ratio: ``ln(w_j / geometric_mean(w))`` row by row."""
    arr = _as_parts(w)
    _check_positive(arr)
    logs = np.log(arr)
    return logs - logs.mean(axis=-1, keepdims=True)


def clr_inv(x):
    """Map zero-sum log-ratio coordinates back to the simplex.

    Raises
    ------
    NotZeroSum
        If a row of ``x`` sums to more than ``1e-8`` in magnitude, which means
        it is not a clr vector.
    """
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim not in (1, 2) or arr.shape[-1] < 2:
        raise DimensionMismatch(f"expected clr coordinates with >= 2 parts, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise NotZeroSum("clr coordinates must be finite")
    sums = arr.sum(axis=-1)
    if np.any(np.abs(sums) > ZERO_SUM_TOL):
        raise NotZeroSum(f"clr coordinates sum to {np.max(np.abs(sums)):.3g}, expected 0")
    return _close_logs(arr)


def _check_same_parts(a, b):
    if a.shape[-1] != b.shape[-1] or (a.ndim == 2 and b.ndim == 2 and a.shape != b.shape):
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} do not align")


def perturb(a, b):
    """Simplex addition: the closure of the part-wise product.

    ``b`` may be a single composition applied to every row of a matrix ``a``.
    """
    a, b = _as_parts(a), _as_parts(b)
    _check_same_parts(a, b)
    return closure(a * b)


def perturb_inverse(a, b):
    """Simplex subtraction: the closure of the part-wise ratio ``a / b``."""
    a, b = _as_parts(a), _as_parts(b)
    _check_same_parts(a, b)
    return closure(a / b)


def power(w, alpha):
    """Simplex scalar multiplication: the closure of ``w ** alpha``."""
    alpha = float(alpha)
    if not np.isfinite(alpha):
        raise ValueError(f"power exponent must be finite, got {alpha}")
    arr = _as_parts(w)
    _check_positive(arr)
    return _close_logs(alpha * np.log(arr))


def center(W):
    """Closure of the column-wise geometric means of a composition matrix.

    Geometric means are taken in log space so long histories neither
    underflow nor overflow.
    """
    arr = np.asarray(W, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.shape[0] < 1:
        raise InsufficientRows("center needs at least one row")
    arr = _as_parts(arr)
    _check_positive(arr)
    return _close_logs(np.log(arr).mean(axis=0))


def variation_matrix(W):
    """Sample variances (ddof=1) over time of every pairwise log-ratio.

    ``entries[i, j] = var_t(ln(W[t, i] / W[t, j]))``; the diagonal is exactly
    zero and the matrix is exactly symmetric. ``total`` sums the upper
    triangle.
    """
    arr = np.asarray(W, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatch("variation_matrix expects a 2-D composition matrix")
    if arr.shape[0] < 2:
        raise InsufficientRows(f"need at least 2 rows to estimate a variance, got {arr.shape[0]}")
    arr = _as_parts(arr)
    _check_positive(arr)
    logs = np.log(arr)
    ratios = logs[:, :, None] - logs[:, None, :]
    entries = ratios.var(axis=0, ddof=1)
    np.fill_diagonal(entries, 0.0)
    iu = np.triu_indices(arr.shape[1], k=1)
    return VariationMatrix(entries=entries, total=float(entries[iu].sum()))


def total_variation(W):
    return variation_matrix(W).total


def center_and_scale(W):
    """Move the center of ``W`` to the barycenter and rescale to unit total variation.

    Each row is perturbed by the inverse of ``center(W)`` and then powered by
    ``1 / sqrt(total_variation(W))``. Relative contributions of the pairwise
    log-ratios to the variation are unchanged.

    Raises
    ------
    ZeroVariation
        When the total variation is zero, i.e. every forecaster carries the
        same relative information over time.
    """
    arr = np.asarray(W, dtype=np.float64)
    tv = total_variation(arr)
    if not tv > _ZERO_VARIATION:
        raise ZeroVariation(f"total variation is {tv!r}; the matrix cannot be scaled")
    centered = perturb_inverse(arr, center(arr))
    return power(centered, 1.0 / np.sqrt(tv))
