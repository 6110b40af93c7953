"""Combination-after-selection: pruning forecasters inside the simplex.

Three refinements of the center ``g`` of a weight matrix are offered:

* threshold -- keep forecasters whose weight in ``g`` exceeds the neutral
  ``1/J`` and reclose;
* cluster -- group forecasters by agglomerative clustering on log-ratio
  standard deviations and give each cluster an equal (or data-driven) share;
* biplot -- drop forecasters whose rank-2 loadings are collinear with a
  heavier forecaster's.

Forecaster-to-forecaster distance is ``sqrt(var_t(ln w_i / w_j))``, the
per-pair version of the total variation. Zero means the two weight series
are proportional over time.
"""
from dataclasses import dataclass, field

import numpy as np

from .coda import center, center_and_scale, closure, clr, variation_matrix
from .errors import InvalidK
from .weights import DEFAULT_EPSILON, accuracy

__all__ = [
    "Selection",
    "Dendrogram",
    "BiplotResult",
    "cas_select",
    "subcombination",
    "pairwise_distance",
    "cluster_forecasts",
    "cluster_cas",
    "svd_biplot",
    "biplot",
    "redundancy_groups",
    "biplot_select",
]

LINKAGES = ("ward", "complete")


@dataclass(frozen=True)
class Selection:
    included: tuple
    J: int
    sub_weights: np.ndarray

    def expand(self):
        """The subcombination as a length-J vector with zeros for dropped parts."""
        out = np.zeros(self.J)
        out[list(self.included)] = self.sub_weights
        return out


def subcombination(g, included):
    """Select parts of ``g`` and reclose them."""
    included = tuple(int(i) for i in included)
    g = np.asarray(g, dtype=np.float64)
    if len(included) == 1:
        sub = np.ones(1)
    else:
        sub = closure(g[list(included)])
    return Selection(included=included, J=len(g), sub_weights=sub)


def cas_select(g):
    """Keep parts of ``g`` strictly above ``1/J``; keep all if none qualify."""
    g = np.asarray(g, dtype=np.float64)
    J = len(g)
    included = np.flatnonzero(g > 1.0 / J)
    if included.size == 0:
        included = np.arange(J)
    return subcombination(g, included)


def pairwise_distance(W):
    """J x J matrix of log-ratio standard deviations between forecasters."""
    return variation_matrix(W).distances


@dataclass(frozen=True)
class Dendrogram:
    """Agglomerative merge history in the usual linkage-matrix convention.

    ``merges[s] = (a, b, height, size)``: clusters ``a`` and ``b`` merge at
    step ``s`` into a new cluster numbered ``J + s``; leaves are ``0..J-1``.
    """

    merges: tuple
    labels: tuple
    linkage: str = "complete"

    @property
    def J(self):
        return len(self.labels)

    @property
    def heights(self):
        return np.array([m[2] for m in self.merges])

    def to_linkage(self):
        return np.array([[a, b, h, n] for a, b, h, n in self.merges], dtype=np.float64).reshape(-1, 4)

    def cut(self, k):
        """Flat cluster labels ``0..k-1`` after undoing the last ``k-1`` merges.

        Clusters are numbered in order of their smallest member.
        """
        J = self.J
        if not 1 <= k <= J:
            raise InvalidK(f"k must lie in [1, {J}], got {k}")
        members = {i: [i] for i in range(J)}
        for s, (a, b, _, _) in enumerate(self.merges[: J - k]):
            members[J + s] = members.pop(int(a)) + members.pop(int(b))
        groups = sorted(sorted(m) for m in members.values())
        assignment = np.empty(J, dtype=int)
        for c, group in enumerate(groups):
            assignment[group] = c
        return assignment

    def leaf_order(self):
        """Left-to-right leaf order for drawing."""
        J = self.J
        if not self.merges:
            return list(range(J))
        children = {J + s: (int(a), int(b)) for s, (a, b, _, _) in enumerate(self.merges)}
        order, stack = [], [J + len(self.merges) - 1]
        while stack:
            node = stack.pop()
            if node < J:
                order.append(node)
            else:
                a, b = children[node]
                stack.extend((b, a))
        return order

    def to_dict(self):
        return {
            "linkage": self.linkage,
            "labels": list(self.labels),
            "merges": [
                {"a": int(a), "b": int(b), "height": float(h), "size": int(n)} for a, b, h, n in self.merges
            ],
            "leaf_order": self.leaf_order(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            merges=tuple((m["a"], m["b"], m["height"], m["size"]) for m in d["merges"]),
            labels=tuple(d["labels"]),
            linkage=d.get("linkage", "complete"),
        )


def cluster_forecasts(d, linkage="complete", labels=None):
    """Agglomerative clustering of forecasters from a distance matrix.

    ``complete`` merges on the largest inter-cluster distance. ``ward``
    applies the Lance-Williams update to squared distances, so heights are
    the square roots of the ward merge costs. Ties are broken towards the
    lowest cluster numbers.
    """
    if linkage not in LINKAGES:
        raise ValueError(f"linkage must be one of {LINKAGES}, got {linkage!r}")
    d = np.asarray(d, dtype=np.float64)
    J = d.shape[0]
    if d.shape != (J, J) or J < 2:
        raise ValueError(f"need a square distance matrix with J >= 2, got shape {d.shape}")
    if not np.allclose(d, d.T, rtol=0, atol=1e-12) or np.any(d < 0):
        raise ValueError("distance matrix must be symmetric and nonnegative")
    labels = tuple(str(x) for x in (labels if labels is not None else range(J)))
    if len(labels) != J:
        raise ValueError("labels must match the distance matrix size")

    # work on squared distances for ward, plain distances for complete
    D = np.array(d ** 2 if linkage == "ward" else d, dtype=np.float64)
    np.fill_diagonal(D, np.inf)
    active = list(range(J))
    ids = list(range(J))
    sizes = [1] * J
    merges = []
    for step in range(J - 1):
        sub = D[np.ix_(active, active)]
        flat = int(np.argmin(sub))
        p, q = divmod(flat, len(active))
        i, j = sorted((active[p], active[q]))
        cost = D[i, j]
        ni, nj = sizes[i], sizes[j]
        height = float(np.sqrt(cost)) if linkage == "ward" else float(cost)
        a, b = sorted((ids[i], ids[j]))
        merges.append((a, b, height, ni + nj))
        for k in active:
            if k in (i, j):
                continue
            if linkage == "complete":
                new = max(D[i, k], D[j, k])
            else:
                nk = sizes[k]
                new = ((ni + nk) * D[i, k] + (nj + nk) * D[j, k] - nk * cost) / (ni + nj + nk)
            D[i, k] = D[k, i] = new
        active.remove(j)
        sizes[i] = ni + nj
        ids[i] = J + step
    return Dendrogram(merges=tuple(merges), labels=labels, linkage=linkage)


def cluster_cas(W, dendrogram, k, mode="uniform", forecasts=None, actuals=None, epsilon=DEFAULT_EPSILON):
    """Cluster-level combination vector over all J forecasters.

    The dendrogram is cut into ``k`` clusters. Inside each cluster the share
    is split by the center of the cluster's reclosed weight columns. Cluster
    shares are ``1/k`` each in ``"uniform"`` mode. In ``"series"`` mode each
    cluster first becomes a single combined forecast series; the shares are
    then the center of the weight matrix built from those series' accuracies
    against ``actuals``.

    Returns
    -------
    assignment : ndarray of int
    weights : ndarray
        Length-J composition.
    """
    W = np.asarray(W, dtype=np.float64)
    J = W.shape[1]
    if dendrogram.J != J:
        raise ValueError(f"dendrogram has {dendrogram.J} leaves, W has {J} columns")
    if not 1 <= k <= J:
        raise InvalidK(f"k must lie in [1, {J}], got {k}")
    assignment = dendrogram.cut(k)
    groups = [np.flatnonzero(assignment == c) for c in range(k)]
    within = []
    for idx in groups:
        if idx.size == 1:
            within.append(np.ones(1))
        else:
            within.append(center(closure(W[:, idx])))

    if mode == "uniform":
        shares = np.full(k, 1.0 / k)
    elif mode == "series":
        if forecasts is None or actuals is None:
            raise ValueError("series mode needs the forecasts and actuals behind W")
        F = np.asarray(forecasts, dtype=np.float64)
        if k == 1:
            shares = np.ones(1)
        else:
            combined = np.column_stack([F[:, idx] @ w for idx, w in zip(groups, within)])
            shares = center(closure(accuracy(combined, actuals, epsilon)))
    else:
        raise ValueError(f"unknown cluster-CAS mode {mode!r}")

    weights = np.empty(J)
    for idx, w, share in zip(groups, within, shares):
        weights[idx] = share * w
    return assignment, weights


@dataclass(frozen=True)
class BiplotResult:
    scores: np.ndarray
    loadings: np.ndarray
    singular_values: np.ndarray
    variance_explained: float
    scaling: str = "form"
    labels: tuple = field(default=())
    all_singular_values: np.ndarray = field(default=None, repr=False)

    def to_dict(self):
        return {
            "scaling": self.scaling,
            "labels": list(self.labels),
            "scores": self.scores.tolist(),
            "loadings": self.loadings.tolist(),
            "singular_values": self.singular_values.tolist(),
            "variance_explained": float(self.variance_explained),
        }


def svd_biplot(Z, scaling="form", labels=()):
    """Rank-2 biplot of a centered real matrix.

    Form scaling puts the singular values on the row scores (``U S``) and
    leaves the column loadings orthonormal (``V``); covariance scaling uses
    ``sqrt(T-1) U`` and ``V S / sqrt(T-1)``. Axis signs are fixed so that the
    largest-magnitude loading on each axis is positive.
    """
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2 or min(Z.shape) < 1:
        raise ValueError(f"need a 2-D matrix, got shape {Z.shape}")
    U, s, Vt = np.linalg.svd(Z, full_matrices=False)
    V = Vt.T
    if s.size < 2:
        U = np.column_stack([U, np.zeros(U.shape[0])])
        V = np.column_stack([V, np.zeros(V.shape[0])])
        s = np.append(s, 0.0)
    for axis in range(2):
        pivot = np.argmax(np.abs(V[:, axis]))
        if V[pivot, axis] < 0:
            V[:, axis] *= -1
            U[:, axis] *= -1
    U2, s2, V2 = U[:, :2], s[:2], V[:, :2]
    if scaling == "form":
        scores, loadings = U2 * s2, V2
    elif scaling == "covariance":
        n = max(Z.shape[0] - 1, 1)
        scores, loadings = U2 * np.sqrt(n), V2 * s2 / np.sqrt(n)
    else:
        raise ValueError(f"scaling must be 'form' or 'covariance', got {scaling!r}")
    inertia = float(np.sum(s ** 2))
    explained = float(np.sum(s2 ** 2) / inertia) if inertia > 0 else 1.0
    return BiplotResult(
        scores=scores,
        loadings=loadings,
        singular_values=s2.copy(),
        variance_explained=explained,
        scaling=scaling,
        labels=tuple(labels),
        all_singular_values=s,
    )


def biplot(W, scaling="form", labels=()):
    """Biplot of the clr of the centered, unit-variation weight matrix.

    Raises ``ZeroVariation`` when the forecasters cannot be told apart.
    """
    Z = clr(center_and_scale(W))
    return svd_biplot(Z, scaling=scaling, labels=labels)


def redundancy_groups(b, angle_tolerance=5.0, min_length_fraction=0.1):
    """Group forecasters whose loading arrows lie on a common line.

    Two loadings are collinear when the angle between their lines (direction
    ignored) is at most ``angle_tolerance`` degrees. Arrows shorter than
    ``min_length_fraction`` of the longest one are left as singletons. Groups
    are closed transitively and returned sorted by first member; every
    forecaster appears in exactly one group.
    """
    L = np.asarray(b.loadings if isinstance(b, BiplotResult) else b, dtype=np.float64)
    J = L.shape[0]
    lengths = np.linalg.norm(L, axis=1)
    longest = lengths.max() if J else 0.0
    eligible = lengths > min_length_fraction * longest if longest > 0 else np.zeros(J, dtype=bool)
    parent = list(range(J))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    cos_tol = np.cos(np.deg2rad(angle_tolerance))
    for i in range(J):
        for j in range(i + 1, J):
            if not (eligible[i] and eligible[j]):
                continue
            cos = abs(L[i] @ L[j]) / (lengths[i] * lengths[j])
            if cos >= cos_tol:
                parent[find(j)] = find(i)
    groups = {}
    for i in range(J):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values())


def biplot_select(W, g, angle_tolerance=5.0, min_length_fraction=0.1, scaling="form"):
    """Keep the heaviest forecaster (by ``g``) of each redundancy group."""
    g = np.asarray(g, dtype=np.float64)
    groups = redundancy_groups(biplot(W, scaling=scaling), angle_tolerance, min_length_fraction)
    keep = sorted(max(group, key=lambda j: (g[j], -j)) for group in groups)
    return subcombination(g, keep), groups
