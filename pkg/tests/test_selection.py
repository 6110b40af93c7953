import itertools
import math
import statistics

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform

from conftest import composition_matrices, compositions, random_compositions
from simplex_combine.coda import center, closure, clr, center_and_scale
from simplex_combine.errors import InvalidK, ZeroVariation
from simplex_combine.selection import (
    BiplotResult,
    Dendrogram,
    biplot,
    biplot_select,
    cas_select,
    cluster_cas,
    cluster_forecasts,
    pairwise_distance,
    redundancy_groups,
    subcombination,
    svd_biplot,
)


class TestCasSelect:
    def test_example(self):
        s = cas_select([0.40, 0.35, 0.15, 0.10])
        assert s.included == (0, 1)
        assert s.sub_weights.tolist() == [0.40 / 0.75, 0.35 / 0.75]
        np.testing.assert_allclose(s.sub_weights, [8 / 15, 7 / 15], rtol=0, atol=1e-15)

    def test_uniform_falls_back_to_all(self):
        s = cas_select(np.full(5, 0.2))
        assert s.included == tuple(range(5))
        np.testing.assert_allclose(s.sub_weights, 0.2)

    def test_single_survivor(self):
        s = cas_select([0.6, 0.2, 0.2])
        assert s.included == (0,) and s.sub_weights.tolist() == [1.0]
        np.testing.assert_array_equal(s.expand(), [1.0, 0.0, 0.0])

    @settings(max_examples=150)
    @given(compositions())
    def test_ratios_preserved(self, g):
        s = cas_select(g)
        assert all(g[i] > 1 / len(g) for i in s.included) or len(s.included) == len(g)
        for (a, i), (b, j) in itertools.combinations(zip(s.sub_weights, s.included), 2):
            assert a / b == pytest.approx(g[i] / g[j], rel=1e-12)
        assert s.sub_weights.sum() == pytest.approx(1.0, abs=1e-14)

    def test_subcombination_expand(self):
        s = subcombination([0.1, 0.2, 0.3, 0.4], [1, 3])
        np.testing.assert_allclose(s.expand(), [0, 1 / 3, 0, 2 / 3])


def brute_distance(W):
    J = W.shape[1]
    d = np.zeros((J, J))
    for i in range(J):
        for j in range(J):
            if i != j:
                d[i, j] = math.sqrt(statistics.variance([math.log(r[i] / r[j]) for r in W]))
    return d


class TestPairwiseDistance:
    def test_brute_force(self, rng):
        W = random_compositions(rng, 9, 3)
        np.testing.assert_allclose(pairwise_distance(W), brute_distance(W), rtol=1e-12, atol=1e-14)

    def test_proportional_columns(self, rng):
        base = rng.uniform(1, 2, size=(6, 1))
        W = closure(np.hstack([base, 3 * base, rng.uniform(1, 2, size=(6, 1))]))
        assert pairwise_distance(W)[0, 1] == pytest.approx(0.0, abs=1e-14)

    @settings(max_examples=60)
    @given(composition_matrices(), st.randoms(use_true_random=False))
    def test_metric_and_permutation(self, W, r):
        d = pairwise_distance(W)
        assert (d == d.T).all() and (np.diag(d) == 0).all() and (d >= 0).all()
        perm = list(range(W.shape[1]))
        r.shuffle(perm)
        np.testing.assert_allclose(pairwise_distance(W[:, perm]), d[np.ix_(perm, perm)], atol=1e-12)

    def test_reclosure_invariance(self, rng):
        W = random_compositions(rng, 8, 5)
        d = pairwise_distance(W)
        sub = pairwise_distance(closure(W[:, [1, 3, 4]]))
        np.testing.assert_allclose(sub, d[np.ix_([1, 3, 4], [1, 3, 4])], atol=1e-12)


class TestClustering:
    @pytest.mark.parametrize("method", ["complete", "ward"])
    @pytest.mark.parametrize("seed", range(6))
    def test_matches_scipy(self, method, seed):
        rng = np.random.default_rng(seed)
        W = random_compositions(rng, 12, 3 + seed)
        d = pairwise_distance(W)
        ours = cluster_forecasts(d, method).to_linkage()
        ref = linkage(squareform(d, checks=False), method=method)
        np.testing.assert_allclose(ours[:, 2], ref[:, 2], rtol=1e-10, atol=1e-12)
        np.testing.assert_array_equal(ours[:, 3], ref[:, 3])
        for k in range(1, d.shape[0] + 1):
            ours_k = cluster_forecasts(d, method).cut(k)
            ref_k = fcluster(ref, k, criterion="maxclust")
            assert same_partition(ours_k, ref_k)

    def test_identical_columns_merge_first(self, rng):
        col = rng.uniform(1, 2, size=(7, 1))
        W = closure(np.hstack([rng.uniform(1, 2, size=(7, 1)), col, col]))
        dend = cluster_forecasts(pairwise_distance(W), "complete")
        a, b, h, n = dend.merges[0]
        assert (a, b, n) == (1, 2, 2) and h == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("method", ["complete", "ward"])
    def test_two_leaves(self, method):
        d = np.array([[0.0, 0.7], [0.7, 0.0]])
        dend = cluster_forecasts(d, method, labels=("a", "b"))
        assert dend.merges == ((0, 1, pytest.approx(0.7), 2),)

    def test_planted_pairs(self, rng):
        W = planted_pairs(rng)
        dend = cluster_forecasts(pairwise_distance(W), "complete")
        assert dend.cut(2).tolist() == [0, 0, 1, 1]
        assert dend.cut(1).tolist() == [0, 0, 0, 0]
        assert sorted(dend.cut(4).tolist()) == [0, 1, 2, 3]
        with pytest.raises(InvalidK):
            dend.cut(5)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            cluster_forecasts(np.zeros((1, 1)))
        with pytest.raises(ValueError):
            cluster_forecasts(np.array([[0.0, 1.0], [2.0, 0.0]]))
        with pytest.raises(ValueError):
            cluster_forecasts(np.zeros((2, 2)), "single")

    def test_dict_roundtrip(self, rng):
        dend = cluster_forecasts(pairwise_distance(random_compositions(rng, 6, 5)), "ward", list("abcde"))
        again = Dendrogram.from_dict(dend.to_dict())
        assert again == dend
        assert sorted(dend.leaf_order()) == list(range(5))


def same_partition(a, b):
    pairs_a = {(i, j) for i in range(len(a)) for j in range(len(a)) if a[i] == a[j]}
    pairs_b = {(i, j) for i in range(len(b)) for j in range(len(b)) if b[i] == b[j]}
    return pairs_a == pairs_b


def planted_pairs(rng, T=20, pairs=2):
    cols = []
    for _ in range(pairs):
        x = rng.normal(0, 1.0, size=(T, 1))
        cols += [x, x + rng.normal(0, 0.01, (T, 1))]
    return closure(np.exp(np.hstack(cols)))


class TestClusterCas:
    def test_k_one_is_center(self, rng):
        W = random_compositions(rng, 10, 5)
        dend = cluster_forecasts(pairwise_distance(W), "ward")
        _, w = cluster_cas(W, dend, 1)
        np.testing.assert_allclose(w, center(W), rtol=0, atol=1e-12)

    def test_k_j_is_uniform(self, rng):
        W = random_compositions(rng, 10, 5)
        dend = cluster_forecasts(pairwise_distance(W), "complete")
        assignment, w = cluster_cas(W, dend, 5)
        np.testing.assert_allclose(w, 0.2, rtol=0, atol=1e-12)
        assert sorted(assignment.tolist()) == list(range(5))

    def test_planted_pairs_split_in_half(self, rng):
        W = planted_pairs(rng)
        dend = cluster_forecasts(pairwise_distance(W), "complete")
        assignment, w = cluster_cas(W, dend, 2)
        assert w[:2].sum() == pytest.approx(0.5) and w[2:].sum() == pytest.approx(0.5)
        np.testing.assert_allclose(w[:2], 0.5 * center(closure(W[:, :2])), atol=1e-14)
        np.testing.assert_allclose(w[2:], 0.5 * center(closure(W[:, 2:])), atol=1e-14)

    def test_series_mode(self, rng):
        F = rng.normal(size=(12, 4))
        y = rng.normal(size=12)
        F[:, 1] = F[:, 0] + 0.01
        W = closure(np.maximum(np.abs(F - y[:, None]), 1e-8) ** -2)
        dend = cluster_forecasts(pairwise_distance(W), "ward")
        assignment, w = cluster_cas(W, dend, 2, "series", F, y)
        assert w.sum() == pytest.approx(1.0) and (w > 0).all()
        _, w1 = cluster_cas(W, dend, 1, "series", F, y)
        np.testing.assert_allclose(w1, center(W), atol=1e-12)
        with pytest.raises(ValueError):
            cluster_cas(W, dend, 2, "series")

    def test_invalid_k(self, rng):
        W = random_compositions(rng, 5, 3)
        dend = cluster_forecasts(pairwise_distance(W))
        for k in (0, 4):
            with pytest.raises(InvalidK):
                cluster_cas(W, dend, k)


class TestBiplot:
    def test_two_parts_explain_everything(self, rng):
        b = biplot(random_compositions(rng, 8, 2))
        assert b.singular_values[1] == pytest.approx(0.0, abs=1e-12)
        assert b.variance_explained == pytest.approx(1.0, abs=1e-10)

    def test_rank_two_reconstruction(self, rng):
        T, J = 15, 6
        Z = rng.normal(size=(T, 2)) @ rng.normal(size=(2, J))
        Z -= Z.mean(axis=0)
        b = svd_biplot(Z)
        np.testing.assert_allclose(b.scores @ b.loadings.T, Z, atol=1e-8)
        assert b.variance_explained == pytest.approx(1.0, abs=1e-10)

    def test_truncation_error(self, rng):
        Z = clr(center_and_scale(random_compositions(rng, 12, 6)))
        b = svd_biplot(Z)
        err = np.sum((Z - b.scores @ b.loadings.T) ** 2)
        assert err == pytest.approx(np.sum(b.all_singular_values[2:] ** 2), rel=1e-9)

    def test_singular_values_match_eigen_oracle(self, rng):
        W = random_compositions(rng, 10, 5)
        Z = clr(center_and_scale(W))
        eig = np.sort(np.linalg.eigvalsh(Z.T @ Z))[::-1]
        b = biplot(W)
        np.testing.assert_allclose(b.singular_values, np.sqrt(np.maximum(eig[:2], 0)), atol=1e-8)

    @settings(max_examples=40)
    @given(composition_matrices(max_T=12, max_J=7, min_T=3))
    def test_double_centered(self, W):
        try:
            b = biplot(W)
        except ZeroVariation:
            return
        Z = clr(center_and_scale(W))
        np.testing.assert_allclose(b.scores.mean(axis=0), 0.0, atol=1e-9)
        assert np.sum(b.all_singular_values ** 2) == pytest.approx(np.sum(Z ** 2), rel=1e-9, abs=1e-12)

    def test_covariance_scaling_same_product(self, rng):
        W = random_compositions(rng, 9, 4)
        f, c = biplot(W, "form"), biplot(W, "covariance")
        np.testing.assert_allclose(f.scores @ f.loadings.T, c.scores @ c.loadings.T, atol=1e-12)
        with pytest.raises(ValueError):
            biplot(W, "other")

    def test_zero_variation(self):
        with pytest.raises(ZeroVariation):
            biplot(np.full((4, 3), 1 / 3))


def loadings(*rows):
    return np.array(rows, dtype=float)


class TestRedundancy:
    def test_collinear(self):
        assert redundancy_groups(loadings((1, 0), (2, 0))) == [[0, 1]]

    def test_orthogonal(self):
        assert redundancy_groups(loadings((1, 0), (0, 1)), 10) == [[0], [1]]

    def test_opposite_direction_same_line(self):
        assert redundancy_groups(loadings((1, 0), (-1, 0.01)), 5) == [[0, 1]]

    def test_short_arrows_stay_alone(self):
        assert redundancy_groups(loadings((1, 0), (0.01, 0), (3, 0.01))) == [[0, 2], [1]]

    def test_transitive(self):
        rows = [(math.cos(math.radians(a)), math.sin(math.radians(a))) for a in (0, 4, 8, 60)]
        assert redundancy_groups(loadings(*rows), 5) == [[0, 1, 2], [3]]

    @settings(max_examples=60)
    @given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=1, max_size=8),
           st.randoms(use_true_random=False))
    def test_relabeling_stable(self, rows, r):
        L = np.array(rows, dtype=float)
        perm = list(range(len(rows)))
        r.shuffle(perm)
        base = {frozenset(g) for g in redundancy_groups(L)}
        moved = {frozenset(perm[i] for i in g) for g in redundancy_groups(L[perm])}
        assert moved == base
        assert sorted(i for g in base for i in g) == list(range(len(rows)))

    def test_accepts_biplot_result(self, rng):
        # three latent factors give a genuinely rank-2 clr matrix
        b = biplot(planted_pairs(rng, pairs=3))
        assert isinstance(b, BiplotResult)
        assert b.variance_explained > 0.999
        assert redundancy_groups(b) == [[0, 1], [2, 3], [4, 5]]

    def test_biplot_select_keeps_heaviest(self, rng):
        W = planted_pairs(rng, pairs=3)
        g = closure(np.array([0.1, 0.3, 0.25, 0.05, 0.1, 0.2]))
        sel, groups = biplot_select(W, g)
        assert groups == [[0, 1], [2, 3], [4, 5]]
        assert sel.included == (1, 2, 5)
        np.testing.assert_allclose(sel.sub_weights, [0.3 / 0.75, 0.25 / 0.75, 0.2 / 0.75])
