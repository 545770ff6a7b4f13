import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emdt.clustering import (
    ClusterPlan,
    adjusted_rand_index,
    allocate_quotas,
    cluster_minority,
    kmeans,
    knn_fuzzy_graph,
    optimize_layout,
)
from emdt.numeric import Prng


def blobs(seed, n_per=100, dim=29, sep=10.0):
    """Three unit-variance blobs whose centres are ``sep`` apart pairwise."""
    rng = np.random.default_rng(seed)
    centres = np.zeros((3, dim))
    centres[1, 0] = sep
    centres[2, 0], centres[2, 1] = sep / 2, sep * np.sqrt(3) / 2
    truth = np.repeat(np.arange(3), n_per)
    return centres[truth] + rng.standard_normal((3 * n_per, dim)), truth


def silhouette(X, labels):
    d = np.sqrt(((X[:, None] - X[None]) ** 2).sum(-1))
    s = []
    for i in range(len(X)):
        own = labels == labels[i]
        a = d[i, own].sum() / max(own.sum() - 1, 1)
        b = min(d[i, labels == c].mean() for c in np.unique(labels) if c != labels[i])
        s.append((b - a) / max(a, b))
    return float(np.mean(s))


def brute_ari(a, b):
    """Pair-counting ARI straight from the definition."""
    n = len(a)
    same_a = np.array([a[i] == a[j] for i, j in itertools.combinations(range(n), 2)])
    same_b = np.array([b[i] == b[j] for i, j in itertools.combinations(range(n), 2)])
    total = len(same_a)
    index = np.sum(same_a & same_b)
    expected = same_a.sum() * same_b.sum() / total
    best = 0.5 * (same_a.sum() + same_b.sum())
    return (index - expected) / (best - expected)


def test_separated_blobs_share_no_strong_edges():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.standard_normal((10, 3)), rng.standard_normal((10, 3)) + 50])
    g = knn_fuzzy_graph(X, 3)
    W = g.weight_matrix().toarray()
    assert W[:10, 10:].max() <= 0.01 and W[10:, :10].max() <= 0.01


def test_bandwidth_hits_target_and_weights_are_symmetric(rng):
    X = rng.standard_normal((80, 5))
    X[1] = X[0]  # a duplicate gives a zero nearest distance
    k = 10
    g = knn_fuzzy_graph(X, k)
    resid = np.exp(-np.maximum(g.knn_dists - g.rho[:, None], 0) / g.sigma[:, None]).sum(1) - np.log2(k)
    assert np.abs(resid).max() < 1e-5
    W = g.weight_matrix().toarray()
    assert np.array_equal(W, W.T)
    assert g.weights.min() > 0 and g.weights.max() <= 1.0
    assert g.rho[0] == 0.0


def test_fuzzy_union_of_one_sided_edge():
    # point 2 is a neighbour of 1 at full weight, but 1 is not among 2's nearest
    X = np.array([[0.0], [1.0], [1.1], [1.2], [10.0]])
    g = knn_fuzzy_graph(X, 2)
    W = g.weight_matrix().toarray()
    assert W[0, 1] == W[1, 0] == 1.0  # directed (1, 0) -> 1


def test_graph_rejects_too_few_points():
    with pytest.raises(ValueError):
        knn_fuzzy_graph(np.zeros((5, 2)), 5)


def test_layout_separates_blobs_and_is_deterministic():
    X, truth = blobs(0)
    g = knn_fuzzy_graph(X, 15)
    a = optimize_layout(g, 200, Prng(4))
    b = optimize_layout(g, 200, Prng(4))
    assert np.array_equal(a.coords, b.coords)
    assert np.all(np.isfinite(a.coords))
    assert silhouette(a.coords, truth) > 0.5


def test_isolated_point_keeps_its_start():
    X = np.vstack([np.random.default_rng(1).standard_normal((4, 2)), [[1e6, 1e6]]])
    g = knn_fuzzy_graph(X, 2)
    # weights of the outlier's edges exist but are tiny; a graph with no edges
    # at all returns the raw initialization
    empty = type(g)(1, np.zeros((1, 0), int), np.zeros((1, 0)), np.zeros(1), np.ones(1),
                    np.array([], int), np.array([], int), np.array([]))
    lay = optimize_layout(empty, 10, Prng(3))
    np.testing.assert_array_equal(lay.coords, Prng(3).normal((1, 2)) * 10)


def test_kmeans_recovers_blobs_exactly(rng):
    pts = np.vstack([rng.standard_normal((40, 2)) * 0.3 + c for c in ([0, 0], [8, 0], [0, 8])])
    truth = np.repeat(np.arange(3), 40)
    km = kmeans(pts, 3, Prng(0))
    assert adjusted_rand_index(km.labels, truth) == 1.0
    assert all(b <= a + 1e-9 for a, b in zip(km.inertia_trace, km.inertia_trace[1:]))


def test_kmeans_one_point_per_cluster():
    pts = np.array([[0.0, 0.0], [5.0, 1.0], [-3.0, 2.0]])
    km = kmeans(pts, 3, Prng(2))
    assert sorted(km.labels) == [0, 1, 2] and km.inertia == 0.0


def test_kmeans_duplicates_are_deterministic():
    pts = np.repeat(np.array([[0.0, 0.0], [1.0, 1.0]]), 5, axis=0)
    a, b = kmeans(pts, 3, Prng(9)), kmeans(pts, 3, Prng(9))
    assert np.array_equal(a.labels, b.labels)
    assert np.all(np.bincount(a.labels, minlength=3) > 0)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_inertia_never_increases(seed):
    pts = np.random.default_rng(seed).standard_normal((60, 2))
    tr = kmeans(pts, 3, Prng(seed)).inertia_trace
    assert all(b <= a + 1e-9 for a, b in zip(tr, tr[1:]))


def test_ari_matches_pair_counting(rng):
    for _ in range(5):
        a, b = rng.integers(0, 3, 30), rng.integers(0, 4, 30)
        assert adjusted_rand_index(a, b) == pytest.approx(brute_ari(a, b), abs=1e-12)
    assert adjusted_rand_index([0, 0, 1, 1], [5, 5, 2, 2]) == 1.0


def test_quota_examples():
    assert allocate_quotas(300, (150, 100, 50), 300) == [150, 100, 50]
    assert allocate_quotas(10, (2, 1, 1), 4) == [5, 3, 2]
    assert allocate_quotas(0, (3, 4, 5)) == [0, 0, 0]
    with pytest.raises(ValueError):
        allocate_quotas(5, (1, 1), 3)


def test_quotas_sum_on_random_instances():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        sizes = rng.integers(1, 200, 3)
        m = int(rng.integers(0, 1000))
        q = allocate_quotas(m, sizes, int(sizes.sum()))
        assert sum(q) == m and min(q) >= 0
        raw = m * sizes / sizes.sum()
        assert np.all(np.abs(np.array(q) - raw) < 1.0)


def test_plan_csv_round_trip(tmp_path):
    X, _ = blobs(1, n_per=20, dim=5)
    plan = cluster_minority(X, epochs=50, n_neighbors=5, seed=2).with_quotas(60)
    assert sum(plan.quotas) == 60 and sum(plan.sizes) == 60
    plan.save(tmp_path / "c.csv")
    back = ClusterPlan.load(tmp_path / "c.csv")
    assert np.array_equal(back.labels, plan.labels)
    assert np.array_equal(back.coords, plan.coords)
    assert set(np.unique(plan.to_frame()["cluster"])) == {1, 2, 3}


def test_full_chain_recovers_partition():
    X, truth = blobs(3)
    plan = cluster_minority(X, seed=3)
    assert adjusted_rand_index(plan.labels, truth) >= 0.9
