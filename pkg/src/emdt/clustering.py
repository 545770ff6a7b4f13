"""Minority-class structure: fuzzy kNN graph, 2-D neighbor-embedding layout, k-means, quotas.

The graph and layout follow the core of UMAP (smooth kNN memberships,
fuzzy-union symmetrization, edge-sampled SGD with negative sampling) without
spectral initialization or any of its optional machinery.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np
import pandas as pd
from scipy import sparse

from .dataset import largest_remainder
from .numeric import Prng

CURVE_A = 1.577
CURVE_B = 0.895


@dataclass(frozen=True)
class NeighborGraph:
    n_points: int
    knn_indices: np.ndarray  # (n, k)
    knn_dists: np.ndarray  # (n, k)
    rho: np.ndarray
    sigma: np.ndarray
    heads: np.ndarray  # symmetric edge list, both directions present
    tails: np.ndarray
    weights: np.ndarray

    def weight_matrix(self) -> sparse.csr_matrix:
        n = self.n_points
        return sparse.csr_matrix((self.weights, (self.heads, self.tails)), shape=(n, n))


def _pairwise_sq(X: np.ndarray) -> np.ndarray:
    sq = (X * X).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * X @ X.T
    np.maximum(d2, 0.0, out=d2)
    return d2


def _smooth_knn(dists: np.ndarray, rho: np.ndarray, target: float, iters: int = 200) -> np.ndarray:
    shifted = np.maximum(dists - rho[:, None], 0.0)

    def psum(sig):
        return np.exp(-shifted / sig[:, None]).sum(axis=1)

    lo = np.zeros(len(rho))
    hi = np.ones(len(rho))
    for _ in range(200):
        short = psum(hi) < target
        if not short.any():
            break
        hi[short] *= 2.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        over = psum(mid) > target
        hi = np.where(over, mid, hi)
        lo = np.where(over, lo, mid)
    sigma = 0.5 * (lo + hi)
    return np.maximum(sigma, np.finfo(float).tiny)


def knn_fuzzy_graph(X: np.ndarray, k: int = 15) -> NeighborGraph:
    """Exact Euclidean kNN graph with smooth memberships and fuzzy-union symmetrization."""
    X = np.asarray(X, dtype=np.float64)
    n = len(X)
    if k < 2:
        raise ValueError(f"need k >= 2 neighbors, got {k}")
    if k >= n:
        raise ValueError(f"k={k} neighbors requires more than {k} points, got {n}")
    d2 = _pairwise_sq(X)
    np.fill_diagonal(d2, np.inf)
    # stable sort: equal distances keep index order
    idx = np.argsort(d2, axis=1, kind="stable")[:, :k]
    dists = np.sqrt(np.take_along_axis(d2, idx, axis=1))
    rho = dists[:, 0].copy()
    sigma = _smooth_knn(dists, rho, np.log2(k))
    member = np.exp(-np.maximum(dists - rho[:, None], 0.0) / sigma[:, None])
    W = sparse.csr_matrix((member.ravel(), (np.repeat(np.arange(n), k), idx.ravel())), shape=(n, n))
    sym = (W + W.T - W.multiply(W.T)).tocoo()
    keep = sym.data > 0
    return NeighborGraph(n, idx, dists, rho, sigma, sym.row[keep].astype(np.int64),
                         sym.col[keep].astype(np.int64), sym.data[keep])


@dataclass(frozen=True)
class Embedding2D:
    coords: np.ndarray
    epochs: int
    a: float = CURVE_A
    b: float = CURVE_B
    negative_rate: int = 5


@numba.njit(cache=True)
def _clip(v):
    if v > 4.0:
        return 4.0
    if v < -4.0:
        return -4.0
    return v


@numba.njit(cache=True)
def _layout_epoch(Y, heads, tails, selected, negatives, a, b, alpha):
    dim = Y.shape[1]
    for e in range(heads.shape[0]):
        if not selected[e]:
            continue
        i = heads[e]
        j = tails[e]
        d2 = 0.0
        for c in range(dim):
            diff = Y[i, c] - Y[j, c]
            d2 += diff * diff
        coeff = 0.0
        if d2 > 0.0:
            coeff = -2.0 * a * b * d2 ** (b - 1.0) / (a * d2**b + 1.0)
        for c in range(dim):
            g = _clip(coeff * (Y[i, c] - Y[j, c]))
            Y[i, c] += g * alpha
            Y[j, c] -= g * alpha
        for p in range(negatives.shape[1]):
            k = negatives[e, p]
            if k == i:
                continue
            d2 = 0.0
            for c in range(dim):
                diff = Y[i, c] - Y[k, c]
                d2 += diff * diff
            coeff = 0.0
            if d2 > 0.0:
                coeff = 2.0 * b / ((0.001 + d2) * (a * d2**b + 1.0))
            for c in range(dim):
                if coeff > 0.0:
                    g = _clip(coeff * (Y[i, c] - Y[k, c]))
                else:
                    g = 4.0
                Y[i, c] += g * alpha


def optimize_layout(
    graph: NeighborGraph,
    epochs: int = 500,
    prng: Prng | None = None,
    a: float = CURVE_A,
    b: float = CURVE_B,
    negative_rate: int = 5,
    init_std: float = 10.0,
) -> Embedding2D:
    """SGD layout in 2-D: attraction along sampled edges, repulsion from random points.

    Each epoch keeps every edge with probability w / max(w); the learning
    rate falls linearly from 1 to 0.
    """
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    prng = prng or Prng(0)
    n = graph.n_points
    Y = prng.normal((n, 2)) * init_std
    n_edges = len(graph.weights)
    if n_edges == 0:
        return Embedding2D(Y, epochs, a, b, negative_rate)
    keep_prob = graph.weights / graph.weights.max()
    heads = graph.heads.astype(np.int64)
    tails = graph.tails.astype(np.int64)
    for epoch in range(epochs):
        selected = prng.uniform(n_edges) < keep_prob
        negatives = prng.integers(0, n, size=(n_edges, negative_rate)).astype(np.int64)
        _layout_epoch(Y, heads, tails, selected, negatives, a, b, 1.0 - epoch / epochs)
    return Embedding2D(Y, epochs, a, b, negative_rate)


@dataclass
class KMeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    inertia_trace: list[float] = field(default_factory=list)
    n_iter: int = 0

    @property
    def inertia(self) -> float:
        return self.inertia_trace[-1]


def _sq_dists(points, centers):
    return ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=-1)


def _kmeanspp(points: np.ndarray, k: int, prng: Prng) -> np.ndarray:
    n = len(points)
    chosen = [int(prng.integers(0, n))]
    closest = ((points - points[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            pick = int(np.searchsorted(np.cumsum(closest), prng.uniform() * total, side="right"))
            pick = min(pick, n - 1)
        else:
            free = np.setdiff1d(np.arange(n), chosen)
            pick = int(free[prng.integers(0, len(free))]) if len(free) else chosen[-1]
        chosen.append(pick)
        closest = np.minimum(closest, ((points - points[pick]) ** 2).sum(axis=1))
    return points[chosen].astype(np.float64)


def kmeans(points: np.ndarray, k: int = 3, prng: Prng | None = None, max_iter: int = 300) -> KMeansResult:
    """k-means++ seeding then Lloyd iterations until the assignment stops changing."""
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if n < k:
        raise ValueError(f"need at least k={k} points, got {n}")
    prng = prng or Prng(0)
    centers = _kmeanspp(points, k, prng)
    labels = np.full(n, -1)
    trace = []
    it = 0
    for it in range(1, max_iter + 1):
        new = np.argmin(_sq_dists(points, centers), axis=1)
        counts = np.bincount(new, minlength=k)
        for empty in np.flatnonzero(counts == 0):
            # move the point farthest from its centroid in the largest cluster
            big = int(np.argmax(counts))
            members = np.flatnonzero(new == big)
            far = members[np.argmax(((points[members] - centers[big]) ** 2).sum(axis=1))]
            new[far] = empty
            counts = np.bincount(new, minlength=k)
        changed = not np.array_equal(new, labels)
        labels = new
        centers = np.array([points[labels == c].mean(axis=0) for c in range(k)])
        trace.append(float(((points - centers[labels]) ** 2).sum()))
        if not changed:
            break
    return KMeansResult(labels, centers, trace, it)


def allocate_quotas(m: int, cluster_sizes, n: int | None = None) -> list[int]:
    """Split ``m`` synthetic rows across clusters in proportion to their sizes."""
    sizes = [int(s) for s in cluster_sizes]
    if n is not None and sum(sizes) != n:
        raise ValueError(f"cluster sizes sum to {sum(sizes)}, expected {n}")
    if m < 0:
        raise ValueError("m must be non-negative")
    return largest_remainder(m, sizes)


@dataclass
class ClusterPlan:
    labels: np.ndarray  # 0-based cluster id per minority row
    centroids: np.ndarray
    coords: np.ndarray
    members: list[np.ndarray]
    quotas: list[int] = field(default_factory=list)

    @property
    def sizes(self) -> list[int]:
        return [len(m) for m in self.members]

    def with_quotas(self, m: int) -> "ClusterPlan":
        self.quotas = allocate_quotas(m, self.sizes, len(self.labels))
        return self

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "row": np.arange(len(self.labels)),
            "cluster": self.labels + 1,
            "x": self.coords[:, 0],
            "y": self.coords[:, 1],
        })

    def save(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")

    @classmethod
    def load(cls, path) -> "ClusterPlan":
        df = pd.read_csv(path, float_precision="round_trip")
        labels = df["cluster"].to_numpy() - 1
        coords = df[["x", "y"]].to_numpy(dtype=np.float64)
        k = int(labels.max()) + 1
        members = [np.flatnonzero(labels == c) for c in range(k)]
        centroids = np.array([coords[m].mean(axis=0) for m in members])
        return cls(labels, centroids, coords, members)


def cluster_minority(
    X: np.ndarray,
    n_clusters: int = 3,
    n_neighbors: int = 15,
    epochs: int = 500,
    seed: int = 0,
) -> ClusterPlan:
    """Graph -> 2-D layout -> k-means on the layout."""
    graph = knn_fuzzy_graph(X, n_neighbors)
    layout = optimize_layout(graph, epochs, Prng(seed))
    km = kmeans(layout.coords, n_clusters, Prng(seed + 1))
    members = [np.flatnonzero(km.labels == c) for c in range(n_clusters)]
    return ClusterPlan(km.labels, km.centroids, layout.coords, members)


def adjusted_rand_index(a, b) -> float:
    a = np.unique(np.asarray(a), return_inverse=True)[1]
    b = np.unique(np.asarray(b), return_inverse=True)[1]
    table = np.zeros((a.max() + 1, b.max() + 1))
    np.add.at(table, (a, b), 1)

    def pairs(x):
        return (x * (x - 1) / 2).sum()

    n = len(a)
    index = pairs(table)
    rows, cols = pairs(table.sum(axis=1)), pairs(table.sum(axis=0))
    expected = rows * cols / (n * (n - 1) / 2)
    best = 0.5 * (rows + cols)
    if best == expected:
        return 1.0
    return float((index - expected) / (best - expected))
