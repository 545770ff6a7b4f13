"""Binary gradient-boosted trees with second-order, exact greedy split search.

Trees are grown level by level.  For every level one pass is made over each
feature's presorted values; each row contributes to the running left-side
gradient/hessian sums of the node it currently sits in, and a candidate split
is scored whenever the value strictly increases within that node.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np


@dataclass(frozen=True)
class GbdtConfig:
    n_trees: int = 200
    max_depth: int = 6
    learning_rate: float = 0.1
    reg_lambda: float = 1.0
    gamma: float = 0.0
    min_child_weight: float = 1.0
    threshold: float = 0.5
    seed: int = 0  # unused by the exact algorithm; kept for run metadata

    def __post_init__(self):
        if self.n_trees < 0:
            raise ValueError("n_trees must be >= 0")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in (0, 1]")


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray  # -1 marks a leaf
    threshold: np.ndarray  # rows with x < threshold go left
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # leaf weight (already scaled by the learning rate)
    depth: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)


@dataclass
class GbdtModel:
    base_score: float
    n_features: int
    trees: list[Tree] = field(default_factory=list)
    config: GbdtConfig = field(default_factory=GbdtConfig)

    def dump(self) -> str:
        lines = ["tree\tnode\tfeature\tthreshold\tleft\tright\tleaf_weight"]
        for t, tree in enumerate(self.trees):
            for k in range(tree.n_nodes):
                if tree.feature[k] < 0:
                    lines.append(f"{t}\t{k}\t-\t-\t-\t-\t{tree.value[k]!r}")
                else:
                    lines.append(f"{t}\t{k}\t{tree.feature[k]}\t{tree.threshold[k]!r}\t"
                                 f"{tree.left[k]}\t{tree.right[k]}\t-")
        return "\n".join(lines) + "\n"

    def save_dump(self, path) -> None:
        Path(path).write_text(f"# base_score {self.base_score!r}\n" + self.dump())


def split_gain(GL: float, HL: float, GR: float, HR: float, reg_lambda: float = 1.0, gamma: float = 0.0) -> float:
    G, H = GL + GR, HL + HR
    return 0.5 * (GL * GL / (HL + reg_lambda) + GR * GR / (HR + reg_lambda) - G * G / (H + reg_lambda)) - gamma


@numba.njit(cache=True)
def _node_totals(node_of, g, h, n_nodes):
    G = np.zeros(n_nodes)
    H = np.zeros(n_nodes)
    for i in range(node_of.shape[0]):
        k = node_of[i]
        if k >= 0:
            G[k] += g[i]
            H[k] += h[i]
    return G, H


@numba.njit(cache=True)
def _best_splits(sorted_vals, order, node_of, g, h, G, H, lam, gamma, min_h):
    n_nodes = G.shape[0]
    best_gain = np.zeros(n_nodes)
    best_feat = np.full(n_nodes, -1, dtype=np.int64)
    best_thr = np.zeros(n_nodes)
    GL = np.zeros(n_nodes)
    HL = np.zeros(n_nodes)
    last = np.zeros(n_nodes)
    seen = np.zeros(n_nodes, dtype=np.bool_)
    d, n = order.shape
    for f in range(d):
        GL[:] = 0.0
        HL[:] = 0.0
        seen[:] = False
        for pos in range(n):
            i = order[f, pos]
            k = node_of[i]
            if k < 0:
                continue
            v = sorted_vals[f, pos]
            if seen[k] and v > last[k]:
                hl = HL[k]
                hr = H[k] - hl
                if hl >= min_h and hr >= min_h:
                    gl = GL[k]
                    gr = G[k] - gl
                    gain = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam)
                                  - G[k] * G[k] / (H[k] + lam)) - gamma
                    if gain > best_gain[k]:
                        best_gain[k] = gain
                        best_feat[k] = f
                        mid = 0.5 * (last[k] + v)
                        best_thr[k] = mid if last[k] < mid < v else v
            GL[k] += g[i]
            HL[k] += h[i]
            last[k] = v
            seen[k] = True
    return best_gain, best_feat, best_thr


@numba.njit(cache=True)
def _route(Xt, node_of, split_feat, split_thr, left_id, right_id):
    out = np.empty_like(node_of)
    for i in range(node_of.shape[0]):
        k = node_of[i]
        if k < 0 or split_feat[k] < 0:
            out[i] = -1
        elif Xt[split_feat[k], i] < split_thr[k]:
            out[i] = left_id[k]
        else:
            out[i] = right_id[k]
    return out


@numba.njit(cache=True)
def _tree_margin(X, feature, threshold, left, right, value, out):
    for i in range(X.shape[0]):
        k = 0
        while feature[k] >= 0:
            if X[i, feature[k]] < threshold[k]:
                k = left[k]
            else:
                k = right[k]
        out[i] += value[k]


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def logistic_loss(y, margin) -> float:
    # log(1 + e^m) - y m, computed stably
    return float(np.mean(np.logaddexp(0.0, margin) - y * margin))


def _grow_tree(Xt, sorted_vals, order, g, h, config: GbdtConfig):
    n = Xt.shape[1]
    feature, threshold, left, right, value = [-1], [0.0], [-1], [-1], [0.0]
    node_of = np.zeros(n, dtype=np.int64)
    tree_ids = np.array([0])  # level-local node -> tree node id
    leaf_of = np.zeros(n, dtype=np.int64)  # final tree node per row
    depth = 0
    for level in range(config.max_depth + 1):
        n_active = len(tree_ids)
        G, H = _node_totals(node_of, g, h, n_active)
        for k in range(n_active):
            value[tree_ids[k]] = -config.learning_rate * G[k] / (H[k] + config.reg_lambda)
        if level == config.max_depth:
            break
        _, feat, thr = _best_splits(sorted_vals, order, node_of, g, h, G, H,
                                    config.reg_lambda, config.gamma, config.min_child_weight)
        left_id = np.full(n_active, -1, dtype=np.int64)
        right_id = np.full(n_active, -1, dtype=np.int64)
        next_ids = []
        for k in range(n_active):
            if feat[k] < 0:
                continue
            node = tree_ids[k]
            feature[node], threshold[node] = int(feat[k]), float(thr[k])
            for side in (left_id, right_id):
                side[k] = len(next_ids)
                next_ids.append(len(feature))
                feature.append(-1)
                threshold.append(0.0)
                left.append(-1)
                right.append(-1)
                value.append(0.0)
            left[node], right[node] = next_ids[-2], next_ids[-1]
        # rows in nodes that did not split are settled
        settled = (node_of >= 0) & (feat[np.maximum(node_of, 0)] < 0)
        leaf_of[settled] = tree_ids[node_of[settled]]
        if not next_ids:
            node_of = np.full(n, -1, dtype=np.int64)
            break
        node_of = _route(Xt, node_of, feat, thr, left_id, right_id)
        tree_ids = np.array(next_ids)
        depth = level + 1
    active = node_of >= 0
    leaf_of[active] = tree_ids[node_of[active]]
    tree = Tree(np.array(feature), np.array(threshold), np.array(left), np.array(right),
                np.array(value), depth)
    return tree, tree.value[leaf_of]


def fit(X, y, config: GbdtConfig | None = None) -> GbdtModel:
    """Boost ``config.n_trees`` regression trees on the logistic loss."""
    config = config or GbdtConfig()
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError(f"X {X.shape} and y {y.shape} do not align")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("labels must be 0/1")
    pos = y.mean()
    if pos in (0.0, 1.0):
        raise ValueError("both classes must be present to fit the classifier")
    base = float(np.log(pos / (1.0 - pos)))
    Xt = np.ascontiguousarray(X.T)
    order = np.ascontiguousarray(np.argsort(Xt, axis=1, kind="stable"))
    sorted_vals = np.ascontiguousarray(np.take_along_axis(Xt, order, axis=1))
    margin = np.full(len(y), base)
    model = GbdtModel(base, X.shape[1], [], config)
    for _ in range(config.n_trees):
        p = _sigmoid(margin)
        g = p - y
        h = p * (1.0 - p)
        tree, delta = _grow_tree(Xt, sorted_vals, order, g, h, config)
        model.trees.append(tree)
        margin += delta
    return model


def predict_margin(model: GbdtModel, X, n_trees: int | None = None) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got shape {X.shape}")
    out = np.full(len(X), model.base_score)
    for tree in model.trees[:n_trees]:
        _tree_margin(X, tree.feature, tree.threshold, tree.left, tree.right, tree.value, out)
    return out


def staged_margins(model: GbdtModel, X, stages):
    """Margins after each tree count in ``stages`` (ascending), in one pass."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    out = np.full(len(X), model.base_score)
    done, result = 0, {}
    for s in sorted(stages):
        for tree in model.trees[done:s]:
            _tree_margin(X, tree.feature, tree.threshold, tree.left, tree.right, tree.value, out)
        done = s
        result[s] = out.copy()
    return result


def predict_proba(model: GbdtModel, X, n_trees: int | None = None) -> np.ndarray:
    return _sigmoid(predict_margin(model, X, n_trees))


def predict(model: GbdtModel, X, n_trees: int | None = None) -> np.ndarray:
    return (predict_proba(model, X, n_trees) >= model.config.threshold).astype(np.int64)
