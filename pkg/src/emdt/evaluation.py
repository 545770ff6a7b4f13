"""Downstream-classification metrics, DCR privacy score and fidelity measures."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import rankdata

from .numeric import Prng


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(y_true, y_pred) -> ConfusionCounts:
    y_true = np.asarray(y_true).astype(bool)
    y_pred = np.asarray(y_pred).astype(bool)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"label arrays differ in length: {y_true.shape} vs {y_pred.shape}")
    return ConfusionCounts(
        tp=int(np.sum(y_true & y_pred)),
        fp=int(np.sum(~y_true & y_pred)),
        tn=int(np.sum(~y_true & ~y_pred)),
        fn=int(np.sum(y_true & ~y_pred)),
    )


def _ratio(num, den):
    return num / den if den else 0.0


def metrics_from_counts(c: ConfusionCounts) -> dict[str, float]:
    """F1, recall, precision and balanced accuracy; any 0/0 ratio is taken as 0."""
    precision = _ratio(c.tp, c.tp + c.fp)
    recall = _ratio(c.tp, c.tp + c.fn)
    f1 = _ratio(2 * precision * recall, precision + recall)
    tnr = _ratio(c.tn, c.tn + c.fp)
    return {"f1": f1, "recall": recall, "precision": precision, "bal_acc": 0.5 * (recall + tnr)}


def classification_metrics(y_true, y_pred) -> dict[str, float]:
    return metrics_from_counts(confusion(y_true, y_pred))


def roc_auc(y_true, score) -> float:
    """Area under the ROC curve via the rank-sum statistic (ties get half credit)."""
    y = np.asarray(y_true).astype(bool)
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if not n_pos or not n_neg:
        raise ValueError("AUC needs both classes")
    ranks = rankdata(score)
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def _nn_dist(query: np.ndarray, ref: np.ndarray) -> np.ndarray:
    return cKDTree(ref).query(query, k=1)[0]


def dcr_score(synth, train, holdout, prng: Prng) -> float:
    """Share of synthetic rows whose closest real record is in ``train`` rather than ``holdout``.

    ``train`` is first subsampled without replacement to the holdout size.
    Exact ties score 0.5.
    """
    synth, train, holdout = (np.asarray(a, dtype=np.float64) for a in (synth, train, holdout))
    if min(len(synth), len(train), len(holdout)) == 0:
        raise ValueError("DCR needs non-empty synthetic, train and holdout sets")
    if not synth.shape[1] == train.shape[1] == holdout.shape[1]:
        raise ValueError(f"dimension mismatch: {synth.shape[1]}, {train.shape[1]}, {holdout.shape[1]}")
    if len(train) > len(holdout):
        train = train[np.sort(prng.choice(len(train), len(holdout), replace=False))]
    d_tr = _nn_dist(synth, train)
    d_ho = _nn_dist(synth, holdout)
    return float(np.mean(np.where(d_tr < d_ho, 1.0, np.where(d_tr == d_ho, 0.5, 0.0))))


def pearson(X) -> tuple[np.ndarray, np.ndarray]:
    """Correlation matrix with constant columns pinned to 0 off-diagonal, 1 on it."""
    X = np.asarray(X, dtype=np.float64)
    c = X - X.mean(axis=0)
    sd = np.sqrt((c * c).mean(axis=0))
    constant = ~(sd > 0)
    safe = np.where(constant, 1.0, sd)
    corr = (c.T @ c) / len(X) / np.outer(safe, safe)
    corr[constant, :] = 0.0
    corr[:, constant] = 0.0
    np.fill_diagonal(corr, 1.0)
    return np.clip(corr, -1.0, 1.0), constant


@dataclass(frozen=True)
class CorrelationResult:
    diff: np.ndarray  # |C_real - C_synth|
    similarity: float  # 1 - ||C_real - C_synth||_F / (2 d)
    constant_columns: tuple[int, ...] = ()


def correlation_similarity(real, synth) -> CorrelationResult:
    real, synth = np.asarray(real, dtype=np.float64), np.asarray(synth, dtype=np.float64)
    if len(real) < 2 or len(synth) < 2:
        raise ValueError("correlation needs at least 2 rows on each side")
    if real.shape[1] != synth.shape[1]:
        raise ValueError(f"column count differs: {real.shape[1]} vs {synth.shape[1]}")
    cr, const_r = pearson(real)
    cs, const_s = pearson(synth)
    delta = cr - cs
    d = real.shape[1]
    sim = 1.0 - math.sqrt(float((delta * delta).sum())) / (2.0 * d)
    flagged = tuple(int(j) for j in np.flatnonzero(const_r | const_s))
    return CorrelationResult(np.abs(delta), sim, flagged)


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    real: np.ndarray  # densities
    synth: np.ndarray

    @property
    def width(self) -> np.ndarray:
        return np.diff(self.edges)


def marginal_histograms(real, synth, bins: int = 50) -> Histogram:
    """Densities of two samples on shared bin edges spanning both."""
    real, synth = np.asarray(real, dtype=np.float64).ravel(), np.asarray(synth, dtype=np.float64).ravel()
    if bins < 2:
        raise ValueError("need at least 2 bins")
    if not len(real) or not len(synth):
        raise ValueError("cannot histogram an empty column")
    lo = min(real.min(), synth.min())
    hi = max(real.max(), synth.max())
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    dr, _ = np.histogram(real, edges, density=True)
    ds, _ = np.histogram(synth, edges, density=True)
    return Histogram(edges, dr, ds)


def summarize(per_seed: list[dict[str, float]]) -> dict[str, dict[str, float]]:
    """Mean and population standard deviation of each metric across seeds."""
    out = {}
    keys = [k for k in per_seed[0] if isinstance(per_seed[0][k], (int, float))] if per_seed else []
    for k in keys:
        vals = np.array([r[k] for r in per_seed if r.get(k) is not None], dtype=np.float64)
        if len(vals):
            out[k] = {"mean": float(vals.mean()), "std": float(vals.std())}
    return out
