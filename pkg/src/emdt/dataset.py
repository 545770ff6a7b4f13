"""Credit-card transaction table: loading, preprocessing and stratified splits."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
import pandas as pd

LABEL = "Class"
DROP = "Time"
AMOUNT = "Amount"
RAW_COLUMNS = [DROP] + [f"V{i}" for i in range(1, 29)] + [AMOUNT]


class DataError(ValueError):
    """Raised for unreadable or malformed input tables."""


@dataclass(frozen=True)
class TransactionTable:
    columns: list[str]
    features: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int64, 1 = fraud
    standardized: frozenset = frozenset()

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[1] != len(self.columns):
            raise DataError(f"feature matrix {self.features.shape} does not match {len(self.columns)} columns")
        if len(self.labels) != len(self.features):
            raise DataError("label count differs from row count")
        if len(self.labels) and not np.isin(self.labels, (0, 1)).all():
            raise DataError("labels must be 0 or 1")

    def __len__(self):
        return len(self.labels)

    @property
    def n_fraud(self) -> int:
        return int(self.labels.sum())

    def take(self, idx) -> "TransactionTable":
        idx = np.asarray(idx, dtype=np.int64)
        return TransactionTable(list(self.columns), self.features[idx], self.labels[idx], self.standardized)

    def minority(self) -> np.ndarray:
        return self.features[self.labels == 1]

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.features, columns=self.columns)
        df[LABEL] = self.labels
        return df


def load_csv(path) -> TransactionTable:
    """Read a comma-delimited table whose last column is ``Class``."""
    path = Path(path)
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if len(df.columns) == 0 or df.columns[-1] != LABEL:
        raise DataError(f"{path}: final column must be {LABEL!r}, got {list(df.columns[-1:])}")
    values = np.empty(df.shape, dtype=np.float64)
    for j, col in enumerate(df.columns):
        raw = df[col].str.strip()
        num = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=np.float64)
        bad = np.flatnonzero(~np.isfinite(num))
        if len(bad):
            i = int(bad[0])
            what = "blank cell" if raw.iloc[i] == "" else f"non-numeric value {raw.iloc[i]!r}"
            # +2: one header line, 1-based line numbers
            raise DataError(f"{path}: {what} at line {i + 2}, column {col!r}")
        # to_numeric is only a validity screen; its fast parser is not round-trip exact
        values[:, j] = raw.to_numpy().astype(np.float64)
    labels = values[:, -1]
    if not np.isin(labels, (0.0, 1.0)).all():
        raise DataError(f"{path}: {LABEL} values must be 0 or 1")
    return TransactionTable(list(df.columns[:-1]), values[:, :-1], labels.astype(np.int64))


def write_csv(table: TransactionTable, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_frame().to_csv(path, index=False, float_format="%.17g")


@dataclass(frozen=True)
class StandardizationStats:
    mean: dict[str, float]
    std: dict[str, float]

    def save(self, path) -> None:
        lines = [f"{c},{self.mean[c]!r},{self.std[c]!r}" for c in self.mean]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "StandardizationStats":
        mean, std = {}, {}
        for line in Path(path).read_text().splitlines():
            if not line.strip():
                continue
            col, m, s = line.split(",")
            mean[col], std[col] = float(m), float(s)
        return cls(mean, std)

    def inverse(self, features: np.ndarray, columns: list[str]) -> np.ndarray:
        out = np.array(features, dtype=np.float64, copy=True)
        for c in self.mean:
            j = columns.index(c)
            out[:, j] = out[:, j] * self.std[c] + self.mean[c]
        return out


def preprocess(table: TransactionTable, stats: StandardizationStats | None = None):
    """Drop ``Time`` and z-score ``Amount`` (population std).

    Stats are computed from ``table`` unless given.  V1..V28 pass through.
    A table that was already standardized is returned as is, so applying the
    step twice with the same stats changes nothing.
    """
    if AMOUNT not in table.columns:
        raise DataError(f"table has no {AMOUNT!r} column")
    if AMOUNT in table.standardized and DROP not in table.columns:
        if stats is None:
            raise DataError("table is already standardized; pass the stats that produced it")
        return table, stats
    keep = [j for j, c in enumerate(table.columns) if c != DROP]
    columns = [table.columns[j] for j in keep]
    feats = table.features[:, keep].copy()
    j = columns.index(AMOUNT)
    if stats is None:
        col = feats[:, j]
        mu, sd = float(col.mean()), float(col.std())
        if not sd > 0:
            raise DataError(f"{AMOUNT} has zero standard deviation; cannot standardize")
        stats = StandardizationStats({AMOUNT: mu}, {AMOUNT: sd})
    elif not stats.std[AMOUNT] > 0:
        raise DataError(f"{AMOUNT} has zero standard deviation; cannot standardize")
    feats[:, j] = (feats[:, j] - stats.mean[AMOUNT]) / stats.std[AMOUNT]
    return TransactionTable(columns, feats, table.labels.copy(), frozenset({AMOUNT})), stats


def largest_remainder(total: int, weights) -> list[int]:
    """Integer apportionment of ``total`` proportional to ``weights``.

    Floors first, then hands the leftover units to the largest fractional
    parts; ties go to the lower index.
    """
    w = [Fraction(x).limit_denominator(10**9) for x in weights]
    s = sum(w)
    if total == 0 or s == 0:
        return [0] * len(w)
    raw = [total * x / s for x in w]
    base = [int(r) for r in raw]  # floor: all raw values are non-negative
    left = total - sum(base)
    order = sorted(range(len(w)), key=lambda k: (-(raw[k] - base[k]), k))
    for k in order[:left]:
        base[k] += 1
    return base


@dataclass(frozen=True)
class DataSplits:
    train: TransactionTable
    validation: TransactionTable
    test: TransactionTable
    indices: tuple[np.ndarray, np.ndarray, np.ndarray]
    seed: int
    fraud_counts: tuple[int, int, int] = field(default=(0, 0, 0))


SPLIT_NAMES = ("train", "validation", "test")


def stratified_split(table: TransactionTable, fractions=(0.6, 0.2, 0.2), seed: int = 0) -> DataSplits:
    if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must be three non-negative numbers summing to 1, got {fractions}")
    rng = np.random.Generator(np.random.PCG64(seed))
    active = sum(1 for f in fractions if f > 0)
    parts: list[list[np.ndarray]] = [[], [], []]
    for cls in (0, 1):
        members = np.flatnonzero(table.labels == cls)
        if len(members) < active:
            raise ValueError(f"class {cls} has {len(members)} rows, fewer than the {active} requested splits")
        members = members[rng.permutation(len(members))]
        counts = largest_remainder(len(members), fractions)
        bounds = np.cumsum([0] + counts)
        for k in range(3):
            parts[k].append(members[bounds[k]:bounds[k + 1]])
    idx = tuple(np.sort(np.concatenate(p)) for p in parts)
    tables = [table.take(i) for i in idx]
    return DataSplits(*tables, indices=idx, seed=seed, fraud_counts=tuple(t.n_fraud for t in tables))
