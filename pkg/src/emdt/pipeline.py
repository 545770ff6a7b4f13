"""Experiment stages: preprocess, cluster, train, generate, evaluate, sweep.

Every stage reads and writes files under one run directory.  A stage's
outputs carry a stamp holding the digest of everything they were computed
from; when the stamp matches, the stage is skipped.
"""
from __future__ import annotations

import copy
import hashlib
import json
import logging
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd

from . import classifier as gb
from . import config as cf
from .baselines import SmoteConfig, smote
from .clustering import ClusterPlan, allocate_quotas, cluster_minority
from .dataset import (
    AMOUNT,
    LABEL,
    RAW_COLUMNS,
    SPLIT_NAMES,
    DataError,
    StandardizationStats,
    TransactionTable,
    load_csv,
    preprocess,
    stratified_split,
    write_csv,
)
from .denoiser import DenoiserConfig, load_checkpoint, save_checkpoint
from .diffusion import TrainConfig, build_schedule, sample, train
from .embedding import EmbeddingConfig
from .evaluation import (
    classification_metrics,
    correlation_similarity,
    dcr_score,
    marginal_histograms,
    pearson,
    summarize,
)
from .numeric import Prng

log = logging.getLogger(__name__)

PUBLIC_ROWS = 284_807
GENERATIVE_ARMS = ("emdt", "emdt_no_cluster")
METRICS = ("f1", "recall", "precision", "bal_acc", "dcr", "corr_similarity", "corr_similarity_shuffled")
CONVENTIONS = {
    "dcr": "euclidean on standardized features; train frauds subsampled to the holdout "
           "(validation + test frauds) size; ties count 0.5",
    "corr_similarity": "1 - ||C_real - C_synth||_F / (2 d), fraud class only, real = training frauds",
    "constant_columns": "correlation 0 off-diagonal and 1 on the diagonal",
    "std": "population (1/n) over seeds",
}


def _seed(seed: int, cluster: int, role: int) -> int:
    """Independent integer seeds per (evaluation seed, cluster, role)."""
    return seed * 10_007 + cluster * 101 + role


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()[:16]


def array_digest(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a)
        h.update(str((a.dtype, a.shape)).encode())
        h.update(a.tobytes())
    return h.hexdigest()[:16]


class Run:
    """Paths, stamps and timings for one run directory."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        self.root = Path(cfg["output"]["dir"])
        self.timings: dict[str, float] = {}
        self.warnings: list[str] = []
        self.memo: dict = {}  # per-process cache of file digests and loaded splits

    def path(self, *parts) -> Path:
        p = self.root.joinpath(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def fresh(self, stage_dir: Path, key: str) -> bool:
        stamp = stage_dir / ".stamp"
        return stamp.exists() and json.loads(stamp.read_text()).get("key") == key

    def seal(self, stage_dir: Path, key: str, **info) -> None:
        stage_dir.mkdir(parents=True, exist_ok=True)
        (stage_dir / ".stamp").write_text(json.dumps({"key": key, **info}, sort_keys=True) + "\n")

    def timed(self, name: str, start: float) -> None:
        self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - start

    def seeds(self) -> list[int]:
        ev = self.cfg["evaluation"]
        return list(range(int(ev["base_seed"]), int(ev["base_seed"]) + int(ev["seeds"])))


# preprocess


def preprocess_key(run: Run) -> str:
    d = run.cfg["data"]
    path = Path(d["path"])
    if not path.exists():
        raise cf.ConfigError(f"dataset not found: {path}")
    stat = path.stat()
    memo_key = ("file", str(path.resolve()), stat.st_size, stat.st_mtime_ns)
    if memo_key not in run.memo:
        run.memo[memo_key] = file_digest(path)
    return cf.digest({"file": run.memo[memo_key], "fractions": d["fractions"], "seed": d["split_seed"]})


def run_preprocess(run: Run) -> str:
    """Load the raw CSV, split it, standardize with training-split stats, write everything."""
    key = preprocess_key(run)
    out = run.root / "preprocess"
    if run.fresh(out, key):
        log.debug("preprocess: up to date")
        return key
    t0 = time.perf_counter()
    d = run.cfg["data"]
    raw = load_csv(d["path"])
    if raw.columns != RAW_COLUMNS:
        raise DataError(f"{d['path']}: expected columns {RAW_COLUMNS + [LABEL]}, got {raw.columns + [LABEL]}")
    if d["expected_rows"] is not None and len(raw) != int(d["expected_rows"]):
        raise DataError(f"{d['path']}: expected {d['expected_rows']} rows, found {len(raw)}")
    if len(raw) != PUBLIC_ROWS:
        run.warnings.append(f"dataset has {len(raw)} rows, not the {PUBLIC_ROWS} of the public file")
        log.warning(run.warnings[-1])
    splits = stratified_split(raw, tuple(d["fractions"]), int(d["split_seed"]))
    _, stats = preprocess(splits.train)
    table, _ = preprocess(raw, stats)
    write_csv(table, run.path("preprocess", "preprocessed.csv"))
    stats.save(run.path("preprocess", "stats.txt"))
    for name, idx in zip(SPLIT_NAMES, splits.indices):
        run.path("preprocess", f"{name}.idx").write_text("".join(f"{i}\n" for i in idx))
    run.seal(out, key, rows=len(raw), frauds=list(splits.fraud_counts))
    run.timed("preprocess", t0)
    log.info("preprocess: %d rows, frauds per split %s", len(raw), splits.fraud_counts)
    return key


def load_splits(run: Run):
    """(table, stats, {split: table}) from the preprocess outputs."""
    base = run.root / "preprocess"
    if not (base / ".stamp").exists():
        raise DataError(f"no preprocessed data under {base}; run the preprocess stage first")
    memo_key = ("splits", (base / ".stamp").read_text())
    if memo_key not in run.memo:
        run.memo[memo_key] = _read_splits(base)
    return run.memo[memo_key]


def _read_splits(base: Path):
    table = load_csv(base / "preprocessed.csv")
    table = TransactionTable(table.columns, table.features, table.labels, frozenset({AMOUNT}))
    stats = StandardizationStats.load(base / "stats.txt")
    parts = {}
    for name in SPLIT_NAMES:
        text = (base / f"{name}.idx").read_text().split()
        parts[name] = table.take(np.array(text, dtype=np.int64))
    return table, stats, parts


def _stage_key(run: Run, stage: str) -> str:
    return json.loads((run.root / stage / ".stamp").read_text())["key"]


# cluster


def run_cluster(run: Run) -> str:
    pre = run_preprocess(run)
    c = run.cfg["clustering"]
    key = cf.digest({"pre": pre, "clustering": c})
    out = run.root / "cluster"
    if run.fresh(out, key):
        log.debug("cluster: up to date")
        return key
    t0 = time.perf_counter()
    _, _, parts = load_splits(run)
    frauds = parts["train"].minority()
    if len(frauds) <= int(c["n_neighbors"]):
        raise DataError(f"{len(frauds)} training frauds is too few for {c['n_neighbors']} neighbors")
    plan = cluster_minority(frauds, int(c["n_clusters"]), int(c["n_neighbors"]), int(c["epochs"]), int(c["seed"]))
    plan.save(run.path("cluster", "assignments.csv"))
    if run.cfg["output"]["figures"]:
        from . import plotting
        plotting.cluster_scatter(plan.coords, plan.labels, run.path("cluster", "layout.png"))
    run.seal(out, key, sizes=plan.sizes)
    run.timed("cluster", t0)
    log.info("cluster: sizes %s", plan.sizes)
    return key


# train / generate


def denoiser_config(cfg: dict, init_seed: int = 0) -> DenoiserConfig:
    e, n = cfg["embedding"], cfg["denoiser"]
    emb = EmbeddingConfig(int(e["dim"]), float(e["feature_scale"]), float(e["time_scale"]))
    ff = None if n["ff_dim"] is None else int(n["ff_dim"])
    return DenoiserConfig(emb, int(n["heads"]), ff, int(cfg["diffusion"]["steps"]), init_seed, n["norm"])


def train_config(cfg: dict, seed: int) -> TrainConfig:
    f = cfg["diffusion"]
    return TrainConfig(int(f["epochs"]), int(f["batch_size"]), float(f["lr"]), int(f["steps"]),
                       float(f["beta_start"]), float(f["beta_end"]), seed, f["lr_decay"], float(f["ema_decay"]))


def _model_key(run: Run, arm: str, seed: int) -> str:
    upstream = _stage_key(run, "cluster") if arm == "emdt" else _stage_key(run, "preprocess")
    cfg = run.cfg
    return cf.digest({"up": upstream, "arm": arm, "seed": seed, "embedding": cfg["embedding"],
                      "denoiser": cfg["denoiser"], "diffusion": cfg["diffusion"]})


def model_dir(run: Run, arm: str, seed: int) -> Path:
    return run.root / "models" / f"{arm}-s{seed}-{_model_key(run, arm, seed)}"


def _groups(run: Run, arm: str, train_table: TransactionTable) -> list[np.ndarray]:
    frauds = train_table.minority()
    if arm == "emdt_no_cluster":
        return [frauds]
    plan = ClusterPlan.load(run.root / "cluster" / "assignments.csv")
    return [frauds[m] for m in plan.members]


def run_train(run: Run, arm: str, seed: int) -> Path:
    """One denoiser per cluster (``emdt``) or one for all training frauds (``emdt_no_cluster``)."""
    run_preprocess(run)
    if arm == "emdt":
        run_cluster(run)
    out = model_dir(run, arm, seed)
    key = out.name
    if run.fresh(out, key):
        log.debug("train %s seed %d: up to date", arm, seed)
        return out
    t0 = time.perf_counter()
    _, _, parts = load_splits(run)
    rows = []
    traces = {}
    for k, data in enumerate(_groups(run, arm, parts["train"])):
        if len(data) < 2:
            raise DataError(f"cluster {k + 1} has {len(data)} training frauds; need at least 2")
        dc = denoiser_config(run.cfg, _seed(seed, k, 1))
        res = train(data, train_config(run.cfg, _seed(seed, k, 2)), dc)
        save_checkpoint(out / f"cluster{k + 1}.npz", res.params, dc, arm=arm, seed=seed, cluster=k + 1,
                        rows=len(data))
        rows += [{"cluster": k + 1, "epoch": e + 1, "loss": v} for e, v in enumerate(res.loss_trace)]
        traces[f"cluster {k + 1}"] = res.loss_trace
    pd.DataFrame(rows, columns=["cluster", "epoch", "loss"]).to_csv(out / "loss.csv", index=False,
                                                                    float_format="%.17g")
    if run.cfg["output"]["figures"] and rows:
        from . import plotting
        plotting.loss_curves(traces, out / "loss.png")
    run.seal(out, key, arm=arm, seed=seed, models=len(traces))
    run.timed(f"train:{arm}", t0)
    log.info("train %s seed %d: %d model(s)", arm, seed, len(traces))
    return out


def synthetic_count(run: Run, n_train_frauds: int) -> int:
    return int(round(float(run.cfg["augment"]["multiplier"]) * n_train_frauds))


def _synth_frame(features: np.ndarray, columns: list[str], stats: StandardizationStats) -> pd.DataFrame:
    df = pd.DataFrame(stats.inverse(features, columns), columns=columns)
    df[LABEL] = 1
    return df


def _train_fraud_count(run: Run) -> int:
    return int(json.loads((run.root / "preprocess" / ".stamp").read_text())["frauds"][0])


def synthetic_dir(run: Run, arm: str, seed: int) -> Path:
    """Content-addressed output directory of one arm's synthetic sample (raises if upstream is missing)."""
    m = synthetic_count(run, _train_fraud_count(run))
    if arm == "smote":
        key = cf.digest({"pre": _stage_key(run, "preprocess"), "m": m, "k": run.cfg["augment"]["smote_k"],
                         "seed": seed})
    else:
        key = cf.digest({"model": model_dir(run, arm, seed).name, "m": m,
                         "literal": run.cfg["diffusion"]["literal_posterior"]})
    return run.root / "synthetic" / f"{arm}-s{seed}-{key}"


def find_synthetic(run: Run, arm: str, seed: int) -> Path:
    try:
        out = synthetic_dir(run, arm, seed)
    except FileNotFoundError as exc:
        raise FileNotFoundError(f"upstream stage missing for {arm}: {exc.filename}") from exc
    if not (out / ".stamp").exists():
        raise FileNotFoundError(f"no synthetic data at {out}")
    return out / "synthetic.csv"


def run_generate(run: Run, arm: str, seed: int) -> Path:
    """Sample the synthetic frauds for one arm and seed; written in the original units."""
    mdir = run_train(run, arm, seed)
    out = synthetic_dir(run, arm, seed)
    if run.fresh(out, out.name):
        return out / "synthetic.csv"
    t0 = time.perf_counter()
    _, stats, parts = load_splits(run)
    train_table = parts["train"]
    m = synthetic_count(run, train_table.n_fraud)
    groups = _groups(run, arm, train_table)
    quotas = allocate_quotas(m, [len(g) for g in groups])
    f = run.cfg["diffusion"]
    schedule = build_schedule(int(f["steps"]), float(f["beta_start"]), float(f["beta_end"]))
    expected = denoiser_config(run.cfg).to_dict() | {"seed": 0}
    chunks = []
    for k, q in enumerate(quotas):
        ckpt = mdir / f"cluster{k + 1}.npz"
        params, dc, _ = load_checkpoint(ckpt)
        if dc.to_dict() | {"seed": 0} != expected:
            raise cf.ConfigError(f"checkpoint {ckpt} was built with {dc.to_dict()}, config asks for {expected}")
        chunks.append(sample(q, train_table.features.shape[1], params, dc, schedule, Prng(_seed(seed, k, 3)),
                             literal=bool(f["literal_posterior"])))
    synth = np.vstack(chunks) if chunks else np.empty((0, train_table.features.shape[1]))
    out.mkdir(parents=True, exist_ok=True)
    _synth_frame(synth, train_table.columns, stats).to_csv(out / "synthetic.csv", index=False, float_format="%.17g")
    run.seal(out, out.name, arm=arm, seed=seed, quotas=quotas)
    run.timed(f"generate:{arm}", t0)
    log.info("generate %s seed %d: %d rows, quotas %s", arm, seed, m, quotas)
    return out / "synthetic.csv"


def run_smote(run: Run, seed: int) -> Path:
    run_preprocess(run)
    out = synthetic_dir(run, "smote", seed)
    if not run.fresh(out, out.name):
        t0 = time.perf_counter()
        _, stats, parts = load_splits(run)
        train_table = parts["train"]
        m = synthetic_count(run, train_table.n_fraud)
        res = smote(train_table.minority(), SmoteConfig(int(run.cfg["augment"]["smote_k"]), m, _seed(seed, 0, 4)))
        out.mkdir(parents=True, exist_ok=True)
        _synth_frame(res.samples, train_table.columns, stats).to_csv(out / "synthetic.csv", index=False,
                                                                     float_format="%.17g")
        run.seal(out, out.name, arm="smote", seed=seed)
        run.timed("generate:smote", t0)
    return out / "synthetic.csv"


def load_synthetic(path, stats: StandardizationStats, columns: list[str]) -> np.ndarray:
    """Synthetic CSV back to standardized feature space."""
    df = pd.read_csv(path, float_precision="round_trip")
    X = df[columns].to_numpy(dtype=np.float64)
    for c in stats.mean:
        j = columns.index(c)
        X[:, j] = (X[:, j] - stats.mean[c]) / stats.std[c]
    return X


# classifier selection


class ClassifierBench:
    """Grid-selected boosted trees; fits are cached by training-data digest."""

    def __init__(self, grid: dict):
        self.grid = grid
        self.cache: dict[str, gb.GbdtModel] = {}

    def _fit(self, X, y, depth, lr) -> gb.GbdtModel:
        g = self.grid
        conf = gb.GbdtConfig(max(g["n_trees"]), int(depth), float(lr), float(g["reg_lambda"]), float(g["gamma"]),
                             float(g["min_child_weight"]), float(g["threshold"]))
        key = cf.digest({"data": array_digest(X, y), "conf": repr(conf)})
        if key not in self.cache:
            self.cache[key] = gb.fit(X, y, conf)
        return self.cache[key]

    def select_and_score(self, X, y, val: TransactionTable, test: TransactionTable) -> dict:
        """Pick (trees, depth, lr) by validation F1 (first best in grid order), then score the test split."""
        g = self.grid
        best = None
        stages = sorted(int(t) for t in g["n_trees"])
        thr = float(g["threshold"])
        for depth in g["max_depth"]:
            for lr in g["learning_rate"]:
                model = self._fit(X, y, depth, lr)
                margins = gb.staged_margins(model, val.features, stages)
                for n in stages:
                    pred = (1.0 / (1.0 + np.exp(-margins[n])) >= thr).astype(int)
                    f1 = classification_metrics(val.labels, pred)["f1"]
                    if best is None or f1 > best[0]:
                        best = (f1, n, depth, lr, model)
        f1_val, n, depth, lr, model = best
        pred = gb.predict(model, test.features, n)
        out = classification_metrics(test.labels, pred)
        out.update({"val_f1": f1_val, "n_trees": n, "max_depth": depth, "learning_rate": lr})
        return out


def _shuffled(X: np.ndarray, prng: Prng) -> np.ndarray:
    out = X.copy()
    for j in range(X.shape[1]):
        out[:, j] = X[prng.permutation(len(X)), j]
    return out


def synthetic_path(run: Run, arm: str, seed: int, build: bool) -> Path:
    if not build:
        return find_synthetic(run, arm, seed)
    if arm == "smote":
        return run_smote(run, seed)
    return run_generate(run, arm, seed)


def evaluate_arm_seed(run, bench, arm, seed, parts, stats, build=False) -> tuple[dict, np.ndarray | None]:
    tr, val, test = parts["train"], parts["validation"], parts["test"]
    synth = None
    X, y = tr.features, tr.labels
    if arm != "original":
        synth = load_synthetic(synthetic_path(run, arm, seed, build), stats, tr.columns)
        X = np.vstack([X, synth])
        y = np.concatenate([y, np.ones(len(synth), dtype=np.int64)])
    t0 = time.perf_counter()
    row = {"arm": arm, "seed": seed, "n_synthetic": 0 if synth is None else len(synth)}
    row.update(bench.select_and_score(X, y, val, test))
    real = tr.minority()
    holdout = np.vstack([val.minority(), test.minority()])
    prng = Prng(_seed(seed, 0, 5))
    row["corr_similarity_shuffled"] = correlation_similarity(real, _shuffled(real, prng)).similarity
    if synth is not None and len(synth) >= 2:
        row["dcr"] = dcr_score(synth, real, holdout, prng)
        row["corr_similarity"] = correlation_similarity(real, synth).similarity
    else:
        row["dcr"] = row["corr_similarity"] = None
    run.timed(f"evaluate:{arm}", t0)
    return row, synth


def _export_fidelity(run: Run, arm: str, real: np.ndarray, synth: np.ndarray, columns: list[str]) -> None:
    res = correlation_similarity(real, synth)
    if res.constant_columns:
        run.warnings.append(f"{arm}: constant columns {[columns[j] for j in res.constant_columns]} "
                            "use the 0/1 correlation convention")
    pd.DataFrame(res.diff, index=columns, columns=columns).to_csv(
        run.path("evaluate", f"correlation_diff_{arm}.csv"), float_format="%.17g")
    hists = {c: marginal_histograms(real[:, j], synth[:, j], int(run.cfg["evaluation"]["bins"]))
             for j, c in enumerate(columns)}
    rows = []
    for c, h in hists.items():
        for b in range(len(h.real)):
            rows.append((c, h.edges[b], h.edges[b + 1], h.real[b], h.synth[b]))
    pd.DataFrame(rows, columns=["column", "left", "right", "real_density", "synthetic_density"]).to_csv(
        run.path("evaluate", f"histograms_{arm}.csv"), index=False, float_format="%.17g")
    if run.cfg["output"]["figures"]:
        from . import plotting
        plotting.correlation_panels(pearson(real)[0], pearson(synth)[0], res.diff, columns,
                                    run.path("evaluate", f"correlation_{arm}.png"),
                                    f"{arm}: similarity {res.similarity:.4f}")
        plotting.marginal_densities(hists, run.path("evaluate", f"marginals_{arm}.png"), title=arm)


def build_report(run: Run, per_seed: list[dict], arms: list[str]) -> dict:
    report = {
        "config_digest": cf.digest(run.cfg),
        "config": run.cfg,
        "conventions": CONVENTIONS,
        "warnings": list(dict.fromkeys(run.warnings)),
        "arms": {},
    }
    for arm in arms:
        rows = [r for r in per_seed if r["arm"] == arm]
        metrics = [{k: r[k] for k in METRICS if r.get(k) is not None} for r in rows]
        report["arms"][arm] = {"summary": summarize(metrics) if metrics else {}, "per_seed": rows}
    if not run.cfg["output"]["canonical"]:
        report["timings_seconds"] = {k: round(v, 3) for k, v in sorted(run.timings.items())}
        report["created"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return report


def write_report(run: Run, report: dict, per_seed: list[dict]) -> Path:
    path = run.path("evaluate", "report.json")
    path.write_text(json.dumps(report, indent=2, sort_keys=True, default=float) + "\n")
    cols = ["arm", "seed", "n_synthetic", "n_trees", "max_depth", "learning_rate", "val_f1", *METRICS]
    pd.DataFrame(per_seed).reindex(columns=cols).to_csv(run.path("evaluate", "per_seed.csv"), index=False,
                                                        float_format="%.17g")
    summary = [(arm, m, s["mean"], s["std"]) for arm, a in report["arms"].items() for m, s in a["summary"].items()]
    pd.DataFrame(summary, columns=["arm", "metric", "mean", "std"]).to_csv(
        run.path("evaluate", "summary.csv"), index=False, float_format="%.17g")
    return path


def run_evaluate(run: Run, arms: list[str] | None = None, build: bool = False) -> dict:
    """Every arm over every evaluation seed; writes report.json, CSV tables and figures.

    Synthetic inputs are only read unless ``build`` is set; a missing one skips
    that arm and seed with a warning recorded in the report.
    """
    arms = list(arms or run.cfg["evaluation"]["arms"])
    run_preprocess(run)
    _, stats, parts = load_splits(run)
    bench = ClassifierBench(run.cfg["classifier"])
    per_seed = []
    for arm in arms:
        for i, seed in enumerate(run.seeds()):
            try:
                row, synth = evaluate_arm_seed(run, bench, arm, seed, parts, stats, build)
            except FileNotFoundError as exc:
                run.warnings.append(f"{arm} seed {seed} skipped: {exc}")
                log.warning(run.warnings[-1])
                continue
            per_seed.append(row)
            log.info("evaluate %s seed %d: f1 %.4f", arm, seed, row["f1"])
            if i == 0 and synth is not None and len(synth) >= 2:
                _export_fidelity(run, arm, parts["train"].minority(), synth, parts["train"].columns)
    report = build_report(run, per_seed, arms)
    write_report(run, report, per_seed)
    return report


# sweep


def run_sweep(run: Run, factors: list[str] | None = None) -> pd.DataFrame:
    """One factor at a time over the configured grids; EmDT arm, test F1 per seed."""
    base = run.cfg
    factors = factors or list(cf.SWEEP_FACTORS)
    seeds = list(range(int(base["evaluation"]["base_seed"]), int(base["evaluation"]["base_seed"])
                       + int(base["sweep"]["seeds"])))
    run_preprocess(run)
    _, stats, parts = load_splits(run)
    bench = ClassifierBench(base["classifier"])
    rows = []
    for factor in factors:
        for value in base["sweep"][factor]:
            cfg = copy.deepcopy(base)
            cf.set_value(cfg, cf.SWEEP_FACTORS[factor], value)
            cf.validate(cfg)
            sub = Run(cfg)
            sub.timings, sub.memo = run.timings, run.memo
            for seed in seeds:
                row, _ = evaluate_arm_seed(sub, bench, "emdt", seed, parts, stats, build=True)
                rows.append({"factor": factor, "value": value, "seed": seed, "f1": row["f1"],
                             "val_f1": row["val_f1"]})
                log.info("sweep %s=%s seed %d: f1 %.4f", factor, value, seed, row["f1"])
    frame = pd.DataFrame(rows, columns=["factor", "value", "seed", "f1", "val_f1"])
    frame.to_csv(run.path("sweep", "sweep.csv"), index=False, float_format="%.17g")
    if base["output"]["figures"] and len(frame):
        from . import plotting
        plotting.sweep_boxplots(frame, run.path("sweep", "sweep_f1.png"))
    return frame


def run_pipeline(run: Run) -> dict:
    run_preprocess(run)
    arms = run.cfg["evaluation"]["arms"]
    if "emdt" in arms:
        run_cluster(run)
    for arm in arms:
        for seed in run.seeds():
            if arm in GENERATIVE_ARMS:
                run_generate(run, arm, seed)
            elif arm == "smote":
                run_smote(run, seed)
    return run_evaluate(run, build=True)
