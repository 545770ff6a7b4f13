import json
import shutil

import numpy as np
import pandas as pd
import pytest
import yaml

from emdt import config as cf
from emdt import pipeline as pl
from emdt.cli import main
from emdt.denoiser import DenoiserConfig, init_params, save_checkpoint
from emdt.embedding import EmbeddingConfig
from emdt.numeric import Prng
from oracles import fake_transactions

TINY = {
    "embedding": {"dim": 8, "feature_scale": 10.0, "time_scale": 0.5},
    "diffusion": {"steps": 20, "epochs": 3, "batch_size": 32},
    "clustering": {"n_neighbors": 5, "epochs": 30},
    "classifier": {"n_trees": [5, 10], "max_depth": [2], "learning_rate": [0.3]},
    "evaluation": {"seeds": 2},
    "output": {"figures": False},
}


@pytest.fixture(scope="module")
def raw_csv(tmp_path_factory):
    p = tmp_path_factory.mktemp("data") / "fake.csv"
    fake_transactions(800, 60, seed=3).to_csv(p, index=False)
    return p


def write_config(tmp_path, raw_csv, name="run", **sections):
    doc = json.loads(json.dumps(TINY))
    doc["data"] = {"path": str(raw_csv)}
    doc["output"]["dir"] = str(tmp_path / name)
    for sec, vals in sections.items():
        doc.setdefault(sec, {}).update(vals)
    path = tmp_path / f"{name}.yaml"
    path.write_text(yaml.safe_dump(doc))
    return path


def test_preprocess_writes_splits_and_is_repeatable(tmp_path, raw_csv, capsys):
    cfgp = write_config(tmp_path, raw_csv)
    assert main(["preprocess", "--config", str(cfgp)]) == 0
    base = tmp_path / "run" / "preprocess"
    counts = [len((base / f"{n}.idx").read_text().split()) for n in ("train", "validation", "test")]
    assert sum(counts) == 800 and counts == [480, 160, 160]
    before = {n: (base / f"{n}.idx").read_bytes() for n in ("train", "validation", "test")}
    mtime = (base / "preprocessed.csv").stat().st_mtime_ns
    assert main(["preprocess", "--config", str(cfgp)]) == 0
    assert (base / "preprocessed.csv").stat().st_mtime_ns == mtime  # stamp hit: no rewrite
    shutil.rmtree(base)
    assert main(["preprocess", "--config", str(cfgp)]) == 0
    assert all((base / f"{n}.idx").read_bytes() == b for n, b in before.items())
    pre = pd.read_csv(base / "preprocessed.csv")
    assert list(pre.columns[:-1]) == [f"V{i}" for i in range(1, 29)] + ["Amount"]
    assert "warning: dataset has 800 rows" in capsys.readouterr().err


def test_missing_dataset_exits_2_naming_path(tmp_path, capsys):
    cfgp = write_config(tmp_path, tmp_path / "nowhere.csv")
    assert main(["preprocess", "--config", str(cfgp)]) == 2
    assert "nowhere.csv" in capsys.readouterr().err


def test_malformed_data_exits_3(tmp_path, raw_csv, capsys):
    df = pd.read_csv(raw_csv)
    df = df.astype(object)
    df.iloc[4, 7] = ""
    bad = tmp_path / "bad.csv"
    df.to_csv(bad, index=False)
    assert main(["preprocess", "--config", str(write_config(tmp_path, bad))]) == 3
    assert "blank cell at line 6, column 'V7'" in capsys.readouterr().err
    wrong = tmp_path / "wrong.csv"
    pd.read_csv(raw_csv).drop(columns=["Time"]).to_csv(wrong, index=False)
    assert main(["preprocess", "--config", str(write_config(tmp_path, wrong, "w"))]) == 3


def test_config_errors_exit_2(tmp_path, raw_csv, capsys):
    cfgp = write_config(tmp_path, raw_csv)
    assert main(["preprocess", "--config", str(cfgp), "--embedding.dim", "7"]) == 2
    doc = yaml.safe_load(cfgp.read_text())
    doc["diffusion"]["bogus"] = 1
    cfgp.write_text(yaml.safe_dump(doc))
    assert main(["preprocess", "--config", str(cfgp)]) == 2
    assert "bogus" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_dotted_overrides_reach_the_config(tmp_path, raw_csv):
    cfg = cf.load(write_config(tmp_path, raw_csv), {"diffusion.lr": 0.0005, "classifier.max_depth": [3, 4]})
    assert cfg["diffusion"]["lr"] == 0.0005 and cfg["classifier"]["max_depth"] == [3, 4]
    assert cf.parse_scalar("[1, 2]") == [1, 2] and cf.parse_scalar("null") is None
    assert cf.parse_scalar("1e-3") == 0.001 and cf.parse_scalar("abc") == "abc"
    with pytest.raises(cf.ConfigError):
        cf.load(None, {"diffusion.nope": 1})


def test_train_counts_checkpoints_and_loss_rows(tmp_path, raw_csv):
    cfgp = write_config(tmp_path, raw_csv)
    assert main(["train", "--config", str(cfgp), "--seed", "0"]) == 0
    models = sorted((tmp_path / "run" / "models").iterdir())
    by_arm = {d.name.split("-s")[0]: d for d in models}
    assert set(by_arm) == {"emdt", "emdt_no_cluster"}
    assert len(list(by_arm["emdt"].glob("*.npz"))) == 3
    assert len(list(by_arm["emdt_no_cluster"].glob("*.npz"))) == 1
    assert len(pd.read_csv(by_arm["emdt"] / "loss.csv")) == 3 * 3
    assert len(pd.read_csv(by_arm["emdt_no_cluster"] / "loss.csv")) == 3


def test_generate_doubles_training_frauds(tmp_path, raw_csv):
    cfgp = write_config(tmp_path, raw_csv)
    assert main(["generate", "--config", str(cfgp), "--seed", "0", "--arm", "emdt"]) == 0
    (out,) = (tmp_path / "run" / "synthetic").iterdir()
    synth = pd.read_csv(out / "synthetic.csv")
    stamp = json.loads((tmp_path / "run" / "preprocess" / ".stamp").read_text())
    assert len(synth) == stamp["frauds"][0] == 36
    assert (synth["Class"] == 1).all() and "Time" not in synth.columns
    assert sum(json.loads((out / ".stamp").read_text())["quotas"]) == 36


def test_multiplier_zero_gives_empty_file(tmp_path, raw_csv):
    cfgp = write_config(tmp_path, raw_csv, augment={"multiplier": 0})
    assert main(["generate", "--config", str(cfgp), "--seed", "0", "--arm", "emdt_no_cluster"]) == 0
    (out,) = (tmp_path / "run" / "synthetic").iterdir()
    assert len(pd.read_csv(out / "synthetic.csv")) == 0


def test_checkpoint_dimension_mismatch_is_rejected(tmp_path, raw_csv):
    cfg = cf.load(write_config(tmp_path, raw_csv))
    run = pl.Run(cfg)
    mdir = pl.run_train(run, "emdt_no_cluster", 0)
    other = DenoiserConfig(EmbeddingConfig(4), n_steps=20)
    save_checkpoint(mdir / "cluster1.npz", init_params(other, Prng(0)), other)
    with pytest.raises(cf.ConfigError, match="checkpoint"):
        pl.run_generate(run, "emdt_no_cluster", 0)


def test_numerical_failure_exits_4(tmp_path, raw_csv, capsys):
    cfgp = write_config(tmp_path, raw_csv)
    code = main(["train", "--config", str(cfgp), "--seed", "0", "--arm", "emdt_no_cluster",
                 "--diffusion.lr", "1e300", "--diffusion.lr_decay", "none", "--diffusion.epochs", "20"])
    assert code == 4
    assert "numerical failure" in capsys.readouterr().err


def test_evaluate_skips_missing_arms_with_warning(tmp_path, raw_csv, capsys):
    cfgp = write_config(tmp_path, raw_csv, evaluation={"seeds": 1})
    assert main(["evaluate", "--config", str(cfgp)]) == 0
    report = json.loads((tmp_path / "run" / "evaluate" / "report.json").read_text())
    assert report["arms"]["original"]["summary"]["f1"]["std"] == 0.0
    assert report["arms"]["emdt"]["per_seed"] == []
    assert any("emdt seed 0 skipped" in w for w in report["warnings"])
    assert "arm,metric,mean,std" in capsys.readouterr().out


def test_pipeline_report_is_consistent_and_canonical(tmp_path, raw_csv, capsys):
    cfgp = write_config(tmp_path, raw_csv, output={"canonical": True, "figures": True})
    assert main(["pipeline", "--config", str(cfgp)]) == 0
    path = tmp_path / "run" / "evaluate" / "report.json"
    first = path.read_bytes()
    report = json.loads(first)
    assert "created" not in report and "timings_seconds" not in report
    for arm, block in report["arms"].items():
        assert len(block["per_seed"]) == 2
        for metric, s in block["summary"].items():
            vals = [r[metric] for r in block["per_seed"]]
            assert abs(s["mean"] - float(np.mean(vals))) <= 1e-12, (arm, metric)
    assert report["arms"]["original"]["summary"]["f1"]["std"] == 0.0
    for name in ("correlation_emdt.png", "marginals_emdt.png", "histograms_smote.csv", "per_seed.csv"):
        assert (tmp_path / "run" / "evaluate" / name).exists()
    assert (tmp_path / "run" / "cluster" / "layout.png").exists()
    shutil.rmtree(tmp_path / "run")
    assert main(["pipeline", "--config", str(cfgp)]) == 0
    assert path.read_bytes() == first


def test_sweep_emits_one_row_per_value_and_seed(tmp_path, raw_csv):
    cfgp = write_config(tmp_path, raw_csv, sweep={"seeds": 1, "time_scale": [0.5, 2]},
                        output={"figures": True})
    assert main(["sweep", "--config", str(cfgp), "--factor", "time_scale"]) == 0
    frame = pd.read_csv(tmp_path / "run" / "sweep" / "sweep.csv")
    assert list(frame["value"]) == [0.5, 2.0] and set(frame["factor"]) == {"time_scale"}
    assert (tmp_path / "run" / "sweep" / "sweep_f1.png").exists()


def test_sweep_grids_and_best_cell_defaults():
    assert cf.DEFAULTS["sweep"]["feature_scale"] == [1, 10, 50, 100, 500]
    assert cf.DEFAULTS["sweep"]["time_scale"] == [0.5, 1, 2]
    e = cf.DEFAULTS["embedding"]
    assert (e["dim"], e["feature_scale"], e["time_scale"]) == (128, 500.0, 0.5)
