"""Command line: ``emdt <stage> [--config run.yaml] [--section.key value ...]``.

Exit status: 0 success, 2 usage or configuration error, 3 data error,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import config as cf
from . import pipeline as pl
from .dataset import DataError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
STAGES = ("preprocess", "cluster", "train", "generate", "evaluate", "sweep", "pipeline")


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("-v", "--verbose", action="count", default=0)
    group = common.add_argument_group("config overrides (YAML-parsed values)")
    for key in cf.flatten(cf.DEFAULTS):
        group.add_argument(f"--{key}", dest=f"set:{key}", metavar="VALUE", default=argparse.SUPPRESS)
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="emdt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("preprocess", parents=[common], help="split and standardize the raw CSV")
    sub.add_parser("cluster", parents=[common], help="cluster the training frauds")
    for name, what in (("train", "train denoisers"), ("generate", "sample synthetic frauds")):
        p = sub.add_parser(name, parents=[common], help=what)
        p.add_argument("--arm", choices=pl.GENERATIVE_ARMS + ("smote",) if name == "generate" else pl.GENERATIVE_ARMS,
                       action="append", help="arm(s) to build; default: the configured generative arms")
        p.add_argument("--seed", type=int, action="append", help="evaluation seed(s); default: all configured")
    p = sub.add_parser("evaluate", parents=[common], help="score every arm and write the report")
    p.add_argument("--arm", choices=cf.ARMS, action="append", help="restrict to these arms")
    p = sub.add_parser("sweep", parents=[common], help="one-factor hyperparameter sweep")
    p.add_argument("--factor", choices=list(cf.SWEEP_FACTORS), action="append")
    sub.add_parser("pipeline", parents=[common], help="run every stage")
    return parser


def _overrides(ns: argparse.Namespace) -> dict:
    return {k[4:]: cf.parse_scalar(v) for k, v in vars(ns).items() if k.startswith("set:")}


def _print_summary(report: dict) -> None:
    print("arm,metric,mean,std")
    for arm, block in report["arms"].items():
        for metric, s in block["summary"].items():
            print(f"{arm},{metric},{s['mean']:.6f},{s['std']:.6f}")


def dispatch(ns: argparse.Namespace) -> None:
    cfg = cf.load(ns.config, _overrides(ns))
    run = pl.Run(cfg)
    run.root.mkdir(parents=True, exist_ok=True)
    cf.dump(cfg, run.root / "config.yaml")
    cmd = ns.command
    if cmd == "preprocess":
        pl.run_preprocess(run)
        print(run.root / "preprocess")
    elif cmd == "cluster":
        pl.run_cluster(run)
        print(run.root / "cluster" / "assignments.csv")
    elif cmd in ("train", "generate"):
        arms = ns.arm or [a for a in cfg["evaluation"]["arms"] if a in pl.GENERATIVE_ARMS
                          or (cmd == "generate" and a == "smote")]
        for arm in arms:
            for seed in ns.seed or run.seeds():
                if cmd == "train":
                    print(pl.run_train(run, arm, seed))
                elif arm == "smote":
                    print(pl.run_smote(run, seed))
                else:
                    print(pl.run_generate(run, arm, seed))
    elif cmd == "evaluate":
        report = pl.run_evaluate(run, ns.arm)
        _print_summary(report)
    elif cmd == "sweep":
        frame = pl.run_sweep(run, ns.factor)
        print(frame.to_csv(index=False), end="")
    elif cmd == "pipeline":
        _print_summary(pl.run_pipeline(run))
    for w in dict.fromkeys(run.warnings):
        print(f"warning: {w}", file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)  # argparse exits with status 2 on usage errors
    logging.basicConfig(level=logging.WARNING - 10 * min(ns.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        dispatch(ns)
    except cf.ConfigError as exc:
        print(f"emdt: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"emdt: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FloatingPointError as exc:
        print(f"emdt: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
