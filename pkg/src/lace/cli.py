"""Command-line entry point: ``lace {train,compare,gradcheck,eval-loss,inspect-data}``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .experiment import (ExperimentConfig, TrainingDiverged, cmd_compare, cmd_train,
                         eval_loss_text, inspect_text)
from .gradcheck import run_gradcheck
from .losses import LOSS_NAMES


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON experiment config; flags below override it")
    p.add_argument("--seed", type=int, help="base seed (u64)")
    p.add_argument("--loss", choices=LOSS_NAMES)
    p.add_argument("--out", help="output directory for CSV files")
    p.add_argument("--epochs", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float, help="initial learning rate")
    p.add_argument("--workers", type=int, help="parallel trial workers")


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    overrides = {
        "base_seed": args.seed, "loss": args.loss, "out_dir": args.out, "epochs": args.epochs,
        "trials": args.trials, "batch_size": args.batch_size, "workers": args.workers,
    }
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.lr is not None:
        overrides["sgd"] = dataclasses.replace(cfg.sgd, lr0=args.lr)
    return dataclasses.replace(cfg, **overrides)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lace", description="Cross entropy vs linearly adaptive cross entropy.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run one seeded trial and write its per-epoch CSV")
    _add_run_options(p)
    p.add_argument("--trial", type=int, default=0, help="trial index (selects the seed stream)")

    p = sub.add_parser("compare", help="paired multi-trial comparison of both losses")
    _add_run_options(p)

    p = sub.add_parser("gradcheck", help="finite-difference check of both loss gradients")
    p.add_argument("--classes", type=int, nargs="+", default=[2, 5, 100])
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corrupt-gradient", action="store_true",
                   help="scale the analytic gradient by 1.001 (harness self-test; must fail)")

    p = sub.add_parser("eval-loss", help="print both losses and gradients for one logit vector")
    p.add_argument("logits", type=float, nargs="+")
    p.add_argument("--class", dest="cls", type=int, required=True)

    p = sub.add_parser("inspect-data", help="summarise the configured dataset")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except TrainingDiverged as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 3
    except (ValueError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "train":
        cfg = build_config(args)
        report = cmd_train(cfg, args.trial)
        if report.records:
            last = report.records[-1]
            print(f"{cfg.loss} trial {args.trial}: {report.epochs} epochs, "
                  f"final top-1 acc {last.test_top1_acc:.4f}, top-5 err {last.test_top5_err:.4f}")
        else:
            print(f"{cfg.loss} trial {args.trial}: 0 epochs")
        print(f"order checksum {report.order_checksum}  init checksum {report.init_checksum}")
        return 0

    if args.command == "compare":
        print(cmd_compare(build_config(args)).table)
        return 0

    if args.command == "gradcheck":
        ok = True
        for C in args.classes:
            res = run_gradcheck(C, args.samples, args.seed, corrupt=args.corrupt_gradient)
            for name in LOSS_NAMES:
                print(f"C={C:<4} {name:<14} max rel err {res.max_rel_err[name]:.3e}  "
                      f"max abs err (small comps) {res.max_abs_err[name]:.3e}  "
                      f"failing samples {res.failures[name]}/{args.samples}")
            ok &= res.passed
        print("PASS" if ok else "FAIL")
        return 0 if ok else 1

    if args.command == "eval-loss":
        print(eval_loss_text(args.logits, args.cls))
        return 0

    if args.command == "inspect-data":
        cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, base_seed=args.seed)
        print(inspect_text(cfg))
        return 0
    raise AssertionError(args.command)


if __name__ == "__main__":
    sys.exit(main())
