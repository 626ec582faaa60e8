"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data/validation error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import _textio
from .baselines import KnnConfig, SvmConfig, knn_posterior, load_svm, save_svm, svm_scores, svm_train
from .core import NumericalError, ValidationError
from .data import SynthConfig, generate_synthetic, load_dataset, save_dataset, split
from .experiment import CompareConfig, compare, format_grid, format_pretty
from .losses import LOSS_KINDS
from .metrics import compute_metrics, topk_indicator, upper_bound_predictions
from .optimizer import TrainConfig, train
from .scorer import forward, load_params, save_params

logger = logging.getLogger("tagrank")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    if isinstance(text, int):
        return (text,)
    text = str(text).strip()
    if text.lower() in ("", "none", "linear"):
        return ()
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _positive_int(text) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _add_train_flags(p):
    g = p.add_argument_group("training")
    g.add_argument("--hidden", type=_int_list, default=(256,),
                   help="hidden layer widths, comma-separated; 'none' for a linear scorer")
    g.add_argument("--dropout", type=float, default=0.6)
    g.add_argument("--lr", type=float, default=0.002)
    g.add_argument("--momentum", type=float, default=0.9)
    g.add_argument("--batch-size", type=int, default=32)
    g.add_argument("--decay-factor", type=float, default=0.5)
    g.add_argument("--decay-every", type=int, default=10)
    g.add_argument("--epochs", type=int, default=40)
    g.add_argument("--max-trials", type=int, default=None,
                   help="WARP sampling cap (default: number of negative tags)")


def _add_baseline_flags(p):
    g = p.add_argument_group("baselines")
    g.add_argument("--knn-k", type=int, default=50)
    g.add_argument("--sigma", type=float, default=1.0)
    g.add_argument("--C", dest="svm_c", type=float, default=2.0)
    g.add_argument("--svm-epochs", type=int, default=30)
    g.add_argument("--svm-lr", type=float, default=0.01)


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = _Parser(prog="tagrank", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    subs = {}

    p = subs["synth"] = sub.add_parser("synth", help="generate a synthetic long-tail dataset")
    p.add_argument("--tags", type=int, default=81)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--zipf", type=float, default=1.0)
    p.add_argument("--labels-min", type=int, default=2)
    p.add_argument("--labels-max", type=int, default=5)
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--prototype-std", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = subs["split"] = sub.add_parser("split", help="split a dataset into train and test files")
    p.add_argument("--data")
    p.add_argument("--train-fraction", type=float, default=0.75)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-out")
    p.add_argument("--test-out")

    p = subs["train"] = sub.add_parser("train", help="train a scorer with one loss")
    p.add_argument("--data")
    p.add_argument("--loss", default="warp")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="checkpoint path (default: <data>.<loss>.ckpt)")
    p.add_argument("--log", help="training log path (default: <out>.log)")
    p.add_argument("--log-timing", action="store_true",
                   help="include wall-clock seconds in the log (makes it non-reproducible)")
    _add_train_flags(p)

    p = subs["eval"] = sub.add_parser("eval", help="evaluate top-k annotation on a test set")
    p.add_argument("--data", help="test set")
    p.add_argument("--k", type=int, default=3)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--upper-bound", action="store_true")
    mode.add_argument("--knn", action="store_true")
    mode.add_argument("--svm", action="store_true")
    p.add_argument("--model", help="scorer checkpoint, or SVM checkpoint with --svm")
    p.add_argument("--train", help="training set for --knn, or for --svm without --model")
    p.add_argument("--save-model", help="with --svm --train: write the fitted SVM here")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--table", help="write the per-tag metrics table here")
    _add_baseline_flags(p)

    p = subs["compare"] = sub.add_parser("compare", help="compare all losses and baselines")
    p.add_argument("--data")
    p.add_argument("--k", type=_int_list, default=(3, 5))
    p.add_argument("--seeds", type=_int_list, default=(0, 1, 2, 3, 4))
    p.add_argument("--train-fraction", type=float, default=0.75)
    p.add_argument("--out", help="write the comparison grid here")
    p.add_argument("--tables-dir", help="write per-tag tables for every seed/method/k here")
    _add_train_flags(p)
    _add_baseline_flags(p)

    for p in subs.values():
        p.add_argument("--config", help="YAML/JSON file of flag values; flags override it")
    return parser, subs


def parse_args(argv):
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        raise UsageError("a command is required")
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                values = yaml.safe_load(fh) or {}
        except (OSError, yaml.YAMLError) as e:
            raise UsageError(f"cannot read config {args.config}: {e}")
        if not isinstance(values, dict):
            raise UsageError("config file must hold a mapping")
        values = {str(k).replace("-", "_"): v for k, v in values.items()}
        known = {a.dest for a in subs[args.command]._actions}
        unknown = sorted(set(values) - known)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        subs[args.command].set_defaults(**values)
        args = parser.parse_args(argv)
    return args


def _require(args, *names):
    for name in names:
        if getattr(args, name) in (None, ""):
            raise UsageError(f"--{name.replace('_', '-')} is required")


def _train_config(args, loss, seed) -> TrainConfig:
    return TrainConfig(learning_rate=args.lr, momentum=args.momentum,
                       batch_size=args.batch_size, decay_factor=args.decay_factor,
                       decay_every=args.decay_every, epochs=args.epochs, seed=seed,
                       loss_kind=loss, hidden=_int_list(args.hidden),
                       dropout_ratio=args.dropout, max_trials=args.max_trials)


def _svm_config(args, seed) -> SvmConfig:
    return SvmConfig(C=args.svm_c, epochs=args.svm_epochs, learning_rate=args.svm_lr, seed=seed)


def cmd_synth(args):
    _require(args, "out")
    cfg = SynthConfig(num_examples=args.n, num_tags=args.tags, feature_dim=args.dim,
                      zipf_exponent=args.zipf,
                      labels_per_example=(args.labels_min, args.labels_max),
                      noise_sigma=args.noise, seed=args.seed,
                      prototype_std=args.prototype_std)
    ds = generate_synthetic(cfg)
    save_dataset(ds, args.out)
    counts = ds.tag_counts()
    print(f"wrote {args.out}: n={len(ds)} c={ds.num_tags} d={ds.dim}")
    print(f"tag frequency head: {counts[:5].tolist()}  tail: {counts[-5:].tolist()}")


def cmd_split(args):
    _require(args, "data", "train_out", "test_out")
    tr, te = split(load_dataset(args.data), args.train_fraction, args.seed)
    save_dataset(tr, args.train_out)
    save_dataset(te, args.test_out)
    print(f"train={len(tr)} test={len(te)}")


def cmd_train(args):
    _require(args, "data")
    if args.loss not in LOSS_KINDS:
        raise UsageError(f"invalid --loss {args.loss!r}; choose from {', '.join(LOSS_KINDS)}")
    ds = load_dataset(args.data)
    cfg = _train_config(args, args.loss, args.seed)
    out = args.out or f"{args.data}.{args.loss}.ckpt"
    log_path = args.log or f"{out}.log"
    params, log = train(ds, cfg, callback=lambda r: logger.info(
        "epoch %d lr %.6g mean_loss %.6g", r.epoch, r.lr, r.mean_loss))
    save_params(params, out)
    _textio.write_jsonl(log_path, [r.as_dict(timing=args.log_timing) for r in log])
    print(f"wrote {out} and {log_path}; final mean_loss={log[-1].mean_loss:.6g}")


def _print_report(report, table_path):
    print(report.summary())
    if table_path:
        _textio.atomic_write_text(table_path, report.to_table())


def cmd_eval(args):
    _require(args, "data")
    if args.k < 1:
        raise UsageError("--k must be >= 1")
    test = load_dataset(args.data)
    if args.upper_bound:
        preds = upper_bound_predictions(test, args.k, args.seed)
    else:
        if args.knn:
            _require(args, "train")
            train_set = load_dataset(args.train)
            _check_compatible(train_set.num_tags, train_set.dim, test)
            S = knn_posterior(train_set, test.X, KnnConfig(args.knn_k, args.sigma))
        elif args.svm:
            if args.model:
                model = load_svm(args.model)
            else:
                _require(args, "train")
                train_set = load_dataset(args.train)
                _check_compatible(train_set.num_tags, train_set.dim, test)
                model = svm_train(train_set, _svm_config(args, args.seed))
                if args.save_model:
                    save_svm(model, args.save_model)
            _check_compatible(model.num_tags, model.dim, test)
            S = svm_scores(model, test.X)
        else:
            _require(args, "model")
            params = load_params(args.model)
            _check_compatible(params.num_tags, params.architecture[0], test)
            S = forward(params, test.X, "eval")[0]
        preds = topk_indicator(S, args.k)
    _print_report(compute_metrics(preds, test, args.k), args.table)


def _check_compatible(num_tags, dim, test):
    if num_tags != test.num_tags:
        raise ValidationError(f"model has {num_tags} tags but the test set has {test.num_tags}")
    if dim != test.dim:
        raise ValidationError(f"model expects {dim} features but the test set has {test.dim}")


def cmd_compare(args):
    _require(args, "data")
    ks = _int_list(args.k)
    if not ks or min(ks) < 1:
        raise UsageError("--k values must be >= 1")
    ds = load_dataset(args.data)
    cfg = CompareConfig(ks=ks, seeds=_int_list(args.seeds), train_fraction=args.train_fraction,
                        train=_train_config(args, "warp", 0),
                        knn=KnnConfig(args.knn_k, args.sigma), svm=_svm_config(args, 0))
    per_seed, median = compare(ds, cfg)
    print(format_pretty(median))
    if args.out:
        _textio.atomic_write_text(args.out, format_grid(median))
    if args.tables_dir:
        d = Path(args.tables_dir)
        d.mkdir(parents=True, exist_ok=True)
        for seed, reports in zip(cfg.seeds, per_seed):
            for k, row in reports.items():
                for method, rep in row.items():
                    _textio.atomic_write_text(d / f"{method}_k{k}_seed{seed}.tsv", rep.to_table())


COMMANDS = {"synth": cmd_synth, "split": cmd_split, "train": cmd_train,
            "eval": cmd_eval, "compare": cmd_compare}


def main(argv=None) -> int:
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
    except UsageError as e:
        print(f"tagrank: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except UsageError as e:
        print(f"tagrank: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as e:
        print(f"tagrank: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValidationError, OSError) as e:
        print(f"tagrank: error: {e}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
