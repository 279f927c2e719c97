"""``mpdfit`` command line: train, compare and selftest.

Exit codes: 0 success, 1 usage error, 2 data error, 3 property failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import selftest
from .baselines import GdConfig, train_gd
from .data import DataError, load_csv, split_80_20, standardize, synthetic_rugged
from .mpd import Growth, TrainConfig, train
from .network import NetworkShape

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PROPERTY = 0, 1, 2, 3
METHODS = ("mpd", "adam", "nag")
SYNTHETIC_KINDS = ("terrain", "teacher_pwl")


class UsageError(Exception):
    """Flags that parse but contradict each other."""


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _growth(text):
    """``none`` or ``START,FACTOR[,CAP[,EVERY]]``; CAP 0 means the dataset size."""
    if text.lower() == "none":
        return None
    parts = text.split(",")
    if not 2 <= len(parts) <= 4:
        raise argparse.ArgumentTypeError("growth must be 'none' or START,FACTOR[,CAP[,EVERY]]")
    try:
        start, factor = int(parts[0]), float(parts[1])
        cap = int(parts[2]) if len(parts) > 2 and int(parts[2]) > 0 else None
        every = int(parts[3]) if len(parts) > 3 else 100
        return Growth(start, factor, cap, every)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _nonneg(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _add_run_flags(p):
    src = p.add_argument_group("dataset")
    src.add_argument("--csv", help="input CSV file")
    src.add_argument("--x-cols", type=_int_list, help="0-based input columns, e.g. 0,1")
    src.add_argument("--y-cols", type=_int_list, help="0-based output columns")
    src.add_argument("--header", action="store_true", help="CSV has a header line")
    src.add_argument("--bbox", type=_float_list, help="keep rows with lo<=x<=hi per input: lo0,hi0,lo1,hi1,...")
    src.add_argument("--synthetic", choices=SYNTHETIC_KINDS, help="synthetic dataset kind (default terrain)")
    src.add_argument("--samples", type=_positive, default=4096, help="synthetic sample count")
    run = p.add_argument_group("training")
    run.add_argument("--hidden", type=_positive, default=500)
    run.add_argument("--steps", type=_nonneg, default=50, help="batch steps")
    run.add_argument("--minibatch", type=_positive, help="mini-batch size (mpd 2048, gd 256)")
    run.add_argument("--minibatch-growth", type=_growth, default=Growth(),
                     help="mpd growth: none or START,FACTOR[,CAP[,EVERY]] (default 200,2)")
    run.add_argument("--lr", type=float, help="learning rate for adam/nag (default 1e-3)")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--outdir", default=".")


def build_parser():
    parser = _Parser(prog="mpdfit", description="Message Passing Descent and gradient baselines.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    tr = sub.add_parser("train", help="train one method and write its loss curve")
    tr.add_argument("--method", choices=METHODS, default="mpd")
    _add_run_flags(tr)
    cp = sub.add_parser("compare", help="train several methods from a shared start")
    cp.add_argument("--method", default="mpd,adam,nag", help="comma-separated methods")
    _add_run_flags(cp)
    st = sub.add_parser("selftest", help="run the built-in property checks")
    st.add_argument("--filter", help="only checks whose name contains this, e.g. pwp")
    return parser


def _load(args):
    if args.csv and args.synthetic:
        raise UsageError("--csv and --synthetic are mutually exclusive")
    if args.csv:
        if not args.x_cols or not args.y_cols:
            raise UsageError("--csv needs --x-cols and --y-cols")
        ds = load_csv(args.csv, args.x_cols, args.y_cols, has_header=args.header)
        if args.bbox is not None:
            if len(args.bbox) != 2 * ds.d_in:
                raise UsageError(f"--bbox needs {2 * ds.d_in} numbers")
            box = np.array(args.bbox).reshape(-1, 2)
            keep = np.all((ds.X >= box[:, 0]) & (ds.X <= box[:, 1]), axis=1)
            ds = ds.subset(np.nonzero(keep)[0])
        return standardize(ds)
    if args.x_cols or args.y_cols or args.bbox or args.header:
        raise UsageError("--x-cols/--y-cols/--bbox/--header need --csv")
    return synthetic_rugged(args.synthetic or "terrain", args.samples, seed=args.seed)


def _run_method(method, args, shape, dataset, split):
    if method == "mpd":
        cfg = TrainConfig(
            total_batch_steps=args.steps,
            minibatch_size=args.minibatch or 2048,
            minibatch_growth=args.minibatch_growth,
            seed=args.seed,
        )
        return train(shape, dataset, cfg, split=split)
    cfg = GdConfig(
        learning_rate=1e-3 if args.lr is None else args.lr,
        minibatch_size=args.minibatch or 256,
        total_batch_steps=args.steps,
        seed=args.seed,
    )
    return train_gd(shape, dataset, cfg, method, split=split)


def _setup(args):
    dataset = _load(args)
    split = split_80_20(dataset.n_samples, args.seed)
    shape = NetworkShape(dataset.d_in, args.hidden, dataset.d_out)
    os.makedirs(args.outdir, exist_ok=True)
    return dataset, split, shape


def cmd_train(args):
    if args.method == "mpd" and args.lr is not None:
        raise UsageError("--lr applies to adam/nag only")
    dataset, split, shape = _setup(args)
    log = _run_method(args.method, args, shape, dataset, split)
    log.write_csv(os.path.join(args.outdir, f"{args.method}_loss.csv"))
    with open(os.path.join(args.outdir, f"{args.method}_params.txt"), "w") as fh:
        fh.writelines(f"{v:.17g}\n" for v in log.params.flat())
    print(f"{args.method}: final train loss {log.final_train_loss:.6g}, val loss {log.final_val_loss:.6g}")
    return EXIT_OK


def cmd_compare(args):
    methods = [m.strip() for m in args.method.split(",") if m.strip()]
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise UsageError(f"unknown method(s): {', '.join(unknown)}")
    if len(set(methods)) != len(methods) or len(methods) < 2:
        raise UsageError("compare needs at least two distinct methods")
    dataset, split, shape = _setup(args)
    logs = {m: _run_method(m, args, shape, dataset, split) for m in methods}
    curves = {m: log.train_curve() for m, log in logs.items()}
    path = os.path.join(args.outdir, "compare_loss.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step"] + methods)
        for i, (step, _) in enumerate(curves[methods[0]]):
            w.writerow([step] + [f"{curves[m][i][1]:.17g}" for m in methods])
    finals = {m: logs[m].final_train_loss for m in methods}
    best = min(methods, key=lambda m: finals[m])
    parts = ", ".join(f"{m}={finals[m]:.6g}" for m in methods)
    print(f"final train loss: {parts}; least: {best}")
    return EXIT_OK


def cmd_selftest(args):
    return EXIT_PROPERTY if selftest.run(args.filter) else EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    handler = {"train": cmd_train, "compare": cmd_compare, "selftest": cmd_selftest}[args.command]
    try:
        return handler(args)
    except UsageError as exc:
        print(f"mpdfit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"mpdfit: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
