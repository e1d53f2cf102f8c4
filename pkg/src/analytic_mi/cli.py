"""Command-line interface.

    analytic-mi score    --alpha 1,1
    analytic-mi estimate --samples draws.csv --statistic mean-of-logs
    analytic-mi verify   --mc-samples 100000 --output verify.txt
    analytic-mi al-run   --dataset synth --strategies random,bald-analytic --output curves.csv
    analytic-mi plot-data --curves curves.csv --output summary.csv

Exit codes: 0 success, 1 verification failure, 2 input/parse error,
3 domain error, 4 degenerate estimation (fewer than two usable classes).

Any long option may also be given in a ``--config`` file of ``key = value``
lines (key is the option name without dashes; ``#`` starts a comment).
Command-line flags win over the file.
"""

import argparse
import csv
import os
import re
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import uncertainty as unc
from .active_loop import (
    ALConfig,
    AcquisitionStrategy,
    ActiveLearningError,
    run_active_learning,
)
from .bayes_model import ModelConfig, TrainingError
from .data_io import (
    CURVE_FIELDS,
    IdxFormatError,
    LabeledDataset,
    read_curves,
    read_idx,
    read_samples_csv,
    subsample,
    synth_blobs,
    write_curves,
    write_scores,
)
from .estimation import (
    DegenerateError,
    EstimationConfig,
    EstimationError,
    StatisticMode,
    fixed_point_estimate,
)
from .specfun import DomainError
from .verification import TREND_RAY, run_suite

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_PARSE = 2
EXIT_DOMAIN = 3
EXIT_DEGENERATE = 4

THREADS_ENV = "ANALYTIC_MI_THREADS"


class UsageError(Exception):
    """Malformed input; maps to exit code 2."""


def fmt(x):
    return format(float(x) + 0.0, ".12g")


def parse_floats(text, name):
    try:
        values = [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{name}: expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise UsageError(f"{name}: no values given")
    return values


def parse_ints(text, name):
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{name}: expected comma-separated integers, got {text!r}") from None


def default_threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------- score


def cmd_score(args, out):
    alpha = parse_floats(args.alpha, "--alpha")
    if len(alpha) < 2:
        raise UsageError("--alpha needs at least two values")
    rep = unc.report(alpha)
    rows = [
        ("predictive_entropy", rep.predictive_entropy),
        ("epistemic", rep.epistemic),
        ("aleatoric", rep.aleatoric),
        ("joint_entropy", rep.joint_entropy),
        ("mjent", rep.mjent),
        ("baba", rep.baba),
    ]
    for key, value in rows:
        out.write(f"{key}={'nan' if value is None else fmt(value)}\n")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["alpha"] + [k for k, _ in rows])
            w.writerow([",".join(fmt(a) for a in alpha)]
                       + ["" if v is None else fmt(v) for _, v in rows])
    return EXIT_OK


# ---------------------------------------------------------------- estimate


def _estimation_config(args):
    return EstimationConfig(
        max_iterations=args.max_iterations,
        convergence_tol=args.tol,
        statistic_mode=StatisticMode.parse(args.statistic),
        degenerate_epsilon=args.degenerate_epsilon,
        refine_inverse_digamma=args.refine,
    )


def cmd_estimate(args, out):
    try:
        samples = read_samples_csv(args.samples)
    except OSError as exc:
        raise UsageError(f"cannot read {args.samples}: {exc}") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if samples.shape[0] < 2:
        raise UsageError("estimation needs at least two sample rows")
    config = _estimation_config(args)
    result = fixed_point_estimate(samples, config)
    out.write(f"alpha={','.join(fmt(a) for a in result.alpha)}\n")
    out.write(f"iterations={result.iterations}\n")
    out.write(f"converged={str(result.converged).lower()}\n")
    out.write(f"statistic_mode={result.statistic_mode.value}\n")
    out.write(f"degenerate={','.join(str(k) for k in result.degenerate)}\n")
    if args.report:
        rep = unc.report(result.params)
        for key, value in rep.as_dict().items():
            out.write(f"{key}={'nan' if value is None else fmt(value)}\n")
    return EXIT_OK


# ---------------------------------------------------------------- verify


def cmd_verify(args, out):
    classes = parse_ints(args.classes, "--classes")
    if not classes or min(classes) < 2:
        raise UsageError("--classes values must be >= 2")
    lo, hi = parse_floats(args.alpha_range, "--alpha-range")[:2]
    if not 0.0 < lo < hi:
        raise UsageError("--alpha-range must satisfy 0 < low < high")
    ray = parse_floats(args.alpha_grid, "--alpha-grid") if args.alpha_grid else None
    if ray is not None and min(ray) <= 0.0:
        raise UsageError("--alpha-grid values must be > 0")
    oracle = None
    if ray is not None:
        oracle = [(t,) * c for c in classes for t in ray]
    if args.mc_samples < 2:
        raise UsageError("--mc-samples must be >= 2")
    results = run_suite(
        classes=classes,
        alpha_range=(lo, hi),
        n_random=args.n_random,
        mc_samples=args.mc_samples,
        bootstrap=args.bootstrap,
        oracle_grid=oracle,
        trend_ray=ray or TREND_RAY,
        seed=args.seed,
        threads=args.threads,
    )
    lines = [r.line() for r in results]
    failed = sum(not r.passed for r in results)
    lines.append(f"SUMMARY checks={len(results)} failed={failed}")
    text = "\n".join(lines) + "\n"
    out.write(text)
    if args.output:
        Path(args.output).write_text(text)
    return EXIT_VERIFY_FAILED if failed else EXIT_OK


# ---------------------------------------------------------------- al-run

IDX_NAMES = {
    "mnist": (
        "train-images-idx3-ubyte", "train-labels-idx1-ubyte",
        "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte",
    ),
    "emnist": (
        "emnist-{split}-train-images-idx3-ubyte", "emnist-{split}-train-labels-idx1-ubyte",
        "emnist-{split}-test-images-idx3-ubyte", "emnist-{split}-test-labels-idx1-ubyte",
    ),
}


def _load_datasets(args):
    if args.dataset == "synth":
        per_class = -(-(args.pool_size + args.test_size) // args.classes)
        data = synth_blobs(args.classes, per_class, dim=args.dim, spread=args.spread,
                           seed=args.data_seed, name="synth")
        pool = data.subset(np.arange(args.pool_size), "synth-pool")
        test = data.subset(np.arange(args.pool_size, args.pool_size + args.test_size), "synth-test")
        return pool, test
    names = [n.format(split=args.emnist_split) for n in IDX_NAMES[args.dataset]]
    data_dir = Path(args.data_dir or ".")
    paths = [
        Path(explicit) if explicit else data_dir / default
        for explicit, default in zip(
            (args.train_images, args.train_labels, args.test_images, args.test_labels), names)
    ]
    offset = 1 if (args.dataset == "emnist" and args.emnist_split == "letters") else 0
    try:
        train_full = read_idx(paths[0], paths[1], name=f"{args.dataset}-train",
                              transpose=args.transpose, label_offset=offset)
        test_full = read_idx(paths[2], paths[3], name=f"{args.dataset}-test",
                             transpose=args.transpose, label_offset=offset)
    except OSError as exc:
        raise UsageError(f"cannot read dataset: {exc}") from None
    C = max(train_full.C, test_full.C)
    train_full = LabeledDataset(train_full.features, train_full.labels, C, train_full.name)
    test_full = LabeledDataset(test_full.features, test_full.labels, C, test_full.name)
    return (subsample(train_full, args.pool_size, args.data_seed),
            subsample(test_full, args.test_size, args.data_seed))


def _seed_list(text):
    values = parse_ints(text, "--seeds")
    if len(values) == 1:
        if values[0] < 1:
            raise UsageError("--seeds count must be >= 1")
        return tuple(range(values[0]))
    return tuple(values)


def cmd_al_run(args, out):
    strategies = [AcquisitionStrategy.parse(s) for s in str(args.strategies).split(",") if s.strip()]
    if not strategies:
        raise UsageError("--strategies is empty")
    model = ModelConfig(
        hidden_width=args.hidden, dropout_rate=args.dropout, learning_rate=args.lr,
        epochs=args.epochs, batch_size=args.batch_size,
    )
    config = ALConfig(
        K=args.k, K_tot=args.k_tot, M=args.m, initial_size=args.initial_size or args.k,
        seeds=_seed_list(args.seeds), model=model, estimation=_estimation_config(args),
        record_scores=bool(args.scores_output), measure_time=(args.wall_time == "measured"),
    )
    for s in strategies:
        config.validate_for(s)
    pool, test = _load_datasets(args)

    def job(strategy):
        return run_active_learning(pool, test, config, strategy)

    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as ex:
        results = list(ex.map(job, strategies))

    records = [r for res in results for r in res.curves]
    write_curves(records, args.output)
    if args.scores_output:
        write_scores([d for res in results for d in res.score_dumps], args.scores_output)
    for res in results:
        out.write(
            f"strategy={res.strategy.value} final_mean_accuracy={fmt(res.final_accuracy())} "
            f"fallbacks={res.fallback_count}\n"
        )
    return EXIT_OK


# ---------------------------------------------------------------- plot-data


def cmd_plot_data(args, out):
    try:
        records = read_curves(args.curves)
    except OSError as exc:
        raise UsageError(f"cannot read {args.curves}: {exc}") from None
    except (ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from None
    groups = {}
    for r in records:
        groups.setdefault((r.strategy, r.labeled_count), []).append(r.test_accuracy)
    lines = ["strategy,labeled_count,mean_accuracy,std_accuracy,n_seeds"]
    for (strategy, count), accs in sorted(groups.items()):
        a = np.asarray(accs)
        std = a.std(ddof=1) if a.size > 1 else 0.0
        lines.append(f"{strategy},{count},{fmt(a.mean())},{fmt(std)},{a.size}")
    text = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        out.write(text)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _add_estimation_flags(p):
    g = p.add_argument_group("estimation")
    g.add_argument("--statistic", default=None,
                   choices=[m.value for m in StatisticMode],
                   help="fixed-point statistic: log-of-mean or mean-of-logs (MLE)")
    g.add_argument("--max-iterations", type=int, default=1000)
    g.add_argument("--tol", type=float, default=1e-10,
                   help="stop when the largest alpha change per sweep is at most this")
    g.add_argument("--degenerate-epsilon", type=float, default=1e-8)
    g.add_argument("--refine", action=argparse.BooleanOptionalAction, default=None,
                   help="Newton-polish the inverse digamma (default: on for mean-of-logs)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="analytic-mi",
        description="Closed-form Dirichlet mutual information, estimation and active learning.",
    )
    parser.add_argument("--config", help="key = value file of defaults (flags win)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="analytic uncertainty measures for one alpha")
    p.add_argument("--alpha", required=True, help="comma-separated concentration parameters")
    p.add_argument("--csv", help="also write the report as a one-row CSV")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("estimate", help="fit Dirichlet parameters to probability samples")
    p.add_argument("--samples", required=True, help="CSV of M rows x C probability columns")
    p.add_argument("--report", action="store_true", help="also print the uncertainty report")
    _add_estimation_flags(p)
    p.set_defaults(func=cmd_estimate, statistic_default=StatisticMode.PAPER_LOG_OF_MEAN.value)

    p = sub.add_parser("verify", help="run the analytic-vs-Monte-Carlo oracle suite")
    p.add_argument("--classes", default="2,3,4,5,6,7,8,9,10",
                   help="class counts for the identity grid and the oracle points")
    p.add_argument("--alpha-range", default="0.01,50", help="low,high for the random grid")
    p.add_argument("--n-random", type=int, default=1000, help="random grid size")
    p.add_argument("--alpha-grid", default=None,
                   help="symmetric-ray values t; oracle points become (t,...,t)")
    p.add_argument("--mc-samples", type=int, default=100_000)
    p.add_argument("--bootstrap", type=int, default=200, help="bootstrap replicates for BALD SE")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", help="also write the report to this file")
    p.add_argument("--threads", type=int, default=default_threads())
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("al-run", help="active-learning experiment, writes learning curves")
    p.add_argument("--dataset", choices=["synth", "mnist", "emnist"], default="synth")
    p.add_argument("--data-dir", help="directory holding the IDX files")
    p.add_argument("--train-images")
    p.add_argument("--train-labels")
    p.add_argument("--test-images")
    p.add_argument("--test-labels")
    p.add_argument("--emnist-split", default="balanced")
    p.add_argument("--transpose", action="store_true", help="transpose images (EMNIST orientation)")
    p.add_argument("--pool-size", type=int, default=5000)
    p.add_argument("--test-size", type=int, default=2000)
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--classes", type=int, default=4, help="synthetic classes")
    p.add_argument("--dim", type=int, default=4, help="synthetic feature dimension")
    p.add_argument("--spread", type=float, default=1.5, help="synthetic cluster std")
    p.add_argument("--strategies", default="random,bald-empirical,bald-analytic,"
                                           "baba-empirical,baba-analytic")
    p.add_argument("--seeds", default="3", help="a count (0..n-1) or a comma-separated list")
    p.add_argument("--k", type=int, default=30, help="acquisition size per iteration")
    p.add_argument("--k-tot", type=int, default=300, help="total labeling budget")
    p.add_argument("--m", type=int, default=50, help="MC dropout samples per pool item")
    p.add_argument("--initial-size", type=int, default=None, help="defaults to --k")
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--output", required=True, help="learning-curve CSV path")
    p.add_argument("--scores-output", help="optional per-iteration score dump CSV")
    p.add_argument("--wall-time", choices=["measured", "zero"], default="measured",
                   help="'zero' writes 0 for wall_time_s so files are byte-reproducible")
    p.add_argument("--threads", type=int, default=default_threads())
    _add_estimation_flags(p)
    p.set_defaults(func=cmd_al_run, statistic_default=StatisticMode.MEAN_OF_LOGS.value,
                   max_iterations=200)

    p = sub.add_parser("plot-data", help="aggregate learning curves across seeds")
    p.add_argument("--curves", required=True)
    p.add_argument("--output")
    p.set_defaults(func=cmd_plot_data)
    return parser


_NEGATIVE_LIST = re.compile(r"^-[0-9.]")


def _join_negative_values(argv):
    # "--alpha -1,2" would otherwise be read as an unknown option
    out = []
    it = iter(range(len(argv)))
    for i in it:
        a = argv[i]
        if (a.startswith("--") and "=" not in a and i + 1 < len(argv)
                and _NEGATIVE_LIST.match(argv[i + 1])):
            out.append(f"{a}={argv[i + 1]}")
            next(it, None)
        else:
            out.append(a)
    return out


def read_config_file(path):
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def _apply_config(parser, argv, config_path):
    values = read_config_file(config_path)
    probe = parser.parse_args(argv)
    sub_parser = parser._subparsers._group_actions[0].choices[probe.command]
    known = {a.dest: a for a in sub_parser._actions}
    defaults = {}
    for key, raw in values.items():
        action = known.get(key)
        if action is None or key in ("help", "func"):
            raise UsageError(f"{config_path}: unknown option {key!r} for {probe.command}")
        if action.type is not None:
            try:
                defaults[key] = action.type(raw)
            except ValueError:
                raise UsageError(f"{config_path}: bad value {raw!r} for {key}") from None
        elif isinstance(action, (argparse._StoreTrueAction, argparse.BooleanOptionalAction)):
            defaults[key] = raw.lower() in ("1", "true", "yes", "on")
        else:
            defaults[key] = raw
    sub_parser.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None, out=None):
    out = out or sys.stdout
    argv = _join_negative_values(list(sys.argv[1:] if argv is None else argv))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    try:
        if args.config:
            args = _apply_config(parser, argv, args.config)
        if getattr(args, "statistic", "") is None:
            args.statistic = args.statistic_default
        return args.func(args, out)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except DegenerateError as exc:
        print(f"degenerate estimation: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (IdxFormatError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (EstimationError, TrainingError, ActiveLearningError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY_FAILED
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
