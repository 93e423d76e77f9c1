"""Command line entry point: ``temporalrecon <command> [options]``."""

import argparse
import json
import logging
import sys

import numpy as np

from . import config as cfgmod
from . import experiments, io
from .aggtheory import aggregate_ar1, aggregated_order, theoretical_W1
from .errors import TemporalReconError, UnsupportedModel
from .evaluate import mcb_test

logger = logging.getLogger("temporalrecon")


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="YAML or JSON config file")
    p.add_argument("--seed", type=int, help="global random seed (overrides the config)")
    p.add_argument("--out", default="-", help="output CSV path, '-' for stdout (default)")
    p.add_argument("--allow-pinv", action="store_true",
                   help="use a pseudo-inverse instead of failing on singular covariances")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser():
    common = _common()
    parser = argparse.ArgumentParser(
        prog="temporalrecon",
        description="Temporal hierarchical forecast reconciliation for aggregated ARMA processes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="run a simulation grid from --config")
    p.add_argument("--raw", help="also write per-replication rows to this CSV")
    p.add_argument("--wide", help="also write a wide pivot of the means to this CSV")
    p.add_argument("--buckets", action="store_true", help="pool AR parameters into three buckets")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify-theorem", parents=[common],
                       help="mapping SG under the exact or sample covariance")
    p.add_argument("--phi", type=float, required=True)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--mode", choices=("theoretical", "sample"), default="theoretical")
    p.add_argument("--n-reps", type=int, default=100)
    p.add_argument("--n-top", type=int, default=100)
    p.add_argument("--train-frac", type=float, default=0.75)
    p.set_defaults(func=cmd_verify_theorem)

    p = sub.add_parser("dataset", parents=[common], help="evaluate reconciliation on a CSV series")
    p.add_argument("--input")
    p.add_argument("--value-column")
    p.add_argument("--frequency", type=int)
    p.add_argument("--ks", help="aggregation factors, e.g. 4,2,1")
    p.add_argument("--train-frac", type=float)
    p.add_argument("--demean", action="store_true", default=None)
    p.add_argument("--h", type=int)
    p.add_argument("--bottom-order", help="bottom-level order p,d,q")
    p.add_argument("--auto", action="store_true", help="select orders by AICc")
    p.add_argument("--method", action="append", dest="methods",
                   help="reconciliation method (repeatable), e.g. full or spectral:nu=auto,n_eig=2")
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("aggtheory", parents=[common], help="aggregated model of an ARIMA(p,d,q)")
    for name in ("p", "d", "q", "k"):
        p.add_argument(name, type=int)
    p.add_argument("--phi", type=float)
    p.add_argument("--sigma2", type=float)
    p.add_argument("--csv", action="store_true", help="emit CSV instead of text")
    p.set_defaults(func=cmd_aggtheory)

    p = sub.add_parser("mcb", parents=[common], help="MCB ranking from a series,method,error CSV")
    p.add_argument("input")
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_mcb)
    return parser


def _ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def cmd_simulate(args):
    if not args.config:
        raise cfgmod.ConfigError("simulate needs --config")
    cfg = cfgmod.parse_config(cfgmod.load_text(args.config), cfgmod.ScenarioConfig,
                              {"seed": args.seed})
    header = io.run_header(cfg.seed, cfgmod.canonical_text(cfg))
    raw = experiments.run_simulation(cfg, jobs=args.jobs, allow_pinv=args.allow_pinv)
    summary = experiments.summarize(raw, buckets=args.buckets)
    if args.raw:
        io.write_csv(args.raw, raw, experiments.RAW_COLUMNS, header)
    if args.wide:
        rows, cols = experiments.wide_pivot(summary)
        io.write_csv(args.wide, rows, cols, header)
    io.write_csv(args.out, summary, experiments.SUMMARY_COLUMNS, header)
    return 0


def cmd_verify_theorem(args):
    seed = 0 if args.seed is None else args.seed
    rows, failed = experiments.verify_theorem(
        args.phi, args.sigma2, args.k, mode=args.mode, n_reps=args.n_reps, n_top=args.n_top,
        train_frac=args.train_frac, seed=seed, allow_pinv=args.allow_pinv,
    )
    if failed:
        logger.warning("%d of %d replications failed and were skipped", failed, args.n_reps)
    params = {k: getattr(args, k) for k in ("phi", "sigma2", "k", "mode", "n_reps", "n_top", "train_frac")}
    header = io.run_header(seed, json.dumps(params, sort_keys=True))
    io.write_csv(args.out, rows, ("row", "col", "mean", "std_error", "n"), header)
    return 0


def cmd_dataset(args):
    overrides = {
        "input": args.input,
        "value_column": args.value_column,
        "frequency": args.frequency,
        "ks": _ints(args.ks) if args.ks else None,
        "train_frac": args.train_frac,
        "demean": args.demean,
        "h": args.h,
        "bottom_order": _ints(args.bottom_order) if args.bottom_order else None,
        "auto": {} if args.auto else None,
        "methods": args.methods,
    }
    text = cfgmod.load_text(args.config) if args.config else ""
    spec = cfgmod.parse_config(text, cfgmod.DatasetSpec, overrides)
    y = io.read_series_csv(spec.input, spec.value_column)
    rows, models = experiments.run_dataset(y, spec, allow_pinv=args.allow_pinv)
    for k, m in models.items():
        logger.info("factor %d: %s", k, m)
    header = io.run_header(0 if args.seed is None else args.seed, cfgmod.canonical_text(spec))
    io.write_csv(args.out, rows, experiments.DATASET_COLUMNS, header)
    return 0


def _order_text(p, d, q, r):
    if d == 0:
        return f"ARMA({p},<={r})"
    return f"ARIMA({p},{d},<={r})"


def cmd_aggtheory(args):
    p, d, q, k = args.p, args.d, args.q, args.k
    r = aggregated_order(p, d, q, k)
    exact = args.phi is not None or args.sigma2 is not None
    if exact and (p, d, q) != (1, 0, 0):
        raise UnsupportedModel("exact aggregated parameters are available for ARIMA(1,0,0) only")
    rows = [{"quantity": "ma_order_bound", "value": r}]
    lines = [f"ARIMA({p},{d},{q}) aggregated over k={k}: {_order_text(p, d, q, r)}"]
    if exact:
        phi = 0.0 if args.phi is None else args.phi
        sigma2 = 1.0 if args.sigma2 is None else args.sigma2
        agg = aggregate_ar1(phi, sigma2, k)
        W = theoretical_W1(phi, sigma2, k).W
        rows += [{"quantity": "beta", "value": agg.beta},
                 {"quantity": "eta", "value": agg.eta},
                 {"quantity": "sigma_star2", "value": agg.sigma_star2}]
        rows += [{"quantity": f"W1[{i},{j}]", "value": float(W[i, j])}
                 for i in range(W.shape[0]) for j in range(W.shape[1])]
        lines += [f"beta = {agg.beta!r}", f"eta = {agg.eta!r}", f"sigma*^2 = {agg.sigma_star2!r}",
                  "W1 =", np.array2string(W, precision=6, max_line_width=120)]
    if args.csv:
        header = io.run_header(0 if args.seed is None else args.seed,
                               json.dumps([p, d, q, k, args.phi, args.sigma2]))
        io.write_csv(args.out, rows, ("quantity", "value"), header)
    else:
        text = "\n".join(lines) + "\n"
        if args.out in (None, "-"):
            sys.stdout.write(text)
        else:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
    return 0


def cmd_mcb(args):
    series, methods, E = io.read_error_table(args.input)
    res = mcb_test(E, alpha=args.alpha, methods=methods)
    header = io.run_header(0 if args.seed is None else args.seed,
                           json.dumps({"input": args.input, "alpha": args.alpha, "n_series": len(series)}))
    cols = ("method", "mean_rank", "lower", "upper", "critical_distance", "best",
            "indistinguishable_from_best")
    io.write_csv(args.out, list(res.rows()), cols, header)
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (TemporalReconError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
