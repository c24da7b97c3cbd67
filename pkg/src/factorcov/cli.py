"""Command-line interface.

Exit codes: 0 success, 2 bad input (files, arguments, shapes), 3 numerical
failure. All randomness flows through --seed; rerunning an invocation with
the same seed rewrites identical artifacts, timing fields aside.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import lda as lda_mod
from .data import SubsetSelector, load_panel_csv, save_matrix_csv
from .divide_conquer import dc_estimate
from .metrics import fisher_dominance
from .pipeline import PipelineConfig, estimate_method1, estimate_method2
from .selection import select_k_eigen_ratio, select_k_ic
from .simulate import (
    SimConfig,
    benchmark_dc,
    benchmark_rows_to_csv,
    monte_carlo_table,
)
from .threshold import ThresholdConfig

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_NUMERICAL = 3


class CliError(Exception):
    pass


def _threads(args):
    env = os.environ.get("FACTORCOV_THREADS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError:
            raise CliError(f"FACTORCOV_THREADS={env!r} is not an integer") from None
    if getattr(args, "threads", None):
        return max(1, args.threads)
    return os.cpu_count() or 1


def _parse_subset(text, p):
    try:
        subset = SubsetSelector.parse(text)
        subset.validate_against(p)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    return subset


def _parse_c(text):
    if text == "auto":
        return None
    try:
        value = float(text)
    except ValueError:
        raise CliError(f"--c must be a number or 'auto', got {text!r}") from None
    if value < 0:
        raise CliError("--c must be nonnegative")
    return value


def _resolve_k(args, Y):
    if args.k != "auto":
        try:
            k = int(args.k)
        except ValueError:
            raise CliError(f"--k must be an integer or 'auto', got {args.k!r}") from None
        if k < 1:
            raise CliError("--k must be at least 1")
        return k
    n_max = min(args.k_max, min(Y.p, Y.T) - 1)
    return max(1, select_k_ic(Y.values, n_max).k_hat)


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def cmd_estimate(args):
    try:
        Y = load_panel_csv(args.data)
    except (OSError, ValueError) as exc:
        raise CliError(str(exc)) from None
    subset = _parse_subset(args.subset, Y.p) if args.subset else SubsetSelector.full(Y.p)
    k = _resolve_k(args, Y)
    cfg = PipelineConfig(
        K=k,
        threshold=ThresholdConfig(C=_parse_c(args.c)),
        rate_mode=args.rate_mode,
    )
    try:
        if args.method == "1":
            est = estimate_method1(Y, subset, cfg)
        elif args.method == "2":
            est = estimate_method2(Y, subset, cfg)
        elif args.method == "dc":
            if args.m is None:
                raise CliError("--m is required for --method dc")
            if args.m > Y.p:
                raise CliError(f"M > p: cannot split {Y.p} variables into {args.m} groups")
            est = dc_estimate(Y, subset, k, args.m, cfg, n_workers=_threads(args))
        else:
            raise CliError(f"unknown method {args.method!r}")
    except CliError:
        raise
    except ValueError as exc:
        raise CliError(str(exc)) from None

    out = args.output
    os.makedirs(out, exist_ok=True)
    ids = [Y.ids()[i] for i in subset.indices]
    save_matrix_csv(os.path.join(out, "sigma_s.csv"), est.total_cov, row_ids=ids)
    save_matrix_csv(os.path.join(out, "loadings.csv"), est.loadings, row_ids=ids)
    save_matrix_csv(os.path.join(out, "factors.csv"), est.factors)
    lam_min = float(np.linalg.eigvalsh(est.idio_cov)[0])
    timings = {
        key: est.info[key]
        for key in ("initial_threshold_s", "invert_s", "eigensolve_s",
                    "merge_s", "group_s", "residual_threshold_s")
        if key in est.info
    }
    summary = {
        "method": est.method,
        "K": k,
        "subset_size": subset.size,
        "initial_C": est.info.get("initial_C"),
        "residual_C": est.info.get("residual_C"),
        "idio_min_eigenvalue": lam_min,
        "timings": timings,
    }
    if est.method == "divide_conquer":
        summary["M"] = est.info["M"]
        summary["factor_gram_max_dev"] = est.info["factor_gram_max_dev"]
    _write_json(os.path.join(out, "summary.json"), summary)
    return EXIT_OK


def cmd_simulate(args):
    if args.m is not None and args.m > args.p:
        raise CliError(f"M > p: cannot split {args.p} variables into {args.m} groups")
    cfg = SimConfig(
        s=args.s, p=args.p, T=args.t, K=args.k, n_reps=args.reps, seed=args.seed,
        heteroscedastic=args.heteroscedastic, dc_M=args.m,
        threshold_c=_parse_c(args.c), rate_mode=args.rate_mode,
    )
    table = monte_carlo_table(cfg)
    os.makedirs(args.output, exist_ok=True)
    table.to_csv(os.path.join(args.output, "table.csv"))
    with open(os.path.join(args.output, "table.json"), "w") as fh:
        fh.write(table.to_json())
        fh.write("\n")
    print(table.format())
    return EXIT_OK


def cmd_benchmark(args):
    t_grid = [int(t) for t in args.t_grid.split(",") if t.strip()]
    if not t_grid:
        raise CliError("--t-grid must list at least one T value")
    rows = benchmark_dc(t_grid, n_reps=args.reps, seed=args.seed,
                        threshold_c=_parse_c(args.c), n_workers=_threads(args))
    os.makedirs(args.output, exist_ok=True)
    benchmark_rows_to_csv(rows, os.path.join(args.output, "benchmark.csv"))
    for row in rows:
        if row["metric"] == "relative_norm":
            print(f"T={row['T']} {row['method']}: rel={row['mean']:.4f} "
                  f"wall={row['wall_ms']:.0f}ms")
    return EXIT_OK


def cmd_select_k(args):
    try:
        Y = load_panel_csv(args.data)
    except (OSError, ValueError) as exc:
        raise CliError(str(exc)) from None
    n_max = min(args.n, min(Y.p, Y.T) - 1)
    if args.penalty == "eigen_ratio":
        result = select_k_eigen_ratio(Y.values, n_max)
    else:
        result = select_k_ic(Y.values, n_max, penalty=args.penalty)
    os.makedirs(args.output, exist_ok=True)
    curve_path = os.path.join(args.output, "criterion.csv")
    with open(curve_path, "w") as fh:
        fh.write("k,criterion\n")
        for k, v in zip(result.ks, result.criterion_values):
            fh.write(f"{k},{v!r}\n")
    _write_json(os.path.join(args.output, "select_k.json"), {
        "k_hat": result.k_hat,
        "penalty": result.penalty,
        "ks": list(result.ks),
        "criterion_values": list(result.criterion_values),
    })
    print(f"k_hat={result.k_hat} ({result.penalty})")
    return EXIT_OK


def cmd_classify(args):
    try:
        Y = load_panel_csv(args.data)
        labels = lda_mod.load_labels(args.labels)
    except (OSError, ValueError) as exc:
        raise CliError(str(exc)) from None
    if len(labels) != Y.T:
        raise CliError(f"{len(labels)} labels for {Y.T} data columns")
    specs = [
        lda_mod.LdaSpec(name="lda1", cov_method="method1", k=args.k, s_max=args.s_max),
        lda_mod.LdaSpec(name="lda2", cov_method="method2", k=args.k, s_max=args.s_max),
    ]
    try:
        results = lda_mod.misclassification_rate(
            Y.values, labels, specs, n_splits=args.splits, seed=args.seed
        )
    except ValueError as exc:
        raise CliError(str(exc)) from None
    os.makedirs(args.output, exist_ok=True)
    with open(os.path.join(args.output, "classify.json"), "w") as fh:
        fh.write(lda_mod.rates_to_json(results, args.splits))
        fh.write("\n")
    for name, (mean, sd) in sorted(results.items()):
        print(f"{name}: {mean:.3f}({sd:.3f})")
    return EXIT_OK


def cmd_fisher(args):
    try:
        with open(args.model) as fh:
            model = json.load(fh)
        loadings = np.asarray(model["loadings"], dtype=float)
        idio = np.asarray(model["idio_cov"], dtype=float)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read model file: {exc}") from None
    subset = _parse_subset(args.subset, loadings.shape[0])
    try:
        report = fisher_dominance(loadings, idio, subset)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise CliError(str(exc)) from None
    payload = {
        "min_eig_diff": report.min_eig_diff,
        "block_diagonal": report.block_diagonal,
        "dominates": report.min_eig_diff >= -1e-10,
        "info_full": report.info_full.tolist(),
        "info_subset": report.info_subset.tolist(),
    }
    if args.output:
        os.makedirs(args.output, exist_ok=True)
        _write_json(os.path.join(args.output, "fisher.json"), payload)
    print(json.dumps(payload, sort_keys=True))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="factorcov",
        description="Factor-model covariance estimation for a subset of variables",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate the subset covariance from a CSV panel")
    est.add_argument("data", help="CSV panel, variables in rows")
    est.add_argument("--method", default="2", choices=["1", "2", "dc"])
    est.add_argument("--subset", default=None, help="e.g. 0..49,100 (default: all variables)")
    est.add_argument("--k", default="auto", help="number of factors or 'auto'")
    est.add_argument("--k-max", type=int, default=15, help="upper bound for --k auto")
    est.add_argument("--c", default="auto", help="threshold constant or 'auto'")
    est.add_argument("--m", type=int, default=None, help="group count for --method dc")
    est.add_argument("--rate-mode", default="paper_literal",
                     choices=["paper_literal", "theory_aware"])
    est.add_argument("--threads", type=int, default=None)
    est.add_argument("--output", default=".", help="directory for result files")
    est.set_defaults(func=cmd_estimate)

    simp = sub.add_parser("simulate", help="Monte-Carlo comparison table")
    simp.add_argument("--s", type=int, required=True)
    simp.add_argument("--p", type=int, required=True)
    simp.add_argument("--t", type=int, required=True)
    simp.add_argument("--k", type=int, default=3)
    simp.add_argument("--reps", type=int, default=50)
    simp.add_argument("--seed", type=int, default=0)
    simp.add_argument("--c", default="1.0", help="threshold constant or 'auto'")
    simp.add_argument("--m", type=int, default=None, help="add a divide-and-conquer column")
    simp.add_argument("--heteroscedastic", action="store_true")
    simp.add_argument("--rate-mode", default="paper_literal",
                      choices=["paper_literal", "theory_aware"])
    simp.add_argument("--output", default=".")
    simp.set_defaults(func=cmd_simulate)

    bench = sub.add_parser("benchmark", help="accuracy/time comparison incl. divide-and-conquer")
    bench.add_argument("--t-grid", default="200,350,500")
    bench.add_argument("--reps", type=int, default=3)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--c", default="1.0")
    bench.add_argument("--threads", type=int, default=None)
    bench.add_argument("--output", default=".")
    bench.set_defaults(func=cmd_benchmark)

    sel = sub.add_parser("select-k", help="choose the number of factors")
    sel.add_argument("data")
    sel.add_argument("--n", type=int, default=15, help="largest candidate k")
    sel.add_argument("--penalty", default="gp1", choices=["gp1", "gp2", "eigen_ratio"])
    sel.add_argument("--output", default=".")
    sel.set_defaults(func=cmd_select_k)

    cls = sub.add_parser("classify", help="discriminant comparison over random splits")
    cls.add_argument("data")
    cls.add_argument("labels", help="one 0/1 per line, aligned with data columns")
    cls.add_argument("--k", type=int, default=3)
    cls.add_argument("--s-max", type=int, default=20)
    cls.add_argument("--splits", type=int, default=50)
    cls.add_argument("--seed", type=int, default=0)
    cls.add_argument("--output", default=".")
    cls.set_defaults(func=cmd_classify)

    fish = sub.add_parser("fisher", help="factor-information dominance report")
    fish.add_argument("model", help="JSON file with 'loadings' and 'idio_cov'")
    fish.add_argument("--subset", required=True)
    fish.add_argument("--output", default=None)
    fish.set_defaults(func=cmd_fisher)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except (np.linalg.LinAlgError, FloatingPointError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
