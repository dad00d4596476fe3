"""Command-line interface.

Subcommands: complexity, train, predict, cv, export-lp, benchmark.
Exit codes: 0 success, 1 usage error, 2 runtime error. All randomness
derives from --seed (default 42).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__
from .cd_solver import CDConfig, train_cd
from .complexity import build_penalties, parse_penalty_mode, penalty_report_csv
from .data import Dataset, Standardizer, load_csv, load_libsvm, standardize
from .errors import CapsvmError
from .harness import (
    CVReport,
    GridSpec,
    benchmark_table,
    parse_baseline_csv,
    parse_report_csv,
    report_to_csv,
    run_cv,
)
from .kernels import build_stack, parse_kernel_specs
from .lp_solver import build_lp, export_lp_file, train_lp
from .model import deserialize, from_coefs, predict_raw, serialize, support_count


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit code 1 instead of argparse's 2
        raise _UsageError(message)


def _load_dataset(path: str, fmt: str, label_column: int) -> Dataset:
    if fmt == "libsvm" or (fmt == "auto" and not path.endswith(".csv")):
        return load_libsvm(path)
    return load_csv(path, label_column)


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="dataset file (LIBSVM or CSV)")
    p.add_argument("--format", choices=("auto", "libsvm", "csv"), default="auto")
    p.add_argument("--label-column", type=int, default=-1,
                   help="CSV label column index (default: last)")


def _add_penalty_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kernels", required=True,
                   help="whitespace-separated kernel specs, e.g. 'poly:1-10' or "
                        "'linear rbf:1e-6..1e0 sigmoid:1,0'")
    p.add_argument("--penalty", default="trace",
                   help="penalty mode: trace | polydim | local:<s> | uniform")
    p.add_argument("--lambda", dest="lam", type=float, default=0.01)
    p.add_argument("--beta", type=float, default=0.001)


def _prepared(args) -> tuple[Dataset, Standardizer]:
    data = _load_dataset(args.data, args.format, args.label_column)
    if getattr(args, "no_standardize", False):
        return data, Standardizer.identity(data.num_features)
    train, _, rec = standardize(data)
    return train, rec


def _cmd_complexity(args) -> int:
    data, _ = _prepared(args)
    specs = parse_kernel_specs(args.kernels)
    stack = build_stack(specs, data)
    mode, s = parse_penalty_mode(args.penalty)
    pen = build_penalties(stack, mode, args.lam, args.beta,
                          num_features=data.num_features, s=s)
    text = penalty_report_csv(stack, pen)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_train(args) -> int:
    data, rec = _prepared(args)
    specs = parse_kernel_specs(args.kernels)
    stack = build_stack(specs, data)
    mode, s = parse_penalty_mode(args.penalty)
    pen = build_penalties(stack, mode, args.lam, args.beta,
                          num_features=data.num_features, s=s)
    if args.solver == "lp":
        coefs, solution = train_lp(stack, data.labels, pen, max_pivots=args.max_pivots)
        if solution.status != "optimal":
            print(f"error: LP status {solution.status}", file=sys.stderr)
            return 2
        objective = solution.objective
    else:
        config = CDConfig(tol=args.tol, max_steps=args.max_steps)
        coefs, trace = train_cd(stack, data.labels, pen, config)
        objective = trace.final_objective
        if args.trace_csv:
            with open(args.trace_csv, "w", encoding="utf-8") as fh:
                fh.write(trace.to_csv())
    model = from_coefs(coefs, data, specs, rec)
    serialize(model, args.out)
    ncoef, nsv = support_count(model)
    print(f"objective {float(objective)!r}  coefficients {ncoef}  support vectors {nsv}")
    return 0


def _cmd_predict(args) -> int:
    model = deserialize(args.model)
    data = _load_dataset(args.data, args.format, args.label_column)
    raw = predict_raw(model, data)
    labels = np.where(raw - model.threshold >= 0.0, 1, -1)
    lines = ["index,raw,label"]
    lines += [f"{i},{float(r)!r},{int(l)}" for i, (r, l) in enumerate(zip(raw, labels))]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_export_lp(args) -> int:
    data, _ = _prepared(args)
    specs = parse_kernel_specs(args.kernels)
    stack = build_stack(specs, data)
    mode, s = parse_penalty_mode(args.penalty)
    pen = build_penalties(stack, mode, args.lam, args.beta,
                          num_features=data.num_features, s=s)
    export_lp_file(build_lp(stack, data.labels, pen), args.out)
    print(f"wrote {args.out}")
    return 0


def _grid_values(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.replace(",", " ").split())


def _cmd_cv(args) -> int:
    data = _load_dataset(args.data, args.format, args.label_column)
    decades = tuple(10.0 ** -i for i in range(7))
    lambdas = _grid_values(args.lambdas) if args.lambdas else decades
    betas = _grid_values(args.betas) if args.betas else decades
    mode, s_single = parse_penalty_mode(args.penalty)
    s_grid = None
    if mode == "local":
        s_grid = _grid_values(args.s_grid) if args.s_grid else (
            (s_single,) if s_single is not None else None)
    grid = GridSpec(
        lambdas=lambdas, betas=betas, penalty_mode=mode, solver=args.solver,
        kernels=args.kernels, local_s_grid=s_grid, seed=args.seed,
    )
    config = CDConfig(tol=args.tol, max_steps=args.max_steps)
    report = run_cv(data, grid, num_folds=args.folds, cd_config=config,
                    timing=args.timing == "wall")
    text = report_to_csv(report, args.name, args.method,
                         zero_timing=args.timing == "zero")
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(text)
    lam, beta, s = report.chosen
    print(f"chosen lambda={lam:g} beta={beta:g} s={s}")
    print(f"test error {report.mean_error:.2f}% ({report.std_error:.2f})  "
          f"support vectors {report.mean_svs:.1f} ({report.std_svs:.1f})")
    return 0


def _cmd_benchmark(args) -> int:
    reports: list[tuple[str, CVReport]] = []
    methods: list[str] = []
    for path in args.reports:
        with open(path, "r", encoding="utf-8") as fh:
            for (dataset, method), folds in parse_report_csv(fh.read()).items():
                rep = CVReport.from_folds(folds, (folds[0].lam, folds[0].beta, folds[0].s))
                reports.append((dataset, rep))
                methods.append(method)
    external = None
    if args.external:
        with open(args.external, "r", encoding="utf-8") as fh:
            external = parse_baseline_csv(fh.read())
    table, csv_twin = benchmark_table(reports, external, method_names=methods)
    sys.stdout.write(table)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(table)
    if args.csv_out:
        with open(args.csv_out, "w", encoding="utf-8") as fh:
            fh.write(csv_twin)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="capsvm", description=__doc__)
    parser.add_argument("--version", action="version", version=f"capsvm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("complexity", help="per-family penalty report (CSV)")
    _add_data_args(p)
    _add_penalty_args(p)
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_complexity)

    p = sub.add_parser("train", help="train a model and write it as JSON")
    _add_data_args(p)
    _add_penalty_args(p)
    p.add_argument("--solver", choices=("cd", "lp"), default="cd")
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--max-pivots", type=int, default=50_000)
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--trace-csv", default=None, help="write the CD step trace as CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="score a dataset with a trained model")
    _add_data_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--out", default=None, help="CSV output (default: stdout)")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("cv", help="cross-validated benchmark run")
    _add_data_args(p)
    _add_penalty_args(p)
    p.add_argument("--lambdas", default=None, help="grid override, e.g. '1 0.1 0.01'")
    p.add_argument("--betas", default=None)
    p.add_argument("--s-grid", default=None, help="s grid for local mode")
    p.add_argument("--solver", choices=("cd", "lp"), default="cd")
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--max-steps", type=int, default=1000)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--name", default="dataset", help="dataset name in the report")
    p.add_argument("--method", default="capsvm", help="method name in the report")
    p.add_argument("--timing", choices=("zero", "wall"), default="zero",
                   help="zero keeps the report byte-reproducible (default)")
    p.add_argument("--out", required=True, help="report CSV path")
    p.set_defaults(func=_cmd_cv)

    p = sub.add_parser("export-lp", help="write the training LP in CPLEX LP format")
    _add_data_args(p)
    _add_penalty_args(p)
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export_lp)

    p = sub.add_parser("benchmark", help="merge report CSVs into a results table")
    p.add_argument("--reports", nargs="+", required=True, help="cv report CSVs")
    p.add_argument("--external", default=None,
                   help="imported baseline CSV (dataset,err_mean,err_std,sv_mean,sv_std)")
    p.add_argument("--out", default=None, help="write the text table here too")
    p.add_argument("--csv-out", default=None, help="machine-readable twin")
    p.set_defaults(func=_cmd_benchmark)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except CapsvmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
