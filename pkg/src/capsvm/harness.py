"""Cross-validation benchmark harness.

Protocol: the data is dealt into F seeded folds; for run i, fold i is the
test set, fold (i+1 mod F) the validation set, and the rest the training
set. Features are z-scored on each training split only. Every grid point is
trained on each training split and scored on its validation split; the
single point with minimum mean validation error wins (ties: smaller lambda,
then beta, then s). Each fold is then retrained at the winning setting and
scored on its test fold.
"""

from __future__ import annotations

import io
import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .cd_solver import CDConfig, train_cd
from .complexity import PenaltyVector, build_penalties, parse_penalty_mode, spectrum_cache
from .data import Dataset, make_folds, split_cv, standardize
from .errors import ConfigError, HarnessError
from .kernels import GramStack, build_stack, cross_gram, parse_kernel_specs
from .lp_solver import train_lp
from .objective import CoefMatrix

logger = logging.getLogger(__name__)

PRUNE_TOL = 1e-7
LP_VARIABLE_CAP = 2500


@dataclass(frozen=True)
class GridSpec:
    """Hyperparameter grid for one cross-validated run."""

    lambdas: tuple[float, ...]
    betas: tuple[float, ...]
    penalty_mode: str = "trace"       # trace | polydim | local | uniform
    solver: str = "cd"                # cd | lp
    kernels: str = "poly:1-10"
    local_s_grid: tuple[float, ...] | None = None
    seed: int = 42

    def __post_init__(self) -> None:
        if not self.lambdas or not self.betas:
            raise ConfigError("lambda and beta grids must be nonempty")
        if self.solver not in ("cd", "lp"):
            raise ConfigError(f"unknown solver {self.solver!r}")
        if self.penalty_mode == "local" and not self.local_s_grid:
            raise ConfigError("local penalty mode needs a nonempty s grid")

    def points(self) -> list[tuple[float, float, float | None]]:
        s_values: tuple[float | None, ...] = (None,)
        if self.penalty_mode == "local":
            assert self.local_s_grid is not None
            s_values = tuple(self.local_s_grid)
        return [
            (lam, beta, s)
            for lam in self.lambdas
            for beta in self.betas
            for s in s_values
        ]


def default_grid(**overrides) -> GridSpec:
    """The benchmark protocol grid: lambda, beta over {10^-i : i = 0..6}."""
    decades = tuple(10.0 ** -i for i in range(7))
    args = dict(lambdas=decades, betas=decades)
    args.update(overrides)
    return GridSpec(**args)


@dataclass(frozen=True)
class FoldResult:
    fold: int
    lam: float
    beta: float
    s: float | None
    test_error_pct: float
    num_svs: int
    train_seconds: float


@dataclass
class CVReport:
    folds: list[FoldResult]
    mean_error: float
    std_error: float
    mean_svs: float
    std_svs: float
    chosen: tuple[float, float, float | None]

    @classmethod
    def from_folds(
        cls, folds: list[FoldResult], chosen: tuple[float, float, float | None]
    ) -> "CVReport":
        errs = np.array([f.test_error_pct for f in folds])
        svs = np.array([f.num_svs for f in folds], dtype=float)
        return cls(
            folds,
            float(errs.mean()),
            float(errs.std(ddof=1)) if len(folds) > 1 else 0.0,
            float(svs.mean()),
            float(svs.std(ddof=1)) if len(folds) > 1 else 0.0,
            chosen,
        )


@dataclass
class _FoldContext:
    """Everything reusable across grid points within one fold."""

    stack: GramStack
    y_train: np.ndarray
    cross_val: np.ndarray        # (p, |val|, |train|)
    y_val: np.ndarray
    cross_test: np.ndarray       # (p, |test|, |train|)
    y_test: np.ndarray
    num_features: int
    spectra: object | None = None
    penalty_cache: dict = field(default_factory=dict)

    def penalties(self, mode: str, lam: float, beta: float, s: float | None) -> PenaltyVector:
        key = (mode, lam, beta, s)
        if key not in self.penalty_cache:
            self.penalty_cache[key] = build_penalties(
                self.stack, mode, lam, beta,
                num_features=self.num_features, s=s, cache=self.spectra,
            )
        return self.penalty_cache[key]


def _prepare_fold(dataset: Dataset, specs, mode: str, tr, va, te) -> _FoldContext:
    train_raw = dataset.subset(tr)
    val_raw = dataset.subset(va)
    test_raw = dataset.subset(te)
    train, (val, test), _rec = standardize(train_raw, [val_raw, test_raw])
    stack = build_stack(specs, train)
    cross_val = np.stack(
        [cross_gram(spec, train.features, val) for spec in stack.specs]
    )
    cross_test = np.stack(
        [cross_gram(spec, train.features, test) for spec in stack.specs]
    )
    ctx = _FoldContext(
        stack, train.labels, cross_val, val.labels, cross_test, test.labels,
        dataset.num_features,
    )
    if mode == "local":
        ctx.spectra = spectrum_cache(stack)
    return ctx


def _train_point(
    ctx: _FoldContext, grid: GridSpec, pen: PenaltyVector,
    cd_config: CDConfig | None, lp_max_pivots: int,
) -> CoefMatrix:
    if grid.solver == "lp":
        num_vars = 2 * ctx.stack.p * ctx.stack.m + ctx.stack.m
        if num_vars > LP_VARIABLE_CAP:
            raise ConfigError(
                f"LP would have {num_vars} variables (cap {LP_VARIABLE_CAP}); "
                "use the cd solver or an exported LP file"
            )
        coefs, solution = train_lp(ctx.stack, ctx.y_train, pen, max_pivots=lp_max_pivots)
        if solution.status != "optimal":
            raise HarnessError(f"LP solver returned status {solution.status!r}")
        return coefs
    coefs, _trace = train_cd(ctx.stack, ctx.y_train, pen, cd_config)
    return coefs


def _error_pct(coefs: CoefMatrix, cross: np.ndarray, y_train: np.ndarray,
               y_eval: np.ndarray) -> float:
    # score with the coefficients the shipped model would carry (pruned),
    # so selection, SV counts, and final models stay consistent
    alpha = np.where(np.abs(coefs.alpha) > PRUNE_TOL, coefs.alpha, 0.0)
    raw = np.einsum("kqj,kj->q", cross, alpha * y_train[None, :])
    pred = np.where(raw >= 0.0, 1.0, -1.0)
    return 100.0 * float((pred != y_eval).mean())


def _distinct_svs(coefs: CoefMatrix) -> int:
    return int((np.abs(coefs.alpha) > PRUNE_TOL).any(axis=0).sum())


def run_cv(
    dataset: Dataset,
    grid: GridSpec,
    num_folds: int = 5,
    cd_config: CDConfig | None = None,
    lp_max_pivots: int = 50_000,
    timing: bool = True,
) -> CVReport:
    """Full protocol run; deterministic in grid.seed (timings aside)."""
    specs = parse_kernel_specs(grid.kernels)
    mode, _ = parse_penalty_mode(grid.penalty_mode)
    folds = make_folds(dataset.num_examples, num_folds, grid.seed)
    contexts = []
    for i in range(num_folds):
        tr, va, te = split_cv(folds, i)
        contexts.append(_prepare_fold(dataset, specs, mode, tr, va, te))

    points = grid.points()
    val_errors = np.full((len(points), num_folds), np.nan)
    for pi, (lam, beta, s) in enumerate(points):
        for fi, ctx in enumerate(contexts):
            try:
                pen = ctx.penalties(mode, lam, beta, s)
                coefs = _train_point(ctx, grid, pen, cd_config, lp_max_pivots)
            except (HarnessError, ConfigError) as exc:
                warnings.warn(
                    f"grid point (lambda={lam:g}, beta={beta:g}, s={s}) failed "
                    f"on fold {fi}: {exc}; point excluded"
                )
                val_errors[pi, :] = np.nan
                break
            val_errors[pi, fi] = _error_pct(coefs, ctx.cross_val, ctx.y_train, ctx.y_val)

    means = val_errors.mean(axis=1)
    valid = np.flatnonzero(np.isfinite(means))
    if valid.size == 0:
        raise HarnessError("every grid point failed; nothing to select")
    # ties broken toward smaller lambda, then smaller beta, then smaller s
    def sort_key(pi: int):
        lam, beta, s = points[pi]
        return (means[pi], lam, beta, s if s is not None else 0.0)

    best = min(valid, key=sort_key)
    lam, beta, s = points[best]
    logger.info("selected grid point lambda=%g beta=%g s=%s (mean val error %.3f%%)",
                lam, beta, s, means[best])

    fold_results = []
    for fi, ctx in enumerate(contexts):
        pen = ctx.penalties(mode, lam, beta, s)
        t0 = time.perf_counter()
        coefs = _train_point(ctx, grid, pen, cd_config, lp_max_pivots)
        seconds = time.perf_counter() - t0 if timing else 0.0
        err = _error_pct(coefs, ctx.cross_test, ctx.y_train, ctx.y_test)
        fold_results.append(
            FoldResult(fi, lam, beta, s, err, _distinct_svs(coefs), seconds)
        )
    return CVReport.from_folds(fold_results, (lam, beta, s))


REPORT_HEADER = "dataset,method,fold,lambda,beta,s,test_error_pct,num_svs,train_seconds"


def report_to_csv(report: CVReport, dataset: str, method: str,
                  zero_timing: bool = False) -> str:
    """Per-fold rows in the report schema; zero_timing makes output deterministic."""
    lines = [REPORT_HEADER]
    for f in report.folds:
        s_text = "" if f.s is None else repr(float(f.s))
        seconds = 0.0 if zero_timing else f.train_seconds
        lines.append(
            f"{dataset},{method},{f.fold},{float(f.lam)!r},{float(f.beta)!r},{s_text},"
            f"{float(f.test_error_pct)!r},{f.num_svs},{float(seconds)!r}"
        )
    return "\n".join(lines) + "\n"


def parse_report_csv(text: str) -> dict[tuple[str, str], list[FoldResult]]:
    """Group report rows back into per-(dataset, method) fold lists."""
    rows = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not rows or rows[0] != REPORT_HEADER:
        raise ConfigError("not a report CSV (missing header)")
    out: dict[tuple[str, str], list[FoldResult]] = {}
    for ln in rows[1:]:
        parts = ln.split(",")
        if len(parts) != 9:
            raise ConfigError(f"bad report row: {ln!r}")
        dataset, method, fold, lam, beta, s, err, svs, secs = parts
        out.setdefault((dataset, method), []).append(
            FoldResult(int(fold), float(lam), float(beta),
                       float(s) if s else None, float(err), int(svs), float(secs))
        )
    return out


@dataclass(frozen=True)
class BaselineRow:
    dataset: str
    method: str
    error_mean: float
    error_std: float
    svs_mean: float
    svs_std: float


def parse_baseline_csv(text: str) -> list[BaselineRow]:
    """Imported external results (e.g. an L2-SVM run from another tool).

    Rows are either ``dataset,err_mean,err_std,sv_mean,sv_std`` (method
    defaults to L2-SVM) or ``dataset,method,err_mean,err_std,sv_mean,sv_std``.
    """
    out = []
    for ln in text.strip().splitlines():
        ln = ln.strip()
        if not ln or ln.lower().startswith("dataset,"):
            continue
        parts = [p.strip() for p in ln.split(",")]
        if len(parts) == 5:
            name, vals = parts[0], parts[1:]
            method = "L2-SVM"
        elif len(parts) == 6:
            name, method, vals = parts[0], parts[1], parts[2:]
        else:
            raise ConfigError(f"baseline row needs 5 or 6 fields: {ln!r}")
        e_m, e_s, s_m, s_s = (float(v) for v in vals)
        out.append(BaselineRow(name, method, e_m, e_s, s_m, s_s))
    return out


def benchmark_table(
    reports: list[tuple[str, CVReport]],
    external: list[BaselineRow] | None = None,
    method_names: list[str] | None = None,
) -> tuple[str, str]:
    """Aligned text table plus a machine-readable CSV twin.

    ``reports`` holds (dataset, CVReport) pairs; method names default to
    "this work" or come from method_names (parallel list). Error and SV
    columns show "mean (stdev)" per method.
    """
    cells: dict[tuple[str, str], tuple[float, float, float, float]] = {}
    methods: list[str] = []
    datasets: list[str] = []
    for idx, (name, rep) in enumerate(reports):
        method = method_names[idx] if method_names else "this work"
        key = (name, method)
        if key in cells:
            raise ConfigError(f"duplicate dataset/method pair {key!r}")
        cells[key] = (rep.mean_error, rep.std_error, rep.mean_svs, rep.std_svs)
        if method not in methods:
            methods.append(method)
        if name not in datasets:
            datasets.append(name)
    for row in external or []:
        key = (row.dataset, row.method)
        if key in cells:
            raise ConfigError(f"duplicate dataset/method pair {key!r}")
        cells[key] = (row.error_mean, row.error_std, row.svs_mean, row.svs_std)
        if row.method not in methods:
            methods.append(row.method)
        if row.dataset not in datasets:
            datasets.append(row.dataset)

    def fmt(key, err: bool) -> str:
        if key not in cells:
            return "-"
        e_m, e_s, s_m, s_s = cells[key]
        return f"{e_m:.2f} ({e_s:.2f})" if err else f"{s_m:.1f} ({s_s:.1f})"

    headers = (["dataset"] + [f"err% {m}" for m in methods]
               + [f"#SV {m}" for m in methods])
    body = []
    for name in datasets:
        body.append([name]
                    + [fmt((name, m), True) for m in methods]
                    + [fmt((name, m), False) for m in methods])
    widths = [max(len(h), *(len(r[c]) for r in body)) for c, h in enumerate(headers)]
    buf = io.StringIO()
    buf.write("  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip() + "\n")
    buf.write("  ".join("-" * w for w in widths) + "\n")
    for r in body:
        buf.write("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() + "\n")

    csv_lines = ["dataset,method,error_mean,error_stdev,svs_mean,svs_stdev"]
    for name in datasets:
        for m in methods:
            if (name, m) in cells:
                e_m, e_s, s_m, s_s = cells[(name, m)]
                csv_lines.append(f"{name},{m},{e_m!r},{e_s!r},{s_m!r},{s_s!r}")
    return buf.getvalue(), "\n".join(csv_lines) + "\n"
