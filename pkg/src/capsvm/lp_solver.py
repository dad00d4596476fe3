"""Linear-programming route: variable splitting, internal simplex, LP export.

The training problem becomes, with a = a+ - a- and slack xi:

    min  (1/m) sum_i xi_i + sum_{k,j} Lambda_k (a+[k,j] + a-[k,j])
    s.t. xi_i + sum_{k,j} (a+[k,j] - a-[k,j]) y_i y_j G_k[i,j] >= 1
         all variables >= 0.

Columns are laid out [a+ (k-major) | a- (k-major) | xi]. The internal solver
is a dense two-phase revised simplex, practical to roughly m <= 200 and
p <= 5; bigger instances should use export_lp_file plus an external solver,
or coordinate descent.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .complexity import PenaltyVector
from .errors import ExtractionError, NumericError, ParseError
from .kernels import GramStack
from .objective import CoefMatrix

_PIVOT_TOL = 1e-9      # reduced-cost / ratio-test eligibility
_FEAS_TOL = 1e-7       # feasibility checks
_DEGENERATE_LIMIT = 50 # consecutive degenerate pivots before Bland's rule
_REFACTOR_EVERY = 64   # basis-inverse refresh cadence


@dataclass
class LPProblem:
    """min objective . x  s.t.  constraint_matrix @ x >= rhs,  x >= 0."""

    num_vars: int
    objective: np.ndarray
    constraint_matrix: np.ndarray
    rhs: np.ndarray

    @property
    def num_constraints(self) -> int:
        return self.rhs.shape[0]


@dataclass
class LPSolution:
    var_values: np.ndarray
    objective: float
    status: str  # optimal | iteration_limit | infeasible | unbounded
    pivots: int


def build_lp(stack: GramStack, labels: np.ndarray, penalties: PenaltyVector) -> LPProblem:
    """Assemble the split-variable LP for one training instance."""
    p, m = stack.p, stack.m
    y = np.asarray(labels, dtype=float)
    if y.shape != (m,):
        raise ValueError(f"labels shape {y.shape} does not match m={m}")
    if penalties.effective.shape[0] != p:
        raise ValueError(f"penalty vector has {penalties.effective.shape[0]} entries for p={p}")
    n = 2 * p * m + m
    c = np.empty(n)
    c[: p * m] = np.repeat(penalties.effective, m)
    c[p * m : 2 * p * m] = c[: p * m]
    c[2 * p * m :] = 1.0 / m

    yy = np.outer(y, y)
    A = np.empty((m, n))
    for k in range(p):
        block = yy * stack.grams[k]
        A[:, k * m : (k + 1) * m] = block
        A[:, (p + k) * m : (p + k + 1) * m] = -block
    A[:, 2 * p * m :] = np.eye(m)
    return LPProblem(n, c, A, np.ones(m))


def _entering(red: np.ndarray, allowed: np.ndarray, bland: bool) -> int:
    eligible = allowed & (red < -_PIVOT_TOL)
    if not eligible.any():
        return -1
    if bland:
        return int(np.flatnonzero(eligible)[0])
    masked = np.where(eligible, red, np.inf)
    return int(masked.argmin())


def _leaving(x_b: np.ndarray, d: np.ndarray, basis: np.ndarray) -> int:
    pos = d > _PIVOT_TOL
    if not pos.any():
        return -1
    ratios = np.full(d.shape[0], np.inf)
    ratios[pos] = np.maximum(x_b[pos], 0.0) / d[pos]
    theta = ratios.min()
    ties = np.flatnonzero(ratios <= theta + 1e-12)
    # smallest basis-variable index among the tied rows (Bland-compatible)
    return int(ties[np.argmin(basis[ties])])


def _simplex_core(
    A: np.ndarray,
    b: np.ndarray,
    c: np.ndarray,
    basis: np.ndarray,
    allowed: np.ndarray,
    max_pivots: int,
    pivots_used: int,
) -> tuple[str, np.ndarray, np.ndarray, int]:
    """Run one simplex phase; returns (status, basis, x_B, pivots)."""
    m = b.shape[0]
    b_inv = np.linalg.inv(A[:, basis])
    x_b = b_inv @ b
    consecutive_degenerate = 0
    pivots = pivots_used
    since_refactor = 0
    while True:
        if pivots >= max_pivots:
            return "iteration_limit", basis, x_b, pivots
        y_row = c[basis] @ b_inv
        red = c - y_row @ A
        q = _entering(red, allowed, bland=consecutive_degenerate >= _DEGENERATE_LIMIT)
        if q < 0:
            return "optimal", basis, x_b, pivots
        d = b_inv @ A[:, q]
        leave = _leaving(x_b, d, basis)
        if leave < 0:
            return "unbounded", basis, x_b, pivots
        theta = max(x_b[leave], 0.0) / d[leave]
        consecutive_degenerate = consecutive_degenerate + 1 if theta <= 1e-12 else 0

        x_b = x_b - theta * d
        x_b[leave] = theta
        piv = d[leave]
        b_inv[leave] /= piv
        d_rest = d.copy()
        d_rest[leave] = 0.0
        b_inv -= np.outer(d_rest, b_inv[leave])
        basis[leave] = q
        pivots += 1
        since_refactor += 1
        if since_refactor >= _REFACTOR_EVERY:
            b_inv = np.linalg.inv(A[:, basis])
            x_b = b_inv @ b
            since_refactor = 0


def simplex_solve(problem: LPProblem, max_pivots: int = 50_000) -> LPSolution:
    """Two-phase revised simplex with Dantzig pricing and a Bland fallback.

    Phase 1 minimizes artificial variables; degeneracy (50 consecutive
    zero-length pivots) switches pricing to Bland's rule for termination.
    Rows and columns are inf-norm equilibrated first: kernel columns span
    many orders of magnitude, and the fixed pivot tolerances are only
    meaningful on a scaled matrix.
    """
    n = problem.num_vars
    m = problem.num_constraints
    A_raw = np.asarray(problem.constraint_matrix, dtype=float)
    b_raw = np.asarray(problem.rhs, dtype=float)
    c_raw = np.asarray(problem.objective, dtype=float)

    row_scale = np.abs(A_raw).max(axis=1)
    row_scale[row_scale == 0.0] = 1.0
    A_in = A_raw / row_scale[:, None]
    col_scale = np.abs(A_in).max(axis=0)
    col_scale[col_scale == 0.0] = 1.0
    A_in = A_in / col_scale[None, :]
    b_in = b_raw / row_scale
    c_in = c_raw / col_scale

    # standard form: A x - s = b with s >= 0; flip rows to make rhs nonnegative
    A_eq = np.hstack([A_in, -np.eye(m)])
    b_eq = b_in.copy()
    flip = b_eq < 0
    A_eq[flip] *= -1.0
    b_eq[flip] *= -1.0

    art_rows = np.flatnonzero(~flip)  # rows whose surplus has coefficient -1
    n_art = art_rows.shape[0]
    A_full = np.hstack([A_eq, np.zeros((m, n_art))])
    basis = np.empty(m, dtype=np.int64)
    for t, i in enumerate(art_rows):
        A_full[i, n + m + t] = 1.0
        basis[i] = n + m + t
    for i in np.flatnonzero(flip):
        basis[i] = n + i  # flipped surplus now has coefficient +1

    total = n + m + n_art
    pivots = 0

    if n_art:
        c1 = np.zeros(total)
        c1[n + m :] = 1.0
        allowed1 = np.ones(total, dtype=bool)
        status, basis, x_b, pivots = _simplex_core(
            A_full, b_eq, c1, basis, allowed1, max_pivots, pivots
        )
        if status != "optimal":
            return _solution_from_basis(problem, basis, x_b, status, pivots, col_scale)
        if float(c1[basis] @ x_b) > _FEAS_TOL:
            return _solution_from_basis(problem, basis, x_b, "infeasible", pivots, col_scale)
        basis, x_b = _drive_out_artificials(A_full, b_eq, basis, n + m)

    c2 = np.zeros(total)
    c2[:n] = c_in
    allowed2 = np.ones(total, dtype=bool)
    allowed2[n + m :] = False
    status, basis, x_b, pivots = _simplex_core(
        A_full, b_eq, c2, basis, allowed2, max_pivots, pivots
    )
    sol = _solution_from_basis(problem, basis, x_b, status, pivots, col_scale)
    if sol.status == "optimal":
        # feasibility measured row-relative: raw rows span many magnitudes
        residual = (A_raw @ sol.var_values - b_raw) / row_scale
        if residual.min() < -_FEAS_TOL or sol.var_values.min() < -1e-9:
            raise NumericError(
                f"simplex reported optimal but the point is infeasible "
                f"(min scaled residual {residual.min():.3e})"
            )
    return sol


def _drive_out_artificials(
    A_full: np.ndarray, b_eq: np.ndarray, basis: np.ndarray, n_real: int
) -> tuple[np.ndarray, np.ndarray]:
    """Pivot zero-level artificial variables out of the basis where possible."""
    b_inv = np.linalg.inv(A_full[:, basis])
    for row in range(basis.shape[0]):
        if basis[row] < n_real:
            continue
        row_vec = b_inv[row] @ A_full[:, :n_real]
        candidates = np.flatnonzero(np.abs(row_vec) > _FEAS_TOL)
        candidates = [q for q in candidates if q not in set(basis.tolist())]
        if not candidates:
            continue  # redundant row; artificial stays basic at level zero
        q = int(candidates[0])
        d = b_inv @ A_full[:, q]
        piv = d[row]
        b_inv[row] /= piv
        d_rest = d.copy()
        d_rest[row] = 0.0
        b_inv -= np.outer(d_rest, b_inv[row])
        basis[row] = q
    x_b = b_inv @ b_eq
    return basis, x_b


def _solution_from_basis(
    problem: LPProblem, basis: np.ndarray, x_b: np.ndarray, status: str, pivots: int,
    col_scale: np.ndarray,
) -> LPSolution:
    x = np.zeros(problem.num_vars)
    for idx, val in zip(basis, x_b):
        if idx < problem.num_vars:
            x[idx] = val / col_scale[idx]  # undo the equilibration substitution
    return LPSolution(x, float(problem.objective @ x), status, pivots)


def extract_model(solution: LPSolution, shape: tuple[int, int]) -> CoefMatrix:
    """Recover signed coefficients a = a+ - a- from an optimal solution.

    Complementarity (min(a+, a-) ~ 0) holds at optima; overlap beyond the
    tolerance is removed by the subtraction itself. Coordinates whose
    max(a+, a-) <= 1e-7 are numeric noise and become exact zeros.
    """
    if solution.status != "optimal":
        raise ExtractionError(f"cannot extract a model from status {solution.status!r}")
    return _extract_coefs(solution.var_values, shape)


def _extract_coefs(var_values: np.ndarray, shape: tuple[int, int]) -> CoefMatrix:
    p, m = shape
    ap = var_values[: p * m].reshape(p, m)
    am = var_values[p * m : 2 * p * m].reshape(p, m)
    alpha = np.where(np.maximum(ap, am) > _FEAS_TOL, ap - am, 0.0)
    return CoefMatrix(alpha)


def train_lp(
    stack: GramStack,
    labels: np.ndarray,
    penalties: PenaltyVector,
    max_pivots: int = 50_000,
) -> tuple[CoefMatrix, LPSolution]:
    """build -> solve -> extract; non-optimal status is surfaced, not raised."""
    problem = build_lp(stack, labels, penalties)
    solution = simplex_solve(problem, max_pivots=max_pivots)
    coefs = _extract_coefs(solution.var_values, (stack.p, stack.m))
    return coefs, solution


# ---------------------------------------------------------------------------
# CPLEX LP text format (subset: Minimize / Subject To / Bounds / End)

def _infer_layout(problem: LPProblem) -> tuple[int, int]:
    m = problem.num_constraints
    p, rem = divmod(problem.num_vars - m, 2 * m)
    if rem != 0 or p < 1:
        raise ValueError(
            f"problem with {problem.num_vars} vars / {m} rows is not a split-variable instance"
        )
    return p, m


def variable_names(p: int, m: int) -> list[str]:
    names = [f"ap_{k}_{j}" for k in range(p) for j in range(m)]
    names += [f"am_{k}_{j}" for k in range(p) for j in range(m)]
    names += [f"xi_{i}" for i in range(m)]
    return names


def _format_terms(coeffs: np.ndarray, names: list[str], per_line: int = 8) -> list[str]:
    terms = []
    for coef, name in zip(coeffs, names):
        if coef == 0.0:
            continue
        sign = "+" if coef >= 0 else "-"
        terms.append(f"{sign} {float(abs(coef))!r} {name}")
    if not terms:
        terms = ["+ 0 " + names[0]]
    lines = []
    for start in range(0, len(terms), per_line):
        lines.append(" ".join(terms[start : start + per_line]))
    return lines


def export_lp_file(problem: LPProblem, path: str) -> None:
    """Write the problem in CPLEX LP text form; coefficients round-trip exactly.

    Floats are printed with repr (shortest string that parses back to the
    identical double), so re-reading the file reproduces the problem
    bit-for-bit.
    """
    p, m = _infer_layout(problem)
    names = variable_names(p, m)
    out = ["Minimize"]
    obj_lines = _format_terms(problem.objective, names)
    out.append(" obj: " + obj_lines[0])
    out.extend("      " + line for line in obj_lines[1:])
    out.append("Subject To")
    for i in range(m):
        row_lines = _format_terms(problem.constraint_matrix[i], names)
        out.append(f" c{i}: " + row_lines[0])
        out.extend("      " + line for line in row_lines[1:])
        out[-1] = out[-1] + f" >= {float(problem.rhs[i])!r}"
    out.append("Bounds")
    out.extend(f" {name} >= 0" for name in names)
    out.append("End")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")


_NAME_RE = re.compile(r"^(ap|am|xi)_(\d+)(?:_(\d+))?$")


def _name_index(name: str, p: int, m: int) -> int:
    match = _NAME_RE.match(name)
    if not match:
        raise ParseError(f"unknown variable name {name!r}")
    kind, first, second = match.group(1), int(match.group(2)), match.group(3)
    if kind == "xi":
        if second is not None:
            raise ParseError(f"malformed xi name {name!r}")
        return 2 * p * m + first
    if second is None:
        raise ParseError(f"malformed coefficient name {name!r}")
    base = 0 if kind == "ap" else p * m
    return base + first * m + int(second)


def read_lp_file(path: str) -> LPProblem:
    """Parse a file produced by export_lp_file back into an LPProblem."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()

    sections: dict[str, list[str]] = {"minimize": [], "subject to": [], "bounds": []}
    current: str | None = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        low = line.lower()
        if low in ("minimize", "subject to", "bounds"):
            current = low
            continue
        if low == "end":
            break
        if current is None:
            raise ParseError(f"content before any section header: {line!r}")
        sections[current].append(line)

    # determine the layout from the variable names in use
    all_names = re.findall(r"\b(?:ap|am|xi)_\d+(?:_\d+)?\b", text)
    max_k = max((int(n.split("_")[1]) for n in all_names if not n.startswith("xi")), default=0)
    max_i = max((int(n.split("_")[1]) for n in all_names if n.startswith("xi")), default=-1)
    if max_i < 0:
        raise ParseError("no xi variables found; not a split-variable LP")
    p, m = max_k + 1, max_i + 1
    n = 2 * p * m + m

    def parse_terms(body: str, target: np.ndarray) -> str | None:
        tokens = body.split()
        rhs: str | None = None
        idx = 0
        while idx < len(tokens):
            tok = tokens[idx]
            if tok == ">=":
                rhs = tokens[idx + 1]
                idx += 2
                continue
            if tok in ("+", "-"):
                sign = 1.0 if tok == "+" else -1.0
                value = float(tokens[idx + 1])
                name = tokens[idx + 2]
                target[_name_index(name, p, m)] += sign * value
                idx += 3
                continue
            raise ParseError(f"unexpected token {tok!r} in {body!r}")
        return rhs

    objective = np.zeros(n)
    obj_body = " ".join(sections["minimize"])
    if ":" in obj_body:
        obj_body = obj_body.split(":", 1)[1]
    parse_terms(obj_body, objective)

    rows: list[tuple[np.ndarray, float]] = []
    pending = ""
    for line in sections["subject to"]:
        if re.match(r"^c\d+:", line):
            if pending:
                rows.append(_finish_row(pending, parse_terms, n))
            pending = line.split(":", 1)[1]
        else:
            pending += " " + line
    if pending:
        rows.append(_finish_row(pending, parse_terms, n))
    if len(rows) != m:
        raise ParseError(f"expected {m} constraints, parsed {len(rows)}")
    A = np.vstack([r[0] for r in rows])
    rhs = np.array([r[1] for r in rows])
    return LPProblem(n, objective, A, rhs)


def _finish_row(body: str, parse_terms, n: int) -> tuple[np.ndarray, float]:
    row = np.zeros(n)
    rhs = parse_terms(body, row)
    if rhs is None:
        raise ParseError(f"constraint without a >= right-hand side: {body!r}")
    return row, float(rhs)
