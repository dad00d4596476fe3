"""Per-family capacity penalties for the regularizer.

Four estimates of the complexity r_k of a kernel family, feeding the
effective weights Lambda_k = lambda * r_k + beta:

* trace bound        kappa * sqrt(Tr[G]) / m                (any PSD family)
* pseudo-dimension   12 * kappa^2 * sqrt(pi * d_k / m),
                     d_k = C(N + k, k)                      (polynomial only)
* local (spectral)   sqrt((2/m) * sum_j min(s, eig_j))      (PSD families)
* Monte-Carlo        seeded empirical estimate of the mean
                     sup-correlation with ±1 noise          (diagnostic oracle)

The trace and pseudo-dimension forms are implemented exactly as displayed;
they differ by a sqrt(2) factor from the local form at s = infinity, and
that constant gap is intentional.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, ConfigError
from .kernels import GramStack

_MAX_DIM = 2**63 - 1


def trace_penalty(gram: np.ndarray, kappa: float) -> float:
    """kappa * sqrt(Tr[G]) / m, clamping negative diagonal entries to 0."""
    G = np.asarray(gram, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError(f"gram must be square, got shape {G.shape}")
    if kappa < 0:
        raise ValueError(f"kappa must be >= 0, got {kappa}")
    m = G.shape[0]
    tr = float(np.maximum(np.diagonal(G), 0.0).sum())
    return kappa * math.sqrt(tr) / m


def poly_dim(N: int, k: int) -> int:
    """Feature-space dimension of the degree-k polynomial kernel: C(N + k, k).

    Exact integer arithmetic; raises CapacityError beyond the 63-bit range
    (use the trace penalty for such degrees instead).
    """
    if N < 1 or k < 1:
        raise ValueError(f"need N >= 1 and k >= 1, got N={N}, k={k}")
    d = math.comb(N + k, k)
    if d > _MAX_DIM:
        raise CapacityError(
            f"C({N + k},{k}) = {d} exceeds the representable range; "
            "use the trace penalty for this degree"
        )
    return d


def polydim_penalty(kappa: float, N: int, k: int, m: int) -> float:
    """12 * kappa^2 * sqrt(pi * d_k / m) with d_k = C(N + k, k)."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    d = poly_dim(N, k)
    return 12.0 * kappa * kappa * math.sqrt(math.pi * d / m)


def jacobi_eigensystem(
    gram: np.ndarray, rel_tol: float = 1e-10, max_sweeps: int = 60
) -> tuple[np.ndarray, np.ndarray]:
    """All eigenvalues and eigenvectors of a symmetric matrix by cyclic Jacobi.

    Sweeps rotate every (p, q) pair until the off-diagonal Frobenius norm
    drops below rel_tol * ||G||_F. Returns (eigenvalues descending, columns
    of Q in matching order); Q diag(w) Q^T reconstructs the input.
    """
    A = np.array(gram, dtype=float)
    n = A.shape[0]
    if A.ndim != 2 or A.shape[1] != n:
        raise ValueError(f"matrix must be square, got shape {A.shape}")
    if not np.allclose(A, A.T, atol=1e-8, rtol=0.0):
        raise ValueError("matrix is not symmetric within 1e-8")
    A = 0.5 * (A + A.T)
    Q = np.eye(n)
    norm = float(np.linalg.norm(A))
    if norm == 0.0 or n == 1:
        w = np.diagonal(A).copy()
        order = np.argsort(-w, kind="stable")
        return w[order], Q[:, order]

    threshold = rel_tol * norm
    for _ in range(max_sweeps):
        off = math.sqrt(max(float((A * A).sum() - (np.diagonal(A) ** 2).sum()), 0.0))
        if off < threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = float(A[p, q])
                if apq == 0.0:
                    continue
                app, aqq = float(A[p, p]), float(A[q, q])
                diff = aqq - app
                if abs(apq) * 1e12 < abs(diff):
                    t = apq / diff  # tiny rotation; exact formula would overflow
                else:
                    theta = diff / (2.0 * apq)
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p = A[:, p].copy()
                col_q = A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p = A[p, :].copy()
                row_q = A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                # exact 2x2 block: rotation zeroes the (p, q) entry
                A[p, p] = app - t * apq
                A[q, q] = aqq + t * apq
                A[p, q] = 0.0
                A[q, p] = 0.0
                qp = Q[:, p].copy()
                qq = Q[:, q].copy()
                Q[:, p] = c * qp - s * qq
                Q[:, q] = s * qp + c * qq
    w = np.diagonal(A).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], Q[:, order]


@dataclass(frozen=True)
class Spectrum:
    """Descending eigenvalues of one Gram matrix; negatives clamped to 0."""

    eigenvalues: np.ndarray
    clamped: bool


@dataclass(frozen=True)
class SpectrumCache:
    """Eigenvalue vectors per kernel family, all from the same m-point sample."""

    spectra: list[Spectrum]
    source_m: int


def eigenvalues_sym(gram: np.ndarray, cap: int = 2000) -> Spectrum:
    """Spectrum of a symmetric Gram matrix via cyclic Jacobi.

    Eigenvalues below -1e-6 * max are evidence of real asymmetry or PSD
    violation and set the clamped flag; all negatives are clamped to 0.
    """
    G = np.asarray(gram, dtype=float)
    m = G.shape[0]
    if m > cap:
        raise ValueError(f"m={m} exceeds the eigensolver cap {cap}")
    w, _ = jacobi_eigensystem(G)
    top = float(w.max()) if m else 0.0
    clamped = bool((w < -1e-6 * max(top, 0.0)).any()) if top > 0 else bool((w < 0).any())
    return Spectrum(np.maximum(w, 0.0), clamped)


def spectrum_cache(stack: GramStack, cap: int = 2000) -> SpectrumCache:
    spectra = []
    for k, spec in enumerate(stack.specs):
        if not spec.claims_psd:
            raise ConfigError(
                f"local penalty needs PSD kernels; {spec.label()} is not PSD-claiming"
            )
        spectra.append(eigenvalues_sym(stack.grams[k], cap=cap))
    return SpectrumCache(spectra, stack.m)


def local_penalty(spectrum: np.ndarray, m: int, s: float) -> float:
    """sqrt((2/m) * sum_j min(s, eig_j)); s = inf sums every eigenvalue."""
    if s < 0:
        raise ValueError(f"s must be >= 0, got {s}")
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    eig = np.asarray(spectrum, dtype=float)
    total = float(np.minimum(eig, s).sum()) if not math.isinf(s) else float(eig.sum())
    return math.sqrt(2.0 * total / m)


def mc_rademacher(gram: np.ndarray, num_samples: int, seed: int) -> tuple[float, float]:
    """Monte-Carlo estimate of the mean of (1/m) max_j |sum_i sigma_i G[i, j]|.

    The sup over landmark points is restricted to the sample columns,
    matching the hypothesis pool the learner optimizes over. Returns
    (estimate, standard error of the mean); deterministic per seed.
    """
    if num_samples < 2:
        raise ValueError(f"num_samples must be >= 2, got {num_samples}")
    G = np.asarray(gram, dtype=float)
    m = G.shape[0]
    rng = np.random.default_rng(seed)
    sigma = rng.integers(0, 2, size=(num_samples, m)) * 2.0 - 1.0
    draws = np.abs(sigma @ G).max(axis=1) / m
    estimate = float(draws.mean())
    std_error = float(draws.std(ddof=1) / math.sqrt(num_samples))
    return estimate, std_error


PENALTY_MODES = ("trace", "polydim", "local", "uniform")


def parse_penalty_mode(text: str) -> tuple[str, float | None]:
    """Parse ``trace`` / ``polydim`` / ``local:<s>`` / ``uniform``; s may be ``inf``.

    Bare ``local`` is accepted with no radius (the caller must supply one).
    """
    if text in ("trace", "polydim", "uniform", "local"):
        return (text, None)
    if text.startswith("local:"):
        arg = text[len("local:"):]
        s = math.inf if arg.strip().lower() in ("inf", "infinity") else float(arg)
        return "local", s
    raise ConfigError(f"unknown penalty mode {text!r}")


@dataclass(frozen=True)
class PenaltyVector:
    """Per-family weights Lambda_k = lambda * r_k + beta."""

    r: np.ndarray
    lam: float
    beta: float
    effective: np.ndarray

    def __post_init__(self) -> None:
        r = np.asarray(self.r, dtype=float)
        eff = np.asarray(self.effective, dtype=float)
        if self.lam < 0 or self.beta < 0:
            raise ValueError("lambda and beta must be >= 0")
        if not (np.isfinite(r).all() and (r >= 0).all()):
            raise ValueError("complexity estimates must be finite and >= 0")
        if not np.array_equal(eff, self.lam * r + self.beta):
            raise ValueError("effective weights must equal lambda * r + beta exactly")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "effective", eff)

    @property
    def p(self) -> int:
        return self.r.shape[0]


def penalty_vector(r: np.ndarray, lam: float, beta: float) -> PenaltyVector:
    r = np.asarray(r, dtype=float)
    return PenaltyVector(r, lam, beta, lam * r + beta)


def build_penalties(
    stack: GramStack,
    mode: str,
    lam: float,
    beta: float,
    *,
    num_features: int | None = None,
    s: float | None = None,
    cache: SpectrumCache | None = None,
    eig_cap: int = 2000,
) -> PenaltyVector:
    """Compute r_k for every family under the chosen mode and assemble Lambda.

    polydim requires every spec polynomial and the feature count N;
    local requires PSD specs and the radius s (a precomputed SpectrumCache
    may be passed to amortize the eigendecompositions).
    """
    if mode not in PENALTY_MODES:
        raise ConfigError(f"unknown penalty mode {mode!r}")
    m = stack.m
    if mode == "uniform":
        r = np.ones(stack.p)
    elif mode == "trace":
        r = np.array(
            [trace_penalty(stack.grams[k], stack.kappas[k]) for k in range(stack.p)]
        )
    elif mode == "polydim":
        if num_features is None:
            raise ConfigError("polydim mode needs the feature count N")
        bad = [sp.label() for sp in stack.specs if sp.family != "polynomial"]
        if bad:
            raise ConfigError(f"polydim mode needs polynomial kernels only, got {bad}")
        r = np.array(
            [
                polydim_penalty(stack.kappas[k], num_features, sp.degree, m)
                for k, sp in enumerate(stack.specs)
            ]
        )
    else:
        if s is None:
            raise ConfigError("local mode needs the radius s (use inf for the full sum)")
        if cache is None:
            cache = spectrum_cache(stack, cap=eig_cap)
        r = np.array(
            [local_penalty(sp.eigenvalues, m, s) for sp in cache.spectra]
        )
    return penalty_vector(r, lam, beta)


def penalty_report_csv(stack: GramStack, penalties: PenaltyVector) -> str:
    """CSV rows ``family,spec,r_k,lambda,beta,Lambda_k`` for every family."""
    lines = ["family,spec,r_k,lambda,beta,Lambda_k"]
    for k, spec in enumerate(stack.specs):
        lines.append(
            f"{spec.family},{spec.label()},{float(penalties.r[k])!r},"
            f"{float(penalties.lam)!r},{float(penalties.beta)!r},"
            f"{float(penalties.effective[k])!r}"
        )
    return "\n".join(lines) + "\n"
