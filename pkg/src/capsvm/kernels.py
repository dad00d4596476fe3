"""Kernel families, pairwise evaluation, and Gram/cross-Gram construction.

Families: linear, polynomial(degree), gaussian(gamma), sigmoid(a, b).
The sigmoid family is deliberately non-PSD; the learner does not require
positive semi-definiteness, so its Gram matrices are used as computed.

Spec string grammar (CLI and config):

    linear                  dot product
    poly:<d>                (x.y + 1)^d
    poly:<d1>-<d2>          one spec per degree in the range
    rbf:<gamma>             exp(-gamma ||x-y||^2)
    rbf:<g1>..<g2>          decade grid, e.g. rbf:1e-6..1e0 -> 7 specs
    sigmoid:<a>,<b>         tanh(a x.y + b)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import ConfigError, NumericError

_PSD_FAMILIES = ("linear", "polynomial", "gaussian")
_FAMILIES = _PSD_FAMILIES + ("sigmoid",)


@dataclass(frozen=True)
class KernelSpec:
    family: str
    degree: int = 0
    gamma: float = 0.0
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self) -> None:
        if self.family not in _FAMILIES:
            raise ConfigError(f"unknown kernel family {self.family!r}")
        if self.family == "polynomial" and self.degree < 1:
            raise ConfigError(f"polynomial degree must be >= 1, got {self.degree}")
        if self.family == "gaussian" and not self.gamma > 0:
            raise ConfigError(f"gaussian gamma must be > 0, got {self.gamma}")

    @property
    def claims_psd(self) -> bool:
        return self.family in _PSD_FAMILIES

    def label(self) -> str:
        """Spec string for reports, e.g. ``poly:3`` or ``rbf:0.01``."""
        if self.family == "linear":
            return "linear"
        if self.family == "polynomial":
            return f"poly:{self.degree}"
        if self.family == "gaussian":
            return f"rbf:{self.gamma:g}"
        return f"sigmoid:{self.a:g},{self.b:g}"


def linear() -> KernelSpec:
    return KernelSpec("linear")

def polynomial(degree: int) -> KernelSpec:
    return KernelSpec("polynomial", degree=degree)

def gaussian(gamma: float) -> KernelSpec:
    return KernelSpec("gaussian", gamma=gamma)

def sigmoid(a: float, b: float) -> KernelSpec:
    return KernelSpec("sigmoid", a=a, b=b)


def parse_kernel_specs(text: str) -> list[KernelSpec]:
    """Expand a whitespace-separated list of spec strings into KernelSpecs.

    The separator is whitespace because ``sigmoid:<a>,<b>`` carries a comma
    of its own.
    """
    specs: list[KernelSpec] = []
    for part in text.split():
        specs.extend(_parse_one(part, text))
    if not specs:
        raise ConfigError(f"no kernel specs in {text!r}")
    return specs


def _parse_one(part: str, full: str) -> list[KernelSpec]:
    if part == "linear":
        return [linear()]
    if part.startswith("poly:"):
        arg = part[len("poly:"):]
        if "-" in arg:
            lo_s, hi_s = arg.split("-", 1)
            lo, hi = int(lo_s), int(hi_s)
            if lo < 1 or hi < lo:
                raise ConfigError(f"bad polynomial degree range {part!r}")
            return [polynomial(d) for d in range(lo, hi + 1)]
        return [polynomial(int(arg))]
    if part.startswith("rbf:"):
        arg = part[len("rbf:"):]
        if ".." in arg:
            lo_s, hi_s = arg.split("..", 1)
            lo_e = round(math.log10(float(lo_s)))
            hi_e = round(math.log10(float(hi_s)))
            if hi_e < lo_e:
                raise ConfigError(f"bad gamma decade range {part!r}")
            return [gaussian(10.0 ** e) for e in range(lo_e, hi_e + 1)]
        return [gaussian(float(arg))]
    if part.startswith("sigmoid:"):
        arg = part[len("sigmoid:"):]
        try:
            a_s, b_s = arg.split(",", 1)
            return [sigmoid(float(a_s), float(b_s))]
        except ValueError:
            raise ConfigError(f"sigmoid spec must be sigmoid:<a>,<b>, got {part!r}") from None
    raise ConfigError(f"cannot parse kernel spec {part!r} in {full!r}")


def _as_matrix(x) -> np.ndarray:
    X = np.asarray(x, dtype=float)
    return X[None, :] if X.ndim == 1 else X


def _apply(spec: KernelSpec, inner: np.ndarray, sq_dists: np.ndarray | None) -> np.ndarray:
    if spec.family == "linear":
        return inner
    if spec.family == "polynomial":
        return (inner + 1.0) ** spec.degree
    if spec.family == "gaussian":
        assert sq_dists is not None
        return np.exp(-spec.gamma * sq_dists)
    return np.tanh(spec.a * inner + spec.b)


def _pairwise(spec: KernelSpec, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    inner = X @ Y.T
    sq = None
    if spec.family == "gaussian":
        sq = (X * X).sum(axis=1)[:, None] + (Y * Y).sum(axis=1)[None, :] - 2.0 * inner
        np.maximum(sq, 0.0, out=sq)
    K = _apply(spec, inner, sq)
    if not np.isfinite(K).all():
        raise NumericError(f"kernel {spec.label()} produced non-finite values")
    return K


def eval_kernel(spec: KernelSpec, x, y) -> float:
    """Evaluate one kernel on a pair of vectors."""
    return float(_pairwise(spec, _as_matrix(x), _as_matrix(y))[0, 0])


def gram_matrix(spec: KernelSpec, data: Dataset | np.ndarray) -> np.ndarray:
    """m×m matrix of K(x_i, x_j); symmetrized for PSD-claiming families.

    BLAS products are not bit-symmetric, so PSD grams take (G + G^T)/2;
    non-PSD grams are returned exactly as computed.
    """
    X = data.features if isinstance(data, Dataset) else _as_matrix(data)
    G = _pairwise(spec, X, X)
    if spec.claims_psd:
        G = 0.5 * (G + G.T)
    return G


def cross_gram(spec: KernelSpec, support, query: Dataset | np.ndarray) -> np.ndarray:
    """(query rows × support columns) kernel evaluations K(query_i, support_j)."""
    Q = query.features if isinstance(query, Dataset) else _as_matrix(query)
    S = np.asarray(support, dtype=float)
    if S.size == 0:
        return np.zeros((Q.shape[0], 0))
    S = _as_matrix(S)
    return _pairwise(spec, Q, S)


@dataclass(frozen=True)
class GramStack:
    """Precomputed Gram matrices for p kernel families over one sample.

    grams: (p, m, m); kappas[k] = max_i sqrt(max(G_k[i,i], 0)), the
    empirical surrogate for sup_x sqrt(K(x, x)).
    """

    specs: list[KernelSpec]
    grams: np.ndarray
    kappas: np.ndarray

    @property
    def p(self) -> int:
        return len(self.specs)

    @property
    def m(self) -> int:
        return self.grams.shape[1]


def build_stack(specs: list[KernelSpec], data: Dataset | np.ndarray) -> GramStack:
    """Compute all Gram matrices and per-family kappa values."""
    if not specs:
        raise ConfigError("need at least one kernel spec")
    X = data.features if isinstance(data, Dataset) else _as_matrix(data)
    m = X.shape[0]
    grams = np.empty((len(specs), m, m))
    kappas = np.empty(len(specs))
    for k, spec in enumerate(specs):
        G = gram_matrix(spec, X)
        diag = np.diagonal(G)
        if spec.claims_psd and diag.min() < -1e-12:
            raise NumericError(
                f"kernel {spec.label()} claims PSD but has negative diagonal "
                f"{diag.min():.3e}"
            )
        grams[k] = G
        kappas[k] = math.sqrt(max(float(np.maximum(diag, 0.0).max()), 0.0))
    return GramStack(list(specs), grams, kappas)
