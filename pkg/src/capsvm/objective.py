"""Regularized objective, margins, and per-coordinate subgradients.

The trained function is f(x) = sum_{k,j} a[k,j] * y_j * K_k(x, x_j) with
signed coefficients a, and the objective is

    F(a) = (1/m) sum_i max(0, 1 - y_i f(x_i)) + sum_{k,j} Lambda_k |a[k,j]|.

Both solvers optimize exactly this function; the y_i * y_j coupling is used
uniformly so that their optima coincide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .complexity import PenaltyVector
from .kernels import GramStack


@dataclass
class CoefMatrix:
    """Signed coefficients a[k, j] over (family, training point) pairs."""

    alpha: np.ndarray

    def __post_init__(self) -> None:
        self.alpha = np.asarray(self.alpha, dtype=float)
        if self.alpha.ndim != 2:
            raise ValueError(f"alpha must be (p, m), got shape {self.alpha.shape}")

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.alpha))

    @property
    def shape(self) -> tuple[int, int]:
        return self.alpha.shape

    @classmethod
    def zeros(cls, p: int, m: int) -> "CoefMatrix":
        return cls(np.zeros((p, m)))

    @classmethod
    def from_dict(cls, entries: dict[tuple[int, int], float], p: int, m: int) -> "CoefMatrix":
        A = np.zeros((p, m))
        for (k, j), v in entries.items():
            A[k, j] = v
        return cls(A)


@dataclass
class MarginState:
    """Raw scores f(x_i) and margins y_i f(x_i); mutable, single writer.

    margins is always the exact elementwise product labels * raw_scores.
    """

    raw_scores: np.ndarray
    margins: np.ndarray

    def update(self, stack: GramStack, labels: np.ndarray, k: int, j: int, delta: float) -> None:
        """Apply a single-coordinate change a[k, j] += delta in O(m)."""
        self.raw_scores = self.raw_scores + delta * labels[j] * stack.grams[k, :, j]
        self.margins = labels * self.raw_scores


def _alpha_of(alpha) -> np.ndarray:
    return alpha.alpha if isinstance(alpha, CoefMatrix) else np.asarray(alpha, dtype=float)


def margins(alpha, stack: GramStack, labels: np.ndarray) -> MarginState:
    """Full recomputation of raw scores and margins."""
    A = _alpha_of(alpha)
    if A.shape != (stack.p, stack.m):
        raise ValueError(f"alpha shape {A.shape} does not match stack ({stack.p}, {stack.m})")
    raw = np.einsum("kij,kj->i", stack.grams, A * labels[None, :])
    return MarginState(raw, labels * raw)


def hinge_mean(margin_values: np.ndarray) -> float:
    return float(np.maximum(0.0, 1.0 - margin_values).mean())


def penalty_total(alpha, penalties: PenaltyVector) -> float:
    A = _alpha_of(alpha)
    return float(penalties.effective @ np.abs(A).sum(axis=1))


def objective_value(alpha, stack: GramStack, labels: np.ndarray, penalties: PenaltyVector) -> float:
    """F(a) = mean hinge loss + sum_k Lambda_k ||a_k||_1."""
    A = _alpha_of(alpha)
    state = margins(A, stack, labels)
    return hinge_mean(state.margins) + penalty_total(A, penalties)


def _loss_gradient(state: MarginState, stack: GramStack, labels: np.ndarray) -> np.ndarray:
    # g[k, j] = (1/m) * sum_{i: margin_i < 1} (-y_i * y_j * G_k[i, j]);
    # the margin threshold is strict, so points exactly on the margin drop out.
    m = stack.m
    v = labels * (state.margins < 1.0)
    T = np.einsum("i,kij->kj", v, stack.grams)
    return (-1.0 / m) * T * labels[None, :]


def _combine_subgradient(g: float, a: float, lam: float) -> float:
    if a != 0.0:
        return g + math.copysign(lam, a)
    if abs(g) <= lam:
        return 0.0
    return g - math.copysign(lam, g)


def coordinate_subgradient(
    alpha, state: MarginState, stack: GramStack, labels: np.ndarray,
    penalties: PenaltyVector, k: int, j: int,
) -> float:
    """Minimum-norm subgradient of F along coordinate (k, j).

    Three cases: a != 0 gives g + sign(a) * Lambda; a = 0 gives 0 inside the
    soft-threshold dead zone |g| <= Lambda and g - sign(g) * Lambda outside.
    """
    A = _alpha_of(alpha)
    m = stack.m
    active = state.margins < 1.0
    g = float((-1.0 / m) * labels[j] * ((labels * active) @ stack.grams[k, :, j]))
    return _combine_subgradient(g, float(A[k, j]), float(penalties.effective[k]))


def subgradient_matrix(
    alpha, state: MarginState, stack: GramStack, labels: np.ndarray, penalties: PenaltyVector
) -> np.ndarray:
    """All coordinate subgradients at once; vectorized over (k, j)."""
    A = _alpha_of(alpha)
    g = _loss_gradient(state, stack, labels)
    lam = penalties.effective[:, None]
    out = np.where(np.abs(g) <= lam, 0.0, g - np.sign(g) * lam)
    nz = A != 0.0
    out[nz] = g[nz] + np.sign(A[nz]) * np.broadcast_to(lam, A.shape)[nz]
    return out


def steepest_coordinate(
    alpha, state: MarginState, stack: GramStack, labels: np.ndarray, penalties: PenaltyVector
) -> tuple[int, int, float]:
    """Coordinate with the largest |subgradient|; ties go to smallest (k, j).

    Returns (0, 0, 0.0) when every coordinate is stationary.
    """
    sg = subgradient_matrix(alpha, state, stack, labels, penalties)
    flat = int(np.abs(sg).argmax())
    k, j = divmod(flat, stack.m)
    value = float(sg[k, j])
    if value == 0.0:
        return 0, 0, 0.0
    return k, j, value
