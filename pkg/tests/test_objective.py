import numpy as np
import pytest

from capsvm import (
    CoefMatrix,
    build_stack,
    coordinate_subgradient,
    margins,
    objective_value,
    penalty_vector,
    steepest_coordinate,
)
from capsvm.kernels import GramStack, linear
from capsvm.objective import subgradient_matrix
from conftest import random_instance


def single_point_instance(lam):
    stack = build_stack([linear()], np.array([[1.0]]))
    y = np.array([1.0])
    pen = penalty_vector(np.array([lam]), 1.0, 0.0)
    return stack, y, pen


class TestObjectiveValue:
    def test_zero_coefficients(self):
        stack, y, pen = random_instance(5)
        alpha = CoefMatrix.zeros(stack.p, stack.m)
        assert objective_value(alpha, stack, y, pen) == 1.0

    def test_hand_single_point(self):
        stack, y, pen = single_point_instance(0.5)
        alpha = CoefMatrix(np.array([[1.0]]))
        # hinge: max(0, 1 - 1*1*1) = 0; penalty 0.5*|1| = 0.5
        assert objective_value(alpha, stack, y, pen) == 0.5

    def test_linear_in_penalty_weights(self):
        stack, y, pen = random_instance(6)
        rng = np.random.default_rng(1)
        alpha = CoefMatrix(rng.standard_normal((stack.p, stack.m)) * 0.1)
        f1 = objective_value(alpha, stack, y, pen)
        pen2 = penalty_vector(pen.r, 2.0 * pen.lam, 2.0 * pen.beta)
        f2 = objective_value(alpha, stack, y, pen2)
        extra = float(pen.effective @ np.abs(alpha.alpha).sum(axis=1))
        assert f2 == pytest.approx(f1 + extra, rel=1e-12)


class TestMargins:
    def test_zero(self):
        stack, y, _ = random_instance(7)
        state = margins(CoefMatrix.zeros(stack.p, stack.m), stack, y)
        np.testing.assert_array_equal(state.margins, np.zeros(stack.m))

    def test_single_active_coefficient(self):
        grams = np.array([[[1.0, 0.5], [0.5, 1.0]]])
        stack = GramStack([linear()], grams, np.array([1.0]))
        y = np.array([1.0, 1.0])
        A = np.zeros((1, 2))
        A[0, 0] = 1.0
        state = margins(CoefMatrix(A), stack, y)
        np.testing.assert_array_equal(state.raw_scores, [1.0, 0.5])

    def test_incremental_matches_full(self):
        stack, y, _ = random_instance(8)
        rng = np.random.default_rng(2)
        A = np.zeros((stack.p, stack.m))
        state = margins(CoefMatrix(A), stack, y)
        for _ in range(100):
            k = int(rng.integers(stack.p))
            j = int(rng.integers(stack.m))
            delta = float(rng.standard_normal() * 0.2)
            A[k, j] += delta
            state.update(stack, y, k, j, delta)
        full = margins(CoefMatrix(A), stack, y)
        assert np.abs(state.raw_scores - full.raw_scores).max() < 1e-9
        np.testing.assert_array_equal(state.margins, y * state.raw_scores)


class TestCoordinateSubgradient:
    def test_active_hinge_dominates(self):
        stack, y, pen = single_point_instance(0.5)
        alpha = CoefMatrix.zeros(1, 1)
        state = margins(alpha, stack, y)
        # g = -1, |g| > 0.5 -> g - sign(g)*0.5 = -0.5
        assert coordinate_subgradient(alpha, state, stack, y, pen, 0, 0) == -0.5

    def test_dead_zone(self):
        stack, y, pen = single_point_instance(2.0)
        alpha = CoefMatrix.zeros(1, 1)
        state = margins(alpha, stack, y)
        assert coordinate_subgradient(alpha, state, stack, y, pen, 0, 0) == 0.0

    def test_penalty_only_gradient(self):
        stack, y, pen = single_point_instance(0.5)
        alpha = CoefMatrix(np.array([[2.0]]))  # margin 2 >= 1, hinge inactive
        state = margins(alpha, stack, y)
        assert coordinate_subgradient(alpha, state, stack, y, pen, 0, 0) == 0.5

    def test_matches_one_sided_slopes(self):
        stack, y, pen = random_instance(11)
        rng = np.random.default_rng(3)
        A = rng.standard_normal((stack.p, stack.m)) * 0.1
        A[np.abs(A) < 0.05] = 0.0
        alpha = CoefMatrix(A)
        state = margins(alpha, stack, y)
        base = objective_value(alpha, stack, y, pen)
        h = 1e-7
        for k in range(stack.p):
            for j in range(0, stack.m, 3):
                sg = coordinate_subgradient(alpha, state, stack, y, pen, k, j)
                up = A.copy(); up[k, j] += h
                dn = A.copy(); dn[k, j] -= h
                dplus = (objective_value(CoefMatrix(up), stack, y, pen) - base) / h
                dminus = (base - objective_value(CoefMatrix(dn), stack, y, pen)) / h
                assert min(dplus, dminus) - 1e-4 <= sg <= max(dplus, dminus) + 1e-4


class TestSteepestCoordinate:
    def test_stationary(self):
        stack, y, pen = single_point_instance(2.0)
        alpha = CoefMatrix.zeros(1, 1)
        state = margins(alpha, stack, y)
        assert steepest_coordinate(alpha, state, stack, y, pen) == (0, 0, 0.0)

    def test_single_violation(self):
        stack, y, pen = single_point_instance(0.5)
        alpha = CoefMatrix.zeros(1, 1)
        state = margins(alpha, stack, y)
        k, j, sg = steepest_coordinate(alpha, state, stack, y, pen)
        assert (k, j) == (0, 0)
        assert sg == -0.5

    def test_lexicographic_ties(self):
        # three identical gram matrices: every (k, j) column repeats across k,
        # so equal-magnitude candidates appear at (1, 3) and (2, 1) after
        # permuting columns; the flattened argmax must take (1, 3)
        m = 4
        base = np.zeros((m, m))
        base[:, 3] = [0.9, 0.8, 0.7, 0.6]
        g1 = base.copy()
        g2 = np.zeros((m, m))
        g2[:, 1] = base[:, 3]
        grams = np.stack([np.zeros((m, m)), g1, g2])
        stack = GramStack([linear(), linear(), linear()], grams, np.ones(3))
        y = np.ones(m)
        pen = penalty_vector(np.zeros(3), 0.0, 0.1)
        alpha = CoefMatrix.zeros(3, m)
        state = margins(alpha, stack, y)
        sg = subgradient_matrix(alpha, state, stack, y, pen)
        assert sg[1, 3] == sg[2, 1] != 0.0
        k, j, _ = steepest_coordinate(alpha, state, stack, y, pen)
        assert (k, j) == (1, 3)


class TestInvariants:
    def test_midpoint_convexity(self):
        stack, y, pen = random_instance(13)
        rng = np.random.default_rng(4)
        for _ in range(200):
            a1 = rng.standard_normal((stack.p, stack.m)) * 0.3
            a2 = rng.standard_normal((stack.p, stack.m)) * 0.3
            f1 = objective_value(CoefMatrix(a1), stack, y, pen)
            f2 = objective_value(CoefMatrix(a2), stack, y, pen)
            fm = objective_value(CoefMatrix(0.5 * (a1 + a2)), stack, y, pen)
            assert fm <= 0.5 * (f1 + f2) + 1e-9

    def test_stationary_point_is_local_min_along_axes(self):
        # all-zero subgradients (dead zone) imply no coordinate improves F
        stack, y, pen = random_instance(14, lam_range=(2, 3))  # huge weights
        alpha = CoefMatrix.zeros(stack.p, stack.m)
        state = margins(alpha, stack, y)
        sg = subgradient_matrix(alpha, state, stack, y, pen)
        assert np.abs(sg).max() == 0.0
        base = objective_value(alpha, stack, y, pen)
        for eta in np.linspace(-1e-3, 1e-3, 9):
            trial = alpha.alpha.copy()
            trial[0, 0] += eta
            assert objective_value(CoefMatrix(trial), stack, y, pen) >= base - 1e-9
