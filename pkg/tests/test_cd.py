import numpy as np
import pytest

from capsvm import (
    CDConfig,
    CoefMatrix,
    build_stack,
    line_search_exact,
    margins,
    objective_value,
    penalty_vector,
    train_cd,
    train_lp,
)
from capsvm.kernels import linear
from conftest import random_instance


def single_point_instance(lam):
    stack = build_stack([linear()], np.array([[1.0]]))
    y = np.array([1.0])
    pen = penalty_vector(np.array([lam]), 1.0, 0.0)
    return stack, y, pen


class TestLineSearch:
    def test_interpolating_step(self):
        stack, y, pen = single_point_instance(0.5)
        alpha = CoefMatrix.zeros(1, 1)
        state = margins(alpha, stack, y)
        eta = line_search_exact(alpha, state, stack, y, pen, 0, 0)
        assert eta == 1.0
        trial = CoefMatrix(np.array([[eta]]))
        assert objective_value(trial, stack, y, pen) == 0.5

    def test_penalty_dominates(self):
        stack, y, pen = single_point_instance(2.0)
        alpha = CoefMatrix.zeros(1, 1)
        state = margins(alpha, stack, y)
        assert line_search_exact(alpha, state, stack, y, pen, 0, 0) == 0.0

    def test_unregularized_interpolation(self):
        stack, y, pen = single_point_instance(0.0)
        alpha = CoefMatrix.zeros(1, 1)
        state = margins(alpha, stack, y)
        assert line_search_exact(alpha, state, stack, y, pen, 0, 0) == 1.0

    def test_global_minimizer_vs_grid(self, rng):
        stack, y, pen = random_instance(21)
        A = rng.standard_normal((stack.p, stack.m)) * 0.2
        alpha = CoefMatrix(A)
        state = margins(alpha, stack, y)
        for k in range(stack.p):
            for j in range(0, stack.m, 4):
                eta = line_search_exact(alpha, state, stack, y, pen, k, j)
                step = A.copy()
                step[k, j] += eta
                got = objective_value(CoefMatrix(step), stack, y, pen)
                for cand in np.linspace(-2.0, 2.0, 801):
                    trial = A.copy()
                    trial[k, j] += cand
                    assert got <= objective_value(CoefMatrix(trial), stack, y, pen) + 1e-9


class TestTrainCd:
    def test_dead_zone_converges_immediately(self):
        stack, y, pen = random_instance(22, lam_range=(2, 3))
        coefs, trace = train_cd(stack, y, pen)
        assert trace.converged
        assert trace.steps_taken == 0
        assert trace.final_objective == 1.0
        assert coefs.nnz == 0
        np.testing.assert_array_equal(coefs.alpha, 0.0)

    def test_single_point_one_step(self):
        stack, y, pen = single_point_instance(0.5)
        coefs, trace = train_cd(stack, y, pen)
        assert trace.converged
        assert trace.final_objective == pytest.approx(0.5, abs=1e-9)
        assert coefs.alpha[0, 0] == pytest.approx(1.0, abs=1e-9)

    def test_matches_lp_on_random_instance(self):
        stack, y, pen = random_instance(23, m_range=(30, 31), p_range=(2, 3))
        coefs_cd, trace = train_cd(stack, y, pen, CDConfig(tol=1e-6))
        _, sol = train_lp(stack, y, pen)
        assert sol.status == "optimal"
        assert abs(trace.final_objective - sol.objective) <= 1e-4 * max(1.0, sol.objective)

    def test_trace_monotone_and_consistent(self):
        stack, y, pen = random_instance(24)
        coefs, trace = train_cd(stack, y, pen, CDConfig(tol=1e-6))
        objs = [s.objective for s in trace.steps]
        assert all(b < a for a, b in zip(objs, objs[1:]))
        assert objective_value(coefs, stack, y, pen) == pytest.approx(
            trace.final_objective, abs=1e-8)

    def test_deterministic(self):
        stack, y, pen = random_instance(25)
        _, t1 = train_cd(stack, y, pen, CDConfig(tol=1e-6))
        _, t2 = train_cd(stack, y, pen, CDConfig(tol=1e-6))
        assert t1.to_csv() == t2.to_csv()

    def test_max_steps_cap(self):
        stack, y, pen = random_instance(26, lam_range=(-3, -2))
        _, trace = train_cd(stack, y, pen, CDConfig(tol=1e-12, max_steps=3))
        assert trace.steps_taken <= 3

    def test_sparse_storage_honesty(self):
        stack, y, pen = random_instance(27)
        coefs, trace = train_cd(stack, y, pen, CDConfig(tol=1e-6))
        touched = {(s.k, s.j) for s in trace.steps}
        nz = {(int(k), int(j)) for k, j in zip(*np.nonzero(coefs.alpha))}
        # every nonzero is either a warm-start survivor or a stepped coordinate;
        # all other coordinates are exact zeros
        zero_mask = coefs.alpha == 0.0
        assert zero_mask.sum() + len(nz) == coefs.alpha.size
        assert (np.abs(coefs.alpha[zero_mask]) == 0.0).all()
        assert touched  # the run actually moved

    def test_config_validation(self):
        with pytest.raises(ValueError):
            CDConfig(tol=0.0)
        with pytest.raises(ValueError):
            CDConfig(max_steps=0)
        with pytest.raises(ValueError):
            CDConfig(objective_tol=-1.0)

    def test_trace_csv_format(self):
        stack, y, pen = single_point_instance(0.5)
        _, trace = train_cd(stack, y, pen)
        lines = trace.to_csv().strip().splitlines()
        assert lines[0] == "step,k,j,eta,objective"
        assert len(lines) == trace.steps_taken + 1


class TestCrossSolverAgreement:
    @pytest.mark.parametrize("seed", range(10))
    def test_objective_agreement(self, seed):
        stack, y, pen = random_instance(100 + seed)
        coefs_cd, trace = train_cd(stack, y, pen, CDConfig(tol=1e-6))
        _, sol = train_lp(stack, y, pen)
        assert sol.status == "optimal"
        gap = abs(trace.final_objective - sol.objective)
        assert gap <= 1e-4 * max(1.0, sol.objective)
