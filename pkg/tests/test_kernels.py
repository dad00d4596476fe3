import math

import numpy as np
import pytest

from capsvm import ConfigError, Dataset, build_stack, cross_gram, eval_kernel, gram_matrix
from capsvm.kernels import gaussian, linear, parse_kernel_specs, polynomial, sigmoid


class TestEvalKernel:
    def test_polynomial(self):
        assert eval_kernel(polynomial(2), [1.0, 1.0], [1.0, 1.0]) == 9.0

    def test_gaussian_identity(self):
        x = [0.3, -1.2, 4.0]
        assert eval_kernel(gaussian(0.5), x, x) == 1.0

    def test_sigmoid(self):
        got = eval_kernel(sigmoid(1.0, 0.0), [1.0], [-1.0])
        assert got == pytest.approx(math.tanh(-1.0), abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            eval_kernel(linear(), [1.0, 2.0], [1.0])


class TestGramMatrix:
    def test_gaussian_unit_diagonal(self, rng):
        G = gram_matrix(gaussian(0.7), rng.standard_normal((8, 3)))
        np.testing.assert_allclose(np.diagonal(G), 1.0, atol=1e-12)
        assert (G > 0).all() and (G <= 1.0).all()

    def test_linear_on_identity_features(self):
        G = gram_matrix(linear(), np.array([[1.0, 0.0], [0.0, 1.0]]))
        np.testing.assert_array_equal(G, np.eye(2))

    def test_poly1(self):
        G = gram_matrix(polynomial(1), np.array([[1.0, 0.0], [0.0, 1.0]]))
        np.testing.assert_array_equal(G, [[2.0, 1.0], [1.0, 2.0]])

    def test_psd_symmetry(self, rng):
        X = rng.standard_normal((30, 4))
        for spec in (linear(), polynomial(3), gaussian(0.2)):
            G = gram_matrix(spec, X)
            assert np.abs(G - G.T).max() < 1e-9

    def test_psd_spot_check(self, rng):
        X = rng.standard_normal((25, 4))
        for spec in (linear(), polynomial(2), gaussian(0.5)):
            G = gram_matrix(spec, X)
            bound = 1e-6 * np.abs(G).max()
            for _ in range(20):
                v = rng.standard_normal(25)
                assert v @ G @ v >= -bound * (v @ v)


class TestCrossGram:
    def test_matches_gram_on_train(self, rng):
        X = rng.standard_normal((12, 3))
        data = Dataset(X, np.ones(12))
        for spec in (linear(), polynomial(2), gaussian(0.4)):
            C = cross_gram(spec, X, data)
            G = gram_matrix(spec, X)
            assert np.abs(C - G).max() < 1e-12

    def test_query_equals_support_point(self, rng):
        X = rng.standard_normal((5, 3))
        C = cross_gram(gaussian(0.3), X, X[2])
        assert C.shape == (1, 5)
        assert C[0, 2] == 1.0

    def test_empty_support(self, rng):
        C = cross_gram(linear(), np.empty((0, 3)), rng.standard_normal((4, 3)))
        assert C.shape == (4, 0)


class TestBuildStack:
    def test_poly_range(self, rng):
        data = Dataset(rng.standard_normal((6, 2)), np.ones(6))
        stack = build_stack(parse_kernel_specs("poly:1-10"), data)
        assert stack.p == 10
        assert [s.degree for s in stack.specs] == list(range(1, 11))

    def test_gaussian_decades(self, rng):
        data = Dataset(rng.standard_normal((6, 2)), np.ones(6))
        stack = build_stack(parse_kernel_specs("rbf:1e-6..1e0"), data)
        assert stack.p == 7
        np.testing.assert_allclose([s.gamma for s in stack.specs],
                                   [10.0 ** e for e in range(-6, 1)])
        for k in range(7):
            np.testing.assert_allclose(np.diagonal(stack.grams[k]), 1.0, atol=1e-12)

    def test_kappa_on_standardized_feature(self):
        data = Dataset(np.array([[-1.0], [1.0]]), np.array([-1.0, 1.0]))
        stack = build_stack([linear()], data)
        assert stack.kappas[0] == 1.0


class TestSpecGrammar:
    def test_single_specs(self):
        assert parse_kernel_specs("linear") == [linear()]
        assert parse_kernel_specs("poly:3") == [polynomial(3)]
        assert parse_kernel_specs("rbf:0.5") == [gaussian(0.5)]
        assert parse_kernel_specs("sigmoid:1.5,-0.2") == [sigmoid(1.5, -0.2)]

    def test_mixed_list(self):
        specs = parse_kernel_specs("linear poly:2-4 sigmoid:1,0")
        assert [s.family for s in specs] == [
            "linear", "polynomial", "polynomial", "polynomial", "sigmoid"]

    def test_claims_psd(self):
        assert linear().claims_psd
        assert polynomial(4).claims_psd
        assert gaussian(1.0).claims_psd
        assert not sigmoid(1.0, 0.0).claims_psd

    @pytest.mark.parametrize("bad", ["", "poly:0", "rbf:-1", "cubic:2", "sigmoid:1"])
    def test_rejects(self, bad):
        with pytest.raises(ConfigError):
            parse_kernel_specs(bad)

    def test_labels_round_trip(self):
        for text in ("linear", "poly:7", "rbf:0.01", "sigmoid:2,0.5"):
            (spec,) = parse_kernel_specs(text)
            assert parse_kernel_specs(spec.label()) == [spec]
