"""Objective oracles: values, gradients, smoothness bounds, batching."""

import math

import numpy as np
import pytest
import scipy.sparse as sp

from dearest.objectives import (
    LogisticNCObjective,
    QuadraticObjective,
    make_quadratic,
    make_synthetic_logistic,
)


def central_diff_grad(func, x, h=1e-6):
    g = np.zeros_like(x, dtype=float)
    for k in range(x.size):
        e = np.zeros_like(x, dtype=float)
        e[k] = h
        g[k] = (func(x + e) - func(x - e)) / (2.0 * h)
    return g


def assert_grad_matches_fd(obj, i, j, x, rel=1e-5):
    fd = central_diff_grad(lambda y: obj.component_value(i, j, y), x)
    g = obj.component_grad(i, j, x)
    assert np.linalg.norm(g - fd) <= rel * max(1.0, np.linalg.norm(fd))


def tiny_logistic(lambda_reg=1e-4, m=2, n=4, d=3, seed=0):
    rng = np.random.default_rng(seed)
    feats = [rng.standard_normal((n, d)) for _ in range(m)]
    labels = [np.where(rng.random(n) < 0.5, 1.0, -1.0) for _ in range(m)]
    return LogisticNCObjective(feats, labels, lambda_reg)


class TestLogisticValues:
    def test_value_at_origin_is_log_two(self):
        obj = tiny_logistic()
        for i in range(obj.m):
            for j in range(obj.n):
                assert obj.component_value(i, j, np.zeros(obj.d)) == pytest.approx(
                    math.log(2.0), rel=1e-12
                )

    def test_huge_margin_does_not_overflow(self):
        obj = LogisticNCObjective(
            [np.array([[1.0, 0.0]])], [np.array([1.0])], lambda_reg=0.0
        )
        val = obj.component_value(0, 0, np.array([100.0, 0.0]))
        assert val == pytest.approx(math.exp(-100.0), rel=1e-10)  # ~3.72e-44
        # the mirrored margin is the linear regime, not an overflow
        val_neg = obj.component_value(0, 0, np.array([-100.0, 0.0]))
        assert val_neg == pytest.approx(100.0, rel=1e-12)

    def test_pure_regularizer_value(self):
        d = 7
        obj = LogisticNCObjective([np.zeros((1, d))], [np.array([1.0])], lambda_reg=1.0)
        val = obj.component_value(0, 0, np.ones(d))
        assert val == pytest.approx(math.log(2.0) + d / 2.0, rel=1e-12)

    def test_values_nonnegative(self):
        obj = tiny_logistic(lambda_reg=1e-4)
        rng = np.random.default_rng(1)
        for _ in range(50):
            x = 3.0 * rng.standard_normal(obj.d)
            assert obj.global_value(x) >= 0.0
            assert obj.component_value(0, 0, x) >= 0.0
        assert obj.value_lower_bound == 0.0


class TestLogisticGradients:
    def test_grad_at_origin(self):
        obj = tiny_logistic(lambda_reg=1e-4)
        for i in range(obj.m):
            for j in range(obj.n):
                a = obj.features[i][j]
                b = obj.labels[i][j]
                np.testing.assert_allclose(
                    obj.component_grad(i, j, np.zeros(obj.d)), -(b / 2.0) * a, rtol=1e-12
                )

    def test_regularizer_grad_value(self):
        obj = LogisticNCObjective(
            [np.zeros((1, 3))], [np.array([1.0])], lambda_reg=1e-4
        )
        g = obj.component_grad(0, 0, np.array([1.0, 0.0, 0.0]))
        assert g[0] == pytest.approx(1e-4 * 2.0 / 4.0, rel=1e-12)  # 5e-5
        assert g[1] == 0.0 and g[2] == 0.0

    def test_matches_finite_differences(self):
        obj = tiny_logistic(lambda_reg=1e-3)
        rng = np.random.default_rng(2)
        for _ in range(25):
            i = rng.integers(obj.m)
            j = rng.integers(obj.n)
            x = rng.standard_normal(obj.d)
            assert_grad_matches_fd(obj, int(i), int(j), x)

    def test_local_grad_is_component_mean(self):
        obj = tiny_logistic()
        rng = np.random.default_rng(3)
        for i in range(obj.m):
            x = rng.standard_normal(obj.d)
            mean = np.mean([obj.component_grad(i, j, x) for j in range(obj.n)], axis=0)
            lg = obj.local_grad(i, x)
            assert np.linalg.norm(lg - mean) <= 1e-12 * max(1.0, np.linalg.norm(mean))

    def test_global_is_mean_of_locals(self):
        obj = tiny_logistic()
        x = np.array([0.3, -1.2, 0.7])
        np.testing.assert_allclose(
            obj.global_grad(x),
            np.mean([obj.local_grad(i, x) for i in range(obj.m)], axis=0),
            rtol=1e-12,
        )
        assert obj.global_value(x) == pytest.approx(
            np.mean([obj.local_value(i, x) for i in range(obj.m)]), rel=1e-12
        )

    def test_batch_grad_mean_matches_loop(self):
        obj = tiny_logistic(n=6)
        rng = np.random.default_rng(4)
        x = rng.standard_normal(obj.d)
        idx = np.array([0, 2, 2, 5])  # with replacement
        loop = np.mean([obj.component_grad(0, int(j), x) for j in idx], axis=0)
        np.testing.assert_allclose(obj.batch_grad_mean(0, idx, x), loop, rtol=1e-12)

    def test_grad_rows_shape_and_values(self):
        obj = tiny_logistic()
        rng = np.random.default_rng(5)
        x = rng.standard_normal((obj.m, obj.d))
        rows = obj.grad_rows(x)
        assert rows.shape == (obj.m, obj.d)
        np.testing.assert_allclose(rows[1], obj.local_grad(1, x[1]), rtol=1e-14)


class TestSparseDenseParity:
    def test_same_results_via_csr(self):
        dense = tiny_logistic(n=5, d=4, seed=8)
        sparse_obj = LogisticNCObjective(
            [sp.csr_matrix(f) for f in dense.features], dense.labels, dense.lambda_reg
        )
        rng = np.random.default_rng(9)
        x = rng.standard_normal(4)
        assert sparse_obj.smoothness == pytest.approx(dense.smoothness, rel=1e-12)
        assert sparse_obj.local_value(0, x) == pytest.approx(dense.local_value(0, x), rel=1e-12)
        np.testing.assert_allclose(
            sparse_obj.local_grad(1, x), dense.local_grad(1, x), rtol=1e-12
        )
        np.testing.assert_allclose(
            sparse_obj.component_grad(0, 2, x), dense.component_grad(0, 2, x), rtol=1e-12
        )
        idx = np.array([1, 1, 4])
        np.testing.assert_allclose(
            sparse_obj.batch_grad_mean(0, idx, x), dense.batch_grad_mean(0, idx, x), rtol=1e-12
        )


class TestSmoothness:
    def test_degenerate_objective_has_zero_bound(self):
        obj = LogisticNCObjective([np.zeros((2, 3))], [np.ones(2)], lambda_reg=0.0)
        assert obj.smoothness == 0.0

    def test_single_sample_hand_value(self):
        obj = LogisticNCObjective(
            [np.array([[2.0, 0.0]])], [np.array([-1.0])], lambda_reg=0.0
        )
        assert obj.smoothness == pytest.approx(1.0, rel=1e-14)  # ||a||^2 / 4

    def test_average_smoothness_inequality_monte_carlo(self):
        obj = tiny_logistic(lambda_reg=1e-3, m=3, n=12, d=4, seed=10)
        lsq = obj.smoothness**2
        rng = np.random.default_rng(11)
        for _ in range(1000):
            i = int(rng.integers(obj.m))
            x = 2.0 * rng.standard_normal(obj.d)
            x2 = x + rng.standard_normal(obj.d)
            mean_sq = np.mean(
                [
                    np.sum((obj.component_grad(i, j, x) - obj.component_grad(i, j, x2)) ** 2)
                    for j in range(obj.n)
                ]
            )
            assert mean_sq <= lsq * np.sum((x - x2) ** 2) * (1.0 + 1e-12)

    def test_label_validation(self):
        with pytest.raises(ValueError, match="labels"):
            LogisticNCObjective([np.ones((2, 2))], [np.array([1.0, 0.5])], 0.0)

    def test_negative_lambda_rejected(self):
        with pytest.raises(ValueError, match=">= 0"):
            LogisticNCObjective([np.ones((1, 2))], [np.array([1.0])], -1e-3)


class TestQuadratic:
    def test_scalar_identity_instance(self):
        # f_ij(x) = x^2 / 2 for every component: gradient x, minimizer 0
        a = np.ones((2, 3, 1, 1))
        c = np.zeros((2, 3, 1))
        obj = QuadraticObjective(a, c)
        assert obj.component_grad(0, 0, np.array([1.7]))[0] == pytest.approx(1.7)
        np.testing.assert_allclose(obj.global_grad(np.array([0.5])), [0.5], rtol=1e-14)
        np.testing.assert_allclose(obj.solution(), [0.0], atol=1e-14)

    def test_matches_finite_differences(self):
        obj = make_quadratic(2, 5, 4, seed=3)
        rng = np.random.default_rng(12)
        for _ in range(25):
            i = int(rng.integers(obj.m))
            j = int(rng.integers(obj.n))
            x = rng.standard_normal(obj.d)
            fd = central_diff_grad(lambda y: obj.component_value(i, j, y), x)
            g = obj.component_grad(i, j, x)
            assert np.linalg.norm(g - fd) <= 1e-6 * max(1.0, np.linalg.norm(fd))

    def test_gradient_vanishes_at_normal_equation_solution(self):
        obj = make_quadratic(3, 8, 6, seed=4)
        assert np.linalg.norm(obj.global_grad(obj.solution())) <= 1e-8

    def test_lower_bound_is_attained_value(self):
        obj = make_quadratic(2, 4, 3, seed=5)
        assert obj.value_lower_bound == pytest.approx(obj.optimal_value(), rel=1e-12)
        rng = np.random.default_rng(13)
        for _ in range(20):
            assert obj.global_value(rng.standard_normal(obj.d)) >= obj.value_lower_bound - 1e-12

    def test_batch_grad_mean_matches_loop(self):
        obj = make_quadratic(2, 6, 3, seed=6)
        x = np.array([0.2, -0.4, 1.0])
        idx = np.array([5, 0, 0])
        loop = np.mean([obj.component_grad(1, int(j), x) for j in idx], axis=0)
        np.testing.assert_allclose(obj.batch_grad_mean(1, idx, x), loop, rtol=1e-12)

    def test_seeded_determinism(self):
        a = make_quadratic(2, 3, 4, seed=7)
        b = make_quadratic(2, 3, 4, seed=7)
        np.testing.assert_array_equal(a.a, b.a)
        np.testing.assert_array_equal(a.c, b.c)


class TestSyntheticLogistic:
    def test_shapes_and_determinism(self):
        obj1 = make_synthetic_logistic(4, 16, 5, 1e-4, seed=21)
        obj2 = make_synthetic_logistic(4, 16, 5, 1e-4, seed=21)
        assert obj1.m == 4 and obj1.n == 16 and obj1.d == 5
        for f1, f2 in zip(obj1.features, obj2.features):
            np.testing.assert_array_equal(f1, f2)
        for l1, l2 in zip(obj1.labels, obj2.labels):
            np.testing.assert_array_equal(l1, l2)

    def test_labels_are_signs(self):
        obj = make_synthetic_logistic(3, 10, 4, 0.0, seed=22)
        for lab in obj.labels:
            assert np.all(np.abs(lab) == 1.0)
