import numpy as np
import numpy.testing as npt
from django.test import SimpleTestCase

from mantel.exceptions import DegenerateSimilarityError, DimensionMismatchError, NotCenteredError
from mantel.kernels import ColumnState, DataMatrix, KernelSpec, gram, squared_distance_matrix, svd_thin
from mantel.stats import (
    AssociationKind,
    classical_mantel_r,
    fixed_effects_score,
    mantel_trace,
    principal_correlations,
    random_effects_score,
    ridge_score_univariate,
    rv_coefficient,
)

from .helpers import random_centered


def canonical_correlations(X, Y):
    qx, _ = np.linalg.qr(X)
    qy, _ = np.linalg.qr(Y)
    return np.linalg.svd(qx.T @ qy, compute_uv=False)


class TraceStatisticTests(SimpleTestCase):
    def test_identity(self):
        value = mantel_trace(np.eye(3), np.eye(3))
        self.assertEqual(value.statistic, 3.0)
        self.assertIs(value.kind, AssociationKind.MANTEL_TRACE)

    def test_shape_mismatch(self):
        with self.assertRaises(DimensionMismatchError):
            mantel_trace(np.eye(3), np.eye(4))

    def test_rv_coefficient(self):
        X = random_centered(np.random.default_rng(1), 10, 3)
        H = gram(X, KernelSpec.linear())
        self.assertAlmostEqual(rv_coefficient(H, H).statistic, 1.0, places=12)
        self.assertAlmostEqual(rv_coefficient(H, 2.5 * H.values).statistic, 1.0, places=12)
        with self.assertRaises(DegenerateSimilarityError):
            rv_coefficient(H, np.zeros((10, 10)))


class RvLimitTests(SimpleTestCase):
    def instances(self, seed):
        rng = np.random.default_rng(seed)
        for trial in range(200):
            n = int(rng.integers(8, 21))
            yield trial, random_centered(rng, n, int(rng.integers(1, 7))), random_centered(rng, n, int(rng.integers(1, 7)))

    def test_rv_limit_at_large_penalty_is_linear_rv(self):
        for trial, X, Y in self.instances(8):
            lam = 1e6 * max(svd_thin(X).d[0] ** 2, svd_thin(Y).d[0] ** 2)
            ridge = rv_coefficient(gram(X, KernelSpec.ridge(lam)), gram(Y, KernelSpec.ridge(lam))).statistic
            linear = rv_coefficient(gram(X, KernelSpec.linear()), gram(Y, KernelSpec.linear())).statistic
            with self.subTest(trial=trial):
                self.assertLessEqual(abs(ridge - linear), 1e-4)

    def test_rv_limit_at_small_penalty_is_projection_rv(self):
        for trial, X, Y in self.instances(9):
            lam = 1e-8 * min(svd_thin(X).d[-1] ** 2, svd_thin(Y).d[-1] ** 2)
            ridge = rv_coefficient(gram(X, KernelSpec.ridge(lam)), gram(Y, KernelSpec.ridge(lam))).statistic
            projection = rv_coefficient(gram(X, KernelSpec.projection()), gram(Y, KernelSpec.projection())).statistic
            with self.subTest(trial=trial):
                self.assertLessEqual(abs(ridge - projection), 1e-6)


class ScoreStatisticTests(SimpleTestCase):
    def test_fixed_score_is_pillai_trace(self):
        rng = np.random.default_rng(2)
        for trial in range(200):
            with self.subTest(trial=trial):
                X, Y = random_centered(rng, 25, 4), random_centered(rng, 25, 3)
                expected = np.sum(canonical_correlations(X.values, Y.values) ** 2)
                self.assertAlmostEqual(fixed_effects_score(X, Y).statistic, expected, delta=1e-8)

    def test_univariate_fixed_score_is_r_squared(self):
        rng = np.random.default_rng(3)
        for trial in range(200):
            n, p = int(rng.integers(10, 41)), int(rng.integers(1, 6))
            X = random_centered(rng, n, p)
            y = X.values @ rng.standard_normal(p) + rng.standard_normal(n)
            y = y - y.mean()
            coef, *_ = np.linalg.lstsq(X.values, y, rcond=None)
            r_squared = 1.0 - np.sum((y - X.values @ coef) ** 2) / np.sum(y ** 2)
            Y = DataMatrix(y, ColumnState.CENTERED)
            with self.subTest(trial=trial, n=n, p=p):
                self.assertAlmostEqual(fixed_effects_score(X, Y).statistic, r_squared, delta=1e-8)

    def test_random_score(self):
        rng = np.random.default_rng(4)
        X, Y = random_centered(rng, 15, 6), random_centered(rng, 15, 2)
        expected = np.sum((X.values.T @ Y.values) ** 2)
        npt.assert_allclose(random_effects_score(X, Y).statistic, expected, rtol=1e-10)
        self.assertEqual(random_effects_score(X, Y.replace_values(np.zeros((15, 2)), Y.column_state)).statistic, 0.0)

    def test_ridge_score_matches_gram_trace(self):
        rng = np.random.default_rng(5)
        X = random_centered(rng, 20, 8)
        y = rng.standard_normal(20)
        y -= y.mean()
        factor = svd_thin(X)
        for spec in (KernelSpec.projection(), KernelSpec.ridge(10.0), KernelSpec.linear()):
            with self.subTest(spec=str(spec)):
                expected = y @ gram(X, spec).values @ y
                npt.assert_allclose(ridge_score_univariate(factor, y, spec).statistic, expected, rtol=1e-10)

    def test_principal_correlations(self):
        rng = np.random.default_rng(6)
        X = random_centered(rng, 12, 3)
        factor = svd_thin(X)
        z = principal_correlations(factor, factor.U[:, 0] * 2.0).z
        npt.assert_allclose(z, [2.0, 0.0, 0.0], atol=1e-12)
        with self.assertRaises(NotCenteredError):
            principal_correlations(factor, np.ones(12))
        with self.assertRaises(DimensionMismatchError):
            principal_correlations(factor, np.zeros(11))


class ClassicalMantelTests(SimpleTestCase):
    def test_identical_distances(self):
        X = random_centered(np.random.default_rng(7), 8, 2)
        D = np.sqrt(squared_distance_matrix(X, KernelSpec.linear()).values)
        self.assertAlmostEqual(classical_mantel_r(D, D).statistic, 1.0, places=12)

    def test_constant_distances(self):
        D = np.ones((4, 4)) - np.eye(4)
        with self.assertRaises(DegenerateSimilarityError):
            classical_mantel_r(D, D)
