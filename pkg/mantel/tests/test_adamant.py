import itertools
import math

import numpy as np
import numpy.testing as npt
from django.test import SimpleTestCase, tag

from mantel.adamant import (
    MetricPair,
    MetricPairList,
    PermutationPlan,
    adamant,
    adamant_grams,
    classical_mantel_test,
    draw_permutations,
    lambda_grid_from_heritability,
    permute_gram,
    single_mantel_test,
    upper_tail_counts,
)
from mantel.exceptions import (
    DimensionMismatchError,
    EmptyMetricListError,
    InvalidConfigError,
    InvalidPermutationError,
)
from mantel.kernels import GramMatrix, KernelSpec, gram
from mantel.stats import trace_statistic

from .helpers import random_centered, relative_gap

THREE_PAIRS = MetricPairList((
    MetricPair(KernelSpec.ridge(1.0), KernelSpec.linear()),
    MetricPair(KernelSpec.ridge(10.0), KernelSpec.linear()),
    MetricPair(KernelSpec.linear(), KernelSpec.linear()),
))
RIDGE_PAIRS = MetricPairList(tuple(
    MetricPair(KernelSpec.ridge(lam), KernelSpec.linear()) for lam in (1.0, 10.0, 100.0)
))


def brute_force(H_list, K_list):
    """Statistics for every permutation of n, by explicit matrix products."""
    n = H_list[0].shape[0]
    perms = list(itertools.permutations(range(n)))
    return np.array([[np.trace(H[np.ix_(p, p)] @ K) for H, K in zip(H_list, K_list)] for p in perms])


def brute_force_pvalues(stat_table, scales):
    """Exact p-values, counting statistics within 1e-12 * scale of each other as ties."""
    total, metrics = stat_table.shape
    p = np.zeros((total, metrics))
    for m in range(metrics):
        for b in range(total):
            floor = stat_table[b, m] - 1e-12 * scales[m]
            p[b, m] = sum(1 for c in range(total) if stat_table[c, m] >= floor) / total
    min_p = p.min(axis=1)
    adaptive = sum(1 for b in range(total) if min_p[b] <= min_p[0]) / total
    return p, min_p, adaptive


class PermutationPlanTests(SimpleTestCase):
    def test_identity_first_and_valid_rows(self):
        order = draw_permutations(PermutationPlan(50, seed=9), 7)
        self.assertEqual(order.shape, (51, 7))
        npt.assert_array_equal(order[0], np.arange(7))
        for row in order:
            npt.assert_array_equal(np.sort(row), np.arange(7))

    def test_deterministic(self):
        npt.assert_array_equal(draw_permutations(PermutationPlan(20, 5), 6), draw_permutations(PermutationPlan(20, 5), 6))
        self.assertFalse(np.array_equal(draw_permutations(PermutationPlan(20, 5), 6),
                                        draw_permutations(PermutationPlan(20, 6), 6)))

    def test_exhaustive(self):
        plan = PermutationPlan.exhaustive_for(3)
        self.assertEqual(plan.B, 5)
        npt.assert_array_equal(draw_permutations(plan, 3), list(itertools.permutations(range(3))))
        with self.assertRaises(InvalidConfigError):
            PermutationPlan.exhaustive_for(9)

    def test_invalid_plans(self):
        for B in (0, -3, 2.5):
            with self.subTest(B=B), self.assertRaises(InvalidConfigError):
                PermutationPlan(B)
        with self.assertRaises(InvalidConfigError):
            PermutationPlan(10, seed=-1)


class PermuteGramTests(SimpleTestCase):
    def test_permutes_rows_and_columns(self):
        H = GramMatrix(np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 5.0], [3.0, 5.0, 6.0]]))
        npt.assert_array_equal(permute_gram(H, [2, 0, 1]).values, [[6.0, 3.0, 5.0], [3.0, 1.0, 2.0], [5.0, 2.0, 4.0]])

    def test_rejects_non_bijections(self):
        H = GramMatrix(np.eye(3))
        for perm in ([0, 0, 1], [0, 1], [0, 1, 3]):
            with self.subTest(perm=perm), self.assertRaises(InvalidPermutationError):
                permute_gram(H, perm)

    def test_upper_tail_counts_include_ties(self):
        npt.assert_array_equal(upper_tail_counts(np.array([2.0, 1.0, 2.0, 3.0])), [3, 4, 3, 1])

    def test_upper_tail_counts_tie_rounding_noise(self):
        column = np.array([1.0, 1.0 + 4e-16, 1.0 - 4e-16, 1.0 - 1e-9])
        npt.assert_array_equal(upper_tail_counts(column), [3, 3, 3, 4])
        npt.assert_array_equal(upper_tail_counts(column, scale=1e4), [4, 4, 4, 4])

    def test_permuted_data_gram_matches_permuted_gram(self):
        rng = np.random.default_rng(19)
        X = random_centered(rng, 10, 4)
        for b, perm in enumerate(draw_permutations(PermutationPlan(20, seed=6), 10)):
            permuted = X.replace_values(X.values[perm], X.column_state)
            for spec in (KernelSpec.projection(), KernelSpec.ridge(2.0), KernelSpec.linear()):
                with self.subTest(b=b, spec=str(spec)):
                    expected = permute_gram(gram(X, spec), perm).values
                    self.assertLessEqual(relative_gap(gram(permuted, spec).values, expected), 1e-12)


class AdaMantTests(SimpleTestCase):
    def setUp(self):
        rng = np.random.default_rng(17)
        self.X = random_centered(rng, 12, 6)
        self.Y = random_centered(rng, 12, 3)

    def test_exhaustive_matches_brute_force(self):
        rng = np.random.default_rng(18)
        for n in (4, 5, 6):
            X, Y = random_centered(rng, n, 3), random_centered(rng, n, 2)
            H_list = [gram(X, pair.x_spec).values for pair in THREE_PAIRS]
            K_list = [gram(Y, pair.y_spec).values for pair in THREE_PAIRS]
            result = adamant_grams(H_list, K_list, PermutationPlan.exhaustive_for(n), metrics=THREE_PAIRS)
            stats = brute_force(H_list, K_list)
            scales = [np.linalg.norm(H) * np.linalg.norm(K) for H, K in zip(H_list, K_list)]
            p, min_p, adaptive = brute_force_pvalues(result.stat_table, scales)
            with self.subTest(n=n):
                self.assertEqual(result.B, math.factorial(n) - 1)
                npt.assert_allclose(result.stat_table, stats, rtol=1e-12)
                npt.assert_array_equal(result.per_metric_p, p[0])
                npt.assert_array_equal(result.min_p_null, min_p)
                self.assertEqual(result.adaptive_p, adaptive)

    def test_single_metric_reduces_to_mantel(self):
        metrics = [MetricPair(KernelSpec.linear(), KernelSpec.linear())]
        plan = PermutationPlan(199, seed=3)
        result = adamant(self.X, self.Y, metrics, plan)
        mantel = single_mantel_test(gram(self.X, KernelSpec.linear()), gram(self.Y, KernelSpec.linear()), plan)
        self.assertEqual(result.adaptive_p, result.per_metric_p[0])
        self.assertEqual(result.adaptive_p, mantel.p_value)
        self.assertAlmostEqual(result.per_metric_stat[0], mantel.statistic)

    def test_pvalues_are_multiples_of_the_grid(self):
        result = adamant(self.X, self.Y, THREE_PAIRS, PermutationPlan(99, seed=1))
        scaled = np.append(result.per_metric_p, result.adaptive_p) * 100
        npt.assert_allclose(scaled, np.round(scaled), atol=1e-9)
        self.assertTrue(np.all(result.per_metric_p > 0))
        self.assertGreaterEqual(result.adaptive_p, result.per_metric_p.min())
        self.assertEqual(result.seed_echo, 1)
        self.assertEqual(result.selected_pair, THREE_PAIRS[int(np.argmin(result.per_metric_p))])

    def test_positive_scaling_does_not_change_pvalues(self):
        H_list, K_list = [gram(self.X, KernelSpec.linear())], [gram(self.Y, KernelSpec.linear())]
        plan = PermutationPlan(99, seed=4)
        base = adamant_grams(H_list, K_list, plan)
        scaled = adamant_grams([3.0 * H_list[0].values], K_list, plan)
        npt.assert_array_equal(base.per_metric_p, scaled.per_metric_p)

    def test_threads_do_not_change_results(self):
        plan = PermutationPlan(99, seed=8)
        sequential = adamant(self.X, self.Y, THREE_PAIRS, plan, n_jobs=1)
        threaded = adamant(self.X, self.Y, THREE_PAIRS, plan, n_jobs=3)
        npt.assert_array_equal(sequential.stat_table, threaded.stat_table)
        self.assertEqual(sequential.adaptive_p, threaded.adaptive_p)

    def test_strict_formula_flag_is_echoed(self):
        plan = PermutationPlan(49, seed=2)
        result = adamant(self.X, self.Y, THREE_PAIRS, plan, literal_formula=True)
        self.assertTrue(result.literal_formula)
        self.assertGreater(result.adaptive_p, 0.0)

    def test_errors(self):
        with self.assertRaises(EmptyMetricListError):
            adamant(self.X, self.Y, [], PermutationPlan(9))
        with self.assertRaises(DimensionMismatchError):
            adamant(self.X, random_centered(np.random.default_rng(0), 5, 2), THREE_PAIRS, PermutationPlan(9))
        with self.assertRaises(DimensionMismatchError):
            adamant_grams([np.eye(3)], [np.eye(3), np.eye(3)], PermutationPlan(9))

    def test_duplicated_pair_keeps_adaptive_pvalue(self):
        pair = MetricPair(KernelSpec.ridge(5.0), KernelSpec.linear())
        plan = PermutationPlan(199, seed=12)
        once = adamant(self.X, self.Y, [pair], plan)
        twice = adamant(self.X, self.Y, [pair, pair], plan)
        self.assertEqual(twice.adaptive_p, once.adaptive_p)
        npt.assert_array_equal(twice.per_metric_p, [once.per_metric_p[0]] * 2)
        self.assertEqual(twice.selected_metric, 0)

    def test_statistics_match_recomputation_on_permuted_rows(self):
        plan = PermutationPlan(30, seed=13)
        result = adamant(self.X, self.Y, THREE_PAIRS, plan)
        order = draw_permutations(plan, self.X.n)
        for m, pair in enumerate(THREE_PAIRS):
            h, k = gram(self.X, pair.x_spec).values, gram(self.Y, pair.y_spec).values
            scale = np.linalg.norm(h) * np.linalg.norm(k)
            for b, perm in enumerate(order):
                permuted = self.X.replace_values(self.X.values[perm], self.X.column_state)
                recomputed = trace_statistic(gram(permuted, pair.x_spec).values, k)
                with self.subTest(metric=m, b=b):
                    self.assertLessEqual(abs(result.stat_table[b, m] - recomputed), 1e-10 * scale)

    def test_strong_association_is_detected(self):
        rng = np.random.default_rng(21)
        X = random_centered(rng, 40, 3)
        Y = X.replace_values(X.values @ rng.standard_normal((3, 2)) + 0.1 * rng.standard_normal((40, 2)),
                             X.column_state)
        result = adamant(X, Y, THREE_PAIRS, PermutationPlan(199, seed=5))
        self.assertEqual(result.adaptive_p, 1 / 200)

    @tag("slow")
    def test_type_one_error(self):
        rng = np.random.default_rng(2024)
        rejections = 0
        for replicate in range(400):
            X, Y = random_centered(rng, 60, 10), random_centered(rng, 60, 3)
            result = adamant(X, Y, RIDGE_PAIRS, PermutationPlan(99, seed=replicate))
            rejections += result.adaptive_p <= 0.05
        self.assertTrue(0.023 <= rejections / 400 <= 0.083, rejections / 400)


class ExchangeableMatrixTests(SimpleTestCase):
    """Y-side matrices whose trace against any permuted gram is constant."""

    def test_identity_and_centering_give_pvalue_one(self):
        n = 15
        centering = np.eye(n) - np.ones((n, n)) / n
        rng = np.random.default_rng(40)
        for seed in range(20):
            H = gram(random_centered(rng, n, 4), KernelSpec.linear())
            for name, K in (("identity", np.eye(n)), ("centering", centering)):
                with self.subTest(seed=seed, K=name):
                    self.assertEqual(single_mantel_test(H, K, PermutationPlan(99, seed=seed)).p_value, 1.0)

    def test_adaptive_pvalue_is_one(self):
        n = 15
        centering = np.eye(n) - np.ones((n, n)) / n
        X = random_centered(np.random.default_rng(41), n, 4)
        H_list = [gram(X, KernelSpec.ridge(2.0)), gram(X, KernelSpec.linear())]
        result = adamant_grams(H_list, [centering, np.eye(n)], PermutationPlan(99, seed=3))
        self.assertEqual(result.adaptive_p, 1.0)
        npt.assert_array_equal(result.per_metric_p, [1.0, 1.0])
        single = adamant_grams(H_list[:1], [centering], PermutationPlan(99, seed=3))
        self.assertEqual(single.adaptive_p, 1.0)


class ClassicalMantelTestTests(SimpleTestCase):
    def test_identical_data(self):
        X = random_centered(np.random.default_rng(30), 15, 2)
        result = classical_mantel_test(X, X, PermutationPlan(99, seed=1))
        self.assertAlmostEqual(result.statistic, 1.0, places=12)
        self.assertEqual(result.p_value, 0.01)


class HeritabilityGridTests(SimpleTestCase):
    def test_grid(self):
        grid = lambda_grid_from_heritability(100, [0.5, 0.2, 0.5])
        self.assertEqual(len(grid), 2)
        npt.assert_allclose(grid, [100.0, 400.0])

    def test_invalid_heritability(self):
        for h2 in (0.0, 1.0, -0.1):
            with self.subTest(h2=h2), self.assertRaises(InvalidConfigError):
                lambda_grid_from_heritability(10, [h2])
