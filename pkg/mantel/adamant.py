"""Adaptive Mantel test.

A list of kernel pairs is evaluated on one shared sequence of permutations.
Each pair gets its own permutation p-value; the adaptive statistic is the
smallest of them, calibrated against the same permutations (min-p).

Permutation indices are drawn once, sequentially, from the seed. The
statistic evaluations that follow are independent, so they run through
joblib without changing any result.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .exceptions import (
    DimensionMismatchError,
    EmptyMetricListError,
    InvalidConfigError,
    InvalidPermutationError,
)
from .kernels import DEFAULT_RANK_TOLERANCE, GramMatrix, KernelSpec, gram, squared_distance_matrix
from .stats import classical_mantel_r, trace_statistic

logger = logging.getLogger(__name__)

MAX_EXHAUSTIVE_N = 8

# permuted statistics within this fraction of ||H||_F ||K||_F of each other are ties
TIE_RTOL = 1e-12


# ==================== PLANS ====================

@dataclass(frozen=True)
class MetricPair:
    x_spec: KernelSpec
    y_spec: KernelSpec

    def __str__(self):
        return f"({self.x_spec}, {self.y_spec})"


@dataclass(frozen=True)
class MetricPairList:
    pairs: tuple

    def __post_init__(self):
        pairs = tuple(pair if isinstance(pair, MetricPair) else MetricPair(*pair) for pair in self.pairs)
        if not pairs:
            raise EmptyMetricListError("the metric list is empty; give at least one kernel pair")
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def cross_product(cls, x_specs, y_specs):
        return cls(tuple(MetricPair(x, y) for x, y in itertools.product(x_specs, y_specs)))

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __getitem__(self, index):
        return self.pairs[index]


@dataclass(frozen=True)
class PermutationPlan:
    B: int
    seed: int = 42
    exhaustive: bool = False

    def __post_init__(self):
        if int(self.B) != self.B or self.B < 1:
            raise InvalidConfigError(f"number of permutations must be a positive integer, got {self.B!r}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise InvalidConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        object.__setattr__(self, "B", int(self.B))
        object.__setattr__(self, "seed", int(self.seed))

    @classmethod
    def exhaustive_for(cls, n, seed=0):
        """Every non-identity permutation of n observations (n <= 8)."""
        if n > MAX_EXHAUSTIVE_N:
            raise InvalidConfigError(f"exhaustive permutations need n <= {MAX_EXHAUSTIVE_N}, got {n}")
        return cls(math.factorial(n) - 1, seed, exhaustive=True)

    @property
    def replicates(self):
        return self.B + 1


def draw_permutations(plan, n):
    """(B + 1) x n array of index permutations; row 0 is the identity."""
    if plan.exhaustive:
        if n > MAX_EXHAUSTIVE_N or plan.B != math.factorial(n) - 1:
            raise InvalidConfigError(
                f"exhaustive plan with B = {plan.B} does not enumerate the permutations of {n} observations"
            )
        return np.array(list(itertools.permutations(range(n))), dtype=np.intp)

    rng = np.random.Generator(np.random.PCG64(plan.seed))
    order = np.empty((plan.B + 1, n), dtype=np.intp)
    order[0] = np.arange(n)
    for b in range(1, plan.B + 1):
        order[b] = rng.permutation(n)
    return order


# ==================== RESULTS ====================

@dataclass(frozen=True)
class MantelTestResult:
    statistic: float
    p_value: float


@dataclass(frozen=True, eq=False)
class AdaMantResult:
    per_metric_stat: np.ndarray
    per_metric_p: np.ndarray
    stat_table: np.ndarray
    min_p_null: np.ndarray
    adaptive_p: float
    selected_metric: int
    seed_echo: int
    B: int
    literal_formula: bool = False
    metrics: MetricPairList = field(default=None)

    @property
    def selected_pair(self):
        return self.metrics[self.selected_metric] if self.metrics is not None else None


# ==================== OPERATIONS ====================

def _validate_permutation(perm, n):
    perm = np.asarray(perm)
    if perm.shape != (n,) or not np.array_equal(np.sort(perm), np.arange(n)):
        raise InvalidPermutationError(f"not a permutation of {n} indices")
    return perm.astype(np.intp)


def permute_gram(H, perm):
    """H[perm(i), perm(j)]: rows and columns permuted together."""
    perm = _validate_permutation(perm, H.n)
    return GramMatrix(H.values[np.ix_(perm, perm)])


def permutation_statistics(h, k, order):
    """tr(h^(b) k) for every permutation row of ``order``."""
    return np.array([trace_statistic(h[np.ix_(perm, perm)], k) for perm in order])


def tie_scale(h, k):
    """Upper bound on |tr(h^(b) k)| over all permutations, the reference for ties."""
    return float(np.linalg.norm(h) * np.linalg.norm(k))


def upper_tail_counts(column, scale=None):
    """#{b' : column[b] <= column[b']} for every b, ties included.

    Values closer than ``TIE_RTOL * scale`` count as equal, so a statistic
    that only differs by summation order between permutations always ties.
    ``scale`` defaults to the largest |value| in the column.
    """
    column = np.asarray(column, dtype=np.float64)
    if scale is None:
        scale = float(np.max(np.abs(column))) if column.size else 0.0
    ordered = np.sort(column)
    return column.size - np.searchsorted(ordered, column - TIE_RTOL * scale, side="left")


def _square_arrays(matrices, n=None):
    arrays = []
    for matrix in matrices:
        values = matrix.values if isinstance(matrix, GramMatrix) else np.asarray(matrix, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DimensionMismatchError(f"similarity matrix must be square, got shape {values.shape}")
        if n is None:
            n = values.shape[0]
        if values.shape[0] != n:
            raise DimensionMismatchError(f"similarity matrices differ in size: {values.shape[0]} vs {n}")
        arrays.append(values)
    return arrays, n


def single_mantel_test(H, K, plan):
    """Permutation Mantel test of tr(HK); larger means stronger association."""
    (h, k), n = _square_arrays([H, K])
    column = permutation_statistics(h, k, draw_permutations(plan, n))
    count = upper_tail_counts(column, tie_scale(h, k))[0]
    return MantelTestResult(float(column[0]), count / column.size)


def adamant_grams(H_list, K_list, plan, n_jobs=1, literal_formula=False, metrics=None):
    """AdaMant on precomputed similarity matrices, paired by position.

    ``literal_formula`` counts permutation minima that are at least as
    large as the observed one instead of at least as small; it exists only to
    compare against the literal published formula.
    """
    if not H_list or not K_list:
        raise EmptyMetricListError("the metric list is empty; give at least one kernel pair")
    if len(H_list) != len(K_list):
        raise DimensionMismatchError(f"{len(H_list)} X-side matrices for {len(K_list)} Y-side matrices")
    h_arrays, n = _square_arrays(H_list)
    k_arrays, _ = _square_arrays(K_list, n)

    order = draw_permutations(plan, n)
    columns = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(permutation_statistics)(h, k, order) for h, k in zip(h_arrays, k_arrays)
    )
    stat_table = np.column_stack(columns)
    counts = np.column_stack([
        upper_tail_counts(column, tie_scale(h, k)) for column, h, k in zip(columns, h_arrays, k_arrays)
    ])
    total = order.shape[0]

    min_counts = counts.min(axis=1)
    if literal_formula:
        extreme = min_counts[0] <= min_counts
    else:
        extreme = min_counts[0] >= min_counts
    adaptive_p = int(extreme.sum()) / total
    selected = int(np.argmin(counts[0]))

    logger.debug("adamant: %d metrics, %d permutations, adaptive p %.6g", len(columns), total - 1, adaptive_p)
    return AdaMantResult(
        per_metric_stat=stat_table[0].copy(),
        per_metric_p=counts[0] / total,
        stat_table=stat_table,
        min_p_null=min_counts / total,
        adaptive_p=adaptive_p,
        selected_metric=selected,
        seed_echo=plan.seed,
        B=total - 1,
        literal_formula=literal_formula,
        metrics=metrics,
    )


def metric_grams(X, Y, metrics, path="auto", rank_tolerance=DEFAULT_RANK_TOLERANCE):
    """Gram matrices for every pair, each distinct kernel computed once."""
    if X.n != Y.n:
        raise DimensionMismatchError(f"X has {X.n} observations, Y has {Y.n}")
    x_cache = {spec: gram(X, spec, path, rank_tolerance) for spec in dict.fromkeys(pair.x_spec for pair in metrics)}
    y_cache = {spec: gram(Y, spec, path, rank_tolerance) for spec in dict.fromkeys(pair.y_spec for pair in metrics)}
    return [x_cache[pair.x_spec] for pair in metrics], [y_cache[pair.y_spec] for pair in metrics]


def adamant(X, Y, metrics, plan, n_jobs=1, literal_formula=False, path="auto",
            rank_tolerance=DEFAULT_RANK_TOLERANCE):
    if not isinstance(metrics, MetricPairList):
        metrics = MetricPairList(tuple(metrics))
    H_list, K_list = metric_grams(X, Y, metrics, path, rank_tolerance)
    return adamant_grams(H_list, K_list, plan, n_jobs, literal_formula, metrics)


def classical_mantel_test(X, Y, plan):
    """Pearson-correlation Mantel test on Euclidean distances.

    Row/column permutations leave the mean and spread of the off-diagonal
    distances unchanged, so ranking permutations by tr(D_X^(b) D_Y) ranks
    them by the correlation.
    """
    if X.n != Y.n:
        raise DimensionMismatchError(f"X has {X.n} observations, Y has {Y.n}")
    dx = np.sqrt(squared_distance_matrix(X, KernelSpec.linear()).values)
    dy = np.sqrt(squared_distance_matrix(Y, KernelSpec.linear()).values)
    r = classical_mantel_r(dx, dy).statistic
    p_value = single_mantel_test(dx, dy, plan).p_value
    return MantelTestResult(r, p_value)


def lambda_grid_from_heritability(p, h2_values):
    """lambda = p (1 - h2) / h2 per heritability value, deduplicated and ascending."""
    if int(p) != p or p < 1:
        raise InvalidConfigError(f"number of features must be a positive integer, got {p!r}")
    grid = set()
    for h2 in h2_values:
        if not 0.0 < h2 < 1.0:
            raise InvalidConfigError(f"heritability must lie in (0, 1), got {h2!r}")
        grid.add(p * (1.0 - h2) / h2)
    return sorted(grid)
