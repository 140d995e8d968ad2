"""Gram and distance matrices for the ridge kernel family.

The family runs from the Mahalanobis projection X (X'X)^- X' (lambda = 0)
through the ridge kernels X (X'X + lambda I)^-1 X' to the linear kernel X X'
(lambda = inf).  Every Gram matrix can be computed three ways: directly from
the p x p system, from the thin SVD of X, or (ridge only) from the n x n dual
system (XX' + lambda I)^-1 XX'.  The three agree to rounding.
"""
import enum
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.spatial.distance import pdist, squareform

from .exceptions import (
    AdamantError,
    DimensionMismatchError,
    InsufficientObservationsError,
    InvalidKernelError,
    NotCenteredError,
    RankZeroError,
)

logger = logging.getLogger(__name__)

DEFAULT_RANK_TOLERANCE = 1e-12
GRAM_PATHS = ("auto", "direct", "svd", "dual")


def _frozen(values):
    array = np.array(values, dtype=np.float64)
    array.setflags(write=False)
    return array


def _symmetrize(values):
    return 0.5 * (values + values.T)


def _columns_centered(values):
    scale = np.max(np.abs(values), axis=0) if values.size else np.zeros(0)
    return bool(np.all(np.abs(values.mean(axis=0)) <= 1e-10 * scale))


# ==================== DATA ====================

class ColumnState(enum.Enum):
    RAW = "raw"
    CENTERED = "centered"
    STANDARDIZED = "standardized"


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """Observations (rows) by features (columns), immutable."""
    values: np.ndarray
    column_state: ColumnState = ColumnState.RAW
    columns: tuple = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if values.ndim != 2:
            raise DimensionMismatchError(f"data matrix must be 2-d, got shape {values.shape}")
        if self.columns and len(self.columns) != values.shape[1]:
            raise DimensionMismatchError(
                f"{len(self.columns)} column names for {values.shape[1]} columns"
            )
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "columns", tuple(self.columns))

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def p(self):
        return self.values.shape[1]

    @property
    def is_centered(self):
        return self.column_state is not ColumnState.RAW

    @property
    def column_names(self):
        return self.columns or tuple(f"v{j + 1}" for j in range(self.p))

    def replace_values(self, values, column_state):
        return DataMatrix(values, column_state, self.columns)


def _require_centered(X):
    if not X.is_centered:
        raise NotCenteredError(
            "data matrix must be column-centered first (center_columns or standardize_columns)"
        )


def center_columns(X):
    if X.n < 2:
        raise InsufficientObservationsError(f"insufficient observations: n = {X.n}, need at least 2")
    if X.is_centered:
        return X
    return X.replace_values(X.values - X.values.mean(axis=0), ColumnState.CENTERED)


def standardize_columns(X):
    """Center, then scale every column to unit sample variance.

    Constant columns stay at zero so column indexing is preserved
    (monomorphic markers in SNP data).
    """
    if X.column_state is ColumnState.STANDARDIZED:
        return X
    centered = center_columns(X)
    values = np.array(centered.values)
    constant = np.ptp(X.values, axis=0) == 0
    scale = values.std(axis=0, ddof=1)
    scale[constant] = 1.0
    values[:, constant] = 0.0
    return X.replace_values(values / scale, ColumnState.STANDARDIZED)


def residualize(X, C, rank_tolerance=DEFAULT_RANK_TOLERANCE):
    """Residuals of X after least-squares regression on the columns of C."""
    if C.n != X.n:
        raise DimensionMismatchError(f"covariates have {C.n} rows, data has {X.n}")
    if C.p >= X.n:
        raise DimensionMismatchError(
            f"covariate matrix needs fewer columns than observations ({C.p} >= {X.n})"
        )
    coef, _, rank, _ = linalg.lstsq(C.values, X.values, cond=rank_tolerance)
    residuals = X.values - C.values @ coef
    logger.debug("residualized %d columns on %d covariates (rank %d)", X.p, C.p, rank)
    state = ColumnState.CENTERED if _columns_centered(residuals) else ColumnState.RAW
    return X.replace_values(residuals, state)


# ==================== KERNEL SPECS ====================

class KernelFamily(enum.Enum):
    PROJECTION = "projection"
    RIDGE = "ridge"
    LINEAR = "linear"


@dataclass(frozen=True)
class KernelSpec:
    """One member of the ridge family.

    The endpoints lambda = 0 and lambda = inf are their own families so an
    infinite penalty never reaches a matrix inverse.
    """
    family: KernelFamily
    lam: float = None

    def __post_init__(self):
        if self.family is KernelFamily.RIDGE:
            if self.lam is None or not math.isfinite(self.lam) or self.lam <= 0:
                raise InvalidKernelError(
                    f"ridge penalty must be finite and > 0, got {self.lam!r} "
                    "(use the projection kernel for 0 and the linear kernel for inf)"
                )
            object.__setattr__(self, "lam", float(self.lam))
        elif self.lam is not None:
            raise InvalidKernelError(f"{self.family.value} kernel takes no penalty")

    @classmethod
    def projection(cls):
        return cls(KernelFamily.PROJECTION)

    @classmethod
    def ridge(cls, lam):
        return cls(KernelFamily.RIDGE, lam)

    @classmethod
    def linear(cls):
        return cls(KernelFamily.LINEAR)

    @classmethod
    def from_token(cls, token):
        """Parse a penalty token: ``"0"`` projection, ``"inf"`` linear, else ridge."""
        text = str(token).strip().lower()
        if text in ("inf", "+inf", "infinity", "linear"):
            return cls.linear()
        if text == "projection":
            return cls.projection()
        try:
            value = float(text)
        except ValueError:
            raise InvalidKernelError(f"invalid penalty token {token!r}") from None
        if value == 0:
            return cls.projection()
        if math.isinf(value) and value > 0:
            return cls.linear()
        return cls.ridge(value)

    @property
    def token(self):
        if self.family is KernelFamily.PROJECTION:
            return "0"
        if self.family is KernelFamily.LINEAR:
            return "inf"
        return np.format_float_positional(self.lam, trim="-")

    @property
    def penalty(self):
        """Penalty as a float, with the endpoints as 0.0 and inf."""
        if self.family is KernelFamily.PROJECTION:
            return 0.0
        if self.family is KernelFamily.LINEAR:
            return math.inf
        return self.lam

    def weights(self, d):
        """Eigenvalue weights applied to the singular values ``d`` of X."""
        d2 = np.square(np.asarray(d, dtype=np.float64))
        if self.family is KernelFamily.PROJECTION:
            return np.ones_like(d2)
        if self.family is KernelFamily.RIDGE:
            return d2 / (d2 + self.lam)
        return d2

    def __str__(self):
        if self.family is KernelFamily.RIDGE:
            return f"Ridge({self.token})"
        return self.family.value.capitalize()


# ==================== MATRICES ====================

@dataclass(frozen=True, eq=False)
class GramMatrix:
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DimensionMismatchError(f"Gram matrix must be square, got shape {values.shape}")
        scale = np.max(np.abs(values)) if values.size else 0.0
        if not np.allclose(values, values.T, rtol=0.0, atol=1e-10 * scale):
            raise AdamantError("Gram matrix is not symmetric")
        object.__setattr__(self, "values", _frozen(values))

    @property
    def n(self):
        return self.values.shape[0]

    def is_psd(self, tolerance=1e-8):
        eigenvalues = linalg.eigvalsh(self.values)
        return bool(eigenvalues[0] >= -tolerance * max(eigenvalues[-1], 0.0))


@dataclass(frozen=True, eq=False)
class SvdFactor:
    """Thin SVD X = U diag(d) V' restricted to the numerical rank."""
    U: np.ndarray
    d: np.ndarray
    V: np.ndarray
    rank_tolerance: float = DEFAULT_RANK_TOLERANCE

    @property
    def rank(self):
        return self.d.shape[0]

    @property
    def n(self):
        return self.U.shape[0]


@dataclass(frozen=True, eq=False)
class SquaredDistanceMatrix:
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DimensionMismatchError(f"distance matrix must be square, got shape {values.shape}")
        scale = max(np.max(np.abs(values)), 1.0) if values.size else 1.0
        if not np.allclose(values, values.T, rtol=0.0, atol=1e-10 * scale):
            raise AdamantError("squared distance matrix is not symmetric")
        if np.any(np.diag(values) != 0.0):
            raise AdamantError("squared distance matrix must have a zero diagonal")
        if np.any(values < -1e-10 * scale):
            raise AdamantError("squared distance matrix has negative entries")
        object.__setattr__(self, "values", _frozen(values))

    @property
    def n(self):
        return self.values.shape[0]


# ==================== OPERATIONS ====================

def svd_thin(X, rank_tolerance=DEFAULT_RANK_TOLERANCE):
    _require_centered(X)
    U, d, Vt = linalg.svd(X.values, full_matrices=False)
    if d.size == 0 or d[0] == 0.0:
        raise RankZeroError("rank zero: the data matrix has no nonzero singular value")
    keep = d > rank_tolerance * d[0]
    logger.debug("svd_thin kept %d of %d singular values", int(keep.sum()), d.size)
    return SvdFactor(U[:, keep], d[keep], Vt[keep].T, rank_tolerance)


def select_path(n, p, spec):
    """Cheapest exact path: SVD when n >= p, the n x n dual system for wide ridge problems."""
    if n >= p:
        return "svd"
    if spec.family is KernelFamily.RIDGE:
        return "dual"
    return "direct"


def gram(X, spec, path="auto", rank_tolerance=DEFAULT_RANK_TOLERANCE):
    _require_centered(X)
    if path not in GRAM_PATHS:
        raise InvalidKernelError(f"unknown gram path {path!r}; choose from {GRAM_PATHS}")
    if path == "auto":
        path = select_path(X.n, X.p, spec)
    logger.debug("gram %s for %dx%d data via %s path", spec, X.n, X.p, path)
    values = X.values

    if not np.any(values):
        if spec.family is KernelFamily.PROJECTION:
            raise RankZeroError("rank zero: the projection kernel of a zero matrix is undefined")
        return GramMatrix(np.zeros((X.n, X.n)))

    if path == "svd":
        factor = svd_thin(X, rank_tolerance)
        result = (factor.U * spec.weights(factor.d)) @ factor.U.T
    elif path == "dual":
        if spec.family is not KernelFamily.RIDGE:
            raise InvalidKernelError("the dual path is defined for ridge kernels only")
        outer = values @ values.T
        result = linalg.solve(outer + spec.lam * np.eye(X.n), outer, assume_a="pos")
    elif spec.family is KernelFamily.PROJECTION:
        result = values @ linalg.pinv(values, atol=0.0, rtol=rank_tolerance)
    elif spec.family is KernelFamily.RIDGE:
        system = values.T @ values + spec.lam * np.eye(X.p)
        result = values @ linalg.solve(system, values.T, assume_a="pos")
    else:
        result = values @ values.T

    return GramMatrix(_symmetrize(result))


def squared_distance_matrix(X, spec, rank_tolerance=DEFAULT_RANK_TOLERANCE):
    """Pairwise (x_i - x_j)' W (x_i - x_j) with W = (X'X)^-, (X'X + lambda I)^-1 or I.

    Rows are mapped to coordinates whose Euclidean geometry is the W-geometry
    (U for the projection, U diag(d / sqrt(d^2 + lambda)) for ridge) and the
    distances are taken there.
    """
    _require_centered(X)
    if spec.family is KernelFamily.LINEAR:
        coordinates = X.values
    else:
        factor = svd_thin(X, rank_tolerance)
        if spec.family is KernelFamily.PROJECTION:
            coordinates = factor.U
        else:
            coordinates = factor.U * (factor.d / np.sqrt(np.square(factor.d) + spec.lam))
    return SquaredDistanceMatrix(squareform(pdist(coordinates, "sqeuclidean")))


def double_center(D2):
    """-1/2 C D2 C with C = I - 11'/n, the similarity matching a squared distance."""
    values = D2.values
    row_means = values.mean(axis=1, keepdims=True)
    col_means = values.mean(axis=0, keepdims=True)
    centered = values - row_means - col_means + values.mean()
    return GramMatrix(_symmetrize(-0.5 * centered))
