"""Scalar association statistics between Gram matrices.

All statistics are reported unnormalized: the permutation p-values built on
them do not change under positive rescaling.
"""
import enum
import logging
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps
from scipy.spatial.distance import squareform

from .exceptions import DegenerateSimilarityError, DimensionMismatchError, NotCenteredError
from .kernels import GramMatrix, KernelSpec, gram

logger = logging.getLogger(__name__)


class AssociationKind(enum.Enum):
    MANTEL_TRACE = "mantel_trace"
    RV = "rv"
    FIXED_SCORE = "fixed_score"
    RANDOM_SCORE = "random_score"
    RIDGE_SCORE = "ridge_score"
    CLASSICAL_MANTEL = "classical_mantel"


@dataclass(frozen=True)
class AssociationValue:
    statistic: float
    kind: AssociationKind

    def __float__(self):
        return self.statistic


@dataclass(frozen=True, eq=False)
class PrincipalCorrelation:
    """z = U'y, the outcome's coordinates along the principal directions of X."""
    z: np.ndarray
    d: np.ndarray


def _values(matrix):
    return matrix.values if isinstance(matrix, GramMatrix) else np.asarray(matrix, dtype=np.float64)


def trace_statistic(h, k):
    """sum_ij h_ij k_ij, which is tr(hk) for symmetric inputs."""
    return float(np.einsum("ij,ij->", h, k))


def _check_pair(H, K):
    if H.shape != K.shape:
        raise DimensionMismatchError(f"similarity matrices differ in shape: {H.shape} vs {K.shape}")


def _centered_vector(y, n):
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape[0] != n:
        raise DimensionMismatchError(f"outcome has length {y.shape[0]}, expected {n}")
    scale = np.max(np.abs(y)) if y.size else 0.0
    if abs(y.mean()) > 1e-10 * scale:
        raise NotCenteredError("outcome vector must be centered")
    return y


def mantel_trace(H, K):
    h, k = _values(H), _values(K)
    _check_pair(h, k)
    return AssociationValue(trace_statistic(h, k), AssociationKind.MANTEL_TRACE)


def rv_coefficient(H, K):
    """tr(HK) / sqrt(tr(H^2) tr(K^2)), the cosine of the vectorized matrices."""
    h, k = _values(H), _values(K)
    _check_pair(h, k)
    hh, kk = trace_statistic(h, h), trace_statistic(k, k)
    if hh <= 0.0 or kk <= 0.0:
        raise DegenerateSimilarityError("degenerate similarity: a zero matrix has no RV coefficient")
    value = trace_statistic(h, k) / np.sqrt(hh * kk)
    return AssociationValue(float(np.clip(value, -1.0, 1.0)), AssociationKind.RV)


def fixed_effects_score(X, Y):
    """tr(H_0 K_0), Pillai's trace of the canonical correlations of X and Y."""
    H = gram(X, KernelSpec.projection(), path="svd")
    K = gram(Y, KernelSpec.projection(), path="svd")
    return AssociationValue(mantel_trace(H, K).statistic, AssociationKind.FIXED_SCORE)


def random_effects_score(X, Y):
    """tr(XX' YY'), the variance-components score statistic."""
    H = gram(X, KernelSpec.linear())
    K = gram(Y, KernelSpec.linear())
    return AssociationValue(mantel_trace(H, K).statistic, AssociationKind.RANDOM_SCORE)


def principal_correlations(factor, y):
    y = _centered_vector(y, factor.n)
    return PrincipalCorrelation(factor.U.T @ y, factor.d)


def ridge_score_univariate(factor, y, spec):
    """sum_j w_j z_j^2 with w_j = 1, d_j^2/(d_j^2 + lambda) or d_j^2.

    Equals tr(H y y') for H = gram(X, spec) at O(nr) cost.
    """
    z = principal_correlations(factor, y).z
    value = float(np.sum(spec.weights(factor.d) * np.square(z)))
    return AssociationValue(value, AssociationKind.RIDGE_SCORE)


def classical_mantel_r(DX, DY):
    """Pearson correlation of the upper triangles of two distance matrices."""
    dx, dy = _values(DX), _values(DY)
    _check_pair(dx, dy)
    x_flat = squareform(dx, checks=False)
    y_flat = squareform(dy, checks=False)
    if np.all(x_flat == x_flat[0]) or np.all(y_flat == y_flat[0]):
        raise DegenerateSimilarityError("degenerate similarity: constant distances have no correlation")
    return AssociationValue(float(sps.pearsonr(x_flat, y_flat).statistic), AssociationKind.CLASSICAL_MANTEL)
