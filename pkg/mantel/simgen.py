"""Seeded generators for the simulation designs.

Every generator takes an integer seed (or a (seed, key, ...) tuple through
``substream``) and is bit-reproducible for it.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .exceptions import DimensionMismatchError, InvalidConfigError
from .kernels import ColumnState, DataMatrix, center_columns
from .spectral import TrialEpoch

logger = logging.getLogger(__name__)


def substream(seed, *keys):
    """Independent generator for (seed, key, ...), e.g. one per replicate or subject."""
    return np.random.default_rng([int(seed), *(int(key) for key in keys)])


def compound_symmetric_sqrt(m, f, scale=1.0):
    """Symmetric square root of scale * ((1 - f) I + f 11').

    Closed form from the two eigenvalues scale (1 + (m - 1) f) on 1/sqrt(m)
    and scale (1 - f) on its complement.
    """
    if not 0.0 <= f <= 1.0:
        raise InvalidConfigError(f"compound symmetry factor must lie in [0, 1], got {f!r}")
    if scale < 0:
        raise InvalidConfigError(f"variance scale must be nonnegative, got {scale!r}")
    mean_projector = np.full((m, m), 1.0 / m)
    return (math.sqrt(scale * (1.0 - f)) * (np.eye(m) - mean_projector)
            + math.sqrt(scale * (1.0 + (m - 1) * f)) * mean_projector)


def _names(prefix, count):
    return tuple(f"{prefix}{j + 1}" for j in range(count))


def _positive_int(name, value):
    if int(value) != value or value < 1:
        raise InvalidConfigError(f"{name} must be a positive integer, got {value!r}")


# ==================== CONFIGS ====================

@dataclass(frozen=True)
class FixedEffects:
    beta_magnitude: float = 0.05


@dataclass(frozen=True)
class RandomEffects:
    sigma_b2: float = 0.035 ** 2

    def __post_init__(self):
        if self.sigma_b2 < 0:
            raise InvalidConfigError(f"sigma_b2 must be nonnegative, got {self.sigma_b2!r}")


@dataclass(frozen=True)
class UnivariateSimConfig:
    n: int = 200
    p: int = 100
    model: object = field(default_factory=RandomEffects)
    sigma2: float = 1.0
    design_rho: float = 0.1

    def __post_init__(self):
        _positive_int("n", self.n)
        _positive_int("p", self.p)
        if self.sigma2 < 0:
            raise InvalidConfigError(f"sigma2 must be nonnegative, got {self.sigma2!r}")
        if not 0.0 <= self.design_rho < 1.0:
            raise InvalidConfigError(f"design correlation must lie in [0, 1), got {self.design_rho!r}")


@dataclass(frozen=True)
class MultivariateVcConfig:
    n: int = 200
    p: int = 40
    q: int = 20
    sigma_A2: float = 0.0
    offdiag_factor: float = 0.1

    def __post_init__(self):
        for name in ("n", "p", "q"):
            _positive_int(name, getattr(self, name))
        if self.sigma_A2 < 0:
            raise InvalidConfigError(f"sigma_A2 must be nonnegative, got {self.sigma_A2!r}")
        if not 0.0 <= self.offdiag_factor <= 1.0:
            raise InvalidConfigError(f"Sigma_A is not PSD for off-diagonal factor {self.offdiag_factor!r}")


@dataclass(frozen=True)
class BernoulliWeights:
    """Shared group weights w_scale * Bern(bern_p) plus a log-normal perturbation per subject."""
    w_scale: float = 1.0
    bern_p: float = 0.1
    mu_omega: float = 0.5
    sigma_omega: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.bern_p <= 1.0:
            raise InvalidConfigError(f"Bernoulli probability must lie in [0, 1], got {self.bern_p!r}")
        if self.sigma_omega < 0:
            raise InvalidConfigError(f"log-normal sigma must be nonnegative, got {self.sigma_omega!r}")


@dataclass(frozen=True)
class VcWeights:
    """Subject weights drawn from N(0, sigma_g2 XX')."""
    sigma_g2: float = 0.0

    def __post_init__(self):
        if self.sigma_g2 < 0:
            raise InvalidConfigError(f"sigma_g2 must be nonnegative, got {self.sigma_g2!r}")


@dataclass(frozen=True)
class EegGeneticsConfig:
    n: int = 200
    p: int = 300
    q: int = 20
    n_groups: int = 2
    peaks_hz: tuple = (5.12, 12.8)
    ar2_coef2: float = -0.99
    sample_rate_hz: float = 256.0
    series_length: int = 1000
    trials: int = 100
    burn_in: int = 500
    null_channels: int = 10
    weight_scheme: object = field(default_factory=VcWeights)

    def __post_init__(self):
        for name in ("n", "p", "q", "series_length", "trials"):
            _positive_int(name, getattr(self, name))
        if self.n_groups != 2:
            raise InvalidConfigError("the SNP generator uses exactly two groups")
        if not -1.0 < self.ar2_coef2 < 0.0:
            raise InvalidConfigError(f"AR(2) coefficient must lie in (-1, 0) for a spectral peak, got {self.ar2_coef2!r}")
        if any(not 0 < peak < self.sample_rate_hz / 2 for peak in self.peaks_hz) or len(self.peaks_hz) != 2:
            raise InvalidConfigError(f"two peaks below Nyquist required, got {self.peaks_hz!r}")
        if not 0 <= self.null_channels <= self.q:
            raise InvalidConfigError(f"null channel count {self.null_channels} outside [0, {self.q}]")
        if self.burn_in < 0:
            raise InvalidConfigError(f"burn-in must be nonnegative, got {self.burn_in!r}")
        if not isinstance(self.weight_scheme, (BernoulliWeights, VcWeights)):
            raise InvalidConfigError(f"unknown weight scheme {self.weight_scheme!r}")


@dataclass(frozen=True)
class RotationDemoConfig:
    n: int = 100
    p: int = 2
    theta: float = 0.0
    sigma_b2: float = 1.0
    sigma2: float = 1.0

    def __post_init__(self):
        _positive_int("n", self.n)
        if self.p != 2:
            raise InvalidConfigError("the rotation design is defined for p = 2")
        if self.sigma_b2 <= 0 or self.sigma2 <= 0:
            raise InvalidConfigError("rotation design variances must be positive")


# ==================== DESIGNS ====================

def gen_design(n, p, rho, seed):
    """Rows iid N(0, Sigma_X) with compound-symmetric Sigma_X (unit variance, correlation rho), centered."""
    if not 0.0 <= rho < 1.0:
        raise InvalidConfigError(f"design correlation must lie in [0, 1), got {rho!r}")
    rng = np.random.default_rng(seed)
    values = rng.standard_normal((n, p)) @ compound_symmetric_sqrt(p, rho)
    return center_columns(DataMatrix(values, ColumnState.RAW, _names("x", p)))


def gen_univariate(X, config, seed):
    """y = X beta + e (fixed, beta_j = (-1)^j beta) or y = X b + e, b ~ N(0, sigma_b2 I) (random)."""
    rng = np.random.default_rng(seed)
    model = config.model
    if isinstance(model, FixedEffects):
        beta = model.beta_magnitude * (-1.0) ** np.arange(1, X.p + 1)
    elif isinstance(model, RandomEffects):
        beta = math.sqrt(model.sigma_b2) * rng.standard_normal(X.p)
    else:
        raise InvalidConfigError(f"unknown univariate model {model!r}")
    return X.values @ beta + math.sqrt(config.sigma2) * rng.standard_normal(X.n)


def gen_multivariate_vc(X, config, seed):
    """Y = G + E with cov(vec G) = Sigma_A (x) XX'/p and E iid N(0, 1)."""
    rng = np.random.default_rng(seed)
    root = compound_symmetric_sqrt(config.q, config.offdiag_factor, config.sigma_A2)
    latent = rng.standard_normal((X.p, config.q))
    genetic = (X.values / math.sqrt(X.p)) @ latent @ root
    noise = rng.standard_normal((X.n, config.q))
    return DataMatrix(genetic + noise, ColumnState.RAW, _names("y", config.q))


def group_labels(n):
    return np.repeat(np.arange(2), n // 2)


def gen_snp_groups(config, seed, noise_scale=1.0):
    """Two balanced groups sharing a {-1, 0, 1} SNP vector each, plus N(0, 1) subject noise; centered."""
    if config.n % 2:
        raise InvalidConfigError(f"two balanced groups need an even n, got {config.n}")
    rng = np.random.default_rng(seed)
    group_vectors = rng.integers(-1, 2, size=(2, config.p)).astype(np.float64)
    membership = np.repeat(np.eye(2), config.n // 2, axis=0)
    values = membership @ group_vectors + noise_scale * rng.standard_normal((config.n, config.p))
    return center_columns(DataMatrix(values, ColumnState.RAW, _names("snp", config.p)))


def ar2_coefficients(peak_hz, sample_rate_hz, phi2=-0.99):
    """(phi1, phi2) of the AR(2) with conjugate roots at the peak angle and radius sqrt(-phi2)."""
    if not -1.0 < phi2 < 0.0:
        raise InvalidConfigError(f"phi2 must lie in (-1, 0), got {phi2!r}")
    return 2.0 * math.sqrt(-phi2) * math.cos(2.0 * math.pi * peak_hz / sample_rate_hz), phi2


def simulate_ar2(phi, length, rng, burn_in=500):
    """x(t) = phi1 x(t-1) + phi2 x(t-2) + e(t) with N(0, 1) innovations, burn-in dropped."""
    phi1, phi2 = phi
    innovations = rng.standard_normal(burn_in + length)
    return signal.lfilter([1.0], [1.0, -phi1, -phi2], innovations)[burn_in:]


def normalize_mixing_weights(raw):
    """Square each (w1, w2) pair and scale it onto the simplex; an all-zero pair becomes (0.5, 0.5)."""
    squared = np.square(np.asarray(raw, dtype=np.float64))
    total = squared.sum(axis=-1)
    first = np.full(total.shape, 0.5)
    np.divide(squared[..., 0], total, out=first, where=total > 0)
    return np.stack([first, 1.0 - first], axis=-1)


def mixing_weights(config, X, rng):
    """n x q x 2 nonnegative weights summing to one per subject and channel."""
    n, null = config.n, config.null_channels
    linked = config.q - null
    raw = np.empty((n, config.q, 2))
    raw[:, :null, :] = rng.standard_normal((n, null, 2))

    scheme = config.weight_scheme
    if isinstance(scheme, BernoulliWeights):
        shared = scheme.w_scale * rng.binomial(1, scheme.bern_p, size=(2, linked, 2))
        perturbation = rng.lognormal(scheme.mu_omega, scheme.sigma_omega, size=(n, linked, 2))
        raw[:, null:, :] = shared[group_labels(n)] + perturbation
    else:
        if scheme.sigma_g2 == 0 and linked:
            logger.warning("sigma_g2 = 0: genetically linked channels fall back to uniform (0.5, 0.5) mixing")
        draws = rng.standard_normal((X.p, linked * 2))
        raw[:, null:, :] = (math.sqrt(scheme.sigma_g2) * (X.values @ draws)).reshape(n, linked, 2)
    return normalize_mixing_weights(raw)


class EegSimulation:
    """Per-subject multichannel recordings, generated on access.

    Subject i always yields the same trials: its latent AR(2) series come
    from ``substream(seed, 1, i)``.
    """

    def __init__(self, config, weights, seed):
        self.config = config
        self.weights = weights
        self.seed = seed
        self.channels = _names("ch", config.q)
        self.coefficients = [
            ar2_coefficients(peak, config.sample_rate_hz, config.ar2_coef2) for peak in config.peaks_hz
        ]

    def __len__(self):
        return self.config.n

    def __getitem__(self, index):
        if not -len(self) <= index < len(self):
            raise IndexError(index)
        return self.recording(index % len(self))

    def __iter__(self):
        for index in range(len(self)):
            yield self.recording(index)

    def recording(self, index):
        config = self.config
        rng = substream(self.seed, 1, index)
        w = self.weights[index]
        trials = []
        for _ in range(config.trials):
            first = simulate_ar2(self.coefficients[0], config.series_length, rng, config.burn_in)
            second = simulate_ar2(self.coefficients[1], config.series_length, rng, config.burn_in)
            samples = w[:, :1] * first + w[:, 1:] * second
            trials.append(TrialEpoch(samples, config.sample_rate_hz, self.channels))
        return tuple(trials)


def gen_ar2_mixture_eeg(config, X, seed):
    if X.n != config.n:
        raise DimensionMismatchError(f"SNP matrix has {X.n} subjects, config expects {config.n}")
    weights = mixing_weights(config, X, substream(seed, 0))
    return EegSimulation(config, weights, seed)


@dataclass(frozen=True, eq=False)
class RotationDemo:
    X: DataMatrix
    y: np.ndarray
    kernel: np.ndarray


def rotation_kernel(X, theta):
    """U Theta D^2 Theta' U' for the thin SVD X = U D V' and rotation angle theta."""
    U, d, _ = np.linalg.svd(X.values, full_matrices=False)
    rotation = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    loading = U @ rotation @ np.diag(d)
    return loading, loading @ loading.T


def gen_rotation_demo(config, seed, X=None):
    """X iid N(0, 1) (centered) and y ~ N(0, sigma_b2 K_theta + sigma2 I)."""
    rng = np.random.default_rng(seed)
    if X is None:
        X = center_columns(DataMatrix(rng.standard_normal((config.n, 2)), ColumnState.RAW, _names("x", 2)))
    elif X.p != 2:
        raise DimensionMismatchError(f"rotation design needs two columns, got {X.p}")
    loading, kernel = rotation_kernel(X, config.theta)
    y = (math.sqrt(config.sigma_b2) * (loading @ rng.standard_normal(2))
         + math.sqrt(config.sigma2) * rng.standard_normal(X.n))
    return RotationDemo(X, y, kernel)
