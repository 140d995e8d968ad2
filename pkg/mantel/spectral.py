"""Coherence features from multichannel epochs.

Pipeline per subject: DFT of every channel, cross-spectral matrices
d(w) d(w)^*, average over the frequencies of a band and over trials,
squared coherence |S_mn|^2 / (S_mm S_nn), upper triangle as features.
No taper is applied (plain periodogram).
"""
import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import fft

from .exceptions import (
    BandUnresolvedError,
    DimensionMismatchError,
    InvalidConfigError,
    SingleBinCoherenceWarning,
    ZeroPowerChannelError,
)

logger = logging.getLogger(__name__)

DEFAULT_SAMPLE_RATE_HZ = 256.0
DEFAULT_CUTOFF_HZ = 45.0


@dataclass(frozen=True, eq=False)
class TrialEpoch:
    """One trial: Q channels by T time points."""
    samples: np.ndarray
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ
    channels: tuple = ()

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64)
        if samples.ndim == 1:
            samples = samples.reshape(1, -1)
        if samples.ndim != 2 or samples.shape[1] < 2:
            raise DimensionMismatchError(f"epoch needs Q x T samples with T >= 2, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise InvalidConfigError("epoch contains non-finite samples")
        if not self.sample_rate_hz > 0:
            raise InvalidConfigError(f"sample rate must be positive, got {self.sample_rate_hz!r}")
        if self.channels and len(self.channels) != samples.shape[0]:
            raise DimensionMismatchError(f"{len(self.channels)} channel ids for {samples.shape[0]} channels")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "channels", tuple(self.channels))

    @property
    def Q(self):
        return self.samples.shape[0]

    @property
    def T(self):
        return self.samples.shape[1]

    @property
    def channel_names(self):
        return self.channels or tuple(f"ch{q + 1}" for q in range(self.Q))


@dataclass(frozen=True, eq=False)
class SpectralMatrix:
    """Hermitian Q x Q cross-spectral matrix at one frequency or for one band."""
    values: np.ndarray
    frequency_label: object

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DimensionMismatchError(f"spectral matrix must be square, got shape {values.shape}")
        scale = np.max(np.abs(values)) if values.size else 0.0
        if not np.allclose(values, values.conj().T, rtol=0.0, atol=1e-10 * scale):
            raise InvalidConfigError("spectral matrix is not Hermitian")
        object.__setattr__(self, "values", values)

    @property
    def Q(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class BandSpec:
    name: str
    low_hz: float
    high_hz: float
    cutoff_hz: float = DEFAULT_CUTOFF_HZ

    def __post_init__(self):
        if not 0 < self.low_hz < self.high_hz <= self.cutoff_hz:
            raise InvalidConfigError(
                f"band {self.name!r} needs 0 < low < high <= {self.cutoff_hz:g} Hz, "
                f"got [{self.low_hz:g}, {self.high_hz:g})"
            )

    @classmethod
    def parse(cls, text, cutoff_hz=DEFAULT_CUTOFF_HZ):
        """``name:low:high`` or a standard band name; high edges beyond the cutoff are clipped."""
        parts = str(text).strip().split(":")
        if len(parts) == 1:
            try:
                return DEFAULT_BANDS[parts[0].lower()]
            except KeyError:
                raise InvalidConfigError(f"unknown band {text!r}; use name:low:high") from None
        if len(parts) != 3:
            raise InvalidConfigError(f"band {text!r} must look like name:low:high")
        name = parts[0]
        try:
            low, high = float(parts[1]), float(parts[2])
        except ValueError:
            raise InvalidConfigError(f"band {text!r} has non-numeric edges") from None
        if high > cutoff_hz:
            logger.warning("band %s clipped from %g Hz to the %g Hz cutoff", name, high, cutoff_hz)
            high = cutoff_hz
        return cls(name, low, high, cutoff_hz)

    def contains(self, hz):
        """Half-open [low, high) membership, capped at the cutoff."""
        return self.low_hz <= hz < self.high_hz and hz <= self.cutoff_hz

    def __str__(self):
        return f"{self.name} [{self.low_hz:g}, {self.high_hz:g}) Hz"


DEFAULT_BANDS = {
    "theta": BandSpec("theta", 4.0, 8.0),
    "alpha": BandSpec("alpha", 8.0, 12.0),
    "beta": BandSpec("beta", 12.0, 30.0),
    # 30-50 Hz in the usual convention, clipped at the cutoff
    "gamma": BandSpec("gamma", 30.0, 45.0),
}


@dataclass(frozen=True, eq=False)
class CoherenceMatrix:
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DimensionMismatchError(f"coherence matrix must be square, got shape {values.shape}")
        if not np.array_equal(values, values.T):
            raise InvalidConfigError("coherence matrix is not symmetric")
        if np.any(values < 0.0) or np.any(values > 1.0 + 1e-10):
            raise InvalidConfigError("coherence outside [0, 1]")
        object.__setattr__(self, "values", values)

    @property
    def Q(self):
        return self.values.shape[0]


# ==================== OPERATIONS ====================

def standardized_frequencies(T):
    """w_j = j / T for j = 0..T-1, folded into (-0.5, 0.5]."""
    omega = np.arange(T) / T
    omega[omega > 0.5] -= 1.0
    return omega


def dft(epoch):
    """d_q(w_j) = T^(-1/2) sum_{t=1..T} X_q(t) exp(-2 pi i w_j t), as a Q x T array."""
    T = epoch.T
    shift = np.exp(-2j * np.pi * np.arange(T) / T)
    return fft.fft(epoch.samples, axis=1) * shift / np.sqrt(T)


def cross_spectra(epoch):
    coefficients = dft(epoch)
    omega = standardized_frequencies(epoch.T)
    return [
        SpectralMatrix(np.outer(coefficients[:, j], coefficients[:, j].conj()), float(omega[j]))
        for j in range(epoch.T)
    ]


def band_bins(T, sample_rate_hz, band):
    """Indices of the positive DFT frequencies that fall inside ``band``."""
    omega = standardized_frequencies(T)
    return np.array(
        [j for j in range(T) if omega[j] > 0 and band.contains(omega[j] * sample_rate_hz)],
        dtype=np.intp,
    )


def _warn_single_bin(band):
    message = f"coherence for {band.name} averages a single frequency bin of a single trial and is identically 1"
    logger.warning(message)
    warnings.warn(message, SingleBinCoherenceWarning, stacklevel=3)


def band_trial_average(spectra_per_trial, band, sample_rate_hz):
    """Mean over the in-band positive frequencies of each trial, then over trials."""
    if not spectra_per_trial:
        raise InvalidConfigError("band averaging needs at least one trial")
    trial_means = []
    index_count = 0
    for spectra in spectra_per_trial:
        selected = [
            spectrum.values for spectrum in spectra
            if isinstance(spectrum.frequency_label, float)
            and spectrum.frequency_label > 0
            and band.contains(spectrum.frequency_label * sample_rate_hz)
        ]
        if not selected:
            raise BandUnresolvedError(f"band unresolved at this T: no DFT bins in {band}")
        index_count += len(selected)
        trial_means.append(np.sum(selected, axis=0) / len(selected))
    if index_count == 1:
        _warn_single_bin(band)
    return SpectralMatrix(np.sum(trial_means, axis=0) / len(trial_means), band.name)


def coherence(S):
    values = S.values
    power = values.diagonal().real
    silent = np.flatnonzero(power <= 0.0)
    if silent.size:
        raise ZeroPowerChannelError(f"zero-power channel at index {int(silent[0])}")
    squared = np.abs(values) ** 2 / np.outer(power, power)
    upper = np.triu(squared, k=1)
    result = upper + upper.T
    np.fill_diagonal(result, 1.0)
    return CoherenceMatrix(result)


def vectorize_upper(coh):
    """Row-major upper triangle without the diagonal, length Q(Q-1)/2."""
    return coh.values[np.triu_indices(coh.Q, k=1)]


def pair_labels(channels):
    rows, cols = np.triu_indices(len(channels), k=1)
    return [f"{channels[i]}:{channels[j]}" for i, j in zip(rows, cols)]


def band_spectra(trials, bands):
    """Band- and trial-averaged spectral matrices computed straight from the DFT.

    Same numbers as cross_spectra + band_trial_average without materialising
    one Q x Q matrix per frequency.
    """
    if not trials:
        raise InvalidConfigError("band averaging needs at least one trial")
    first = trials[0]
    for trial in trials[1:]:
        if trial.samples.shape != first.samples.shape or trial.sample_rate_hz != first.sample_rate_hz:
            raise DimensionMismatchError(
                f"inconsistent trials: {trial.samples.shape} at {trial.sample_rate_hz:g} Hz vs "
                f"{first.samples.shape} at {first.sample_rate_hz:g} Hz"
            )

    bins = {}
    for band in bands:
        bins[band.name] = band_bins(first.T, first.sample_rate_hz, band)
        if bins[band.name].size == 0:
            raise BandUnresolvedError(f"band unresolved at this T: no DFT bins in {band}")

    sums = {band.name: np.zeros((first.Q, first.Q), dtype=np.complex128) for band in bands}
    for trial in trials:
        coefficients = dft(trial)
        for band in bands:
            selected = coefficients[:, bins[band.name]]
            sums[band.name] += (selected @ selected.conj().T) / selected.shape[1]

    result = {}
    for band in bands:
        if bins[band.name].size * len(trials) == 1:
            _warn_single_bin(band)
        averaged = sums[band.name] / len(trials)
        result[band.name] = SpectralMatrix(0.5 * (averaged + averaged.conj().T), band.name)
    return result


def coherence_features(trials, bands):
    """Upper-triangle coherence vector per band for one subject."""
    return {name: vectorize_upper(coherence(S)) for name, S in band_spectra(trials, bands).items()}
