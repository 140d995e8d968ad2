"""CSV input and output for data matrices and EEG epochs.

Matrices: header row of feature names, one row per observation.
Epochs: one file per subject; columns ``trial``, ``channel`` and then the
T samples, one row per (trial, channel).

Numbers are written with 17 significant digits so a write/load round trip
reproduces every float exactly.
"""
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from .exceptions import DimensionMismatchError, MatrixParseError
from .kernels import ColumnState, DataMatrix
from .spectral import DEFAULT_SAMPLE_RATE_HZ, TrialEpoch

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
EPOCH_KEY_COLUMNS = ("trial", "channel")


def _read_cells(path):
    """Every cell as a stripped string; ragged and empty files are rejected.

    The header is read as an ordinary row so that a data row longer than the
    header is a parse error instead of an implicit index column.
    """
    try:
        raw = pd.read_csv(path, header=None, dtype=str, keep_default_na=False, skipinitialspace=True)
    except FileNotFoundError:
        raise MatrixParseError("file not found", path=path) from None
    except pd.errors.EmptyDataError:
        raise MatrixParseError("empty file", path=path) from None
    except pd.errors.ParserError as exc:
        raise MatrixParseError(f"ragged rows: {exc}", path=path) from None
    if raw.shape[0] < 2:
        raise MatrixParseError("no data rows", path=path)
    frame = raw.iloc[1:].reset_index(drop=True)
    frame.columns = [str(name).strip() for name in raw.iloc[0]]

    # short rows come back as NaN, explicit empty cells as ""
    missing = frame.isna()
    if missing.to_numpy().any():
        row, col = np.argwhere(missing.to_numpy())[0]
        raise MatrixParseError("ragged row: missing field", path=path, row=int(row) + 1, column=frame.columns[col])
    return frame.apply(lambda column: column.str.strip())


def _numeric(cells, path):
    """Float block from string cells; the first non-numeric or non-finite cell is reported."""
    coerced = cells.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=np.float64)
    bad = ~np.isfinite(coerced)
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise MatrixParseError(
            f"non-numeric value {cells.iat[row, col]!r}", path=path, row=int(row) + 1, column=cells.columns[col]
        )
    # numpy's parser is correctly rounded, so 17-digit text comes back bit-identical
    return cells.to_numpy(dtype=str).astype(np.float64)


def load_matrix(path):
    cells = _read_cells(path)
    values = _numeric(cells, path)
    logger.info("loaded %s: %d observations x %d features", path, *values.shape)
    return DataMatrix(values, ColumnState.RAW, tuple(str(name) for name in cells.columns))


def write_matrix(matrix, path, columns=None):
    values = matrix.values if isinstance(matrix, DataMatrix) else np.asarray(matrix, dtype=np.float64)
    if values.ndim == 1:
        values = values.reshape(-1, 1)
    if columns is None:
        columns = matrix.column_names if isinstance(matrix, DataMatrix) else [f"v{j + 1}" for j in range(values.shape[1])]
    pd.DataFrame(values, columns=list(columns)).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return Path(path)


def load_epochs(path, sample_rate_hz=DEFAULT_SAMPLE_RATE_HZ):
    """Trials of one subject, in order of first appearance."""
    cells = _read_cells(path)
    if tuple(cells.columns[:2]) != EPOCH_KEY_COLUMNS or cells.shape[1] < 4:
        raise MatrixParseError("epoch file needs columns trial, channel and at least two samples", path=path)
    samples = _numeric(cells.iloc[:, 2:], path)

    trials = []
    channels = None
    trial_column = cells["trial"].to_numpy()
    for trial_id in pd.unique(trial_column):
        rows = np.flatnonzero(trial_column == trial_id)
        trial_channels = tuple(cells["channel"].iloc[rows])
        if channels is None:
            channels = trial_channels
        elif trial_channels != channels:
            raise DimensionMismatchError(
                f"{path}: trial {trial_id!r} has channels {trial_channels}, expected {channels}"
            )
        trials.append(TrialEpoch(samples[rows], sample_rate_hz, channels))
    return tuple(trials)


def load_epochs_dir(directory, sample_rate_hz=DEFAULT_SAMPLE_RATE_HZ):
    """``{subject: trials}`` for every ``*.csv`` in the directory, subjects in file-name order."""
    files = sorted(Path(directory).glob("*.csv"))
    if not files:
        raise MatrixParseError("no epoch files (*.csv)", path=directory)
    subjects = {path.stem: load_epochs(path, sample_rate_hz) for path in files}
    logger.info("loaded epochs for %d subjects from %s", len(subjects), directory)
    return subjects


def write_epochs(trials, path):
    frames = []
    for index, trial in enumerate(trials, start=1):
        frame = pd.DataFrame(trial.samples, columns=[f"t{t + 1}" for t in range(trial.T)])
        frame.insert(0, "channel", trial.channel_names)
        frame.insert(0, "trial", index)
        frames.append(frame)
    pd.concat(frames, ignore_index=True).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return Path(path)
