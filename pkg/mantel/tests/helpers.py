import numpy as np

from mantel.kernels import ColumnState, DataMatrix, center_columns


def random_centered(rng, n, p):
    return center_columns(DataMatrix(rng.standard_normal((n, p)), ColumnState.RAW))


def relative_gap(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300)
