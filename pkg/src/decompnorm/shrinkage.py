"""Closed-form minimizers of the square-loss problems.

Each operator solves min_X 1/(2NP) ||Y - X||_F^2 + lambda ||X||_D for one of
the closed-form decomposition norms, with the threshold argument being the
already-multiplied quantity t = lambda N P:

    svt                      trace norm        (l2 columns, l2 rows)
    row_group_threshold      sum of row norms  (l1 columns, l2 rows)
    entrywise_soft_threshold entrywise l1      (l1 columns, l1 rows)
"""

from __future__ import annotations

import numpy as np

from .linalg import as_matrix, svd


def _check_threshold(threshold: float) -> float:
    t = float(threshold)
    if t < 0:
        raise ValueError(f"threshold must be nonnegative, got {t}")
    return t


def svt(y, threshold: float) -> np.ndarray:
    """Singular value thresholding: shrink each singular value by `threshold`."""
    y = as_matrix(y, "y")
    t = _check_threshold(threshold)
    res = svd(y)
    s = np.maximum(res.singular_values - t, 0.0)
    return (res.left_vectors * s) @ res.right_vectors.T


def row_group_threshold(y, threshold: float) -> np.ndarray:
    """Shrink each row of Y toward zero by `threshold` in l2 length.

    Rows with norm at most the threshold become exactly zero.
    """
    y = as_matrix(y, "y")
    t = _check_threshold(threshold)
    norms = np.linalg.norm(y, axis=1)
    scale = np.zeros_like(norms)
    keep = norms > t
    scale[keep] = (norms[keep] - t) / norms[keep]
    return y * scale[:, None]


def entrywise_soft_threshold(y, threshold: float) -> np.ndarray:
    """Soft threshold every entry: sign(y) max(|y| - threshold, 0)."""
    y = as_matrix(y, "y")
    t = _check_threshold(threshold)
    return np.sign(y) * np.maximum(np.abs(y) - t, 0.0)
