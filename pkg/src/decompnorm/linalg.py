"""Dense linear-algebra primitives and deterministic randomness.

Everything downstream works on plain float64 numpy arrays; the helpers here
add the validation, factorization and RNG plumbing the solvers rely on, plus
the plain-text matrix format used by the CLI.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg


class NotPositiveDefiniteError(ValueError):
    """Raised when a matrix handed to an SPD routine is not positive definite."""


class SvdConvergenceError(RuntimeError):
    """Raised when the SVD backend fails to converge."""


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and return `a` as a finite 2-D float64 array.

    Raises ValueError on wrong dimensionality, empty axes, or non-finite
    entries.
    """
    out = np.asarray(a, dtype=float)
    if out.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {out.shape}")
    if out.shape[0] < 1 or out.shape[1] < 1:
        raise ValueError(f"{name} must have positive dimensions, got {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return out


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD of a rectangular matrix.

    left_vectors is N x r, right_vectors is P x r, singular_values has
    length r = min(N, P) and is sorted nonincreasing.
    """

    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left_vectors * self.singular_values) @ self.right_vectors.T


def svd(x) -> SvdResult:
    """Thin SVD; raises SvdConvergenceError on backend non-convergence."""
    x = as_matrix(x, "x")
    try:
        u, s, vt = np.linalg.svd(x, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SvdConvergenceError(
            f"SVD did not converge for a {x.shape[0]}x{x.shape[1]} matrix"
        ) from exc
    return SvdResult(left_vectors=u, singular_values=s, right_vectors=vt.T)


def solve_spd(a, b) -> np.ndarray:
    """Solve A Z = B for symmetric positive definite A via Cholesky.

    A must be symmetric to within 1e-10 (relative to its largest entry).
    """
    a = as_matrix(a, "a")
    b = np.asarray(b, dtype=float)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"a must be square, got {a.shape}")
    scale = max(1.0, float(np.abs(a).max()))
    if np.abs(a - a.T).max() > 1e-10 * scale:
        raise ValueError("a is not symmetric")
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(
            f"{a.shape[0]}x{a.shape[0]} matrix is not positive definite"
        ) from exc
    # Guard against formally factorizable but numerically singular systems.
    diag = np.diag(factor[0])
    if np.min(diag) ** 2 <= 1e-14 * max(np.trace(a), 0.0):
        raise NotPositiveDefiniteError(
            f"{a.shape[0]}x{a.shape[0]} matrix is not positive definite "
            "(pivot below tolerance)"
        )
    return scipy.linalg.cho_solve(factor, b, check_finite=False)


class RngStream:
    """Counter-based deterministic random stream (Philox).

    Identical seeds reproduce identical draw sequences across platforms.
    Independent substreams for parallel work are derived as seed + index.
    """

    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError("seed must be a nonnegative integer")
        self.seed = int(seed)
        self.generator = np.random.Generator(np.random.Philox(key=self.seed))

    def substream(self, index: int) -> "RngStream":
        return RngStream(self.seed + int(index))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed})"


def standard_normal_matrix(rng: RngStream, rows: int, cols: int) -> np.ndarray:
    """Draw a rows x cols matrix of independent standard normal entries."""
    if rows < 1 or cols < 1:
        raise ValueError(f"dimensions must be positive, got {rows}x{cols}")
    return rng.generator.standard_normal((rows, cols))


def write_matrix(path, a) -> None:
    """Write a matrix in the plain-text format: 'rows cols' then one line per row."""
    a = as_matrix(a, "matrix")
    with open(path, "w") as fh:
        fh.write(f"{a.shape[0]} {a.shape[1]}\n")
        for row in a:
            fh.write(" ".join(format(v, ".17g") for v in row) + "\n")


def read_matrix(path) -> np.ndarray:
    """Read a matrix written by write_matrix."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: malformed header {header!r}")
        rows, cols = int(header[0]), int(header[1])
        data = np.loadtxt(fh, ndmin=2)
    if data.shape != (rows, cols):
        raise ValueError(
            f"{path}: header promises {rows}x{cols}, body has {data.shape}"
        )
    return as_matrix(data, str(path))
