"""Vector and matrix norms for sparse decompositions.

A decomposition norm of X is the infimum, over factorizations X = U V^T with
any number of column pairs, of sum_m ||u_m||_C ||v_m||_R.  Three (C, R)
combinations have closed forms; the mixed column norm

    ||u||_C^2 = (1 - nu) ||u||_1^2 + nu ||u||_2^2

does not, and is handled by the convex lower bound in `convex` plus the
rounding procedure in `rounding`.  This module evaluates the norms, their
duals, the penalty on symmetric matrices that extends the squared mixed norm
(value (1 - nu) sum_ij |A_ij| + nu tr A, equal to the squared mixed norm on
rank-one A = u u^T), and smoothed variants used by the solvers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import RngStream, as_matrix, svd

L1 = "l1"
L2 = "l2"
MIXED = "mixed"

_COLUMN_NORMS = (L1, L2, MIXED)
_ROW_NORMS = (L1, L2)


class NoClosedFormError(ValueError):
    """Raised for norm specs without a closed form; use the convex lower bound."""


class IntractableDualError(ValueError):
    """Raised for the exact mixed-norm dual, which has no tractable expression."""


@dataclass(frozen=True)
class NormSpec:
    """Selects the column norm ||.||_C, the row norm ||.||_R, and nu for mixed."""

    column_norm: str = L2
    row_norm: str = L2
    nu: float = 1.0

    def __post_init__(self):
        if self.column_norm not in _COLUMN_NORMS:
            raise ValueError(f"column_norm must be one of {_COLUMN_NORMS}")
        if self.row_norm not in _ROW_NORMS:
            raise ValueError(f"row_norm must be one of {_ROW_NORMS}")
        if not 0.0 <= self.nu <= 1.0:
            raise ValueError(f"nu must lie in [0, 1], got {self.nu}")


@dataclass(frozen=True)
class Factorization:
    """Explicit factorization X = U V^T with a shared inner dimension."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = as_matrix(self.u, "u")
        v = as_matrix(self.v, "v")
        if u.shape[1] != v.shape[1]:
            raise ValueError(
                f"inner dimensions disagree: u is {u.shape}, v is {v.shape}"
            )
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def n_columns(self) -> int:
        return self.u.shape[1]

    def product(self) -> np.ndarray:
        return self.u @ self.v.T


def mixed_norm_sq(u, nu: float) -> float:
    """(1 - nu) ||u||_1^2 + nu ||u||_2^2 for a vector u."""
    u = np.asarray(u, dtype=float).ravel()
    l1 = np.abs(u).sum()
    return (1.0 - nu) * l1 * l1 + nu * float(u @ u)


def mixed_norm(u, nu: float) -> float:
    return np.sqrt(max(mixed_norm_sq(u, nu), 0.0))


def column_norm(u, spec: NormSpec) -> float:
    """||u||_C under `spec`."""
    u = np.asarray(u, dtype=float).ravel()
    if spec.column_norm == L1:
        return float(np.abs(u).sum())
    if spec.column_norm == L2:
        return float(np.linalg.norm(u))
    return mixed_norm(u, spec.nu)


def row_norm(v, spec: NormSpec) -> float:
    """||v||_R under `spec`."""
    v = np.asarray(v, dtype=float).ravel()
    if spec.row_norm == L1:
        return float(np.abs(v).sum())
    return float(np.linalg.norm(v))


def l1_trace_penalty(a, nu: float) -> float:
    """(1 - nu) sum_ij |A_ij| + nu tr A on a square symmetric matrix.

    On rank-one A = u u^T this equals mixed_norm_sq(u, nu).
    """
    a = _square(a)
    return (1.0 - nu) * float(np.abs(a).sum()) + nu * float(np.trace(a))


def l1_trace_penalty_smoothed(a, nu: float, eps: float) -> float:
    """Smoothed penalty: |A_ij| replaced by sqrt(A_ij^2 + eps^2).

    eps = 0 recovers l1_trace_penalty; for eps > 0 the function is
    differentiable everywhere and dominates the unsmoothed value.
    """
    a = _square(a)
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    return (1.0 - nu) * float(np.sqrt(a * a + eps * eps).sum()) + nu * float(
        np.trace(a)
    )


def l1_trace_penalty_smoothed_grad(a, nu: float, eps: float) -> np.ndarray:
    """Entrywise gradient of l1_trace_penalty_smoothed (eps > 0)."""
    a = _square(a)
    g = (1.0 - nu) * a / np.sqrt(a * a + eps * eps)
    g[np.diag_indices_from(g)] += nu
    return g


def mixed_norm_sq_smoothed(u, nu: float, eps: float) -> float:
    """Smoothed squared mixed norm: (1-nu) (sum_i sqrt(u_i^2 + eps^2))^2 + nu ||u||_2^2.

    Carries an offset of (1-nu) (n eps)^2 at u = 0; reported objectives use
    the unsmoothed value.
    """
    u = np.asarray(u, dtype=float).ravel()
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    s = np.sqrt(u * u + eps * eps).sum()
    return (1.0 - nu) * float(s * s) + nu * float(u @ u)


def mixed_norm_sq_smoothed_grad(u, nu: float, eps: float) -> np.ndarray:
    u = np.asarray(u, dtype=float).ravel()
    root = np.sqrt(u * u + eps * eps)
    return 2.0 * (1.0 - nu) * root.sum() * (u / root) + 2.0 * nu * u


def decomposition_norm(x, spec: NormSpec) -> float:
    """Closed-form decomposition norm of X.

    (l2, l2): sum of singular values.  (l1, l2): sum of row l2 norms.
    (l1, l1): entrywise l1 norm.  Other combinations have no closed form.
    """
    x = as_matrix(x, "x")
    key = (spec.column_norm, spec.row_norm)
    if key == (L2, L2):
        return float(svd(x).singular_values.sum())
    if key == (L1, L2):
        return float(np.linalg.norm(x, axis=1).sum())
    if key == (L1, L1):
        return float(np.abs(x).sum())
    raise NoClosedFormError(
        f"no closed form for spec {key}; use convex.norm_lower_bound"
    )


def dual_norm(y, spec: NormSpec) -> float:
    """Dual of the closed-form decomposition norms: sup tr(X^T Y) over the unit ball.

    (l2, l2): largest singular value.  (l1, l2): max row l2 norm.
    (l1, l1): max |Y_np|.
    """
    y = as_matrix(y, "y")
    if spec.column_norm == MIXED:
        raise IntractableDualError(
            "the exact mixed-norm dual is intractable; "
            "mixed_dual_lower_bound gives a heuristic lower bound"
        )
    key = (spec.column_norm, spec.row_norm)
    if key == (L2, L2):
        return float(svd(y).singular_values[0])
    if key == (L1, L2):
        return float(np.linalg.norm(y, axis=1).max())
    if key == (L1, L1):
        return float(np.abs(y).max())
    raise NoClosedFormError(f"no closed form for the dual of spec {key}")


def mixed_dual_lower_bound(
    y, nu: float, n_starts: int = 8, n_iters: int = 200, seed: int = 0
) -> float:
    """Heuristic lower bound on the mixed-norm dual (row norm l2).

    Multi-start projected ascent of ||Y^T u||_2 over the mixed-norm unit
    sphere; every iterate is feasible, so the running maximum never
    overestimates the true dual.  Not used by any solver.
    """
    y = as_matrix(y, "y")
    n = y.shape[0]
    rng = RngStream(seed)
    starts = [np.eye(n)[i] for i in range(n)]
    starts += [rng.generator.standard_normal(n) for _ in range(n_starts)]
    best = 0.0
    for u in starts:
        u = u / max(mixed_norm(u, nu), 1e-300)
        for _ in range(n_iters):
            w = y.T @ u
            val = np.linalg.norm(w)
            if val <= 0:
                break
            g = y @ (w / val)
            u_new = u + 0.5 * g
            u_new /= max(mixed_norm(u_new, nu), 1e-300)
            if np.linalg.norm(u_new - u) < 1e-12:
                u = u_new
                break
            u = u_new
        best = max(best, float(np.linalg.norm(y.T @ u)))
    return best


def factorization_cost(fact: Factorization, spec: NormSpec) -> float:
    """sum_m ||u_m||_C ||v_m||_R; an upper bound on the norm of fact.product()."""
    return float(
        sum(
            column_norm(fact.u[:, m], spec) * row_norm(fact.v[:, m], spec)
            for m in range(fact.n_columns)
        )
    )


def _square(a) -> np.ndarray:
    a = as_matrix(a, "a")
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got {a.shape}")
    return a
