"""Path-following rounding from the convex surrogate to the per-column objective.

Starting from a convex-solver point U0, the blended objective is descended at
each eta of an increasing schedule from 0 (the convex surrogate) to 1 (the
true per-column objective), warm-starting every stage from the previous one.
The homotopy targets good local minima of the nonconvex problem; a final
safeguard re-descends directly from U0 when it would otherwise end above the
starting value of the eta = 1 objective.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .convex import EstimationObjective, NormBoundObjective, _lbfgs
from .linalg import as_matrix


@dataclass(frozen=True)
class HomotopySchedule:
    """Increasing blend weights from 0 to 1 with per-stage descent budgets."""

    etas: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)
    stage_max_iter: int = 200
    stage_grad_tol: float = 1e-7

    def __post_init__(self):
        etas = tuple(float(e) for e in self.etas)
        if len(etas) < 2 or etas[0] != 0.0 or etas[-1] != 1.0:
            raise ValueError("etas must start at 0 and end at 1")
        if any(b <= a for a, b in zip(etas, etas[1:])):
            raise ValueError("etas must be strictly increasing")
        if self.stage_max_iter < 1 or not self.stage_grad_tol > 0:
            raise ValueError("stage budgets must be positive")
        object.__setattr__(self, "etas", etas)


@dataclass
class RoundedSolution:
    """Explicit factorization produced by rounding an estimation solve."""

    u: np.ndarray
    v: np.ndarray
    x: np.ndarray
    objective: float


def prune_columns(u, rel_tol: float = 1e-8) -> np.ndarray:
    """Drop columns whose l2 norm is at most rel_tol times the largest one."""
    u = as_matrix(u, "u")
    col_norms = np.linalg.norm(u, axis=0)
    top = col_norms.max()
    keep = col_norms > rel_tol * top
    if not keep.any():
        keep[int(np.argmax(col_norms))] = True
    return u[:, keep]


def _run_homotopy(make_objective, u0, schedule: HomotopySchedule):
    u = u0.copy()
    for eta in schedule.etas:
        obj = make_objective(eta)
        u, _ = _lbfgs(obj.value_grad, u, schedule.stage_grad_tol,
                      schedule.stage_max_iter)
        value, _ = obj.value_grad(u)
        if not np.isfinite(value):
            raise RuntimeError(f"rounding objective not finite at stage eta={eta}")
    final_obj = make_objective(1.0)
    if final_obj.value_unsmoothed(u) > final_obj.value_unsmoothed(u0):
        u_direct, _ = _lbfgs(final_obj.value_grad, u0.copy(),
                             schedule.stage_grad_tol, schedule.stage_max_iter)
        if final_obj.value_unsmoothed(u_direct) < final_obj.value_unsmoothed(u):
            u = u_direct
    return u


def round_norm_factorization(x, u0, nu: float, eps: float | None = None,
                             schedule: HomotopySchedule | None = None) -> np.ndarray:
    """Round a norm lower-bound point U0 to a per-column-optimal U for X.

    Returns the final U with numerically zero columns pruned; the matching
    coefficients are recover_norm_coefficients(x, u).
    """
    x = as_matrix(x, "x")
    u0 = as_matrix(u0, "u0")
    if schedule is None:
        schedule = HomotopySchedule()
    if eps is None:
        eps = 5e-6 * float(np.abs(x).max()) if np.abs(x).max() > 0 else 1e-6
    u = _run_homotopy(lambda eta: NormBoundObjective(x, nu, eps, eta=eta),
                      u0, schedule)
    return prune_columns(u)


def recover_norm_coefficients(x, u) -> np.ndarray:
    """V = X^T (U U^T + delta I)^{-1} U so that U V^T reproduces X."""
    return NormBoundObjective(x, nu=1.0, eps=1.0).recover_v(as_matrix(u, "u"))


def round_estimation(y, lam: float, nu: float, u0,
                     eps: float | None = None,
                     schedule: HomotopySchedule | None = None) -> RoundedSolution:
    """Apply the homotopy to the regularized estimation problem.

    Returns the pruned U, the ridge-recovered V and X = U V^T, and the
    unsmoothed per-column objective at the final point.
    """
    y = as_matrix(y, "y")
    u0 = as_matrix(u0, "u0")
    if schedule is None:
        schedule = HomotopySchedule()
    if eps is None:
        eps = 5e-5 * float(np.abs(y).max()) if np.abs(y).max() > 0 else 1e-5
    u = _run_homotopy(lambda eta: EstimationObjective(y, lam, nu, eps, eta=eta),
                      u0, schedule)
    u = prune_columns(u)
    final = EstimationObjective(y, lam, nu, eps, eta=1.0)
    v = final.recover_v(u)
    return RoundedSolution(u=u, v=v, x=u @ v.T,
                           objective=float(final.value_unsmoothed(u)))
