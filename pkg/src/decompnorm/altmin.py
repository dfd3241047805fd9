"""Rank-constrained nonconvex baseline: alternating minimization at fixed M.

Minimizes, over U (N x M) and V (P x M),

    1/(2NP) ||Y - U V^T||_F^2 + (lambda/2) sum_m (||u_m||_1^2 + ||v_m||_2^2)

by alternating an exact ridge update of V with proximal-gradient steps on U.
The proximal operator of the squared l1 norm decomposes per column and is
computed exactly by sorting.  The best of several random restarts is kept.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import RngStream, as_matrix, solve_spd


@dataclass(frozen=True)
class AltMinConfig:
    max_sweeps: int = 200
    tol: float = 1e-8
    inner_iters: int = 8
    restarts: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.max_sweeps < 1 or self.inner_iters < 1 or self.restarts < 1:
            raise ValueError("iteration and restart counts must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass
class AltMinSolution:
    u: np.ndarray
    v: np.ndarray
    x: np.ndarray
    objective: float


def prox_squared_l1(z, t: float) -> np.ndarray:
    """argmin_x 1/2 ||x - z||^2 + t ||x||_1^2, solved exactly by sorting.

    The minimizer is soft thresholding at 2 t s where s = ||x||_1 solves
    s = sum_i max(|z_i| - 2 t s, 0); with magnitudes sorted the root is
    s = S_k / (1 + 2 t k) for the unique active count k.
    """
    z = np.asarray(z, dtype=float)
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0 or not np.any(z):
        return z.copy()
    a = np.sort(np.abs(z).ravel())[::-1]
    cums = np.cumsum(a)
    k = np.arange(1, a.size + 1)
    s_k = cums / (1.0 + 2.0 * t * k)
    active = a > 2.0 * t * s_k
    k_star = int(np.nonzero(active)[0][-1])
    thresh = 2.0 * t * s_k[k_star]
    return np.sign(z) * np.maximum(np.abs(z) - thresh, 0.0)


def _objective(y, u, v, lam, n, p):
    resid = y - u @ v.T
    col_l1 = np.abs(u).sum(axis=0)
    return (
        float(np.sum(resid * resid)) / (2.0 * n * p)
        + 0.5 * lam * float(np.sum(col_l1 * col_l1))
        + 0.5 * lam * float(np.sum(v * v))
    )


def _v_step(y, u, lam, n, p):
    m = u.shape[1]
    b = u.T @ u
    b[np.diag_indices_from(b)] += lam * n * p
    return solve_spd(b, u.T @ y).T


def _u_step(y, u, v, lam, n, p, inner_iters):
    lip = float(np.linalg.eigvalsh(v.T @ v).max()) / (n * p)
    step = 1.0 / max(lip, 1e-300)
    for _ in range(inner_iters):
        grad = (u @ v.T - y) @ v / (n * p)
        z = u - step * grad
        t = 0.5 * step * lam
        for m in range(u.shape[1]):
            z[:, m] = prox_squared_l1(z[:, m], t)
        u = z
    return u


def noconv_solve(y, lam: float, m: int, config: AltMinConfig | None = None) -> AltMinSolution:
    """Alternating minimization with l1-squared column and l2-squared row penalties.

    Starts each restart from a random unit-column dictionary V with U = 0 and
    returns the restart with the lowest objective.
    """
    y = as_matrix(y, "y")
    if m < 1:
        raise ValueError(f"m must be at least 1, got {m}")
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if config is None:
        config = AltMinConfig()
    n, p = y.shape
    best = None
    for restart in range(config.restarts):
        rng = RngStream(config.seed + restart)
        v = rng.generator.standard_normal((p, m))
        v /= np.maximum(np.linalg.norm(v, axis=0), 1e-300)
        u = np.zeros((n, m))
        obj = _objective(y, u, v, lam, n, p)
        for _ in range(config.max_sweeps):
            u = _u_step(y, u, v, lam, n, p, config.inner_iters)
            v = _v_step(y, u, lam, n, p)
            new_obj = _objective(y, u, v, lam, n, p)
            if obj - new_obj <= config.tol * max(1.0, abs(obj)):
                obj = new_obj
                break
            obj = new_obj
        if best is None or obj < best.objective:
            best = AltMinSolution(u=u, v=v, x=u @ v.T, objective=float(obj))
    return best
