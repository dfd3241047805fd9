"""Convex lower-bound solver with low-rank parametrization A = U U^T.

The estimation problem treated here is, for data Y (N x P), regularization
lambda and mixing weight nu, with c = lambda N P:

    min_{A >= 0}  G(A) = 1/(2NP) tr(Y^T (A/c + I)^{-1} Y)
                         + (lambda/2) [(1-nu) sum_ij |A_ij| + nu tr A]

which lower-bounds the square-loss dictionary problem with the mixed column
norm.  A is parametrized as U U^T and the entrywise absolute values are
smoothed so H(U) = G(U U^T) can be descended with a quasi-Newton method.  A
stationary U that is rank deficient and has a positive semidefinite gradient
of G at U U^T certifies a global minimum of the convex G; when the
certificate fails, a column is appended and the descent restarted.

The same machinery evaluates the companion lower bound on the decomposition
norm of a fixed X:

    ||X||_D >= min_{A >= 0} 1/2 F(A) + 1/2 tr(X^T A^{-1} X)

with A regularized as A + delta I, delta = 1e-9 tr(A)/N, to keep the inverse
defined.  Reported objectives always use the unsmoothed penalty.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from .linalg import RngStream, as_matrix
from .norms import (
    l1_trace_penalty,
    l1_trace_penalty_smoothed,
    l1_trace_penalty_smoothed_grad,
    mixed_norm_sq,
    mixed_norm_sq_smoothed,
    mixed_norm_sq_smoothed_grad,
)

_DELTA_SCALE = 1e-9


@dataclass(frozen=True)
class SolverConfig:
    """Tuning knobs for the low-rank descent.

    eps=None resolves to 1e-4 times the largest absolute data entry, with one
    continuation halving after the first convergence.  m_max=None resolves to
    the row dimension N.
    """

    eps: float | None = None
    grad_tol: float = 1e-7
    max_iter: int = 2000
    m_init: int = 1
    m_max: int | None = None
    eig_tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.eps is not None and not self.eps > 0:
            raise ValueError("eps must be positive")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if self.m_init < 1:
            raise ValueError("m_init must be at least 1")
        if self.m_max is not None and self.m_max < self.m_init:
            raise ValueError("m_max must be at least m_init")
        if not self.eig_tol > 0:
            raise ValueError("eig_tol must be positive")


@dataclass
class ConvexSolution:
    """Result of a low-rank convex solve."""

    u: np.ndarray
    a: np.ndarray
    v: np.ndarray
    x: np.ndarray
    objective: float
    certified_global: bool
    rank_estimate: int
    grad_norm: float
    n_grown: int = 0
    objective_history: list = field(default_factory=list, repr=False)

    @property
    def n_columns(self) -> int:
        return self.u.shape[1]


@dataclass
class NormBoundSolution:
    """Result of a norm lower-bound solve (value uses the unsmoothed penalty)."""

    u: np.ndarray
    value: float
    certified_global: bool
    rank_estimate: int
    grad_norm: float


class EstimationObjective:
    """Smoothed estimation objective, blended toward the per-column penalty.

    value_grad evaluates, for eta in [0, 1],

        1/(2NP) tr(Y^T (UU^T/c + I)^{-1} Y)
        + (lambda/2) [(1-eta) Fs(UU^T) + eta sum_m fs(u_m)]

    where Fs and fs are the eps-smoothed penalties.  eta=0 is the convex
    surrogate; eta=1 is the true per-column objective.
    """

    def __init__(self, y, lam: float, nu: float, eps: float, eta: float = 0.0):
        self.y = as_matrix(y, "y")
        if not lam > 0:
            raise ValueError("lambda must be positive")
        if not 0.0 <= nu <= 1.0:
            raise ValueError("nu must lie in [0, 1]")
        self.lam = float(lam)
        self.nu = float(nu)
        self.eps = float(eps)
        self.eta = float(eta)
        n, p = self.y.shape
        self.n, self.p = n, p
        self.c = self.lam * n * p

    def _data_term(self, u):
        b = (u @ u.T) / self.c
        b[np.diag_indices_from(b)] += 1.0
        factor = scipy.linalg.cho_factor(b, lower=True, check_finite=False)
        w = scipy.linalg.cho_solve(factor, self.y, check_finite=False)
        value = float(np.sum(self.y * w)) / (2.0 * self.n * self.p)
        return value, w

    def data_grad_a(self, u):
        """Gradient of the data term with respect to A at A = U U^T."""
        _, w = self._data_term(u)
        return -(w @ w.T) / (2.0 * self.n * self.p * self.c)

    def grad_a(self, u):
        """Gradient of the smoothed convex G at A = U U^T (eta = 0 form)."""
        a = u @ u.T
        pen = 0.5 * self.lam * l1_trace_penalty_smoothed_grad(a, self.nu, self.eps)
        return self.data_grad_a(u) + pen

    def value_grad(self, u):
        value, w = self._data_term(u)
        grad_a = -(w @ w.T) / (2.0 * self.n * self.p * self.c)
        a = u @ u.T
        if self.eta < 1.0:
            value += (
                0.5
                * self.lam
                * (1.0 - self.eta)
                * l1_trace_penalty_smoothed(a, self.nu, self.eps)
            )
            grad_a += (
                0.5
                * self.lam
                * (1.0 - self.eta)
                * l1_trace_penalty_smoothed_grad(a, self.nu, self.eps)
            )
        grad = 2.0 * grad_a @ u
        if self.eta > 0.0:
            root = np.sqrt(u * u + self.eps * self.eps)
            col_sums = root.sum(axis=0)
            value += (
                0.5
                * self.lam
                * self.eta
                * float(
                    (1.0 - self.nu) * np.sum(col_sums * col_sums)
                    + self.nu * np.sum(u * u)
                )
            )
            grad += (
                self.lam
                * self.eta
                * ((1.0 - self.nu) * col_sums[None, :] * (u / root) + self.nu * u)
            )
        return value, grad

    def value_unsmoothed(self, u):
        """Objective with the unsmoothed penalties (reporting form)."""
        value, _ = self._data_term(u)
        if self.eta < 1.0:
            value += (
                0.5
                * self.lam
                * (1.0 - self.eta)
                * l1_trace_penalty(u @ u.T, self.nu)
            )
        if self.eta > 0.0:
            value += (
                0.5
                * self.lam
                * self.eta
                * sum(mixed_norm_sq(u[:, m], self.nu) for m in range(u.shape[1]))
            )
        return value

    def recover_v(self, u):
        """Ridge-optimal coefficients V = Y^T (U U^T + c I)^{-1} U."""
        b = u @ u.T
        b[np.diag_indices_from(b)] += self.c
        factor = scipy.linalg.cho_factor(b, lower=True, check_finite=False)
        return self.y.T @ scipy.linalg.cho_solve(factor, u, check_finite=False)


class NormBoundObjective:
    """Smoothed norm lower-bound objective, blended toward the per-column form.

        (1-eta)/2 Fs(UU^T) + eta/2 sum_m fs(u_m)
        + 1/2 tr(X^T (UU^T + delta I)^{-1} X),   delta = delta_scale tr(UU^T)/N
    """

    def __init__(self, x, nu: float, eps: float, eta: float = 0.0,
                 delta_scale: float = _DELTA_SCALE):
        self.x = as_matrix(x, "x")
        if not 0.0 <= nu <= 1.0:
            raise ValueError("nu must lie in [0, 1]")
        self.nu = float(nu)
        self.eps = float(eps)
        self.eta = float(eta)
        self.delta_scale = float(delta_scale)
        self.n = self.x.shape[0]

    def _inverse_term(self, u):
        a = u @ u.T
        delta = self.delta_scale * np.trace(a) / self.n
        b = a.copy()
        b[np.diag_indices_from(b)] += delta
        try:
            factor = scipy.linalg.cho_factor(b, lower=True, check_finite=False)
        except scipy.linalg.LinAlgError:
            # Numerically singular trial point (e.g. U ~ 0 during a line
            # search); report a huge value so the step is rejected.
            return None
        w = scipy.linalg.cho_solve(factor, self.x, check_finite=False)
        return w

    def data_grad_a(self, u):
        w = self._inverse_term(u)
        if w is None:
            return np.zeros((self.n, self.n))
        cmat = w @ w.T
        grad_a = -0.5 * cmat
        grad_a[np.diag_indices_from(grad_a)] -= (
            0.5 * self.delta_scale * np.trace(cmat) / self.n
        )
        return grad_a

    def grad_a(self, u):
        a = u @ u.T
        return self.data_grad_a(u) + 0.5 * l1_trace_penalty_smoothed_grad(
            a, self.nu, self.eps
        )

    def value_grad(self, u):
        w = self._inverse_term(u)
        if w is None:
            return 1e30, np.zeros_like(u)
        value = 0.5 * float(np.sum(self.x * w))
        cmat = w @ w.T
        grad_a = -0.5 * cmat
        grad_a[np.diag_indices_from(grad_a)] -= (
            0.5 * self.delta_scale * np.trace(cmat) / self.n
        )
        a = u @ u.T
        if self.eta < 1.0:
            value += 0.5 * (1.0 - self.eta) * l1_trace_penalty_smoothed(
                a, self.nu, self.eps
            )
            grad_a += 0.5 * (1.0 - self.eta) * l1_trace_penalty_smoothed_grad(
                a, self.nu, self.eps
            )
        grad = 2.0 * grad_a @ u
        if self.eta > 0.0:
            root = np.sqrt(u * u + self.eps * self.eps)
            col_sums = root.sum(axis=0)
            value += 0.5 * self.eta * float(
                (1.0 - self.nu) * np.sum(col_sums * col_sums)
                + self.nu * np.sum(u * u)
            )
            grad += self.eta * (
                (1.0 - self.nu) * col_sums[None, :] * (u / root) + self.nu * u
            )
        return value, grad

    def value_unsmoothed(self, u):
        w = self._inverse_term(u)
        if w is None:
            return np.inf
        value = 0.5 * float(np.sum(self.x * w))
        if self.eta < 1.0:
            value += 0.5 * (1.0 - self.eta) * l1_trace_penalty(u @ u.T, self.nu)
        if self.eta > 0.0:
            value += 0.5 * self.eta * sum(
                mixed_norm_sq(u[:, m], self.nu) for m in range(u.shape[1])
            )
        return value

    def recover_v(self, u):
        """Coefficients V = X^T (U U^T + delta I)^{-1} U."""
        a = u @ u.T
        tr = np.trace(a)
        if tr <= 0.0:
            return np.zeros((self.x.shape[1], u.shape[1]))
        delta = self.delta_scale * tr / self.n
        a[np.diag_indices_from(a)] += delta
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
        return self.x.T @ scipy.linalg.cho_solve(factor, u, check_finite=False)


def _lbfgs(value_grad, u0, grad_tol, max_iter, history=None):
    """L-BFGS-B descent on a matrix variable; returns (U, grad_inf_norm).

    Restarts with a fresh quasi-Newton memory when the line search stalls
    before the gradient tolerance is met.
    """
    shape = u0.shape

    def fun(z):
        f, g = value_grad(z.reshape(shape))
        return f, g.ravel()

    callback = None
    if history is not None:
        callback = lambda z: history.append(fun(z)[0])

    z = u0.ravel().copy()
    remaining = max_iter
    gnorm = np.inf
    for _ in range(3):
        if remaining <= 0:
            break
        res = scipy.optimize.minimize(
            fun,
            z,
            jac=True,
            method="L-BFGS-B",
            callback=callback,
            options={"maxiter": remaining, "ftol": 0.0, "gtol": grad_tol,
                     "maxcor": 10},
        )
        z = res.x
        gnorm = float(np.abs(res.jac).max()) if res.jac is not None else np.inf
        remaining -= max(res.nit, 1)
        if gnorm <= grad_tol:
            break
    return z.reshape(shape), gnorm


def _resolve_eps(config: SolverConfig, data) -> float:
    if config.eps is not None:
        return config.eps
    scale = float(np.abs(data).max())
    return 1e-4 * scale if scale > 0 else 1e-4


def certify_global(u, grad_g_at_a, config: SolverConfig, scale: float | None = None):
    """Rank-deficiency certificate for a stationary point of H(U) = G(U U^T).

    Returns (certified, rank_estimate).  Certified means the numerical rank
    of U is below its column count and the gradient of G at U U^T is positive
    semidefinite to within eig_tol, which makes U U^T a global minimum of the
    convex G.  The rank cutoff is eig_tol relative to the larger of U's top
    singular value and the problem scale, so a numerically vanished U counts
    as rank zero.
    """
    u = as_matrix(u, "u")
    g = as_matrix(grad_g_at_a, "grad_g_at_a")
    m = u.shape[1]
    svals = np.linalg.svd(u, compute_uv=False)
    anchor = max(float(svals[0]) if svals.size else 0.0, scale or 0.0)
    if anchor <= 0.0:
        rank = 0
    else:
        rank = int(np.sum(svals > config.eig_tol * anchor))
    eigs = np.linalg.eigvalsh(0.5 * (g + g.T))
    gscale = float(np.abs(eigs).max()) if eigs.size else 0.0
    psd_ok = bool(eigs.min() >= -config.eig_tol * gscale)
    return (rank < m) and psd_ok, rank


def _descend_phases(make_objective, u, config: SolverConfig, eps: float,
                    smoothing_active: bool, history=None):
    """Run the descent at eps, then once more at eps/2 when smoothing matters."""
    phases = [eps, 0.5 * eps] if smoothing_active else [eps]
    gnorm = np.inf
    obj = None
    for phase_eps in phases:
        obj = make_objective(phase_eps)
        phase_hist = [] if history is not None else None
        u, gnorm = _lbfgs(obj.value_grad, u, config.grad_tol, config.max_iter,
                          history=phase_hist)
        if history is not None:
            history.append(phase_hist)
    return u, obj, gnorm


def solve_estimation(y, lam: float, nu: float, config: SolverConfig | None = None,
                     u0=None, record_history: bool = False) -> ConvexSolution:
    """Minimize the smoothed convex estimation objective at a fixed column count.

    The column count is config.m_init unless a warm start u0 is supplied.
    Returns the solution with the certificate evaluated at the final point;
    see grow_and_solve for the column-growth loop.
    """
    y = as_matrix(y, "y")
    if config is None:
        config = SolverConfig()
    n, p = y.shape
    eps = _resolve_eps(config, y)
    u_scale = np.sqrt(np.linalg.norm(y) / (n * p))
    if u0 is None:
        m = min(config.m_init, n)
        rng = RngStream(config.seed)
        u = u_scale * rng.generator.standard_normal((n, m))
    else:
        u = as_matrix(u0, "u0").copy()
        if u.shape[0] != n:
            raise ValueError(f"u0 has {u.shape[0]} rows, expected {n}")
    history = [] if record_history else None
    u, obj, gnorm = _descend_phases(
        lambda e: EstimationObjective(y, lam, nu, e),
        u, config, eps, smoothing_active=(nu < 1.0), history=history,
    )
    objective = obj.value_unsmoothed(u)
    if not np.isfinite(objective):
        raise RuntimeError(
            f"estimation objective is not finite for a {n}x{p} problem"
        )
    cert, rank = certify_global(u, obj.grad_a(u), config, scale=u_scale)
    certified = bool(cert and gnorm <= config.grad_tol)
    v = obj.recover_v(u)
    return ConvexSolution(
        u=u,
        a=u @ u.T,
        v=v,
        x=u @ v.T,
        objective=float(objective),
        certified_global=certified,
        rank_estimate=rank,
        grad_norm=gnorm,
        objective_history=history or [],
    )


def grow_and_solve(y, lam: float, nu: float, config: SolverConfig | None = None,
                   u0=None) -> ConvexSolution:
    """Solve, and while the certificate fails, append a column and re-descend.

    Each appended column is a small random perturbation (scale
    1e-4 ||U||_F / sqrt(N M)).  Stops at the first certified solution or at
    m_max columns, whichever comes first; in the latter case the best
    solution found is returned with certified_global False.
    """
    y = as_matrix(y, "y")
    if config is None:
        config = SolverConfig()
    n = y.shape[0]
    m_max = min(config.m_max if config.m_max is not None else n, n)
    rng = RngStream(config.seed + 1)
    sol = solve_estimation(y, lam, nu, config, u0=u0)
    best = sol
    grown = 0
    while not sol.certified_global and sol.n_columns < m_max:
        u = sol.u
        m = u.shape[1]
        pert = 1e-4 * max(np.linalg.norm(u), np.sqrt(np.linalg.norm(y) / y.size))
        new_col = (pert / np.sqrt(n * m)) * rng.generator.standard_normal((n, 1))
        grown += 1
        sol = solve_estimation(y, lam, nu, config, u0=np.hstack([u, new_col]))
        if sol.objective <= best.objective:
            best = sol
        if sol.certified_global:
            best = sol
            break
    best.n_grown = grown
    return best


def solve_norm_bound(x, nu: float, config: SolverConfig | None = None) -> NormBoundSolution:
    """Low-rank solve of the norm lower-bound problem for a fixed X.

    Initializes U from the SVD of X with at least rank(X) + 1 columns (the
    inverse term is infinite when the columns of U do not cover the column
    space of X), then runs the same certify-or-grow loop as the estimation
    solver.
    """
    x = as_matrix(x, "x")
    if config is None:
        config = SolverConfig()
    n = x.shape[0]
    if np.linalg.norm(x) == 0.0:
        raise ValueError("x must be nonzero; the bound value at zero is 0")
    eps = config.eps if config.eps is not None else 1e-5 * float(np.abs(x).max())
    res = np.linalg.svd(x, full_matrices=False)
    svals = res[1]
    rank_x = int(np.sum(svals > 1e-12 * svals[0]))
    m_max = min(config.m_max if config.m_max is not None else n, n)
    m = int(np.clip(max(config.m_init, rank_x + 1), 1, m_max))
    rng = RngStream(config.seed + 2)
    u = np.zeros((n, m))
    k = min(rank_x, m)
    u[:, :k] = res[0][:, :k] * np.sqrt(svals[:k])
    u_scale = np.sqrt(svals[0])
    if m > k:
        u[:, k:] = 1e-3 * u_scale * rng.generator.standard_normal((n, m - k))

    def run(u_start):
        return _descend_phases(
            lambda e: NormBoundObjective(x, nu, e),
            u_start, config, eps, smoothing_active=(nu < 1.0),
        )

    u, obj, gnorm = run(u)
    cert, rank = certify_global(u, obj.grad_a(u), config, scale=u_scale)
    certified = bool(cert and gnorm <= config.grad_tol)
    while not certified and u.shape[1] < m_max:
        pert = 1e-4 * max(np.linalg.norm(u), u_scale)
        new_col = (pert / np.sqrt(u.size)) * rng.generator.standard_normal((n, 1))
        u, obj, gnorm = run(np.hstack([u, new_col]))
        cert, rank = certify_global(u, obj.grad_a(u), config, scale=u_scale)
        certified = bool(cert and gnorm <= config.grad_tol)
    value = obj.value_unsmoothed(u)
    if not np.isfinite(value):
        raise RuntimeError(f"norm bound objective is not finite for shape {x.shape}")
    return NormBoundSolution(
        u=u,
        value=float(value),
        certified_global=certified,
        rank_estimate=rank,
        grad_norm=gnorm,
    )


def norm_lower_bound(x, nu: float, config: SolverConfig | None = None) -> float:
    """Convex lower bound on the decomposition norm of X for the mixed spec.

    Returns 0 for X = 0 (the infimum, approached as A tends to zero).
    """
    x = as_matrix(x, "x")
    if np.linalg.norm(x) == 0.0:
        return 0.0
    return solve_norm_bound(x, nu, config).value
