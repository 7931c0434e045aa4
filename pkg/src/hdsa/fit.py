"""Ridge-penalised maximum likelihood for the piecewise exponential model.

The objective is

    (1/n) sum_i [Lam(T_i | omega) e^{x_i} - delta_i x_i - delta_i log lam(T_i | omega)]
        + eta/2 |beta|^2 + alpha/2 |omega|^2,      x_i = X_i beta,

which is smooth and strongly convex for ``eta, alpha > 0``.  Since
``log lam(T_i | omega) = omega_{k(i)}`` for an event in interval ``k(i)``, the
last likelihood term is linear in ``omega``.  We minimise it with a damped
Newton method.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .datagen import Dataset
from .hazard import KnotGrid, Psi_matrix, interval_index
from .scalarops import lambert_w0_exp

__all__ = [
    "FitConfig",
    "FitResult",
    "InfeasibleDataError",
    "NonconvergenceError",
    "objective",
    "gradient",
    "hessian",
    "fit",
    "fit_path",
    "overlaps",
    "null_omega_closed_form",
]


class InfeasibleDataError(ValueError):
    """An event time falls outside every hazard interval (zero hazard)."""


class NonconvergenceError(RuntimeError):
    def __init__(self, message, beta, omega, grad_norm, iterations):
        super().__init__(message)
        self.beta = beta
        self.omega = omega
        self.grad_norm = grad_norm
        self.iterations = iterations


@dataclass(frozen=True)
class FitConfig:
    eta: float
    alpha: float
    grad_tol: float = 1e-8
    max_iter: int = 500

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be > 0")
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be > 0")


@dataclass(frozen=True)
class FitResult:
    beta_hat: np.ndarray
    omega_hat: np.ndarray
    objective: float
    grad_norm: float
    iterations: int
    w_hat: float
    v_hat: float


class _Design:
    """Per-dataset quantities that do not depend on the parameters."""

    def __init__(self, data: Dataset, grid: KnotGrid):
        self.X = np.asarray(data.X, dtype=float)
        self.delta = np.asarray(data.delta, dtype=float)
        self.n = self.X.shape[0]
        self.Psi = Psi_matrix(grid, data.T)
        idx = interval_index(grid, data.T)
        bad = np.flatnonzero((self.delta > 0) & (idx < 0))
        if bad.size:
            i = int(bad[0])
            raise InfeasibleDataError(
                f"event time T[{i}] = {float(data.T[i])!r} lies outside every open knot "
                f"interval of {grid.knots.tolist()}; its log hazard is -inf "
                f"({bad.size} such events)"
            )
        # event counts per interval, divided by n
        self.event_rate = (
            np.bincount(idx[self.delta > 0], minlength=grid.n_intervals) / self.n
        )


def _parts(beta, omega, d: _Design):
    x = d.X @ beta
    with np.errstate(over="ignore"):
        c = d.Psi * np.exp(omega)  # (n, l): Psi_ik e^{omega_k}
        u = np.exp(x)
    return x, c, u


def _value(beta, omega, d: _Design, cfg: FitConfig, parts=None):
    x, c, u = parts if parts is not None else _parts(beta, omega, d)
    Lam = c.sum(axis=1)
    with np.errstate(over="ignore", invalid="ignore"):
        data_term = (np.sum(Lam * u) - d.delta @ x) / d.n - d.event_rate @ omega
    val = data_term + 0.5 * cfg.eta * beta @ beta + 0.5 * cfg.alpha * omega @ omega
    return float(val) if np.isfinite(val) else np.inf


def _grad(beta, omega, d: _Design, cfg: FitConfig, parts=None):
    x, c, u = parts if parts is not None else _parts(beta, omega, d)
    h = c.sum(axis=1) * u
    g_beta = d.X.T @ (h - d.delta) / d.n + cfg.eta * beta
    g_omega = u @ c / d.n - d.event_rate + cfg.alpha * omega
    return g_beta, g_omega


def _hess(beta, omega, d: _Design, cfg: FitConfig, parts=None):
    x, c, u = parts if parts is not None else _parts(beta, omega, d)
    p, l = beta.size, omega.size
    h = c.sum(axis=1) * u
    H = np.empty((p + l, p + l))
    H[:p, :p] = (d.X * h[:, None]).T @ d.X / d.n
    H[:p, :p].flat[:: p + 1] += cfg.eta
    cu = c * u[:, None]
    H[:p, p:] = d.X.T @ cu / d.n
    H[p:, :p] = H[:p, p:].T
    H[p:, p:] = np.diag(cu.sum(axis=0) / d.n + cfg.alpha)
    return H


def objective(beta, omega, data: Dataset, grid: KnotGrid, cfg: FitConfig) -> float:
    d = _Design(data, grid)
    return _value(np.asarray(beta, float), grid.check_omega(omega), d, cfg)


def gradient(beta, omega, data: Dataset, grid: KnotGrid, cfg: FitConfig):
    """Gradient as the pair ``(d/dbeta, d/domega)``."""
    d = _Design(data, grid)
    return _grad(np.asarray(beta, float), grid.check_omega(omega), d, cfg)


def hessian(beta, omega, data: Dataset, grid: KnotGrid, cfg: FitConfig) -> np.ndarray:
    d = _Design(data, grid)
    return _hess(np.asarray(beta, float), grid.check_omega(omega), d, cfg)


def overlaps(beta_hat, beta0):
    """Projection of ``beta_hat`` on ``beta0`` and the norm of the remainder."""
    beta_hat = np.asarray(beta_hat, dtype=float)
    beta0 = np.asarray(beta0, dtype=float)
    b0 = np.linalg.norm(beta0)
    if b0 == 0:
        raise ValueError("beta0 must be nonzero to define the overlaps")
    w = float(beta0 @ beta_hat / b0)
    v = float(np.linalg.norm(beta_hat - (w / b0) * beta0))
    return w, v


def null_omega_closed_form(occupancy, event_rate, alpha):
    """Solve ``alpha w_k + e^{w_k} A_k = B_k`` for every interval.

    ``A_k`` is the mean occupancy time of interval k and ``B_k`` the event
    rate in it.  The root is ``B/alpha - W0(A/alpha e^{B/alpha})``.
    """
    A = np.asarray(occupancy, dtype=float)
    B = np.asarray(event_rate, dtype=float)
    with np.errstate(divide="ignore"):
        s = np.log(A) - np.log(alpha) + B / alpha
    return B / alpha - np.asarray(lambert_w0_exp(s))


def _newton(d: _Design, cfg: FitConfig, beta, omega, *, c1=1e-4, shrink=0.5):
    p = beta.size
    parts = _parts(beta, omega, d)
    f = _value(beta, omega, d, cfg, parts)
    for it in range(cfg.max_iter + 1):
        gb, go = _grad(beta, omega, d, cfg, parts)
        g = np.concatenate([gb, go])
        gnorm = float(np.max(np.abs(g)))
        if gnorm <= cfg.grad_tol:
            return beta, omega, f, gnorm, it
        if it == cfg.max_iter:
            break
        H = _hess(beta, omega, d, cfg, parts)
        try:
            step = -cho_solve(cho_factor(H), g)
        except LinAlgError:
            step = -g
        slope = float(g @ step)
        # round-off slack so steps that only shave the last ulps are not rejected
        slack = 1e-14 * max(1.0, abs(f))
        t = 1.0
        while True:
            b_new = beta + t * step[:p]
            o_new = omega + t * step[p:]
            parts_new = _parts(b_new, o_new, d)
            f_new = _value(b_new, o_new, d, cfg, parts_new)
            if f_new <= f + c1 * t * slope + slack:
                break
            t *= shrink
            if t < 1e-14:
                raise NonconvergenceError(
                    f"line search failed at iteration {it} (grad sup-norm {gnorm:.3e})",
                    beta, omega, gnorm, it,
                )
        beta, omega, f, parts = b_new, o_new, f_new, parts_new
    raise NonconvergenceError(
        f"no convergence in {cfg.max_iter} Newton iterations "
        f"(grad sup-norm {gnorm:.3e} > {cfg.grad_tol:.1e})",
        beta, omega, gnorm, cfg.max_iter,
    )


def _result(beta, omega, f, gnorm, it, data: Dataset) -> FitResult:
    if beta.size == 0:
        w, v = 0.0, 0.0
    elif np.linalg.norm(data.beta0) > 0:
        w, v = overlaps(beta, data.beta0)
    else:
        w, v = np.nan, np.nan
    return FitResult(beta, omega, f, gnorm, it, w, v)


def fit(
    data: Dataset,
    grid: KnotGrid,
    cfg: FitConfig,
    init: Optional[object] = None,
    *,
    _design: Optional[_Design] = None,
) -> FitResult:
    """Penalised MLE ``(beta_hat, omega_hat)``.

    ``init`` may be a previous :class:`FitResult` or a ``(beta, omega)`` pair
    (warm start); the default cold start is ``beta = 0, omega = 0``.
    """
    d = _design if _design is not None else _Design(data, grid)
    if init is None:
        beta = np.zeros(data.p)
        omega = np.zeros(grid.n_intervals)
    elif isinstance(init, FitResult):
        beta, omega = init.beta_hat.copy(), init.omega_hat.copy()
    else:
        beta = np.array(init[0], dtype=float)
        omega = np.array(init[1], dtype=float)
    beta, omega, f, gnorm, it = _newton(d, cfg, beta, omega)
    return _result(beta, omega, f, gnorm, it, data)


def fit_path(data: Dataset, grid: KnotGrid, etas, alpha: float, **cfg_kw):
    """Fit along a ridge path, largest ``eta`` first, warm-starting each fit.

    Returns the results in the order of ``etas``.
    """
    etas = list(etas)
    d = _Design(data, grid)
    order = sorted(range(len(etas)), key=lambda j: -etas[j])
    out = [None] * len(etas)
    prev = None
    for j in order:
        cfg = FitConfig(eta=etas[j], alpha=alpha, **cfg_kw)
        prev = fit(data, grid, cfg, init=prev, _design=d)
        out[j] = prev
    return out
