"""Replica-symmetric order parameters of the penalised fit.

The asymptotic fit is described by the saddle point of the scalar surrogate

    L(omega, w, v, phi, tau) = < M_g(w Z0 + v Q, tau/phi) - delta log lam(T | omega) >
        + phi (tau/2 - v sqrt(zeta)) + eta/2 (v^2 + w^2) + alpha/2 |omega|^2

with ``< . >`` an average over a fixed Monte Carlo population of
``(Z0, Q, T, delta)``.  Eliminating ``phi`` and ``tau`` (``tau = v sqrt(zeta)``,
``nu = tau/phi``) leaves four unknowns ``(w, v, nu, omega)`` and the
stationarity conditions

    v^2 zeta              = < (xi - x)^2 >                       [nu]
    w (1 + eta nu)        = < Z0 xi >                            [w]
    v (1 - zeta + eta nu) = < Q xi >                             [v]
    alpha omega_k + e^{omega_k} < Psi_k(T) e^xi > = < delta psi_k(T) >   [omega]

where ``x = w Z0 + v Q`` and ``xi = prox_g(x, nu)``.  The [w] and [v]
equations use ``<Z0^2> = <Q^2> = 1`` and ``<Z0 Q> = 0``; the population is built so
these hold exactly, which makes the equations the exact stationarity
conditions of the population-averaged surrogate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.optimize import brentq, root

from .datagen import TrueModel, sample_censor, sample_event_time
from .hazard import KnotGrid, Psi_matrix, interval_index
from .scalarops import _prox_and_w, lambert_w0_exp, moreau_g
from .fit import InfeasibleDataError, null_omega_closed_form

log = logging.getLogger(__name__)

__all__ = [
    "RSPopulation",
    "RSState",
    "RSSolution",
    "DivergedError",
    "build_population",
    "xi_hat",
    "rs_residuals",
    "rs_update",
    "rs_solve",
    "surrogate_objective",
    "null_omega",
    "saddle_value",
    "initial_state",
]


_STALL = 500
_MIN_DAMPING = 1e-3
# residual below which the root-solve refinement is attempted
_POLISH_FROM = 1e-4


class DivergedError(FloatingPointError):
    """The fixed-point map produced a non-finite or invalid state."""


@dataclass(frozen=True)
class RSPopulation:
    Z0: np.ndarray
    Q: np.ndarray
    T: np.ndarray
    delta: np.ndarray
    grid: KnotGrid
    Psi: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return self.T.size

    @property
    def censored_fraction(self) -> float:
        return float(1.0 - self.delta.mean())

    def occupancy(self) -> np.ndarray:
        return self.Psi.mean(axis=0)

    def event_rate(self) -> np.ndarray:
        return (self.delta[:, None] * self.psi).mean(axis=0)


@dataclass(frozen=True)
class RSState:
    w: float
    v: float
    nu: float
    omega: np.ndarray

    def tau(self, zeta: float) -> float:
        return self.v * np.sqrt(zeta)

    def phi(self, zeta: float) -> float:
        return self.tau(zeta) / self.nu

    def as_vector(self) -> np.ndarray:
        return np.concatenate([[self.w, self.v, self.nu], self.omega])

    @classmethod
    def from_vector(cls, z) -> "RSState":
        z = np.asarray(z, dtype=float)
        return cls(float(z[0]), float(z[1]), float(z[2]), z[3:].copy())


@dataclass(frozen=True)
class RSSolution:
    state: RSState
    residuals: dict
    iterations: int
    converged: bool
    zeta: float
    eta: float
    alpha: float

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values())

    @property
    def tau(self) -> float:
        return self.state.tau(self.zeta)

    @property
    def phi(self) -> float:
        return self.state.phi(self.zeta)


def _standardize(z0, q):
    z0 = z0 / np.sqrt(np.mean(z0 * z0))
    q = q - (np.mean(q * z0)) * z0
    q = q / np.sqrt(np.mean(q * q))
    return z0, q


def build_population(m: int, model: TrueModel, grid: KnotGrid, rng: np.random.Generator) -> RSPopulation:
    """Fixed population for the expectations over ``(Z0, Q, T, delta)``.

    ``Z0`` and ``Q`` are Gaussian draws rescaled (and ``Q`` orthogonalised
    against ``Z0``) to unit empirical second moments.  ``(T, delta)`` are
    drawn from the true model at linear predictor ``|beta0| Z0``.
    """
    if m < 2:
        raise ValueError("population size m must be >= 2")
    z0, q = _standardize(rng.standard_normal(m), rng.standard_normal(m))
    u_event = rng.uniform(size=m)
    u_event = np.where(u_event > 0, u_event, np.nextafter(0.0, 1.0))
    u_censor = rng.uniform(size=m)
    Y = np.asarray(sample_event_time(model.beta0_norm * z0, u_event, model))
    C = np.asarray(sample_censor(u_censor, model))
    T = np.minimum(Y, C)
    delta = (Y < C).astype(float)
    idx = interval_index(grid, T)
    bad = np.flatnonzero((delta > 0) & (idx < 0))
    if bad.size:
        raise InfeasibleDataError(f"population event time T[{bad[0]}] = {float(T[bad[0]])!r} is outside the knot range")
    psi = np.zeros((m, grid.n_intervals))
    inside = idx >= 0
    psi[np.flatnonzero(inside), idx[inside]] = 1.0
    return RSPopulation(z0, q, T, delta, grid, Psi_matrix(grid, T), psi)


def null_omega(pop: RSPopulation, alpha: float, grid: Optional[KnotGrid] = None) -> np.ndarray:
    """Covariate-free log hazard levels: ``alpha w_k + e^{w_k} <Psi_k> = <delta psi_k>``."""
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    if grid is not None and grid.n_intervals != pop.grid.n_intervals:
        raise ValueError("grid does not match the population")
    return null_omega_closed_form(pop.occupancy(), pop.event_rate(), alpha)


def initial_state(pop: RSPopulation, alpha: float) -> RSState:
    return RSState(w=0.5, v=0.5, nu=1.0, omega=null_omega(pop, alpha))


def _evaluate(state: RSState, pop: RSPopulation):
    x = state.w * pop.Z0 + state.v * pop.Q
    Lam = pop.Psi @ np.exp(state.omega)
    xi, _ = _prox_and_w(x, state.nu, Lam, pop.delta)
    return x, Lam, xi


def xi_hat(state: RSState, pop: RSPopulation) -> np.ndarray:
    """Proximal point for every population member at the given state."""
    return _evaluate(state, pop)[2]


def _moments(state: RSState, pop: RSPopulation):
    x, Lam, xi = _evaluate(state, pop)
    d = xi - x
    exi = np.exp(xi)
    return dict(
        d2=np.mean(d * d),
        gp2=np.mean(np.square(Lam * exi - pop.delta)),
        z0xi=np.mean(pop.Z0 * xi),
        qxi=np.mean(pop.Q * xi),
        A=exi @ pop.Psi / pop.m,
        B=pop.event_rate(),
        xi=xi,
        x=x,
        Lam=Lam,
    )


def rs_residuals(state: RSState, pop: RSPopulation, eta: float, alpha: float, zeta: float) -> dict:
    """Absolute residual of each self-consistent equation (rs4 holds by construction)."""
    mo = _moments(state, pop)
    w, v, nu, om = state.w, state.v, state.nu, state.omega
    return {
        "rs1": float(abs(v * v * zeta - mo["d2"])),
        "rs2": float(abs(w * (1.0 + eta * nu) - mo["z0xi"])),
        "rs3": float(abs(v * (1.0 - zeta + eta * nu) - mo["qxi"])),
        "rs4": 0.0,
        "rs5": float(np.max(np.abs(alpha * om + np.exp(om) * mo["A"] - mo["B"]))),
    }


def _v_root(state: RSState, pop: RSPopulation, eta: float, zeta: float) -> float:
    """Solve the v-equation in v alone when its coefficient is not positive.

    With ``nu`` this small the equation usually has no positive root (the
    mean of ``Q xi`` grows slower than ``v``); ``v`` is then left where it
    is so the ``nu`` update can move the state out of that region.
    """
    def r(v):
        s = replace(state, v=v)
        return v * (1.0 - zeta + eta * state.nu) - np.mean(pop.Q * xi_hat(s, pop))

    lo, hi = 0.0, max(state.v, 1e-3)
    while r(hi) * r(lo) > 0:
        hi *= 2.0
        if hi > 1e6:
            log.debug("v-equation has no root in [0, 1e6] at nu=%g; keeping v", state.nu)
            return state.v
    return brentq(r, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def _raw_update(state: RSState, pop: RSPopulation, eta: float, alpha: float, zeta: float) -> RSState:
    mo = _moments(state, pop)
    w_new = mo["z0xi"] / (1.0 + eta * state.nu)
    denom = 1.0 - zeta + eta * state.nu
    if denom > 0:
        v_new = mo["qxi"] / denom
    else:
        v_new = _v_root(state, pop, eta, zeta)
    nu_new = state.v * np.sqrt(zeta) / np.sqrt(mo["gp2"])
    with np.errstate(divide="ignore"):
        s = np.log(mo["A"]) - np.log(alpha) + mo["B"] / alpha
    om_new = mo["B"] / alpha - np.asarray(lambert_w0_exp(s))
    return RSState(float(w_new), float(v_new), float(nu_new), om_new)


def rs_update(
    state: RSState,
    pop: RSPopulation,
    eta: float,
    alpha: float,
    zeta: float,
    damping: float = 0.5,
) -> RSState:
    """One damped sweep of the fixed-point map: ``new = (1-g) old + g update``."""
    if not zeta > 0:
        raise ValueError("zeta must be > 0")
    if not (eta > 0 and alpha > 0):
        raise ValueError("eta and alpha must be > 0")
    up = _raw_update(state, pop, eta, alpha, zeta)
    z = (1.0 - damping) * state.as_vector() + damping * up.as_vector()
    if not np.all(np.isfinite(z)) or z[2] <= 0 or z[1] < 0:
        raise DivergedError(f"fixed-point map left the valid region: {z[:3]}")
    return RSState.from_vector(z)


def _polish(state, pop, eta, alpha, zeta, res):
    """Newton-type root solve of the undamped map from a converged state."""
    def F(z):
        st = RSState.from_vector(z)
        return z - _raw_update(st, pop, eta, alpha, zeta).as_vector()

    try:
        with np.errstate(all="ignore"):
            r = root(F, state.as_vector(), method="hybr", options=dict(xtol=1e-14))
        cand = RSState.from_vector(r.x)
        if cand.nu <= 0 or cand.v < 0:
            return state, res
        cres = rs_residuals(cand, pop, eta, alpha, zeta)
    except (DivergedError, FloatingPointError, ValueError):
        return state, res
    if max(cres.values()) < max(res.values()):
        return cand, cres
    return state, res


def rs_solve(
    pop: RSPopulation,
    eta: float,
    alpha: float,
    zeta: float,
    tol: float = 1e-8,
    damping: float = 0.5,
    max_iter: int = 20000,
    init: Optional[RSState] = None,
    polish: bool = True,
) -> RSSolution:
    """Iterate :func:`rs_update` until every residual is ``<= tol``.

    The damping is halved (restarting from the best state seen) whenever the
    residual stalls for ``_STALL`` sweeps or the map leaves the valid
    region.  With ``polish``, once the residual is small the fixed point is
    refined by a root solve on the undamped map; the refined state is kept
    only if it lowers the residual.  Returns ``converged=False`` rather than
    raising when ``max_iter`` sweeps are exhausted.
    """
    if not tol > 0:
        raise ValueError("tol must be > 0")
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    state = init if init is not None else initial_state(pop, alpha)
    res = rs_residuals(state, pop, eta, alpha, zeta)
    best, best_res, best_it = state, max(res.values()), 0
    gamma = damping
    next_polish = _POLISH_FROM
    it = 0
    while max(res.values()) > tol and it < max_iter:
        try:
            state = rs_update(state, pop, eta, alpha, zeta, gamma)
            res = rs_residuals(state, pop, eta, alpha, zeta)
            cur = max(res.values())
            if not np.isfinite(cur):
                raise DivergedError("non-finite residual")
        except DivergedError:
            cur = np.inf
        it += 1
        if cur < best_res:
            best, best_res, best_it = state, cur, it
        elif not np.isfinite(cur) or it - best_it > _STALL:
            if gamma <= _MIN_DAMPING:
                raise DivergedError(f"RS iteration diverged at damping {gamma:g}")
            gamma = max(gamma / 2.0, _MIN_DAMPING)
            log.debug("halving damping to %g after %d sweeps", gamma, it)
            state = best
            res = rs_residuals(state, pop, eta, alpha, zeta)
            best_res, best_it = max(res.values()), it
            continue
        if polish and cur <= next_polish and cur > tol:
            state, res = _polish(state, pop, eta, alpha, zeta, res)
            next_polish = min(next_polish, cur) / 100.0
    converged = max(res.values()) <= tol
    if converged and polish:
        state, res = _polish(state, pop, eta, alpha, zeta, res)
    if not converged:
        log.warning("RS iteration stopped after %d sweeps, max residual %.3e", it, max(res.values()))
    return RSSolution(state, res, it, converged, zeta, eta, alpha)


def surrogate_objective(
    omega,
    w: float,
    v: float,
    phi: float,
    tau: float,
    pop: RSPopulation,
    eta: float,
    alpha: float,
    zeta: float,
) -> float:
    """Population-averaged surrogate ``L(omega, w, v, phi, tau)``."""
    if not tau > 0:
        raise ValueError("tau must be > 0")
    if phi < 0:
        raise ValueError("phi must be >= 0")
    omega = pop.grid.check_omega(omega)
    if np.any((pop.delta > 0) & (pop.psi.sum(axis=1) == 0)):
        raise InfeasibleDataError("an event in the population has zero hazard")
    x = w * pop.Z0 + v * pop.Q
    Lam = pop.Psi @ np.exp(omega)
    log_lam = pop.psi @ omega
    if phi == 0:
        # nu = inf: the envelope is min_xi g(xi)
        with np.errstate(divide="ignore"):
            env = np.where(pop.delta > 0, 1.0 + np.log(Lam), 0.0)
    else:
        env = moreau_g(x, tau / phi, Lam, pop.delta, check=False)
    data = np.mean(env - pop.delta * log_lam)
    return float(
        data
        + phi * (0.5 * tau - v * np.sqrt(zeta))
        + 0.5 * eta * (v * v + w * w)
        + 0.5 * alpha * omega @ omega
    )


def saddle_value(sol: RSSolution, pop: RSPopulation) -> float:
    s = sol.state
    return surrogate_objective(s.omega, s.w, s.v, sol.phi, sol.tau, pop, sol.eta, sol.alpha, sol.zeta)
