"""Discrimination and calibration metrics for survival predictions.

Scores are risk scores: a higher score predicts an earlier event.  The
c-index counts, over comparable pairs (``i`` an event with ``T_j > T_i``),
the pairs with ``score_i > score_j``; both comparisons are strict, so tied
scores count as discordant and a constant score has c-index 0.

The integrated squared survival error uses the true survival curves and is
only available for simulated data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .datagen import TrueModel, generate_dataset
from .fit import FitResult, null_omega_closed_form
from .hazard import KnotGrid, Psi_matrix, cum_hazard, psi_matrix
from .rs import RSSolution, build_population, null_omega

__all__ = [
    "UndefinedMetricError",
    "MetricReport",
    "harrell_c",
    "survival_curve",
    "time_grid",
    "piecewise_curves",
    "true_curves",
    "ibs_ideal",
    "r_ibs",
    "theoretical_metrics",
    "empirical_test_metrics",
    "training_null_omega",
]

Curves = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]

# pair comparisons are evaluated in row blocks of about this many entries
_BLOCK = 4_000_000


class UndefinedMetricError(ValueError):
    pass


@dataclass(frozen=True)
class MetricReport:
    cindex: float
    ribs: float
    ibs: float
    ibs_null: float
    n: int
    noninformative: bool = False


def harrell_c(T, delta, score) -> float:
    """Harrell's c-index, exact O(n^2) pair count."""
    T = np.asarray(T, dtype=float)
    delta = np.asarray(delta)
    score = np.asarray(score, dtype=float)
    if not (T.shape == delta.shape == score.shape):
        raise ValueError("T, delta and score must have equal lengths")
    if not np.all(np.isfinite(score)):
        raise ValueError("scores must be finite")
    ev = np.flatnonzero(delta > 0)
    num = 0
    den = 0
    step = max(1, _BLOCK // max(T.size, 1))
    for start in range(0, ev.size, step):
        i = ev[start : start + step]
        later = T[None, :] > T[i, None]
        den += int(later.sum())
        num += int((later & (score[i, None] > score[None, :])).sum())
    if den == 0:
        raise UndefinedMetricError("no comparable pairs: c-index is undefined")
    return num / den


def survival_curve(grid: KnotGrid, omega, lp, t):
    """Fitted survival ``exp(-Lam(t | omega) e^lp)``."""
    return np.exp(-np.asarray(cum_hazard(grid, omega, t)) * np.exp(lp))


def time_grid(t_end: float, n_points: int = 301) -> np.ndarray:
    if not t_end > 0:
        raise ValueError("t_end must be > 0")
    return np.linspace(0.0, t_end, n_points)


def piecewise_curves(grid: KnotGrid, omega, lp) -> Callable[[np.ndarray], np.ndarray]:
    """Survival curves of the fitted model for each linear predictor in ``lp``."""
    omega = grid.check_omega(omega)
    lp = np.atleast_1d(np.asarray(lp, dtype=float))

    def curves(t):
        Lam = Psi_matrix(grid, t) @ np.exp(omega)
        return np.exp(-np.exp(lp)[:, None] * Lam[None, :])

    return curves


def true_curves(model: TrueModel, lp) -> Callable[[np.ndarray], np.ndarray]:
    lp = np.atleast_1d(np.asarray(lp, dtype=float))

    def curves(t):
        Lam0 = model.cum_hazard_0(np.asarray(t, dtype=float))
        return np.exp(-np.exp(lp)[:, None] * Lam0[None, :])

    return curves


def _evaluate(curves: Curves, t: np.ndarray) -> np.ndarray:
    out = curves(t) if callable(curves) else np.asarray(curves, dtype=float)
    return np.atleast_2d(out)


def ibs_ideal(est: Curves, truth: Curves, t) -> float:
    """Population mean of ``int (S_est - S_true)^2 dt`` by the trapezoid rule on ``t``.

    Curves are ``(m, len(t))`` arrays or callables returning one; a single
    row broadcasts over the population.
    """
    t = np.asarray(t, dtype=float)
    diff = _evaluate(est, t) - _evaluate(truth, t)
    return float(np.mean(np.trapezoid(diff * diff, t, axis=1)))


def r_ibs(est: Curves, null_est: Curves, truth: Curves, t) -> float:
    t = np.asarray(t, dtype=float)
    den = ibs_ideal(null_est, truth, t)
    if den == 0:
        raise UndefinedMetricError("null model reproduces the truth exactly: R_IBS undefined")
    return ibs_ideal(est, truth, t) / den


def _report(T, delta, score, est, null, truth, t) -> MetricReport:
    ibs = ibs_ideal(est, truth, t)
    ibs0 = ibs_ideal(null, truth, t)
    if ibs0 == 0:
        raise UndefinedMetricError("null model reproduces the truth exactly: R_IBS undefined")
    return MetricReport(
        cindex=harrell_c(T, delta, score),
        ribs=ibs / ibs0,
        ibs=ibs,
        ibs_null=ibs0,
        n=int(np.size(T)),
        noninformative=bool(np.ptp(score) == 0),
    )


def theoretical_metrics(
    sol: RSSolution,
    model: TrueModel,
    grid: KnotGrid,
    m: int,
    rng: np.random.Generator,
    n_time: int = 301,
) -> MetricReport:
    """Test-set metrics predicted by the order parameters.

    A fresh population is scored with ``w Z0 + v Q`` and the curves use the
    fitted hazard ``omega``; the null curve is the covariate-free solution on
    the same population.
    """
    if not sol.converged:
        raise UndefinedMetricError("RS solution did not converge")
    pop = build_population(m, model, grid, rng)
    s = sol.state
    score = s.w * pop.Z0 + s.v * pop.Q
    t = time_grid(model.censor_hi, n_time)
    return _report(
        pop.T,
        pop.delta,
        score,
        piecewise_curves(grid, s.omega, score),
        piecewise_curves(grid, null_omega(pop, sol.alpha), np.zeros(1)),
        true_curves(model, model.beta0_norm * pop.Z0),
        t,
    )


def empirical_test_metrics(
    fit: FitResult,
    model: TrueModel,
    grid: KnotGrid,
    n_test: int,
    rng: np.random.Generator,
    beta0,
    null_omega_hat,
    n_time: int = 301,
) -> MetricReport:
    """Metrics of a fitted model on a fresh test set drawn with the same ``beta0``.

    ``null_omega_hat`` is the covariate-free fit on the training data.
    """
    test = generate_dataset(n_test, np.size(beta0), model, rng, beta0=beta0)
    score = test.X @ fit.beta_hat
    t = time_grid(model.censor_hi, n_time)
    return _report(
        test.T,
        test.delta,
        score,
        piecewise_curves(grid, fit.omega_hat, score),
        piecewise_curves(grid, null_omega_hat, np.zeros(1)),
        true_curves(model, test.theta),
        t,
    )


def training_null_omega(data, grid: KnotGrid, alpha: float) -> np.ndarray:
    """Covariate-free penalised fit of the log hazard levels on a dataset."""
    occ = Psi_matrix(grid, data.T).mean(axis=0)
    rate = (np.asarray(data.delta)[:, None] * psi_matrix(grid, data.T)).mean(axis=0)
    return null_omega_closed_form(occ, rate, alpha)
