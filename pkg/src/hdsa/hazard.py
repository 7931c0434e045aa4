"""Piecewise-constant baseline hazard on user supplied knots.

Intervals are numbered ``k = 1..l`` over knots ``tau_1 < ... < tau_{l+1}``;
array-valued helpers use the 0-based column ``k - 1``.  Interval ``k`` is the
open set ``(tau_k, tau_{k+1})``, so a time sitting exactly on a knot belongs
to no interval and has zero hazard.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "KnotGrid",
    "basis_psi",
    "basis_Psi",
    "psi_matrix",
    "Psi_matrix",
    "interval_index",
    "hazard_rate",
    "cum_hazard",
    "cum_hazard_bound",
    "loss_g",
    "loss_g_min",
]


@dataclass(frozen=True)
class KnotGrid:
    """Strictly increasing, non-negative knots defining ``l`` hazard intervals."""

    knots: np.ndarray

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float).ravel()
        if knots.size < 2:
            raise ValueError("a knot grid needs at least two knots (one interval)")
        if not np.all(np.isfinite(knots)):
            raise ValueError("knots must be finite")
        if knots[0] < 0:
            raise ValueError("knots must be non-negative")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)

    @classmethod
    def equispaced(cls, start: float, stop: float, n_knots: int) -> "KnotGrid":
        return cls(np.linspace(start, stop, n_knots))

    @property
    def n_intervals(self) -> int:
        return self.knots.size - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.knots)

    @property
    def lower(self) -> np.ndarray:
        return self.knots[:-1]

    @property
    def upper(self) -> np.ndarray:
        return self.knots[1:]

    def check_omega(self, omega) -> np.ndarray:
        omega = np.asarray(omega, dtype=float)
        if omega.shape != (self.n_intervals,):
            raise ValueError(
                f"omega must have length {self.n_intervals}, got shape {omega.shape}"
            )
        if not np.all(np.isfinite(omega)):
            raise ValueError("omega must be finite")
        return omega


def _check_k(grid: KnotGrid, k: int) -> int:
    if not 1 <= k <= grid.n_intervals:
        raise IndexError(f"interval index {k} outside 1..{grid.n_intervals}")
    return k - 1


def basis_psi(grid: KnotGrid, k: int, t):
    """Indicator of the open interval ``(tau_k, tau_{k+1})``."""
    j = _check_k(grid, k)
    t = np.asarray(t, dtype=float)
    out = ((grid.knots[j] < t) & (t < grid.knots[j + 1])).astype(int)
    return out.item() if out.ndim == 0 else out


def basis_Psi(grid: KnotGrid, k: int, t):
    """Time spent in interval ``k`` up to ``t``, clipped at the interval width."""
    j = _check_k(grid, k)
    t = np.asarray(t, dtype=float)
    lo, hi = grid.knots[j], grid.knots[j + 1]
    out = np.where(t > lo, np.minimum(t - lo, hi - lo), 0.0)
    return float(out) if out.ndim == 0 else out


def psi_matrix(grid: KnotGrid, t) -> np.ndarray:
    """``(n, l)`` matrix of interval indicators for the times ``t``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))[:, None]
    return ((grid.lower < t) & (t < grid.upper)).astype(float)


def Psi_matrix(grid: KnotGrid, t) -> np.ndarray:
    """``(n, l)`` matrix of clipped occupancy times for the times ``t``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))[:, None]
    return np.clip(t - grid.lower, 0.0, grid.widths)


def interval_index(grid: KnotGrid, t) -> np.ndarray:
    """0-based interval containing each time, ``-1`` if on a knot or outside."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    j = np.searchsorted(grid.knots, t, side="left") - 1
    inside = (j >= 0) & (j < grid.n_intervals)
    jc = np.clip(j, 0, grid.n_intervals - 1)
    inside &= (grid.knots[jc] < t) & (t < grid.knots[jc + 1])
    return np.where(inside, j, -1)


def hazard_rate(grid: KnotGrid, omega, t):
    omega = grid.check_omega(omega)
    scalar = np.ndim(t) == 0
    out = psi_matrix(grid, t) @ np.exp(omega)
    return float(out[0]) if scalar else out


def cum_hazard(grid: KnotGrid, omega, t):
    omega = grid.check_omega(omega)
    scalar = np.ndim(t) == 0
    out = Psi_matrix(grid, t) @ np.exp(omega)
    return float(out[0]) if scalar else out


def cum_hazard_bound(grid: KnotGrid, omega) -> float:
    """Upper bound ``sum_k exp(omega_k)(tau_{k+1} - tau_k)`` on the cumulative hazard."""
    omega = grid.check_omega(omega)
    return float(np.exp(omega) @ grid.widths)


def loss_g(x, Lam, delta):
    """Per-observation loss ``Lam * exp(x) - delta * x``."""
    return np.asarray(Lam) * np.exp(x) - np.asarray(delta) * np.asarray(x)


def loss_g_min(Lam, delta):
    """``min_x loss_g(x, Lam, delta)``; ``-inf`` for an event with ``Lam = 0``."""
    Lam = np.asarray(Lam, dtype=float)
    delta = np.asarray(delta, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(delta > 0, delta * (1.0 - np.log(np.where(delta > 0, delta, 1.0)) + np.log(Lam)), 0.0)
    return out.item() if out.ndim == 0 else out
