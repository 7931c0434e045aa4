"""Synthetic right-censored survival data with Gaussian covariates.

Event times follow the proportional hazards law
``S(t | theta) = exp(-Lam0(t) e^theta)`` with the log-logistic default
``Lam0(t) = log(1 + t^2/2)``; censoring is uniform on a window independent of
the covariates.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "TrueModel",
    "Dataset",
    "default_cum_hazard_0",
    "sample_beta0",
    "sample_event_time",
    "sample_censor",
    "generate_dataset",
    "write_dataset_csv",
]


def default_cum_hazard_0(t):
    return np.log1p(0.5 * np.square(t))


def _default_inverse(target):
    # Lam0(t) = target  <=>  t = sqrt(2 (e^target - 1))
    with np.errstate(over="ignore"):  # an infinite target is an infinite time
        return np.sqrt(2.0 * np.expm1(target))


@dataclass(frozen=True)
class TrueModel:
    cum_hazard_0: Callable = default_cum_hazard_0
    beta0_norm: float = 1.0
    censor_lo: float = 1.0
    censor_hi: float = 3.0
    # closed-form inverse of cum_hazard_0; None means numerical root finding
    inverse_cum_hazard_0: Optional[Callable] = _default_inverse

    def __post_init__(self):
        if self.beta0_norm < 0:
            raise ValueError("beta0_norm must be >= 0")
        if not self.censor_lo < self.censor_hi:
            raise ValueError("censor_lo must be < censor_hi")
        if self.cum_hazard_0 is not default_cum_hazard_0 and self.inverse_cum_hazard_0 is _default_inverse:
            object.__setattr__(self, "inverse_cum_hazard_0", None)

    def survival(self, t, lp):
        """True survival ``exp(-Lam0(t) e^lp)``, broadcasting ``t`` against ``lp``."""
        return np.exp(-self.cum_hazard_0(np.asarray(t, dtype=float)) * np.exp(lp))


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    T: np.ndarray
    delta: np.ndarray
    theta: np.ndarray
    beta0: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.T.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def censored_fraction(self) -> float:
        return float(1.0 - self.delta.mean())


def sample_beta0(p: int, rng: np.random.Generator, norm: float = 1.0) -> np.ndarray:
    """Uniform draw from the sphere of radius ``norm`` in ``R^p``."""
    if p < 1:
        raise ValueError("p must be >= 1 to draw from the sphere")
    g = rng.standard_normal(p)
    return norm * g / np.linalg.norm(g)


def _invert_numerically(Lam0, target, hi0=1.0):
    hi = hi0
    while Lam0(hi) < target:
        hi *= 2.0
        if hi > 1e300:
            raise ValueError("cumulative hazard does not reach the requested level")
    return brentq(lambda t: Lam0(t) - target, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def sample_event_time(theta, u, model: TrueModel = TrueModel()):
    """Invert ``S(t | theta) = u`` for the event time."""
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0) | (u >= 1)):
        raise ValueError("u must lie strictly inside (0, 1)")
    target = -np.log(u) * np.exp(-np.asarray(theta, dtype=float))
    if model.inverse_cum_hazard_0 is not None:
        out = np.asarray(model.inverse_cum_hazard_0(target), dtype=float)
    else:
        flat = np.broadcast_to(target, np.broadcast(target, u).shape).ravel()
        out = np.array([_invert_numerically(model.cum_hazard_0, a) for a in flat]).reshape(
            np.broadcast(target, u).shape
        )
    return out.item() if out.ndim == 0 else out


def sample_censor(u, model: TrueModel = TrueModel()):
    u = np.asarray(u, dtype=float)
    out = model.censor_lo + (model.censor_hi - model.censor_lo) * u
    return out.item() if out.ndim == 0 else out


def generate_dataset(
    n: int,
    p: int,
    model: TrueModel,
    rng: np.random.Generator,
    beta0: Optional[np.ndarray] = None,
) -> Dataset:
    """Draw ``n`` observations ``(T, delta, X)`` with ``p`` covariates.

    Draw order is fixed (beta0, X, event uniforms, censoring uniforms) so a
    seed reproduces the dataset exactly.  Passing ``beta0`` reuses a true
    coefficient vector, e.g. to build a test set for an existing fit.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if p < 0:
        raise ValueError("p must be >= 0")
    if beta0 is None:
        beta0 = sample_beta0(p, rng, model.beta0_norm) if p > 0 else np.zeros(0)
    else:
        beta0 = np.asarray(beta0, dtype=float)
        if beta0.shape != (p,):
            raise ValueError(f"beta0 must have shape ({p},)")
    X = rng.standard_normal((n, p))
    theta = X @ beta0
    u_event = rng.uniform(size=n)
    # uniform() can return exactly 0; map it into the open interval
    u_event = np.where(u_event > 0, u_event, np.nextafter(0.0, 1.0))
    u_censor = rng.uniform(size=n)
    Y = sample_event_time(theta, u_event, model)
    C = sample_censor(u_censor, model)
    T = np.minimum(Y, C)
    delta = (Y < C).astype(int)
    for a in (X, T, delta, theta, beta0):
        a.setflags(write=False)
    return Dataset(X=X, T=T, delta=delta, theta=theta, beta0=beta0)


def write_dataset_csv(data: Dataset, path) -> Path:
    """Write ``id,time,status,x1..xp`` (status 1 = event, 0 = censored)."""
    path = Path(path)
    header = ["id", "time", "status"] + [f"x{j + 1}" for j in range(data.p)]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(data.n):
            writer.writerow(
                [i + 1, repr(float(data.T[i])), int(data.delta[i])]
                + [repr(float(x)) for x in data.X[i]]
            )
    return path
