"""Lambert W and the proximal calculus of the loss ``g(x) = Lam e^x - delta x``.

The minimiser of ``(xi - x)^2 / (2 nu) + g(xi)`` solves
``xi - x = nu (delta - Lam e^xi)``, which gives

    xi = x + delta nu - W0(nu Lam exp(x + delta nu)).

The argument of ``W0`` overflows for moderately large ``x``, so everything
goes through :func:`lambert_w0_exp`, which takes the logarithm of the
argument instead.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

__all__ = [
    "ProxInputs",
    "lambert_w0",
    "lambert_w0_exp",
    "prox_g",
    "moreau_g",
    "moreau_dx",
    "moreau_dnu",
    "g_prime",
]

# below this argument the series y - y^2 + 3/2 y^3 is exact to double precision
_SERIES_CUTOFF = 1e-8
_MAX_HALLEY = 12


class ProxInputs(NamedTuple):
    x: float
    nu: float
    Lam: float
    delta: int

    def validate(self) -> "ProxInputs":
        _check_prox_args(self.nu, self.Lam, self.delta)
        return self


def _as_out(a):
    return a.item() if a.ndim == 0 else a


def lambert_w0_exp(s):
    """Principal branch ``W0(exp(s))`` for real ``s``, ``-inf`` allowed.

    Halley iterations on ``w + log(w) - s = 0`` started from Winitzki's
    approximation, which is within about 2% everywhere on ``[0, inf)``.
    """
    s = np.asarray(s, dtype=float)
    if np.any(np.isnan(s)) or np.any(s == np.inf):
        raise ValueError("lambert_w0_exp needs s < inf and not NaN")
    w = np.zeros_like(s)

    small = s < np.log(_SERIES_CUTOFF)
    if np.any(small):
        y = np.exp(s[small])
        w[small] = y * (1.0 - y * (1.0 - 1.5 * y))

    big = ~small
    if np.any(big):
        sb = s[big]
        L = np.logaddexp(0.0, sb)
        wb = L * (1.0 - np.log1p(L) / (2.0 + L))
        for _ in range(_MAX_HALLEY):
            f = wb + np.log(wb) - sb
            fp = 1.0 + 1.0 / wb
            fpp = -np.square(1.0 / wb)
            step = 2.0 * f * fp / (2.0 * fp * fp - f * fpp)
            wb = wb - step
            if np.all(np.abs(step) <= 4e-16 * wb):
                break
        w[big] = wb
    return _as_out(w)


def lambert_w0(y):
    """Principal branch of the Lambert W function for ``y >= 0``."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0) or np.any(np.isnan(y)):
        raise ValueError("lambert_w0 is only defined here for y >= 0")
    with np.errstate(divide="ignore"):
        w = np.asarray(lambert_w0_exp(np.log(y)))
    # exp(log y) costs |log y| ulps; evaluate the series on y itself
    small = y < _SERIES_CUTOFF
    with np.errstate(over="ignore", invalid="ignore"):
        w = np.where(small, y * (1.0 - y * (1.0 - 1.5 * y)), w)
    return _as_out(w)


def _check_prox_args(nu, Lam, delta):
    if np.any(np.asarray(nu) <= 0):
        raise ValueError("envelope parameter nu must be > 0")
    if np.any(np.asarray(Lam) < 0):
        raise ValueError("cumulative hazard Lam must be >= 0")
    d = np.asarray(delta)
    if np.any((d != 0) & (d != 1)):
        raise ValueError("event indicator delta must be 0 or 1")


def _prox_and_w(x, nu, Lam, delta):
    x = np.asarray(x, dtype=float)
    nu = np.asarray(nu, dtype=float)
    Lam = np.asarray(Lam, dtype=float)
    delta = np.asarray(delta, dtype=float)
    shift = x + delta * nu
    with np.errstate(divide="ignore"):
        W = np.asarray(lambert_w0_exp(np.log(nu) + np.log(Lam) + shift))
    return shift - W, W


def prox_g(x, nu, Lam, delta, *, check=True):
    """Proximal point of ``g`` at ``x`` with parameter ``nu``."""
    if check:
        _check_prox_args(nu, Lam, delta)
    xi, _ = _prox_and_w(x, nu, Lam, delta)
    return _as_out(xi)


def moreau_g(x, nu, Lam, delta, *, check=True):
    """Moreau envelope ``min_xi (xi - x)^2/(2 nu) + g(xi)``.

    ``Lam e^xi`` is evaluated as ``W / nu`` (a consequence of the optimality
    condition) so Lam = 0 and huge ``x`` need no special handling.
    """
    if check:
        _check_prox_args(nu, Lam, delta)
    nu_a = np.asarray(nu, dtype=float)
    xi, W = _prox_and_w(x, nu, Lam, delta)
    d = xi - np.asarray(x, dtype=float)
    out = d * d / (2.0 * nu_a) + W / nu_a - np.asarray(delta, dtype=float) * xi
    return _as_out(np.asarray(out))


def moreau_dx(x, nu, Lam, delta, *, check=True):
    """``d/dx`` of the envelope, ``(x - prox) / nu``."""
    if check:
        _check_prox_args(nu, Lam, delta)
    xi, _ = _prox_and_w(x, nu, Lam, delta)
    return _as_out(np.asarray((np.asarray(x, dtype=float) - xi) / np.asarray(nu, dtype=float)))


def moreau_dnu(x, nu, Lam, delta, *, check=True):
    """``d/dnu`` of the envelope, ``-(prox - x)^2 / (2 nu^2)``; never positive."""
    if check:
        _check_prox_args(nu, Lam, delta)
    nu_a = np.asarray(nu, dtype=float)
    xi, _ = _prox_and_w(x, nu, Lam, delta)
    d = xi - np.asarray(x, dtype=float)
    return _as_out(np.asarray(-d * d / (2.0 * nu_a * nu_a)))


def g_prime(xi, Lam, delta):
    Lam = np.asarray(Lam, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        h = np.where(Lam > 0, Lam * np.exp(xi), 0.0)
    return _as_out(np.asarray(h - np.asarray(delta)))
