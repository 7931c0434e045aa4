import math

import numpy as np
import pytest
import scipy.special
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq, minimize_scalar

from hdsa.hazard import loss_g, loss_g_min
from hdsa.scalarops import (
    ProxInputs,
    g_prime,
    lambert_w0,
    lambert_w0_exp,
    moreau_dnu,
    moreau_dx,
    moreau_g,
    prox_g,
)

W1 = 0.567143290409784  # omega constant, W(1)


def brute_prox(x, nu, Lam, delta):
    f = lambda xi: (xi - x) ** 2 / (2 * nu) + loss_g(xi, Lam, delta)
    # the minimiser lies between x - nu*Lam*e^x-ish and x + delta*nu
    hi = x + delta * nu
    lo = min(hi - 1.0, x - nu * Lam * math.exp(min(x, 50.0)) - 1.0)
    with np.errstate(over="ignore", invalid="ignore"):
        res = minimize_scalar(f, bracket=(lo, hi), method="golden", tol=1e-13)
    return res.x, res.fun


class TestLambert:
    def test_examples(self):
        assert lambert_w0(0.0) == 0.0
        assert lambert_w0(math.e) == pytest.approx(1.0, abs=1e-15)
        assert lambert_w0(1.0) == pytest.approx(W1, abs=1e-15)

    def test_against_bisection(self):
        ref = brentq(lambda w: w * math.exp(w) - 1.0, 0.0, 1.0, xtol=1e-16)
        assert abs(lambert_w0(1.0) - ref) <= 1e-14

    def test_against_scipy(self):
        y = np.logspace(-300, 300, 2001)
        np.testing.assert_allclose(lambert_w0(y), scipy.special.lambertw(y).real, rtol=2e-15, atol=0)

    def test_log_domain_beyond_overflow(self):
        # W(e^s) ~ s - log s for huge s
        s = 1e4
        w = lambert_w0_exp(s)
        assert w + math.log(w) == pytest.approx(s, rel=1e-15)
        assert lambert_w0_exp(-np.inf) == 0.0

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            lambert_w0(-0.1)
        with pytest.raises(ValueError):
            lambert_w0(np.nan)

    @settings(max_examples=200, deadline=None)
    @given(a=st.floats(-30, 30), b=st.floats(-30, 30))
    def test_monotone(self, a, b):
        lo, hi = sorted((a, b))
        assert lambert_w0_exp(lo) <= lambert_w0_exp(hi)

    def test_series_boundary_continuous(self):
        s = np.log(1e-8)
        below, above = lambert_w0_exp(np.nextafter(s, -np.inf)), lambert_w0_exp(s)
        assert abs(above - below) <= 1e-22


class TestProxExamples:
    def test_prox(self):
        assert prox_g(0.0, 1.0, 0.0, 1) == 1.0
        assert prox_g(0.0, 1.0, 1.0, 1) == pytest.approx(0.0, abs=1e-16)
        assert prox_g(0.0, 1.0, 1.0, 0) == pytest.approx(-W1, abs=1e-15)

    def test_moreau(self):
        assert moreau_g(0.0, 1.0, 1.0, 1) == pytest.approx(1.0, abs=1e-15)
        assert moreau_g(0.0, 1.0, 0.0, 1) == -0.5
        # W + W^2/2 using e^{-W} = W
        assert moreau_g(0.0, 1.0, 1.0, 0) == pytest.approx(W1 + W1**2 / 2, abs=1e-15)
        _, fun = brute_prox(0.0, 1.0, 1.0, 0)
        assert moreau_g(0.0, 1.0, 1.0, 0) == pytest.approx(fun, abs=1e-12)

    def test_dx(self):
        assert moreau_dx(0.0, 1.0, 0.0, 1) == -1.0
        assert moreau_dx(0.0, 1.0, 1.0, 0) == pytest.approx(W1, abs=1e-15)
        assert moreau_dx(0.0, 1.0, 1.0, 1) == pytest.approx(0.0, abs=1e-16)

    def test_dnu(self):
        assert moreau_dnu(0.0, 1.0, 1.0, 1) == pytest.approx(0.0, abs=1e-16)
        assert moreau_dnu(0.0, 1.0, 0.0, 1) == -0.5
        assert moreau_dnu(0.0, 1.0, 1.0, 0) == pytest.approx(-(W1**2) / 2, abs=1e-15)

    def test_g_prime(self):
        assert g_prime(0.0, 1.0, 1) == 0.0
        assert g_prime(0.0, 2.0, 0) == 2.0
        assert g_prime(math.log(3), 1.0, 1) == pytest.approx(2.0)


class TestValidation:
    @pytest.mark.parametrize("args", [(0.0, 0.0, 1.0, 1), (0.0, -1.0, 1.0, 1), (0.0, 1.0, -1.0, 0), (0.0, 1.0, 1.0, 2)])
    def test_bad_inputs(self, args):
        for fn in (prox_g, moreau_g, moreau_dx, moreau_dnu):
            with pytest.raises(ValueError):
                fn(*args)
        with pytest.raises(ValueError):
            ProxInputs(*args).validate()

    def test_never_nonfinite(self):
        x = np.array([-700.0, 0.0, 700.0, 1e4])
        for delta in (0, 1):
            xi = prox_g(x, 5.0, 1e3, delta)
            assert np.all(np.isfinite(xi))
            assert np.all(np.isfinite(moreau_g(x, 5.0, 1e3, delta)))


prox_args = dict(
    x=st.floats(-20, 20),
    nu=st.floats(1e-3, 1e3),
    Lam=st.one_of(st.just(0.0), st.floats(1e-6, 1e3)),
    delta=st.sampled_from([0, 1]),
)


@settings(max_examples=300, deadline=None)
@given(**prox_args)
def test_optimality_identity(x, nu, Lam, delta):
    xi = prox_g(x, nu, Lam, delta)
    # xi - x = nu (delta - Lam e^xi)
    assert abs((xi - x) / nu + g_prime(xi, Lam, delta)) <= 1e-10 * max(1.0, abs(delta - (xi - x) / nu))


@settings(max_examples=200, deadline=None)
@given(**prox_args)
def test_sandwich(x, nu, Lam, delta):
    m = moreau_g(x, nu, Lam, delta)
    tol = 1e-10 * (1 + abs(m))
    assert m <= loss_g(x, Lam, delta) + tol
    if Lam > 0:
        assert m >= loss_g_min(Lam, delta) - tol


@settings(max_examples=200, deadline=None)
@given(x1=st.floats(-20, 20), x2=st.floats(-20, 20), nu=prox_args["nu"], Lam=prox_args["Lam"], delta=prox_args["delta"])
def test_nonexpansive(x1, x2, nu, Lam, delta):
    d = abs(prox_g(x1, nu, Lam, delta) - prox_g(x2, nu, Lam, delta))
    assert d <= abs(x1 - x2) * (1 + 1e-12) + 1e-12


@settings(max_examples=200, deadline=None)
@given(x=prox_args["x"], a=st.floats(1e-3, 1e3), b=st.floats(1e-3, 1e3), Lam=prox_args["Lam"], delta=prox_args["delta"])
def test_envelope_nonincreasing_in_nu(x, a, b, Lam, delta):
    lo, hi = sorted((a, b))
    assert moreau_g(x, hi, Lam, delta) <= moreau_g(x, lo, Lam, delta) + 1e-12 * (1 + abs(moreau_g(x, lo, Lam, delta)))


@settings(max_examples=150, deadline=None)
@given(x=st.floats(-5, 5), nu=st.floats(0.01, 100), Lam=st.floats(1e-3, 100), delta=prox_args["delta"])
def test_derivatives_match_finite_differences(x, nu, Lam, delta):
    h = 1e-5 * max(1.0, abs(x))
    fd = (moreau_g(x + h, nu, Lam, delta) - moreau_g(x - h, nu, Lam, delta)) / (2 * h)
    an = moreau_dx(x, nu, Lam, delta)
    assert an == pytest.approx(fd, rel=1e-5, abs=1e-8)
    hn = 1e-5 * nu
    fd = (moreau_g(x, nu + hn, Lam, delta) - moreau_g(x, nu - hn, Lam, delta)) / (2 * hn)
    an = moreau_dnu(x, nu, Lam, delta)
    assert an <= 0
    assert an == pytest.approx(fd, rel=1e-5, abs=1e-8)


@settings(max_examples=150, deadline=None)
@given(x=st.floats(-5, 5), nu=st.floats(0.01, 100), Lam=st.floats(1e-3, 100), delta=prox_args["delta"])
def test_prox_matches_brute_force(x, nu, Lam, delta):
    xb, fb = brute_prox(x, nu, Lam, delta)
    assert prox_g(x, nu, Lam, delta) == pytest.approx(xb, abs=1e-6)
    assert moreau_g(x, nu, Lam, delta) == pytest.approx(fb, abs=1e-9 * (1 + abs(fb)))


@pytest.mark.parametrize("x,Lam,delta", [(0.0, 1.0, 1), (0.7, 2.0, 0), (-1.2, 0.4, 1), (2.0, 0.1, 0)])
def test_envelope_limits(x, Lam, delta):
    assert moreau_g(x, 1e-6, Lam, delta) == pytest.approx(loss_g(x, Lam, delta), abs=1e-4)
    assert moreau_g(x, 1e6, Lam, delta) == pytest.approx(loss_g_min(Lam, delta), abs=1e-4)


def test_broadcasting():
    x = np.linspace(-2, 2, 5)
    out = prox_g(x, 1.0, np.array([0, 1, 2, 3, 4.0]), np.array([1, 0, 1, 0, 1]))
    assert out.shape == (5,)
    assert isinstance(prox_g(0.0, 1.0, 1.0, 0), float)
