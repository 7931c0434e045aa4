import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from hdsa.hazard import (
    KnotGrid,
    Psi_matrix,
    basis_Psi,
    basis_psi,
    cum_hazard,
    cum_hazard_bound,
    hazard_rate,
    interval_index,
    loss_g,
    loss_g_min,
    psi_matrix,
)


def test_basis_psi_examples(grid3):
    assert basis_psi(grid3, 2, 1.5) == 1
    assert basis_psi(grid3, 1, 2.5) == 0
    assert basis_psi(grid3, 3, 3.5) == 0


def test_basis_psi_open_interval_at_knots(grid3):
    for k in (1, 2, 3):
        for t in grid3.knots:
            assert basis_psi(grid3, k, t) == 0
    assert np.all(interval_index(grid3, grid3.knots) == -1)


def test_basis_Psi_examples(grid3):
    assert basis_Psi(grid3, 1, 1.5) == 1.0
    assert basis_Psi(grid3, 2, 1.5) == 0.5
    assert basis_Psi(grid3, 1, 10.0) == 1.0
    assert basis_Psi(grid3, 3, 0.5) == 0.0


@pytest.mark.parametrize("k", [0, 4, -1])
def test_interval_index_out_of_range(grid3, k):
    with pytest.raises(IndexError):
        basis_psi(grid3, k, 1.0)
    with pytest.raises(IndexError):
        basis_Psi(grid3, k, 1.0)


def test_hazard_examples(grid3):
    assert hazard_rate(grid3, [0, 0, 0], 1.5) == 1.0
    assert hazard_rate(grid3, [0, 0, math.log(2)], 2.5) == pytest.approx(2.0, rel=1e-15)
    assert hazard_rate(grid3, [0.3, -1.0, 2.0], 3.5) == 0.0


def test_cum_hazard_examples(grid3):
    assert cum_hazard(grid3, [0, 0, 0], 2.5) == 2.5
    assert cum_hazard(grid3, [0, 0, 0], 10.0) == 3.0
    assert cum_hazard(grid3, [math.log(2), 0, 0], 0.5) == pytest.approx(1.0, rel=1e-15)


def test_loss_examples():
    assert loss_g(0.0, 2.5, 1) == 2.5
    assert loss_g(0.0, 1.0, 1) == 1.0
    assert loss_g_min(1.0, 1) == 1.0
    assert loss_g(1.0, 1.0, 0) == pytest.approx(math.e)


@pytest.mark.parametrize(
    "knots",
    [[1.0], [0.0, 0.0, 1.0], [2.0, 1.0], [-1.0, 1.0], [0.0, np.inf]],
)
def test_knot_validation(knots):
    with pytest.raises(ValueError):
        KnotGrid(np.array(knots))


def test_omega_validation(grid3):
    with pytest.raises(ValueError):
        cum_hazard(grid3, [0.0, 0.0], 1.0)
    with pytest.raises(ValueError):
        hazard_rate(grid3, [0.0, np.nan, 0.0], 1.0)


def test_vectorised_matches_scalar(grid3):
    t = np.array([0.0, 0.2, 1.0, 1.7, 2.9, 3.0, 4.0])
    P = Psi_matrix(grid3, t)
    p = psi_matrix(grid3, t)
    for k in (1, 2, 3):
        np.testing.assert_array_equal(P[:, k - 1], basis_Psi(grid3, k, t))
        np.testing.assert_array_equal(p[:, k - 1], basis_psi(grid3, k, t))


knot_grids = st.lists(st.floats(0.05, 2.0), min_size=1, max_size=6).map(
    lambda w: KnotGrid(np.concatenate([[0.0], np.cumsum(w)]))
)


@settings(max_examples=60, deadline=None)
@given(grid=knot_grids, t=st.floats(0.0, 15.0))
def test_intervals_disjoint(grid, t):
    assert psi_matrix(grid, t).sum() in (0.0, 1.0)


@settings(max_examples=40, deadline=None)
@given(grid=knot_grids, data=st.data())
def test_cum_hazard_is_integral_of_hazard(grid, data):
    omega = np.array(data.draw(st.lists(st.floats(-3, 3), min_size=grid.n_intervals, max_size=grid.n_intervals)))
    t = data.draw(st.floats(0.01, 1.2 * grid.knots[-1]))
    pts = [k for k in grid.knots if k < t]
    val, _ = quad(lambda s: hazard_rate(grid, omega, s), 0.0, t, points=pts or None, limit=200, epsabs=0, epsrel=1e-12)
    assert cum_hazard(grid, omega, t) == pytest.approx(val, rel=1e-8, abs=1e-14)
    assert cum_hazard(grid, omega, t) <= cum_hazard_bound(grid, omega) * (1 + 1e-14)


@settings(max_examples=50, deadline=None)
@given(grid=knot_grids, t1=st.floats(0, 15), t2=st.floats(0, 15))
def test_cum_hazard_nondecreasing(grid, t1, t2):
    omega = np.linspace(-1, 1, grid.n_intervals)
    lo, hi = sorted((t1, t2))
    assert cum_hazard(grid, omega, lo) <= cum_hazard(grid, omega, hi)
    assert cum_hazard(grid, omega, grid.knots[-1] + hi) == pytest.approx(cum_hazard_bound(grid, omega))


@settings(max_examples=100, deadline=None)
@given(
    x1=st.floats(-5, 5), x2=st.floats(-5, 5), th=st.floats(0.01, 0.99),
    Lam=st.floats(0, 20), delta=st.sampled_from([0, 1]),
)
def test_loss_convex(x1, x2, th, Lam, delta):
    lhs = loss_g(th * x1 + (1 - th) * x2, Lam, delta)
    rhs = th * loss_g(x1, Lam, delta) + (1 - th) * loss_g(x2, Lam, delta)
    assert lhs <= rhs + 1e-12 * (1 + abs(rhs))


@settings(max_examples=60, deadline=None)
@given(Lam=st.floats(1e-3, 1e3))
def test_loss_min_matches_golden_section(Lam):
    res = minimize_scalar(lambda x: loss_g(x, Lam, 1), bracket=(-np.log(Lam) - 1, -np.log(Lam) + 1),
                          method="golden", tol=1e-12)
    assert loss_g_min(Lam, 1) == pytest.approx(res.fun, abs=1e-8 * max(1, abs(res.fun)))


def test_loss_min_censored_is_zero():
    # infimum of Lam e^x over x is 0 (approached as x -> -inf)
    assert loss_g_min(3.0, 0) == 0.0
    assert loss_g(-50.0, 3.0, 0) < 1e-20
