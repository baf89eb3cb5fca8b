import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from nlcd.grid import Grid
from nlcd.profiles import (BurgersProfile, HeatProfile, burgers_eval, heat_eval, make_profile,
                           profile_residual, self_similarity_check)


def test_heat_values():
    assert heat_eval(HeatProfile(1.0, 1.0), 1.0, 0.0) == pytest.approx(0.28209479177387814)
    x = np.linspace(-5, 5, 41)
    assert np.array_equal(heat_eval(HeatProfile(2, 1), 1, x), 2 * heat_eval(HeatProfile(1, 1), 1, x))
    assert np.array_equal(heat_eval(HeatProfile(1, 0.7), 2, x), heat_eval(HeatProfile(1, 0.7), 2, -x))


def test_time_must_be_positive():
    for p in (HeatProfile(1, 1), BurgersProfile(1, 1)):
        with pytest.raises(ValueError):
            p(0.0, 1.0)
    with pytest.raises(ValueError):
        HeatProfile(1, 0)
    with pytest.raises(ValueError):
        BurgersProfile(-1, 1)


@pytest.mark.parametrize("kind", ["heat", "burgers"])
@pytest.mark.parametrize("M", [0.5, 2.0, 10.0, 50.0])
@pytest.mark.parametrize("t", [0.5, 1.0, 4.0])
def test_profile_mass(kind, M, t):
    w = make_profile(kind, M, 0.8)
    val = integrate.quad(lambda x: w(t, x), -np.inf, np.inf, limit=400, epsabs=1e-13)[0]
    assert val == pytest.approx(M, abs=1e-8)


def test_burgers_small_mass_is_heat():
    x = np.linspace(-3, 3, 61)
    b = burgers_eval(BurgersProfile(1e-4, 1.0), 1.0, x)
    h = heat_eval(HeatProfile(1e-4, 1.0), 1.0, x)
    assert np.max(np.abs(b / h - 1)) < 1e-3


def test_burgers_is_asymmetric():
    x = np.linspace(0, 5, 51)
    w = BurgersProfile(1.0, 1.0)
    assert np.max(np.abs(w(1, x) - w(1, -x))) > 1e-2


def test_burgers_large_mass_is_finite():
    x = np.linspace(-100, 100, 2001)
    v = BurgersProfile(500.0, 0.5)(1.0, x)
    assert np.all(np.isfinite(v)) and v.min() >= 0


def test_burgers_zero_mass():
    assert np.all(BurgersProfile(0.0, 1.0)(1.0, np.linspace(-3, 3, 7)) == 0)
    assert profile_residual("burgers", 0.0, 1.0, 1.0, Grid.symmetric(3, 20), 1e-2) == 0


@pytest.mark.parametrize("kind,M", [("heat", 1.0), ("burgers", 2.0), ("burgers", 10.0)])
def test_residual_second_order(kind, M):
    g = Grid.symmetric(6.0, 121)
    r1 = profile_residual(kind, M, 0.8, 1.0, g, 2e-2)
    r2 = profile_residual(kind, M, 0.8, 1.0, g, 1e-2)
    assert 3.2 <= r1 / r2 <= 4.8


def test_burgers_residual_at_point():
    g = Grid(0.69, 0.02, 8)   # centers around x = 0.7
    r = [profile_residual("burgers", 1.0, 1.0, 1.0, g, h) for h in (0.04, 0.02, 0.01)]
    assert 3.2 <= r[0] / r[1] <= 4.8 and 3.2 <= r[1] / r[2] <= 4.8


@pytest.mark.parametrize("kind", ["heat", "burgers"])
@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0, 10.0])
def test_self_similarity(kind, lam):
    dev = self_similarity_check(kind, 3.0, 0.7, 1.0, lam)
    assert dev <= (0.0 if lam == 1.0 else 1e-12)


@given(st.floats(0.1, 20), st.floats(0.2, 5), st.floats(0.1, 10))
def test_renormalized_sup_constant(M, A, t):
    """``t^{1/2} |w(t)|_inf`` does not depend on t."""
    w = BurgersProfile(M, A)
    x1 = np.linspace(-10, 10, 4001) * np.sqrt(A * t)
    x2 = x1 * np.sqrt(4.0)
    assert np.sqrt(t) * w(t, x1).max() == pytest.approx(np.sqrt(4 * t) * w(4 * t, x2).max(),
                                                        rel=1e-10)


def test_burgers_matches_finite_difference_oracle():
    """March w_t + (w^2)_x = A w_xx from t=1 to t=2 with a fine explicit FD scheme."""
    M, A = 2.0, 1.0
    w = BurgersProfile(M, A)
    x = np.linspace(-25, 25, 2001)
    h = x[1] - x[0]
    u = w(1.0, x)
    dt = 0.2 * h * h / A
    nsteps = int(round(1.0 / dt))
    dt = 1.0 / nsteps
    for _ in range(nsteps):
        f = u * u
        ux = np.zeros_like(u)
        ux[1:-1] = (f[2:] - f[:-2]) / (2 * h)
        uxx = np.zeros_like(u)
        uxx[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / h ** 2
        u = u + dt * (A * uxx - ux)
    assert np.max(np.abs(u - w(2.0, x))) < 2e-4
