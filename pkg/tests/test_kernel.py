import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from nlcd.grid import Field, Grid
from nlcd.kernel import (Box, Bump, Exponential, Gaussian, TabulatedEven, convolve,
                         convolve_values, discretize, fourier_constants, load_tabulated_csv,
                         second_moment)

SPECS = [Exponential(), Gaussian(1.0), Gaussian(0.3), Box(1.0), Bump(3.0), Bump(1.0)]


@pytest.mark.parametrize("spec", SPECS, ids=repr)
def test_second_moment_against_quadrature(spec):
    lim = spec.support if spec.support is not None else 60.0
    m0 = integrate.quad(spec.density, -lim, lim, limit=400, points=[0.0])[0]
    m2 = integrate.quad(lambda z: 0.5 * z * z * spec.density(z), -lim, lim, limit=400,
                        points=[0.0])[0]
    assert m0 == pytest.approx(1.0, rel=1e-9)
    assert second_moment(spec) == pytest.approx(m2, rel=1e-8)


def test_closed_form_moments():
    assert second_moment(Exponential()) == 1.0
    assert second_moment(Gaussian(2.0)) == pytest.approx(2.0)
    assert second_moment(Box(1.0)) == pytest.approx(1 / 6)


@pytest.mark.parametrize("spec", SPECS, ids=repr)
def test_fourier_against_quadrature(spec):
    lim = spec.support if spec.support is not None else 60.0
    for xi in (0.0, 0.7, 2.5):
        ref = integrate.quad(lambda z: spec.density(z) * np.cos(xi * z), -lim, lim, limit=400,
                             points=[0.0])[0]
        assert float(spec.fourier(xi)) == pytest.approx(ref, abs=1e-9)


@pytest.mark.parametrize("spec", SPECS, ids=repr)
def test_discretize_mass_symmetry_moment(spec):
    k = discretize(spec, 0.02)
    assert np.sum(k.weights) * k.dx == pytest.approx(1.0, rel=1e-14)
    assert np.array_equal(k.weights, k.weights[::-1])
    # point samples of the box jump are only first-order accurate
    rel = 3 * k.dx if isinstance(spec, Box) else 2e-3
    assert k.discrete_second_moment == pytest.approx(second_moment(spec), rel=rel)


def test_discretize_errors():
    with pytest.raises(ValueError):
        discretize(Gaussian(0.01), 1.0)
    with pytest.raises(ValueError):
        discretize(Exponential(), 0.1, tail_tol=0.5)


def test_exponential_truncation_radius():
    k = discretize(Exponential(), 0.1, 1e-12)
    # e^{-L} < 1e-12 first at L = (m + 1/2) dx
    assert np.exp(-(k.m + 0.5) * 0.1) < 1e-12 <= np.exp(-(k.m - 0.5) * 0.1)


def test_rescaled_kernel_moment():
    k = discretize(Bump(3.0), 0.01)
    assert k.rescaled(2.0).discrete_second_moment == pytest.approx(
        second_moment(Bump(3.0)) / 4, rel=1e-3)


def test_tabulated_round_trip(tmp_path):
    z = np.arange(-200, 201) * 0.05
    J = np.exp(-np.abs(z)) / 2
    p = tmp_path / "k.csv"
    p.write_text("z,J\n" + "".join(f"{a:.17g},{b:.17g}\n" for a, b in zip(z, J)))
    spec = load_tabulated_csv(p)
    assert second_moment(spec) == pytest.approx(1.0, rel=1e-2)
    k = discretize(spec, 0.05)
    assert np.sum(k.weights) * k.dx == pytest.approx(1.0)


def test_tabulated_divergent_moment_rejected():
    z = np.arange(0, 2001) * 0.05
    with pytest.raises(ValueError, match="divergent"):
        TabulatedEven(1.0 / (1.0 + z) ** 2.5, 0.05)
    TabulatedEven(np.exp(-z), 0.05)


def _brute(w, v, dx):
    m = (len(w) - 1) // 2
    out = np.zeros_like(v)
    for i in range(len(v)):
        for j in range(-m, m + 1):
            if 0 <= i - j < len(v):
                out[i] += w[m + j] * v[i - j]
    return out * dx


def test_convolution_paths_match_brute_force():
    rng = np.random.default_rng(3)
    k = discretize(Exponential(), 0.25)
    v = rng.normal(size=120)
    ref = _brute(k.weights, v, k.dx)
    for path in ("direct", "fft"):
        assert np.allclose(convolve_values(k.weights, v, k.dx, path), ref, rtol=0, atol=1e-13)


@given(st.integers(8, 512), st.integers(0, 2 ** 32 - 1),
       st.sampled_from([0.05, 0.1, 0.4]))
@settings(max_examples=40, deadline=None)
def test_fft_direct_agree(n, seed, dx):
    rng = np.random.default_rng(seed)
    k = discretize(Gaussian(1.0), dx)
    f = Field(Grid(0.0, dx, n), rng.normal(size=n))
    a = convolve(k, f, "fft").values
    b = convolve(k, f, "direct").values
    assert np.max(np.abs(a - b)) <= 1e-12 * max(np.max(np.abs(b)), 1e-300)


@given(st.integers(0, 2 ** 32 - 1), st.integers(-20, 20))
@settings(max_examples=25, deadline=None)
def test_convolution_commutes_with_translation(seed, shift):
    rng = np.random.default_rng(seed)
    g = Grid(0.0, 0.1, 400)
    k = discretize(Exponential(), 0.1)
    v = np.zeros(400)
    v[150:250] = rng.normal(size=100)
    a = convolve(k, Field(g, np.roll(v, shift))).values
    b = np.roll(convolve(k, Field(g, v)).values, shift)
    # differences only from mass leaving through the domain edges
    assert np.max(np.abs(a - b)[150:250]) < 1e-12


def test_convolution_positivity_and_mass():
    g = Grid.symmetric(100.0, 2000)
    f = g.sample(lambda x: np.exp(-x * x), nonneg=True)
    c = convolve(discretize(Exponential(), g.dx), f)
    assert c.nonneg and c.values.min() >= 0
    assert np.sum(c.values) == pytest.approx(np.sum(f.values), rel=1e-9)


def test_fourier_constants_exponential():
    c, R, d = fourier_constants(Exponential())
    assert 0 < c <= 0.6
    xi = np.linspace(0, R, 2001)
    assert np.all(Exponential().fourier(xi) <= 1 - c * xi ** 2 + 1e-12)
    xi = np.linspace(R, 200, 20001)
    assert np.all(Exponential().fourier(xi) <= 1 - d + 1e-12)


@pytest.mark.parametrize("spec", [Gaussian(1.0), Box(1.0), Bump(3.0)], ids=repr)
def test_fourier_constants_certified(spec):
    c, R, d = fourier_constants(spec)
    assert c > 0 and R > 0 and 0 < d < 1
    xi = np.linspace(1e-6, R, 4001)
    assert np.all(spec.fourier(xi) <= 1 - c * xi ** 2 + 1e-9)
