
import numpy as np
import pytest
from scipy import integrate, special as sp

from mvlab.density import (
    DensityError,
    DensityField,
    convolve,
    l1_distance,
    mean_field_potential,
    min_shift_l1,
    sup_distance,
)
from mvlab.potentials import CosineSeries


def test_uniform_and_mass():
    u = DensityField.uniform(64)
    assert np.all(u.values == 1.0)
    nu = DensityField.from_function(lambda x: 2.0 + np.sin(2 * np.pi * x) ** 3, 128)
    assert nu.mass == pytest.approx(1.0, abs=1e-14)
    assert nu.modes[0] == 1.0


@pytest.mark.parametrize("n", [0, 32, 100, 65])
def test_bad_grid(n):
    with pytest.raises(DensityError):
        DensityField.uniform(n)


def test_unnormalized_values_rejected():
    with pytest.raises(DensityError):
        DensityField.from_values(np.full(64, 2.0), normalize=False)
    with pytest.raises(DensityError):
        DensityField.from_values(np.zeros(64))


def test_von_mises_normaliser_and_shape():
    a = 2.5
    nu = DensityField.von_mises(a, 256)
    x = nu.x
    assert np.allclose(nu.values, np.exp(a * np.cos(2 * np.pi * x)) / sp.i0(a), rtol=1e-12, atol=0)


def test_gibbs_matches_von_mises():
    # exp(-beta U) with U = -(a / beta) cos is the von Mises density
    nu = DensityField.gibbs(CosineSeries.cosine(-0.75), 4.0, 128)
    assert sup_distance(nu, DensityField.von_mises(3.0, 128)) <= 1e-12


def test_evaluate_interpolates_grid():
    nu = DensityField.von_mises(1.3, 64)
    assert np.allclose(nu.evaluate(nu.x), nu.values, atol=1e-13)


def test_cdf_matches_quadrature():
    nu = DensityField.von_mises(1.7, 128, center=0.2)
    for x in (0.0, 0.13, 0.5, 0.91, 1.0):
        ref = integrate.quad(lambda t: float(nu.evaluate(t)), 0, x, epsabs=1e-13)[0]
        assert float(nu.cdf(x)) == pytest.approx(ref, abs=1e-12)
    F = nu.cdf_on_grid(256)
    assert F[0] == 0.0 and F[-1] == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(F, nu.cdf(np.arange(257) / 256), atol=1e-13)


def test_shift_and_first_moment():
    nu = DensityField.von_mises(2.0, 128)
    s = nu.shifted(0.25)
    assert float(s.evaluate(0.25)) == pytest.approx(float(nu.evaluate(0.0)), rel=1e-12)
    m = s.first_moments()
    assert np.angle(m) / (2 * np.pi) == pytest.approx(0.25, abs=1e-12)
    assert abs(m) == pytest.approx(sp.i1(2.0) / sp.i0(2.0), rel=1e-12)


def test_distances():
    nu = DensityField.von_mises(2.0, 128)
    mu = nu.shifted(0.3)
    assert l1_distance(nu, nu) == 0.0
    d, c = min_shift_l1(mu, nu)
    assert d <= 1e-8
    assert c == pytest.approx(0.3, abs=1e-6)


def test_resampling_preserves_modes():
    nu = DensityField.von_mises(1.0, 64)
    big = nu.resampled(256)
    assert np.allclose(big.modes[:32], nu.modes)
    assert np.all(big.modes[32:] == 0)


def test_negative_density_flagged():
    x = np.arange(64) / 64
    nu = DensityField(np.fft.rfft(1 + 1.5 * np.cos(2 * np.pi * x))[:32] / 64)
    with pytest.raises(DensityError):
        nu.check_positive()


def test_convolution_against_quadrature():
    W = CosineSeries((0.2, -1.0, 0.4), (0.3, -0.1))
    nu = DensityField.von_mises(1.5, 128, center=0.1)
    conv = convolve(W, nu)
    for x in (0.0, 0.37, 0.8):
        ref = np.mean(W(x - nu.x) * nu.values)
        assert conv(x) == pytest.approx(ref, abs=1e-13)
    V = CosineSeries.cosine(-0.5)
    assert mean_field_potential(V, W, nu)(0.37) == pytest.approx(V(0.37) + conv(0.37), abs=1e-14)


def test_kuramoto_convolution_of_von_mises():
    a = 3.0
    conv = convolve(CosineSeries.kuramoto(), DensityField.von_mises(a, 256))
    assert conv.cos_coeffs[1] == pytest.approx(-sp.i1(a) / sp.i0(a), rel=1e-12)


def test_dict_round_trip():
    nu = DensityField.von_mises(1.0, 64)
    d = nu.to_dict()
    assert set(d) == {"grid", "values", "modes"}
    assert sup_distance(DensityField.from_dict(d), nu) == 0.0
    assert sup_distance(DensityField.from_dict({"values": d["values"]}), nu) <= 1e-14
