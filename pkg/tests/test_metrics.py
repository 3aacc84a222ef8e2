import math

import numpy as np
import pytest
from scipy import special as sp
from scipy.optimize import linear_sum_assignment

from mvlab.density import DensityError, DensityField
from mvlab.metrics import circle_wasserstein, quantile_atoms, relative_entropy


def random_density(rng, grid=256):
    x = np.arange(grid) / grid
    f = sum(rng.normal() * np.cos(2 * np.pi * (k * x - rng.random())) / k for k in range(1, 5))
    return DensityField.from_values(np.exp(2.0 * f / np.max(np.abs(f))))


def assignment_w2(mu, nu, n):
    """Exact optimal matching of ``n`` quantile atoms under the squared geodesic cost."""
    x, y = quantile_atoms(mu, n), quantile_atoms(nu, n)
    d = np.abs(x[:, None] - y[None, :])
    d = np.minimum(d, 1.0 - d)
    r, c = linear_sum_assignment(d**2)
    return math.sqrt(np.mean(d[r, c] ** 2))


def test_identity_and_symmetry():
    rng = np.random.default_rng(0)
    mu, nu = random_density(rng), random_density(rng)
    assert circle_wasserstein(mu, mu) == pytest.approx(0.0, abs=1e-12)
    assert circle_wasserstein(mu, nu) == pytest.approx(circle_wasserstein(nu, mu), abs=1e-12)
    assert circle_wasserstein(mu, nu, 1) == pytest.approx(circle_wasserstein(nu, mu, 1), abs=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_w2_matches_assignment_oracle(seed):
    rng = np.random.default_rng(seed)
    mu, nu = random_density(rng), random_density(rng)
    assert circle_wasserstein(mu, nu, 2, n=512) == pytest.approx(assignment_w2(mu, nu, 512), abs=1e-12)


@pytest.mark.parametrize("c", [0.1, 0.2, 0.3])
def test_translation_of_concentrated_density(c):
    # away from the antipode the optimal plan is the translation itself
    nu = DensityField.von_mises(200.0, 1024)
    mu = nu.shifted(c)
    assert circle_wasserstein(nu, mu, 2) == pytest.approx(c, abs=1e-4)
    assert circle_wasserstein(nu, mu, 1) == pytest.approx(c, abs=1e-4)


def test_near_antipodal_shift_beats_translation():
    # wrapping tail mass the other way round the circle is cheaper than translating
    nu = DensityField.von_mises(200.0, 1024)
    mu = nu.shifted(0.45)
    w = circle_wasserstein(nu, mu, 2, n=512)
    assert w == pytest.approx(assignment_w2(nu, mu, 512), abs=1e-12)
    assert w < 0.45


def test_antipodal_bumps_w1_is_half():
    a = 1.0 / (2 * np.pi * 2e-4) ** 2
    nu = DensityField.von_mises(a, 16384)
    assert circle_wasserstein(nu, nu.shifted(0.5), 1, n=16384) == pytest.approx(0.5, abs=1e-3)


def test_w1_le_w2_and_triangle():
    rng = np.random.default_rng(5)
    for _ in range(20):
        p, q, s = (random_density(rng) for _ in range(3))
        assert circle_wasserstein(p, q, 1) <= circle_wasserstein(p, q, 2) + 1e-9
        assert circle_wasserstein(p, s) <= circle_wasserstein(p, q) + circle_wasserstein(q, s) + 1e-12
        assert circle_wasserstein(p, s, 1) <= circle_wasserstein(p, q, 1) + circle_wasserstein(q, s, 1) + 1e-12


def test_bad_order():
    u = DensityField.uniform(64)
    with pytest.raises(ValueError):
        circle_wasserstein(u, u, 3)


@pytest.mark.parametrize("a", [0.5, 2.0, 6.0])
def test_relative_entropy_closed_form(a):
    nu = DensityField.von_mises(a, 256)
    ref = a * sp.i1(a) / sp.i0(a) - math.log(sp.i0(a))
    assert relative_entropy(nu, DensityField.uniform(256)) == pytest.approx(ref, abs=1e-12)
    assert relative_entropy(nu, nu) == 0.0


def test_relative_entropy_needs_positive_reference():
    x = np.arange(64) / 64
    bad = DensityField(np.fft.rfft(1 + 1.2 * np.cos(2 * np.pi * x))[:32] / 64)
    with pytest.raises(DensityError):
        relative_entropy(DensityField.uniform(64), bad)
