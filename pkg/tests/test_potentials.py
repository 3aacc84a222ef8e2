import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvlab.potentials import (
    CosineSeries,
    Hamiltonian,
    eval_potential,
    h_stability,
    hamiltonian_energy,
    pair_force_sum,
    pair_force_sum_direct,
    semiconvexity_kappa,
)

TWO_PI = 2 * math.pi
coeffs = st.lists(st.floats(-3, 3, allow_nan=False), min_size=1, max_size=5)


@st.composite
def series(draw):
    c = draw(coeffs)
    s = draw(st.lists(st.floats(-3, 3, allow_nan=False), max_size=len(c) - 1))
    return CosineSeries(tuple(c), tuple(s))


def test_kuramoto_values():
    W = CosineSeries.kuramoto()
    v, d, d2 = eval_potential(W, 0.0)
    assert (v, d, d2) == pytest.approx((-1.0, 0.0, TWO_PI**2), abs=1e-12)
    v, d, d2 = eval_potential(W, 0.25)
    assert (v, d, d2) == pytest.approx((0.0, TWO_PI, 0.0), abs=1e-12)


def test_zero_series():
    assert eval_potential(CosineSeries.zero(), 0.3) == (0.0, 0.0, 0.0)


def test_json_round_trip():
    p = CosineSeries((0.1, -1.0, 0.5), (0.2, 0.0))
    assert CosineSeries.from_json(p.to_json()) == p


@settings(max_examples=60, deadline=None)
@given(series(), st.floats(-5, 5, allow_nan=False))
def test_periodic(p, x):
    assert abs(p(x) - p(x + 1.0)) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(series(), st.floats(0, 1, allow_nan=False))
def test_derivatives_match_finite_differences(p, x):
    h = 1e-5
    fd = (p(x + h) - p(x - h)) / (2 * h)
    assert abs(p.derivative(x) - fd) <= 1e-6 * max(1.0, abs(fd)) * 10
    fd2 = (p.derivative(x + h) - p.derivative(x - h)) / (2 * h)
    assert abs(p.second_derivative(x) - fd2) <= 1e-5 * max(1.0, abs(fd2))


def test_fourier_coefficient_matches_fft():
    p = CosineSeries((0.3, -1.0, 0.5), (0.7, -0.2))
    n = 64
    hat = np.fft.fft(p.grid(n)) / n
    for k in range(-2, 3):
        assert p.fourier_coefficient(k) == pytest.approx(hat[k], abs=1e-14)


@pytest.mark.parametrize(
    "W, stable, offending",
    [
        (CosineSeries.kuramoto(), False, (-1, 1)),
        (CosineSeries.cosine(1.0), True, ()),
        (CosineSeries.zero(), True, ()),
        (CosineSeries((0.0, 1.0, 0.5)), True, ()),
        (CosineSeries((0.0, 1.0, -0.3)), False, (-2, 2)),
    ],
)
def test_h_stability_fixtures(W, stable, offending):
    h = h_stability(W)
    assert h.stable is stable
    assert h.offending_modes == offending
    assert h.label == ("H_stable" if stable else "not_H_stable")


def test_hamiltonian_examples():
    h1 = Hamiltonian(CosineSeries.cosine(-0.5), CosineSeries.zero(), 1, 1.0)
    assert hamiltonian_energy(h1, [0.0]) == pytest.approx(-0.5)
    h2 = Hamiltonian(CosineSeries.zero(), CosineSeries.kuramoto(), 2, 1.0)
    for c in (0.0, 0.3, 0.77):
        assert hamiltonian_energy(h2, [c, c]) == pytest.approx(-0.5, abs=1e-14)


def _direct_energy(V, W, x):
    n = len(x)
    e = sum(V(xi) for xi in x)
    e += sum(W(x[i] - x[j]) for i in range(n) for j in range(n) if i != j) / (2 * n)
    return e


def test_hamiltonian_matches_double_sum_and_permutations():
    rng = np.random.default_rng(0)
    V, W = CosineSeries.cosine(-0.4), CosineSeries((0.1, -1.0, 0.3), (0.2, 0.5))
    for n in (2, 3, 4):
        x = rng.random(n)
        h = Hamiltonian(V, W, n, 1.0)
        ref = _direct_energy(V, W, x)
        for perm in itertools.permutations(range(n)):
            assert hamiltonian_energy(h, x[list(perm)]) == pytest.approx(ref, abs=1e-12)
    x = rng.random(40)
    h = Hamiltonian(V, W, 40, 1.0)
    e = hamiltonian_energy(h, x)
    for _ in range(100):
        assert hamiltonian_energy(h, rng.permutation(x)) == pytest.approx(e, abs=1e-10)


def test_translation_invariance_without_confinement():
    rng = np.random.default_rng(1)
    h = Hamiltonian(CosineSeries.zero(), CosineSeries((0.0, -1.0, 0.4)), 10, 2.0)
    x = rng.random(10)
    assert hamiltonian_energy(h, x + 0.318) == pytest.approx(hamiltonian_energy(h, x), abs=1e-12)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    h = Hamiltonian(CosineSeries.cosine(-0.3), CosineSeries((0.0, -1.0, 0.2)), 6, 1.0)
    x = rng.random(6)
    g = h.gradient(x)
    eps = 1e-6
    for i in range(6):
        e = np.zeros(6)
        e[i] = eps
        fd = (h.energy(x + e) - h.energy(x - e)) / (2 * eps)
        assert g[i] == pytest.approx(fd, abs=1e-6)


def test_pair_forces_fast_equals_direct():
    rng = np.random.default_rng(3)
    W = CosineSeries((0.0, -1.0, 0.5, 0.1), (0.3, 0.0, -0.2))
    x = rng.random(50)
    assert np.allclose(pair_force_sum(W, x), pair_force_sum_direct(W, x), atol=1e-11)


def test_semiconvexity_examples():
    assert semiconvexity_kappa(CosineSeries.zero(), CosineSeries.zero()) == 0.0
    K = CosineSeries.kuramoto()
    assert semiconvexity_kappa(CosineSeries.zero(), K) == pytest.approx(-(TWO_PI**2), rel=1e-12)
    assert semiconvexity_kappa(CosineSeries.cosine(-0.5), K) == pytest.approx(-1.5 * TWO_PI**2, rel=1e-12)


@pytest.mark.parametrize("amp, k", [(-1.0, 1), (0.7, 2), (-0.3, 3), (2.0, 1)])
def test_semiconvexity_single_mode_closed_form(amp, k):
    # inf of amp (2 pi k)^2 (-cos) is -|amp| (2 pi k)^2
    p = CosineSeries.cosine(amp, k)
    assert semiconvexity_kappa(p, CosineSeries.zero()) == pytest.approx(-abs(amp) * (TWO_PI * k) ** 2, abs=1e-8)
