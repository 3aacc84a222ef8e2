import csv
import io
import math

import numpy as np
import pytest

from mvlab.density import DensityError, DensityField, l1_distance
from mvlab.pde import (
    EvolutionTrace,
    InstabilityError,
    Stepper,
    convergence_audit,
    evolve_mv,
    max_stable_dt,
)
from mvlab.potentials import CosineSeries
from mvlab.stationary import amplitude_roots, amplitude_state

K = CosineSeries.kuramoto()
ZERO = CosineSeries.zero()


def perturbed(grid=64, eps=0.3):
    return DensityField.from_function(lambda x: 1 + eps * np.cos(2 * np.pi * x), grid)


def test_heat_equation_mode_decay_is_exact():
    # with V = W = 0 each mode decays as exp(-(2 pi k)^2 t / beta)
    nu0 = DensityField.from_function(lambda x: 1 + 0.5 * np.cos(2 * np.pi * x) + 0.2 * np.sin(6 * np.pi * x), 64)
    beta, T = 2.0, 0.05
    final, _ = evolve_mv(nu0, ZERO, ZERO, beta, 1e-3, T)
    k = np.arange(32)
    ref = nu0.modes * np.exp(-((2 * np.pi * k) ** 2) * T / beta)
    assert np.allclose(final.modes, ref, atol=1e-14)


def test_linearised_kuramoto_rate():
    # first mode near uniform decays at (2 pi)^2 (1/beta - 1/2)
    beta, eps, T = 1.0, 1e-6, 0.1
    nu0 = perturbed(64, eps)
    final, _ = evolve_mv(nu0, ZERO, K, beta, 1e-3, T)
    rate = (2 * np.pi) ** 2 * (1 / beta - 0.5)
    assert abs(final.modes[1]) == pytest.approx(0.5 * eps * math.exp(-rate * T), rel=1e-6)


def test_mass_conserved_each_step():
    st = Stepper(CosineSeries.cosine(-0.5), K, 3.0, 64, 1e-3)
    v = perturbed().modes.copy()
    for _ in range(100):
        w = st.step(v)
        assert abs(np.mean(DensityField(w).values) - 1.0) <= 1e-14
        v = w


@pytest.mark.parametrize("method", ["etdrk4", "ifrk4"])
def test_methods_agree_on_transient(method):
    nu0 = perturbed()
    ref, _ = evolve_mv(nu0, ZERO, K, 4.0, 1e-4, 0.2)
    out, _ = evolve_mv(nu0, ZERO, K, 4.0, 1e-3, 0.2, method=method)
    assert l1_distance(out, ref) <= 1e-6


def test_stationary_states_persist():
    for beta, eta in [(4.0, 0.0), (4.0, 0.5), (12.0, 0.5)]:
        nu = amplitude_state(amplitude_roots(beta, eta).a_min, beta, eta, 64).density
        out, _ = evolve_mv(nu, CosineSeries.cosine(-eta), K, beta, 1e-3, 1.0, record_every=100)
        assert np.max(np.abs(out.values - nu.values)) <= 1e-10


def test_uniform_is_fixed_and_trace_constant():
    u = DensityField.uniform(64)
    out, tr = evolve_mv(u, ZERO, K, 1.0, 1e-3, 0.1, target=u, record_every=10)
    assert np.all(out.values == 1.0)
    assert set(tr.free_energy) == {0.0}
    assert np.allclose(tr.dissipation, 0.0)


def test_energy_decreases_and_identity():
    _, tr = evolve_mv(perturbed(), ZERO, K, 4.0, 1e-3, 1.0)
    E = np.array(tr.free_energy)
    assert np.all(np.diff(E) <= 1e-9 * (1 + np.abs(E[:-1])))
    rep = convergence_audit(tr)
    assert rep.monotone and rep.energy_identity_ok
    assert rep.energy_identity_error < 1e-3


def test_convergence_to_uniform_and_rate():
    u = DensityField.uniform(64)
    final, tr = evolve_mv(perturbed(), ZERO, K, 1.0, 1e-3, 2.0, target=u, distance_every=20)
    assert tr.L1_to_target[-1] < 1e-6
    rep = convergence_audit(tr)
    # the distance decays like the first mode
    assert rep.fitted_rate == pytest.approx((2 * np.pi) ** 2 * 0.5, rel=0.05)


def test_stability_guard():
    limit = max_stable_dt(ZERO, K, 64)
    with pytest.raises(ValueError):
        evolve_mv(perturbed(), ZERO, K, 1.0, 2 * limit, 10 * limit)
    assert max_stable_dt(ZERO, ZERO, 64) == math.inf


def test_instability_and_positivity_are_reported():
    x = np.arange(64) / 64
    bad = DensityField(np.fft.rfft(1 + 1.5 * np.cos(2 * np.pi * x))[:32] / 64)
    with pytest.raises(DensityError):
        evolve_mv(bad, ZERO, K, 1.0, 1e-3, 0.01)
    with pytest.raises(InstabilityError):
        evolve_mv(perturbed(), ZERO, CosineSeries.cosine(-50.0), 1.0, 0.05, 1.0, check_stability=False)


def test_bad_time_grid():
    with pytest.raises(ValueError):
        evolve_mv(perturbed(), ZERO, K, 1.0, 1e-3, 0.0105)


def test_trace_csv_round_trip():
    _, tr = evolve_mv(perturbed(), ZERO, K, 1.0, 1e-3, 0.05, target=DensityField.uniform(64), distance_every=10)
    text = tr.to_csv()
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["time", "energy", "dissipation", "d2", "l1"]
    assert rows[2][3] == ""  # distances only on every tenth record
    back = EvolutionTrace.from_csv(text, 1.0)
    assert back.free_energy == pytest.approx(tr.free_energy, abs=0)
    assert convergence_audit(back).energy_identity_error == pytest.approx(
        convergence_audit(tr).energy_identity_error, abs=1e-15
    )
