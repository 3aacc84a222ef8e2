"""Acceptance checks with hard tolerances, shared by the test suite and ``mvlab check``.

Each check compares the library against an oracle that does not reuse the
code under test (scipy root finders and Bessel functions, closed forms,
brute-force transport plans) and returns a :class:`CheckResult`.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize, special, stats

from .coupling import build_distance_profile, fit_decay_rate, simulate_coupling
from .density import DensityField
from .homogenize import analytic_effective_diffusion, corrector_1d, non_commutativity_report
from .metrics import circle_wasserstein
from .particles import (
    ParticleEnsemble,
    fluctuation_modes,
    gibbs_sample,
    interaction_fluctuation_energy,
    msd_diffusivity,
    partition_function_smallN,
    partition_ratio,
    simulate_sde,
)
from .pde import Stepper, convergence_audit, evolve_mv
from .potentials import CosineSeries, h_stability, semiconvexity_kappa
from .special import r0
from .stationary import amplitude_roots, amplitude_state, critical_beta, solve_stationary


@dataclass
class CheckResult:
    criterion: int
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0
    budget: float = math.inf

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} [{self.criterion}] {self.name} ({self.seconds:.1f}s / {self.budget:.0f}s)"


def _timed(criterion: int, name: str, budget: float, fn: Callable[[], tuple[bool, dict]]) -> CheckResult:
    t0 = time.perf_counter()
    ok, details = fn()
    dt = time.perf_counter() - t0
    details["within_budget"] = dt <= budget
    return CheckResult(criterion, name, bool(ok and dt <= budget), details, dt, budget)


def _oracle_amplitude(beta: float) -> float:
    """Positive root of ``a = beta I1(a) / I0(a)`` by Brent's method on scaled scipy Bessels."""
    f = lambda a: beta * special.i1e(a) / special.i0e(a) - a
    return optimize.brentq(f, 1e-3, beta + 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)


# -- 1 ----------------------------------------------------------------------

def check_critical_temperature() -> CheckResult:
    def run():
        d = {}
        ok = True
        for b in (1.0, 1.9):
            rt = amplitude_roots(b, 0.0)
            good = rt.a_min == 0.0 and rt.a_star is None and all(r == 0.0 for r in rt.roots)
            d[f"beta={b}"] = {"a_min": rt.a_min, "only_zero": good}
            ok &= good
        for b in (2.1, 4.0):
            rt = amplitude_roots(b, 0.0)
            ref = _oracle_amplitude(b)
            err = abs(rt.a_min - ref)
            d[f"beta={b}"] = {"a_min": rt.a_min, "oracle": ref, "abs_error": err}
            ok &= rt.a_min > 0 and err <= 1e-10
        return ok, d

    return _timed(1, "critical temperature", 1.0, run)


# -- 2 ----------------------------------------------------------------------

def check_effective_diffusivity() -> CheckResult:
    def run():
        worst = 0.0
        sandwich = True
        for beta in (0.5, 1.0, 4.0):
            for a in (0.0, 0.5, 1.0, 2.0, 3.3, 5.0):
                nu = DensityField.von_mises(a, 256)
                U = CosineSeries.cosine(-a / beta)  # exp(-beta U) proportional to exp(a cos)
                for pot in (None, U):
                    _, A = corrector_1d(nu, beta, pot)
                    ref = 1.0 / (beta * special.i0(a) ** 2)
                    worst = max(worst, abs(A.value - ref) / ref)
                    sandwich &= A.within_bounds(1e-12)
                sandwich &= analytic_effective_diffusion(a, beta).within_bounds(1e-12)
        return worst <= 1e-10 and sandwich, {"max_rel_error": worst, "sandwich": sandwich}

    return _timed(2, "effective diffusivity", 1.0, run)


# -- 3 ----------------------------------------------------------------------

def check_noncommutativity() -> CheckResult:
    def run():
        bc = critical_beta(0.5)
        rep = non_commutativity_report(0.5, bc + 1.0)
        ok = (
            rep.a_star is not None
            and rep.a_min > 0 > rep.a_star
            and abs(rep.a_star + rep.a_min) > 0.01
            and rep.relative_gap > 0.01
        )
        return ok, rep.to_dict()

    return _timed(3, "non-commutativity", 5.0, run)


# -- 4 ----------------------------------------------------------------------

def check_fluctuations(n_samples: int = 240_000, n_chains: int = 32, seed: int = 2024) -> CheckResult:
    def run():
        W = CosineSeries.kuramoto()
        s = gibbs_sample(256, CosineSeries.zero(), W, 1.0, n_samples, n_chains=n_chains, seed=seed)
        ref = DensityField.uniform(64)
        modes = fluctuation_modes(s, [1, -1, 2, -2], ref)
        energy, energy_se = interaction_fluctuation_energy(s, W, ref)
        target = {1: 2.0, -1: 2.0, 2: 1.0, -2: 1.0}
        d = {"acceptance": s.acceptance, "energy": energy, "energy_stderr": energy_se}
        ok = abs(energy + 2.0) <= 0.3
        for k, m in modes.items():
            d[f"var_{k}"] = m.variance
            d[f"ess_{k}"] = m.ess
            ok &= abs(m.variance - target[k]) <= 0.15 * target[k] and m.ess >= 1e4
        return ok, d

    return _timed(4, "fluctuation variances", 300.0, run)


# -- 5 ----------------------------------------------------------------------

def check_msd(paths: int = 10_000, dt: float = 1e-3, T: float = 200.0, seed: int = 5) -> CheckResult:
    def run():
        beta = 4.0
        a = amplitude_roots(beta, 0.0).a_min
        nu = DensityField.von_mises(a, 256)
        rng = np.random.default_rng(seed)
        from .particles import sample_density

        x0 = sample_density(nu, (paths, 1), rng)
        ens = ParticleEnsemble(x0, beta, seed)
        tr = simulate_sde(ens, CosineSeries.zero(), CosineSeries.kuramoto(), dt, T, mean_field=nu,
                          record_every=int(round(1.0 / dt)))
        res = msd_diffusivity(tr.positions[:, :, 0], tr.times)
        ref = 1.0 / (beta * special.i0(a) ** 2)
        rel = (res.A_hat - ref) / ref
        d = {"a": a, "A_hat": res.A_hat, "A_ref": ref, "rel_error": rel, "stderr": res.stderr, "r2": res.fit_r2}
        return abs(rel) <= 0.05 and res.fit_r2 >= 0.99, d

    return _timed(5, "MSD homogenization", 600.0, run)


# -- 6 ----------------------------------------------------------------------

def _per_step_monotone(trace) -> tuple[bool, float]:
    E = np.asarray(trace.free_energy)
    inc = np.diff(E) - 1e-9 * (1.0 + np.abs(E[:-1]))
    return bool(np.all(inc <= 0)), float(inc.max())


def check_pde_energy(grid: int = 64, dt: float = 1e-3) -> CheckResult:
    def run():
        K = CosineSeries.kuramoto()
        zero = CosineSeries.zero()
        d = {}
        ok = True
        # relaxing runs: energy decreases per step, integrated identity holds
        x = np.arange(grid) / grid
        pert = DensityField.from_values(1.0 + 0.3 * np.cos(2 * np.pi * x) + 0.1 * np.sin(4 * np.pi * x))
        runs = {
            "kuramoto_beta1": (zero, K, 1.0, pert, DensityField.uniform(grid), 3.0),
            "kuramoto_beta4": (zero, K, 4.0, pert, amplitude_state(amplitude_roots(4.0).a_min, 4.0, 0.0, grid).density, 3.0),
            "tilted_beta4": (CosineSeries.cosine(-0.5), K, 4.0, DensityField.uniform(grid), None, 3.0),
        }
        for name, (V, W, beta, nu0, target, T) in runs.items():
            final, tr = evolve_mv(nu0, V, W, beta, dt, T, target=target, distance_every=50)
            mono, worst = _per_step_monotone(tr)
            rep = convergence_audit(tr)
            item = {"monotone": mono, "worst_increase": worst, "identity_error": rep.energy_identity_error}
            ok &= mono and rep.energy_identity_ok
            if name == "kuramoto_beta1":
                l1 = tr.L1_to_target[-1]
                item["final_l1"] = l1
                ok &= l1 < 1e-6
            d[name] = item
        # stationary starts persist
        starts = {
            "uniform_beta1": (zero, K, 1.0, DensityField.uniform(grid)),
            "amin_beta4": (zero, K, 4.0, amplitude_state(amplitude_roots(4.0).a_min, 4.0, 0.0, grid).density),
            "tilted_amin_beta4": (CosineSeries.cosine(-0.5), K, 4.0,
                                  amplitude_state(amplitude_roots(4.0, 0.5).a_min, 4.0, 0.5, grid).density),
        }
        for name, (V, W, beta, nu0) in starts.items():
            final, tr = evolve_mv(nu0, V, W, beta, dt, 10.0, record_every=100)
            drift = float(np.max(np.abs(final.values - nu0.values)))
            mono, worst = _per_step_monotone(tr)
            d[name] = {"sup_drift": drift, "monotone": mono}
            ok &= drift <= 1e-6 and mono
        return ok, d

    return _timed(6, "PDE energy structure", 60.0, run)


# -- 7 ----------------------------------------------------------------------

def check_coupling(replicas: int = 1000, seed: int = 7) -> CheckResult:
    def run():
        d = {}
        ok = True
        for kappa in (0.0, -10.0, -80.0):
            for beta in (0.1, 0.3, 1.0):
                prof = build_distance_profile(kappa, beta)
                inv = prof.check_invariants()
                good = all(inv.values())
                d[f"profile k={kappa} b={beta}"] = {"c": prof.c, "ok": good}
                ok &= good
        V, W = CosineSeries.cosine(-0.5), CosineSeries.kuramoto()
        beta = 0.3
        state = solve_stationary(V, W, beta)
        prof = build_distance_profile(semiconvexity_kappa(V, W), beta)
        nu0 = DensityField.uniform(64)
        tr = simulate_coupling(V, W, state, nu0, beta, dt=1e-4, T=0.1, replicas=replicas, seed=seed,
                               frozen=True, profile=prof, record_every=10)
        rate = fit_decay_rate(tr)
        predicted = prof.contraction_rate()
        d["coupling"] = {"fitted_rate": rate, "predicted": predicted, "c": prof.c}
        ok &= rate >= 0.5 * predicted
        return ok, d

    return _timed(7, "coupling contraction", 300.0, run)


# -- 8 ----------------------------------------------------------------------

def check_partition(beta3: float = 1.0) -> CheckResult:
    def run():
        d = {}
        ok = True
        K = CosineSeries.kuramoto()
        zero = CosineSeries.zero()
        for beta in (0.5, 1.0, 1.9, 4.0):
            Z2 = partition_function_smallN(2, zero, K, beta)
            err = abs(Z2 - special.i0(beta / 2))
            d[f"Z2 beta={beta}"] = {"Z2": Z2, "abs_error": err}
            ok &= err <= 1e-8
        nu_min = solve_stationary(zero, K, beta3, init=DensityField.uniform(64)).density
        pr = partition_ratio(3, zero, K, beta3, nu_min)
        C = beta3 / (2 * (2 - beta3)) + 0.1
        lo = math.exp(-C / 3)
        d["N=3"] = {
            "energetic_ratio": pr.energetic_ratio,
            "literal_Z3_over_Zmin": pr.literal_ratio,
            "lower": lo,
        }
        ok &= lo < pr.energetic_ratio <= 1.0
        return ok, d

    return _timed(8, "partition-function bounds", 60.0, run)


# -- 9 ----------------------------------------------------------------------

H_FIXTURES = {
    "attractive cos": (CosineSeries.cosine(-1.0), False),
    "repulsive cos": (CosineSeries.cosine(1.0), True),
    "zero": (CosineSeries.zero(), True),
    "two repulsive modes": (CosineSeries((0.0, 1.0, 0.5)), True),
    "attractive second mode": (CosineSeries((0.0, 1.0, -0.3)), False),
}


def _random_density(rng, grid=256, modes=4, depth=0.8):
    x = np.arange(grid) / grid
    f = np.zeros(grid)
    for k in range(1, modes + 1):
        f += rng.normal() * np.cos(2 * np.pi * (k * x - rng.random())) / k
    f = np.exp(depth * 3.0 * f / max(np.max(np.abs(f)), 1e-12))
    return DensityField.from_values(f)


def check_properties(seed: int = 9) -> CheckResult:
    def run():
        d = {}
        rng = np.random.default_rng(seed)
        # mass conservation
        nu = _random_density(rng, 64)
        st = Stepper(CosineSeries.cosine(-0.5), CosineSeries.kuramoto(), 2.0, 64, 1e-3)
        v = nu.modes.copy()
        worst_mass = 0.0
        for _ in range(200):
            w = st.step(v)
            worst_mass = max(worst_mass, abs(np.mean(DensityField(w).values) - np.mean(DensityField(v).values)))
            v = w
        d["mass_per_step"] = worst_mass
        ok = worst_mass <= 1e-14
        # r0
        a = np.linspace(-60.0, 60.0, 4001)
        r = np.array([r0(t) for t in a])
        odd = all(r0(-t) == -r0(t) for t in a)
        r_ok = bool(np.all(np.abs(r) < 1) and odd and np.all(np.diff(r) > 0))
        d["r0"] = r_ok
        ok &= r_ok
        # H-stability fixtures
        h_ok = all(h_stability(W).stable == expect for W, expect in H_FIXTURES.values())
        d["h_stability"] = h_ok
        ok &= h_ok
        # triangle inequality for W2
        worst_tri = -math.inf
        for _ in range(100):
            p, q, s = (_random_density(rng) for _ in range(3))
            pq, qs, ps = circle_wasserstein(p, q), circle_wasserstein(q, s), circle_wasserstein(p, s)
            worst_tri = max(worst_tri, ps - pq - qs)
        d["triangle_worst_excess"] = worst_tri
        ok &= worst_tri <= 1e-12
        # N = 2 Gibbs marginal is uniform
        g = gibbs_sample(2, CosineSeries.zero(), CosineSeries.kuramoto(), 3.0, 4000, n_chains=4000, warmup=300,
                         seed=seed)
        counts = np.histogram(g.configs[:, 0], bins=20, range=(0.0, 1.0))[0]
        p = float(stats.chisquare(counts).pvalue)
        d["gibbs_marginal_chi2_p"] = p
        ok &= p >= 0.01
        return ok, d

    return _timed(9, "property suites", 120.0, run)


CHECKS: dict[str, Callable[[], CheckResult]] = {
    "critical": check_critical_temperature,
    "diffusivity": check_effective_diffusivity,
    "noncommute": check_noncommutativity,
    "fluctuations": check_fluctuations,
    "msd": check_msd,
    "energy": check_pde_energy,
    "coupling": check_coupling,
    "partition": check_partition,
    "properties": check_properties,
}
SUITES = {
    "all": list(CHECKS),
    "quick": ["critical", "diffusivity", "noncommute", "energy", "coupling", "partition", "properties"],
    **{k: [k] for k in CHECKS},
}


def run_suite(name: str) -> list[CheckResult]:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return [CHECKS[k]() for k in SUITES[name]]
