"""Reflection/synchronous coupling of two diffusions on the circle.

The concave distance ``f`` is built from

    psi(r) = exp(beta kappa r^2 / 8),   Phi(r) = int_0^r psi,
    c = 1 / int_0^{1/2} Phi / psi,      g(r) = 1 - (c/2) int_0^r Phi / psi,
    f(r) = int_0^r g psi,

and satisfies ``f'' - beta kappa r f' / 4 = -(c/2) Phi <= -(c/2) f``, which
makes ``E f(gamma_t)`` contract at rate ``2 c / beta`` under the coupling.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator

from .density import DensityField, mean_field_potential
from .particles import StepSizeError, _stream, sample_density
from .pde import Stepper
from .potentials import CosineSeries, semiconvexity_kappa
from .stationary import StationaryState

NODES = 4096


@dataclass(frozen=True, eq=False)
class DistanceProfile:
    kappa: float
    beta: float
    c: float
    r: np.ndarray
    psi: np.ndarray
    Phi: np.ndarray
    g: np.ndarray
    f_nodes: np.ndarray
    fprime_nodes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "_f", PchipInterpolator(self.r, self.f_nodes))
        object.__setattr__(self, "_fp", PchipInterpolator(self.r, self.fprime_nodes))

    def f(self, r):
        return self._f(np.clip(r, 0.0, 0.5))

    def fprime(self, r):
        return self._fp(np.clip(r, 0.0, 0.5))

    @property
    def fsecond_nodes(self) -> np.ndarray:
        """``f'' = g' psi + g psi'`` from the tabulated ``Phi`` and ``g``."""
        return -0.5 * self.c * self.Phi + 0.25 * self.beta * self.kappa * self.r * self.fprime_nodes

    @property
    def lower_slope(self) -> float:
        """``psi(1/2) / 2``: the constant in ``f(r) >= psi(1/2) r / 2``."""
        return 0.5 * float(self.psi[-1])

    def contraction_rate(self) -> float:
        return 2.0 * self.c / self.beta

    def check_invariants(self, tol: float = 1e-8) -> dict[str, bool]:
        r, f = self.r, self.f_nodes
        slack = 1e-14
        d2 = np.diff(f, 2)
        lhs = self.fsecond_nodes - 0.25 * self.beta * self.kappa * r * self.fprime_nodes
        return {
            "lower_bound": bool(np.all(self.lower_slope * r <= f + slack)),
            "upper_bound": bool(np.all(f <= self.Phi + slack) and np.all(self.Phi <= r + slack)),
            "increasing": bool(np.all(np.diff(f) > 0)),
            "concave": bool(np.all(d2 <= slack)),
            "contraction": bool(np.all(lhs[1:-1] <= -0.5 * self.c * f[1:-1] + tol)),
            "endpoints": bool(f[0] == 0.0 and abs(self.fprime_nodes[0] - 1.0) < 1e-14),
        }


def c_lower_bound(kappa: float, beta: float) -> float:
    """``beta |kappa| / (4 (exp(beta |kappa| / 32) - 1))``, equal to 8 at ``kappa = 0``."""
    x = beta * abs(kappa)
    if x == 0.0:
        return 8.0
    return x / (4.0 * math.expm1(x / 32.0))


def build_distance_profile(kappa: float, beta: float, nodes: int = NODES) -> DistanceProfile:
    """Tabulate ``psi``, ``Phi``, ``g``, ``f`` and ``f'`` on ``nodes`` points of ``[0, 1/2]``.

    The three running integrals ``Phi``, ``I = int Phi / psi`` and
    ``J = int I psi`` are integrated together with an 8th-order adaptive
    Runge-Kutta method; then ``f = Phi - (c/2) J``.
    """
    if kappa > 0:
        raise ValueError("kappa must be nonpositive")
    if not beta > 0:
        raise ValueError("beta must be positive")
    k = float(kappa)
    b = float(beta)
    psi_fn = lambda s: math.exp(b * k * s * s / 8.0)

    def rhs(s, y):
        p = psi_fn(s)
        return [p, y[0] / p, y[1] * p]

    r = np.linspace(0.0, 0.5, nodes)
    sol = solve_ivp(rhs, (0.0, 0.5), [0.0, 0.0, 0.0], method="DOP853", t_eval=r, rtol=1e-13, atol=1e-16)
    if not sol.success:
        raise RuntimeError(f"profile integration failed: {sol.message}")
    Phi, I, J = sol.y
    c = 1.0 / I[-1]
    psi = np.exp(b * k * r * r / 8.0)
    g = 1.0 - 0.5 * c * I
    f = Phi - 0.5 * c * J
    f[0] = 0.0
    return DistanceProfile(k, b, float(c), r, psi, Phi, g, f, g * psi)


def high_temperature_threshold(V: CosineSeries, W: CosineSeries) -> float:
    """Largest ``beta`` with ``|kappa| / (4 e^b (e^b - 1)) >= sup |W''|``, ``b = beta |kappa| / 32``.

    The left side decreases from ``+inf`` as ``beta`` grows, so the set of
    admissible ``beta`` is an interval ``(0, beta_0]``.  Returns ``inf`` when
    ``W''`` vanishes identically.
    """
    S = W.sup_abs(2) if not W.is_constant() else 0.0
    if S == 0.0:
        return math.inf
    kappa = abs(semiconvexity_kappa(V, W))
    if kappa == 0.0:
        return 8.0 / S  # kappa -> 0 limit of the left side is 8 / beta
    return _threshold_bisect(kappa, S)


def threshold_lhs(beta: float, kappa: float) -> float:
    kappa = abs(kappa)
    if kappa == 0.0:
        return 8.0 / beta
    b = beta * kappa / 32.0
    return kappa / (4.0 * math.exp(b) * math.expm1(b))


def _threshold_bisect(kappa: float, S: float, tol: float = 1e-12) -> float:
    lo, hi = 0.0, 1.0
    while threshold_lhs(hi, kappa) >= S:
        lo, hi = hi, 2.0 * hi
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if threshold_lhs(mid, kappa) >= S:
            lo = mid
        else:
            hi = mid
    return lo


# -- coupled simulation -----------------------------------------------------

def torus_difference(y, x):
    """Signed shortest difference ``y - x`` wrapped to ``[-1/2, 1/2)``."""
    d = np.mod(np.asarray(y) - np.asarray(x) + 0.5, 1.0) - 0.5
    return d


def phi_reflection(gamma, delta: float):
    """Smoothstep ramp: 0 for ``gamma <= delta/2``, 1 for ``gamma >= delta``."""
    s = np.clip((np.asarray(gamma) - 0.5 * delta) / (0.5 * delta), 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


@dataclass
class CouplingTrace:
    times: np.ndarray
    mean_f: np.ndarray
    stderr: np.ndarray
    replicas: int
    delta: float
    x_final: np.ndarray
    y_final: np.ndarray
    gamma_final: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "mean_f", "stderr"])
        for row in zip(self.times, self.mean_f, self.stderr):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def fit_decay_rate(trace: CouplingTrace, floor: float = 0.02, t_min: float = 0.0) -> float:
    """``-slope`` of ``log E f(gamma_t)`` over times after ``t_min`` where the mean exceeds ``floor * mean_f[0]``."""
    m = trace.mean_f
    ok = (trace.times >= t_min) & (m > floor * m[0]) & (m > 0)
    if ok.sum() < 3:
        raise ValueError("not enough points above the floor to fit a rate")
    return float(-np.polyfit(trace.times[ok], np.log(m[ok]), 1)[0])


def _mean_field_path(nu0: DensityField, V, W, beta, dt, steps) -> np.ndarray:
    """Modes ``1..deg W`` of ``nu(t_n)`` along the PDE, one row per SDE step."""
    st = Stepper(V, W, beta, nu0.grid_size, dt)
    d = max(W.degree, 1)
    out = np.empty((steps + 1, d), dtype=complex)
    v = nu0.modes.copy()
    out[0] = v[1 : d + 1]
    for n in range(1, steps + 1):
        v = st.step(v)
        out[n] = v[1 : d + 1]
    return out


def _drift_from_modes(V: CosineSeries, W: CosineSeries, modes: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``-(V + W * nu)'(x)`` with ``nu`` given by its first Fourier modes."""
    m = np.zeros(modes.size + 1, dtype=complex)
    m[0] = 1.0
    m[1:] = modes
    U = mean_field_potential(V, W, _LowModes(m))
    return -U.derivative(x)


class _LowModes:
    """Minimal stand-in for a density that only exposes low Fourier modes."""

    def __init__(self, modes):
        self.modes = modes
        self.K = modes.size - 1


def simulate_coupling(
    V: CosineSeries,
    W: CosineSeries,
    target_state: Union[StationaryState, DensityField],
    nu0: DensityField,
    beta: float,
    delta: float = 1e-3,
    dt: float = 1e-4,
    T: float = 0.2,
    replicas: int = 1000,
    seed: int = 0,
    frozen: bool = False,
    same_start: bool = False,
    profile: Optional[DistanceProfile] = None,
    record_every: int = 1,
) -> CouplingTrace:
    """Couple ``Y`` (law ``nu(t)`` from ``nu0``) with ``X`` (stationary, law ``nu*``).

    Noise is split as ``phi_r dB1 + phi_s dB2`` for ``Y`` and
    ``-phi_r dB1 + phi_s dB2`` for ``X``.  Where ``phi_r = 1`` the
    Euler-Maruyama step uses the maximal reflection coupling of the two
    Gaussian increments, so the pair can meet exactly; each marginal is still
    an exact Euler-Maruyama step.  With ``frozen`` both particles feel the
    drift of ``nu*``.
    """
    nu_star = target_state.density if isinstance(target_state, StationaryState) else target_state
    U_star = mean_field_potential(V, W, nu_star)
    lip = max(U_star.sup_derivative_bound(2), V.sup_derivative_bound(2) + W.sup_derivative_bound(2))
    if dt * lip >= 0.1:
        raise StepSizeError(f"dt * Lipschitz = {dt * lip:.3g} must be below 0.1")
    steps = int(round(T / dt))
    if profile is None:
        profile = build_distance_profile(semiconvexity_kappa(V, W), beta)

    rng = _stream(seed, 0xC0, 0)
    x = sample_density(nu_star, replicas, rng)
    y = x.copy() if same_start else sample_density(nu0, replicas, rng)
    path = None if frozen else _mean_field_path(nu0.resampled(max(64, nu0.grid_size)), V, W, beta, dt, steps)
    sigma = math.sqrt(2.0 * dt / beta)

    n_rec = steps // record_every + 1
    times = np.empty(n_rec)
    mean_f = np.empty(n_rec)
    stderr = np.empty(n_rec)

    def record(j, t):
        fg = profile.f(np.abs(torus_difference(y, x)))
        times[j] = t
        mean_f[j] = fg.mean()
        stderr[j] = fg.std(ddof=1) / math.sqrt(replicas) if replicas > 1 else 0.0

    record(0, 0.0)
    j = 1
    for n in range(steps):
        bx = -U_star.derivative(x)
        by = -U_star.derivative(y) if frozen else _drift_from_modes(V, W, path[n], y)
        mx = x + dt * bx
        my = y + dt * by
        z = torus_difference(my, mx)  # mean displacement between the proposals
        gam = np.abs(torus_difference(y, x))
        pr = phi_reflection(gam, delta)
        ps = np.sqrt(1.0 - pr * pr)
        xi1 = rng.standard_normal(replicas)
        xi2 = rng.standard_normal(replicas)
        u = rng.random(replicas)

        # partial regime: mixture of reflected and synchronous noise
        ny = pr * xi1 + ps * xi2
        nx = -pr * xi1 + ps * xi2
        # full reflection regime: maximal reflection coupling of the increments
        full = pr >= 1.0
        if np.any(full):
            e = z[full] / sigma
            xi = xi1[full]
            meet = np.log(u[full]) <= -0.5 * ((xi + e) ** 2 - xi * xi)
            ny[full] = xi
            nx[full] = np.where(meet, xi + e, -xi)
        y = my + sigma * ny
        x = mx + sigma * nx
        if (n + 1) % record_every == 0:
            record(j, (n + 1) * dt)
            j += 1
    gamma = np.abs(torus_difference(y, x))
    return CouplingTrace(times[:j], mean_f[:j], stderr[:j], replicas, delta, x, y, gamma)
