"""Steady states of the periodic McKean-Vlasov dynamics.

Steady states solve ``nu = exp(-beta (V + W * nu)) / Z``.  For the tilted
Kuramoto family ``V = -eta cos(2 pi x)``, ``W = -cos(2 pi x)`` every solution
has the form ``exp(a cos(2 pi x)) / I0(a)`` with ``a`` a root of

    F(a) = beta (eta + r0(a)) - a,

which is concave for ``a > 0`` and convex for ``a < 0``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .density import (
    DEFAULT_GRID,
    DensityError,
    DensityField,
    convolve,
    mean_field_potential,
    sup_distance,
)
from .potentials import CosineSeries, _ternary_min
from .special import MAX_ARGUMENT, bessel_I, log_bessel_I0, r0

ROOT_TOL = 1e-12
RESIDUAL_TOL = 1e-10
KINDS = ("uniform", "minimiser", "nonminimising_critical")


class NonConvergenceError(RuntimeError):
    """The damped fixed-point iteration did not reach the residual tolerance."""

    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"fixed-point iteration stalled at residual {residual:.3e} after "
            f"{iterations} iterations (parameters may be close to a critical temperature)"
        )


@dataclass(frozen=True)
class StationaryState:
    density: DensityField
    beta: float
    kind: str
    residual: float
    amplitude_a: Optional[float] = None
    eta: Optional[float] = None
    free_energy: float = float("nan")
    iterations: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")


@dataclass(frozen=True)
class AmplitudeRoots:
    """Roots of ``F(a) = beta (eta + r0(a)) - a``."""

    beta: float
    eta: float
    a_min: float
    a_star: Optional[float] = None
    roots: tuple[float, ...] = field(default_factory=tuple)


# -- the cosine family ------------------------------------------------------

def amplitude_function(a: float, beta: float, eta: float) -> float:
    return beta * (eta + r0(a)) - a


def _check_params(beta: float, eta: float) -> None:
    if not beta > 0:
        raise ValueError("beta must be positive")
    if not 0.0 <= eta < 1.0:
        raise ValueError("eta must lie in [0, 1)")
    if _upper(beta, eta) > MAX_ARGUMENT:
        raise ValueError("beta too large for the Bessel routines")


def _upper(beta: float, eta: float) -> float:
    # |r0| < 1 puts every root inside (beta (eta - 1), beta (eta + 1))
    return beta * (1.0 + eta) + 1.0


def _bisect(f, lo: float, hi: float, tol: float = ROOT_TOL) -> float:
    flo = f(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo <= tol:
            break
    return 0.5 * (lo + hi)


def _negative_minimum(beta: float, eta: float) -> tuple[float, float]:
    """Minimiser of the convex branch ``F`` on ``[-beta - 1, 0]``."""
    return _ternary_min(lambda a: amplitude_function(a, beta, eta), -beta - 1.0, 0.0, iters=200)


def has_second_root(beta: float, eta: float) -> bool:
    """Whether a negative root exists (the existence predicate for ``a_star``)."""
    if eta == 0.0:
        return False
    _, fmin = _negative_minimum(beta, eta)
    return fmin < 0.0


def amplitude_roots(beta: float, eta: float = 0.0) -> AmplitudeRoots:
    """All roots of ``F`` in ``[-beta - 1, beta (1 + eta) + 1]``.

    For ``eta = 0`` the negative roots are reflections of the positive one,
    so only ``a_min`` is reported.
    """
    beta, eta = float(beta), float(eta)
    _check_params(beta, eta)
    F = lambda a: amplitude_function(a, beta, eta)
    hi = _upper(beta, eta)

    if eta == 0.0:
        amax, fmax = _ternary_min(lambda a: -F(a), 0.0, hi, iters=200)
        if -fmax <= 0.0 or beta <= 2.0:
            return AmplitudeRoots(beta, eta, 0.0, None, (0.0,))
        a_min = _bisect(F, amax, hi)
        return AmplitudeRoots(beta, eta, a_min, None, (-a_min, 0.0, a_min))

    a_min = _bisect(F, 0.0, hi)
    roots = [a_min]
    a_star = None
    am, fm = _negative_minimum(beta, eta)
    if fm < 0.0:
        a_star = _bisect(F, -beta - 1.0, am)
        a_mid = _bisect(F, am, 0.0)
        roots = [a_star, a_mid, a_min]
    elif fm == 0.0:
        a_star = am
        roots = [am, a_min]
    return AmplitudeRoots(beta, eta, a_min, a_star, tuple(roots))


def critical_beta(eta: float, tol: float = 1e-6) -> float:
    """Smallest ``beta`` at which the negative branch ``a_star`` appears."""
    eta = float(eta)
    if not 0.0 <= eta < 1.0:
        raise ValueError("eta must lie in [0, 1)")
    if eta == 0.0:
        return 2.0
    lo, hi = 2.0, 4.0
    while not has_second_root(hi, eta):
        lo, hi = hi, 2.0 * hi
        if _upper(hi, eta) > MAX_ARGUMENT:
            raise ValueError("no second branch within the supported range of beta")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if has_second_root(mid, eta):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def amplitude_free_energy(a: float, beta: float, eta: float) -> float:
    """Closed-form free energy of ``exp(a cos) / I0(a)`` for the tilted Kuramoto model."""
    m = r0(a)
    entropy = a * m - log_bessel_I0(a)
    return entropy / beta - eta * m - 0.5 * m * m


# -- general potentials -----------------------------------------------------

def self_consistency_map(nu: DensityField, V: CosineSeries, W: CosineSeries, beta: float) -> DensityField:
    """``exp(-beta (V + W * nu)) / Z`` on the grid of ``nu``."""
    return DensityField.gibbs(mean_field_potential(V, W, nu), beta, nu.grid_size)


def fixed_point_residual(nu: DensityField, V, W, beta: float) -> float:
    return sup_distance(nu, self_consistency_map(nu, V, W, beta))


def free_energy(nu: DensityField, V: CosineSeries, W: CosineSeries, beta: float) -> float:
    v = nu.values
    safe = np.where(v > 0, v, 1.0)
    entropy = np.mean(np.where(v > 0, v * np.log(safe), 0.0))
    potential = np.mean(V.grid(nu.grid_size) * v)
    interaction = 0.5 * np.mean(convolve(W, nu).grid(nu.grid_size) * v)
    return float(entropy / beta + potential + interaction)


def dissipation(nu: DensityField, V: CosineSeries, W: CosineSeries, beta: float) -> float:
    """``int |d/dx log(nu / exp(-beta (V + W * nu)))|^2 nu``."""
    v = nu.values
    if v.min() <= 0:
        raise DensityError(f"dissipation needs a positive density (min {v.min():.3e})")
    U = mean_field_potential(V, W, nu)
    g = nu.derivative_values() / v + beta * U.derivative(nu.x)
    return float(np.mean(g * g * v))


@dataclass(frozen=True)
class _CosineModel:
    """``V = -h cos + const``, ``W = -J cos + const`` with ``J > 0``, ``0 <= h/J < 1``."""

    J: float
    h: float


def _cosine_model(V: CosineSeries, W: CosineSeries) -> Optional[_CosineModel]:
    if W.degree != 1 or not W.is_even or W.cos_coeffs[1] >= 0:
        return None
    if V.degree > 1 or not V.is_even:
        return None
    J = -W.cos_coeffs[1]
    h = -V.cos_coeffs[1] if V.degree == 1 else 0.0
    if not 0.0 <= h / J < 1.0:
        return None
    return _CosineModel(J, h)


def _default_damping(beta: float) -> float:
    return 1.0 if beta < 1.0 else 0.5


def solve_stationary(
    V: CosineSeries,
    W: CosineSeries,
    beta: float,
    init: Optional[DensityField] = None,
    damping: Optional[float] = None,
    max_iter: int = 20000,
    tol: float = RESIDUAL_TOL,
) -> StationaryState:
    """Damped fixed-point iteration ``nu <- (1 - lam) nu + lam T(nu)``.

    The damping is halved whenever two successive corrections point in
    opposite directions, which rescues the oscillating iteration of strongly
    repulsive interactions.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    nu = init if init is not None else DensityField.uniform(DEFAULT_GRID)
    nu.check_positive()
    lam = _default_damping(beta) if damping is None else float(damping)
    if not 0.0 < lam <= 1.0:
        raise ValueError("damping must lie in (0, 1]")

    prev_step = None
    res = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        T = self_consistency_map(nu, V, W, beta)
        res = sup_distance(nu, T)
        if res < tol:
            break
        step = T.modes - nu.modes
        if prev_step is not None and np.vdot(prev_step, step).real < 0:
            # successive corrections point in opposite directions: overshooting
            lam = max(0.5 * lam, 1e-3)
        prev_step = step
        nu = DensityField(nu.modes + lam * step)
    else:
        raise NonConvergenceError(res, max_iter)

    return _classify(nu, V, W, beta, res, it)


def _amplitude_of(nu: DensityField, model: _CosineModel, beta: float) -> float:
    m = nu.first_moments()
    if model.h == 0.0:
        return beta * model.J * abs(m)
    return beta * (model.h + model.J * m.real)


def _classify(nu, V, W, beta, res, iterations) -> StationaryState:
    E = free_energy(nu, V, W, beta)
    uniform = DensityField.uniform(nu.grid_size)
    is_uniform = V.is_constant() and sup_distance(nu, uniform) < 1e-8

    candidates = [E]
    if V.is_constant():
        candidates.append(free_energy(uniform, V, W, beta))
    model = _cosine_model(V, W)
    a = eta = None
    if model is not None:
        eta = model.h / model.J
        a = 0.0 if is_uniform else _amplitude_of(nu, model, beta)
        roots = amplitude_roots(beta * model.J, eta)
        for r in roots.roots:
            candidates.append(free_energy(DensityField.von_mises(r, nu.grid_size), V, W, beta))

    if is_uniform:
        kind = "uniform"
    elif E <= min(candidates) + 1e-10 * (1.0 + abs(E)):
        kind = "minimiser"
    else:
        kind = "nonminimising_critical"
    return StationaryState(nu, float(beta), kind, float(res), a, eta, E, iterations)


def amplitude_state(a: float, beta: float, eta: float, grid_size: int = DEFAULT_GRID) -> StationaryState:
    """Stationary state of the tilted Kuramoto model with prescribed amplitude ``a``."""
    V = CosineSeries.cosine(-eta)
    W = CosineSeries.kuramoto()
    nu = DensityField.von_mises(a, grid_size)
    res = fixed_point_residual(nu, V, W, beta)
    return _classify(nu, V, W, beta, res, 0)


def von_mises_normaliser(a: float) -> float:
    """``int_T exp(a cos 2 pi x) dx = I0(a)``."""
    return bessel_I(0, a)


# -- scans ------------------------------------------------------------------

@dataclass(frozen=True)
class BifurcationRow:
    beta: float
    a_min: float
    a_star: Optional[float]
    energy_gap: Optional[float]
    minimiser: str  # "a_min" or "uniform"


def bifurcation_scan(beta_grid: Sequence[float], eta: float = 0.0) -> list[BifurcationRow]:
    """Amplitude branches and the free-energy gap between the two lowest critical points.

    For ``eta = 0`` the competitor of ``a_min`` is the uniform state; for
    ``eta > 0`` it is the negative branch ``a_star``.
    """
    betas = [float(b) for b in beta_grid]
    if any(b2 < b1 for b1, b2 in zip(betas, betas[1:])):
        raise ValueError("beta_grid must be sorted ascending")
    rows = []
    for b in betas:
        rt = amplitude_roots(b, eta)
        e_min = amplitude_free_energy(rt.a_min, b, eta)
        gap = None
        if eta == 0.0 and rt.a_min > 0:
            gap = amplitude_free_energy(0.0, b, eta) - e_min
        elif rt.a_star is not None:
            gap = amplitude_free_energy(rt.a_star, b, eta) - e_min
        which = "a_min" if rt.a_min > 0 else "uniform"
        rows.append(BifurcationRow(b, rt.a_min, rt.a_star, gap, which))
    return rows


def bifurcation_csv(rows: Sequence[BifurcationRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["beta", "a_min", "a_star", "energy_gap"])
    fmt = lambda v: "" if v is None else repr(float(v))
    for r in rows:
        w.writerow([repr(r.beta), repr(r.a_min), fmt(r.a_star), fmt(r.energy_gap)])
    return buf.getvalue()
