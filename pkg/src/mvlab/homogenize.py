"""One-dimensional periodic homogenization around a stationary density.

In 1D the corrector equation ``(nu (1 + psi'))' = 0`` integrates once to
``nu (1 + psi') = c``; periodicity of ``psi`` fixes ``c = 1 / int nu^{-1}``
and the effective diffusivity is the harmonic mean ``A = beta^{-1} c``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .density import DensityError, DensityField
from .potentials import CosineSeries
from .special import bessel_I, r0
from .stationary import amplitude_roots, critical_beta

SANDWICH_TOL = 1e-12


@dataclass(frozen=True)
class EffectiveDiffusion:
    value: float
    beta: float
    lower_bound: float
    upper_bound: float
    source: str = "quadrature"

    def __post_init__(self):
        if self.source not in ("analytic_bessel", "quadrature"):
            raise ValueError(f"unknown source {self.source!r}")

    def within_bounds(self, tol: float = SANDWICH_TOL) -> bool:
        return self.lower_bound - tol <= self.value <= self.upper_bound + tol


@dataclass(frozen=True)
class CorrectorProfile:
    x: np.ndarray
    psi_prime: np.ndarray
    psi: np.ndarray
    flux: float  # the constant nu (1 + psi')

    def weak_residual(self, nu: DensityField, n_modes: int = 32) -> float:
        """``max |int nu (1 + psi') phi'|`` over ``cos``/``sin`` test functions of degree ``<= n_modes``.

        ``psi'`` is recomputed by spectral differentiation of ``psi`` so the
        check exercises the recovered potential, not the formula for ``psi'``.
        """
        n = self.x.size
        k = np.arange(n // 2 + 1)
        dpsi = np.fft.irfft(2j * np.pi * k * np.fft.rfft(self.psi) * (k < n // 2), n)
        flux = nu.resampled(n).values * (1.0 + dpsi)
        worst = 0.0
        for m in range(1, n_modes + 1):
            w = 2.0 * np.pi * m
            for phi_prime in (-w * np.sin(w * self.x), w * np.cos(w * self.x)):
                worst = max(worst, abs(float(np.mean(flux * phi_prime))))
        return worst


def corrector_1d(
    nu: DensityField,
    beta: float,
    potential: Optional[CosineSeries] = None,
) -> tuple[CorrectorProfile, EffectiveDiffusion]:
    """Explicit corrector and effective diffusivity of ``nu``.

    If ``potential`` is given (``nu`` proportional to ``exp(-beta U)``) the
    lower bound uses ``Z = int exp(-beta U)`` and ``Z^- = int exp(beta U)``;
    otherwise the harmonic-mean identity ``Z Z^- = int nu int nu^{-1}``.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    v = nu.values
    if v.min() <= 0:
        raise DensityError(f"corrector needs a positive density (min {v.min():.3e})")
    n = nu.grid_size
    inv_mean = float(np.mean(1.0 / v))
    c = 1.0 / inv_mean
    psi_prime = c / v - 1.0

    k = np.arange(n // 2 + 1)
    hat = np.fft.rfft(psi_prime)
    anti = np.zeros_like(hat)
    anti[1 : n // 2] = hat[1 : n // 2] / (2j * np.pi * k[1 : n // 2])
    psi = np.fft.irfft(anti, n)
    psi -= np.mean(psi * v)

    if potential is not None:
        u = potential.grid(n)
        shift = u.min()
        # Z Z^- is invariant under constant shifts of U; shift to avoid overflow
        ZZ = float(np.mean(np.exp(-beta * (u - shift))) * np.mean(np.exp(beta * (u - shift))))
    else:
        ZZ = float(np.mean(v)) * inv_mean
    A = EffectiveDiffusion(
        value=c / beta,
        beta=float(beta),
        lower_bound=1.0 / (beta * ZZ),
        upper_bound=1.0 / beta,
        source="quadrature",
    )
    return CorrectorProfile(nu.x.copy(), psi_prime, psi, c), A


def analytic_effective_diffusion(a: float, beta: float) -> EffectiveDiffusion:
    """``beta^{-1} / I0(a)^2`` for ``nu`` proportional to ``exp(a cos 2 pi x)``."""
    I0 = bessel_I(0, a)
    value = 1.0 / (beta * I0 * I0)
    return EffectiveDiffusion(value, float(beta), value, 1.0 / beta, "analytic_bessel")


def _diffusivity(A) -> float:
    return float(A.value if isinstance(A, EffectiveDiffusion) else A)


def heat_kernel(A, t: float, x):
    """Fundamental solution of ``rho_t = A rho_xx``: a centred Gaussian with variance ``2 A t``."""
    if not t > 0:
        raise ValueError("t must be positive")
    var = 2.0 * _diffusivity(A) * t
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x / var) / math.sqrt(2.0 * math.pi * var)


def kernel_sup_gap(A1, A2, t: float = 1.0, points: int = 20001) -> float:
    s = math.sqrt(2.0 * max(_diffusivity(A1), _diffusivity(A2)) * t)
    x = np.linspace(-12.0 * s, 12.0 * s, points)
    return float(np.max(np.abs(heat_kernel(A1, t, x) - heat_kernel(A2, t, x))))


class NoTransitionError(ValueError):
    """Raised when a second stationary branch was required but does not exist."""


@dataclass(frozen=True)
class NonCommutativityReport:
    eta: float
    beta: float
    regime: str  # "noncommuting", "commuting" or "degenerate"
    a_min: float
    a_star: Optional[float]
    A_min: float
    A_star: Optional[float]
    relative_gap: Optional[float]
    kernel_gap_t1: Optional[float]
    beta_c: float
    note: str = ""

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def non_commutativity_report(
    eta: float,
    beta: float,
    grid_size: int = 256,
    t: float = 1.0,
    require_transition: bool = False,
) -> NonCommutativityReport:
    """Compare the homogenized diffusivities of the two stationary branches.

    For ``eta = 0`` the minimisers above the transition form a family of
    translates; no single minimiser is selected and the kernel comparison is
    left empty.
    """
    beta_c = critical_beta(eta)
    roots = amplitude_roots(beta, eta)
    V = CosineSeries.cosine(-eta)
    W = CosineSeries.kuramoto()

    def diffusivity(a: float) -> float:
        nu = DensityField.von_mises(a, grid_size)
        U = V + W.scaled(r0(a))  # W * nu = -r0(a) cos
        return corrector_1d(nu, beta, U)[1].value

    A_min = diffusivity(roots.a_min)
    if eta == 0.0:
        note = (
            "uniform state is the unique steady state; the limits commute"
            if roots.a_min == 0.0
            else "minimisers form a family of translates; no minimiser-side kernel is reported"
        )
        if require_transition and roots.a_min == 0.0:
            raise NoTransitionError(note)
        regime = "commuting" if roots.a_min == 0.0 else "degenerate"
        return NonCommutativityReport(eta, beta, regime, roots.a_min, None, A_min, None, None, None, beta_c, note)

    if roots.a_star is None:
        note = f"unique steady state below beta_c = {beta_c:.6f}; the limits commute"
        if require_transition:
            raise NoTransitionError(note)
        return NonCommutativityReport(eta, beta, "commuting", roots.a_min, None, A_min, None, None, None, beta_c, note)

    A_star = diffusivity(roots.a_star)
    gap = abs(A_min - A_star) / A_min
    kgap = kernel_sup_gap(A_min, A_star, t)
    note = "two stationary branches with different effective diffusivities; the limits do not commute"
    return NonCommutativityReport(
        eta, beta, "noncommuting", roots.a_min, roots.a_star, A_min, A_star, gap, kgap, beta_c, note
    )

