"""Probability densities on the unit torus in Fourier representation."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .potentials import CosineSeries

TWO_PI = 2.0 * np.pi
DEFAULT_GRID = 256
POSITIVITY_TOL = 1e-8


class DensityError(ValueError):
    """Raised for invalid densities (bad grid, lost mass, negative values)."""


def _check_grid(n: int) -> int:
    n = int(n)
    if n < 64 or n & (n - 1):
        raise DensityError(f"grid size must be a power of two >= 64, got {n}")
    return n


@dataclass(frozen=True, eq=False)
class DensityField:
    """Unit-mass density on T = [0, 1).

    ``modes[k] = int nu(x) exp(-2 pi i k x) dx`` for ``k = 0 .. M/2 - 1`` is
    the canonical data; negative modes follow by conjugate symmetry and the
    Nyquist mode of the ``M``-point grid is kept at zero.  ``modes[0]`` is
    exactly 1.
    """

    modes: np.ndarray

    def __post_init__(self):
        m = np.array(self.modes, dtype=complex)
        if m.ndim != 1:
            raise DensityError("modes must be one-dimensional")
        _check_grid(2 * m.size)
        if not np.all(np.isfinite(m)):
            raise DensityError("non-finite Fourier modes")
        m[0] = 1.0
        m.setflags(write=False)
        object.__setattr__(self, "modes", m)

    # -- constructors -----------------------------------------------------
    @classmethod
    def from_values(cls, values, normalize: bool = True) -> "DensityField":
        v = np.asarray(values, dtype=float)
        n = _check_grid(v.size)
        modes = np.fft.rfft(v)[: n // 2] / n
        mass = modes[0].real
        if not mass > 0:
            raise DensityError("density has nonpositive total mass")
        if normalize:
            modes = modes / mass
        elif abs(mass - 1.0) > 1e-12:
            raise DensityError(f"density mass {mass} differs from 1")
        return cls(modes)

    @classmethod
    def from_function(cls, f: Callable, grid_size: int = DEFAULT_GRID) -> "DensityField":
        n = _check_grid(grid_size)
        return cls.from_values(f(np.arange(n) / n))

    @classmethod
    def uniform(cls, grid_size: int = DEFAULT_GRID) -> "DensityField":
        modes = np.zeros(_check_grid(grid_size) // 2, dtype=complex)
        return cls(modes)

    @classmethod
    def gibbs(cls, U: CosineSeries, beta: float, grid_size: int = DEFAULT_GRID) -> "DensityField":
        """``exp(-beta U) / Z`` sampled on the grid."""
        n = _check_grid(grid_size)
        u = U.grid(n)
        return cls.from_values(np.exp(-beta * (u - u.min())))

    @classmethod
    def von_mises(cls, a: float, grid_size: int = DEFAULT_GRID, center: float = 0.0) -> "DensityField":
        """``exp(a cos(2 pi (x - center))) / I0(a)``."""
        n = _check_grid(grid_size)
        x = np.arange(n) / n
        return cls.from_values(np.exp(a * (np.cos(TWO_PI * (x - center)) - 1.0)))

    # -- views ------------------------------------------------------------
    @property
    def grid_size(self) -> int:
        return 2 * self.modes.size

    @property
    def K(self) -> int:
        return self.modes.size - 1

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.grid_size) / self.grid_size

    @cached_property
    def values(self) -> np.ndarray:
        v = modes_to_values(self.modes, self.grid_size)
        v.setflags(write=False)
        return v

    @property
    def mass(self) -> float:
        return float(np.mean(self.values))

    @property
    def wavenumbers(self) -> np.ndarray:
        return np.arange(self.modes.size)

    def mode(self, k: int) -> complex:
        k = int(k)
        if abs(k) > self.K:
            return 0j
        z = self.modes[abs(k)]
        return complex(z if k >= 0 else np.conj(z))

    def evaluate(self, x) -> np.ndarray:
        """Trigonometric interpolant at arbitrary points."""
        x = np.asarray(x, dtype=float)
        k = self.wavenumbers[1:]
        ph = np.exp(1j * TWO_PI * np.multiply.outer(x, k))
        return 1.0 + 2.0 * (ph @ self.modes[1:]).real

    def derivative_values(self) -> np.ndarray:
        k = self.wavenumbers
        return modes_to_values(2j * np.pi * k * self.modes, self.grid_size)

    def cdf(self, x) -> np.ndarray:
        """``F(x) = int_0^x nu`` for ``x`` in [0, 1] (lifted: F(x+1) = F(x)+1)."""
        x = np.asarray(x, dtype=float)
        k = self.wavenumbers[1:]
        if k.size == 0:
            return x.copy()
        coef = self.modes[1:] / (2j * np.pi * k)
        ph = np.exp(1j * TWO_PI * np.multiply.outer(x, k)) - 1.0
        return x + 2.0 * (ph @ coef).real

    def cdf_on_grid(self, n: int) -> np.ndarray:
        """CDF at ``j / n`` for ``j = 0..n`` using one inverse FFT (``n >= grid_size``)."""
        k = self.wavenumbers[1:]
        coef = np.zeros(n // 2 + 1, dtype=complex)
        coef[1 : k.size + 1] = self.modes[1:] / (2j * np.pi * k)
        periodic = np.fft.irfft(coef, n) * n
        x = np.arange(n + 1) / n
        p = np.append(periodic, periodic[0])
        return x + p - p[0]

    def first_moments(self) -> complex:
        """``int exp(2 pi i x) nu(x) dx = conj(modes[1])``."""
        return complex(np.conj(self.modes[1])) if self.K >= 1 else 0j

    def shifted(self, c: float) -> "DensityField":
        """Translate: ``x -> nu(x - c)``."""
        k = self.wavenumbers
        return DensityField(self.modes * np.exp(-2j * np.pi * k * c))

    def resampled(self, grid_size: int) -> "DensityField":
        n = _check_grid(grid_size)
        m = np.zeros(n // 2, dtype=complex)
        k = min(n // 2, self.modes.size)
        m[:k] = self.modes[:k]
        return DensityField(m)

    def check_positive(self, tol: float = POSITIVITY_TOL) -> None:
        v = self.values
        if v.min() < -tol * max(v.max(), 1.0):
            raise DensityError(f"density has negative values (min {v.min():.3e})")

    def to_dict(self) -> dict:
        return {
            "grid": self.x.tolist(),
            "values": self.values.tolist(),
            "modes": [[float(z.real), float(z.imag)] for z in self.modes],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DensityField":
        if "modes" in data:
            return cls(np.array([complex(a, b) for a, b in data["modes"]]))
        return cls.from_values(data["values"])


def modes_to_values(modes: np.ndarray, n: int) -> np.ndarray:
    full = np.zeros(n // 2 + 1, dtype=complex)
    full[: modes.size] = modes
    return np.fft.irfft(full, n) * n


def values_to_modes(values: np.ndarray) -> np.ndarray:
    n = values.size
    return np.fft.rfft(values)[: n // 2] / n


def l1_distance(mu: DensityField, nu: DensityField) -> float:
    n = max(mu.grid_size, nu.grid_size)
    return float(np.mean(np.abs(mu.resampled(n).values - nu.resampled(n).values)))


def sup_distance(mu: DensityField, nu: DensityField) -> float:
    n = max(mu.grid_size, nu.grid_size)
    return float(np.max(np.abs(mu.resampled(n).values - nu.resampled(n).values)))


def min_shift_l1(mu: DensityField, nu: DensityField, points: int = 512) -> tuple[float, float]:
    """``min_c ||mu - nu(. - c)||_L1`` by scan plus golden-section refinement."""
    from scipy.optimize import minimize_scalar

    shifts = np.arange(points) / points
    vals = [l1_distance(mu, nu.shifted(c)) for c in shifts]
    i = int(np.argmin(vals))
    h = 1.0 / points
    res = minimize_scalar(
        lambda c: l1_distance(mu, nu.shifted(c)),
        bounds=(shifts[i] - h, shifts[i] + h),
        method="bounded",
        options={"xatol": 1e-12},
    )
    best = min((vals[i], shifts[i]), (float(res.fun), float(res.x) % 1.0))
    return best[0], best[1]


def convolve(W: CosineSeries, nu: DensityField) -> CosineSeries:
    """``(W * nu)(x) = int W(x - y) nu(y) dy`` as an exact trigonometric series."""
    deg = min(W.degree, nu.K)
    c = [W.cos_coeffs[0]]
    s = []
    for k in range(1, deg + 1):
        p = W.fourier_coefficient(k) * nu.modes[k]
        c.append(2.0 * p.real)
        s.append(-2.0 * p.imag)
    return CosineSeries(tuple(c), tuple(s))


def mean_field_potential(V: CosineSeries, W: CosineSeries, nu: DensityField) -> CosineSeries:
    """``V + W * nu``."""
    return V + convolve(W, nu)
