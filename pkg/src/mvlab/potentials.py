"""Periodic potentials on the unit torus and the N-particle Hamiltonian.

Potentials are finite trigonometric series

    U(x) = sum_k c_k cos(2 pi k x) + sum_{k>=1} s_k sin(2 pi k x),

so values, derivatives and convolutions against densities are exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class CosineSeries:
    """A 1-periodic potential stored by its cosine and sine coefficients.

    ``cos_coeffs[k]`` multiplies ``cos(2 pi k x)`` for ``k = 0..K`` and
    ``sin_coeffs[k-1]`` multiplies ``sin(2 pi k x)`` for ``k = 1..K``.
    """

    cos_coeffs: tuple[float, ...] = (0.0,)
    sin_coeffs: tuple[float, ...] = ()

    def __post_init__(self):
        c = tuple(float(v) for v in self.cos_coeffs) or (0.0,)
        s = tuple(float(v) for v in self.sin_coeffs)
        degree = max(len(c) - 1, len(s))
        c = c + (0.0,) * (degree + 1 - len(c))
        s = s + (0.0,) * (degree - len(s))
        if not all(np.isfinite(c + s)):
            raise ValueError("potential coefficients must be finite")
        object.__setattr__(self, "cos_coeffs", c)
        object.__setattr__(self, "sin_coeffs", s)

    # -- constructors -----------------------------------------------------
    @classmethod
    def zero(cls) -> "CosineSeries":
        return cls((0.0,))

    @classmethod
    def cosine(cls, amplitude: float = 1.0, k: int = 1) -> "CosineSeries":
        """``amplitude * cos(2 pi k x)``."""
        coeffs = [0.0] * (k + 1)
        coeffs[k] = amplitude
        return cls(tuple(coeffs))

    @classmethod
    def kuramoto(cls) -> "CosineSeries":
        """The noisy Kuramoto interaction ``W(x) = -cos(2 pi x)``."""
        return cls.cosine(-1.0)

    @classmethod
    def from_dict(cls, data: dict) -> "CosineSeries":
        return cls(tuple(data.get("cos", (0.0,))), tuple(data.get("sin", ())))

    @classmethod
    def from_json(cls, text: str) -> "CosineSeries":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return {"cos": list(self.cos_coeffs), "sin": list(self.sin_coeffs)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    # -- structure --------------------------------------------------------
    @property
    def degree(self) -> int:
        return len(self.cos_coeffs) - 1

    @property
    def wavenumbers(self) -> np.ndarray:
        return np.arange(1, self.degree + 1)

    @property
    def is_zero(self) -> bool:
        return not any(self.cos_coeffs) and not any(self.sin_coeffs)

    @property
    def is_even(self) -> bool:
        return not any(self.sin_coeffs)

    def is_constant(self) -> bool:
        return not any(self.cos_coeffs[1:]) and not any(self.sin_coeffs)

    def fourier_coefficient(self, k: int) -> complex:
        """``hat U(k) = int_T U(x) exp(-2 pi i k x) dx``."""
        k = int(k)
        if k == 0:
            return complex(self.cos_coeffs[0])
        m = abs(k)
        if m > self.degree:
            return 0j
        c, s = self.cos_coeffs[m], self.sin_coeffs[m - 1]
        return complex(0.5 * c, -0.5 * s if k > 0 else 0.5 * s)

    def __add__(self, other: "CosineSeries") -> "CosineSeries":
        n = max(self.degree, other.degree)
        a = np.zeros(n + 1)
        b = np.zeros(n)
        a[: self.degree + 1] += self.cos_coeffs
        a[: other.degree + 1] += other.cos_coeffs
        b[: self.degree] += self.sin_coeffs
        b[: other.degree] += other.sin_coeffs
        return CosineSeries(tuple(a), tuple(b))

    def scaled(self, factor: float) -> "CosineSeries":
        return CosineSeries(
            tuple(factor * c for c in self.cos_coeffs),
            tuple(factor * s for s in self.sin_coeffs),
        )

    def reflected(self) -> "CosineSeries":
        """``x -> U(-x)``."""
        return CosineSeries(self.cos_coeffs, tuple(-s for s in self.sin_coeffs))

    # -- evaluation -------------------------------------------------------
    def _phase(self, x):
        x = np.mod(np.asarray(x, dtype=float), 1.0)
        return TWO_PI * np.multiply.outer(x, self.wavenumbers)

    def __call__(self, x):
        return self.value(x)

    def value(self, x):
        ph = self._phase(x)
        c = np.asarray(self.cos_coeffs[1:])
        s = np.asarray(self.sin_coeffs)
        return self.cos_coeffs[0] + np.cos(ph) @ c + np.sin(ph) @ s

    def derivative(self, x):
        ph = self._phase(x)
        w = TWO_PI * self.wavenumbers
        c = np.asarray(self.cos_coeffs[1:])
        s = np.asarray(self.sin_coeffs)
        return np.cos(ph) @ (w * s) - np.sin(ph) @ (w * c)

    def second_derivative(self, x):
        ph = self._phase(x)
        w2 = (TWO_PI * self.wavenumbers) ** 2
        c = np.asarray(self.cos_coeffs[1:])
        s = np.asarray(self.sin_coeffs)
        return -(np.cos(ph) @ (w2 * c) + np.sin(ph) @ (w2 * s))

    def sup_derivative_bound(self, order: int) -> float:
        """Cheap upper bound on ``sup |U^(order)|`` from the coefficients."""
        w = (TWO_PI * self.wavenumbers) ** order
        return float(np.sum(w * (np.abs(self.cos_coeffs[1:]) + np.abs(self.sin_coeffs))))

    def sup_abs(self, order: int = 0, points: int = 4096) -> float:
        """``sup_x |U^(order)(x)|`` by dense grid search plus ternary refinement."""
        f = {0: self.value, 1: self.derivative, 2: self.second_derivative}[order]
        lo = _grid_minimum(lambda x: -np.abs(f(x)), points)
        return -lo

    def grid(self, n: int) -> np.ndarray:
        return self.value(np.arange(n) / n)


def eval_potential(p: CosineSeries, x):
    """Return ``(U(x), U'(x), U''(x))`` with ``x`` taken mod 1."""
    return p.value(x), p.derivative(x), p.second_derivative(x)


def _ternary_min(f, lo: float, hi: float, iters: int = 100) -> tuple[float, float]:
    for _ in range(iters):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if f(m1) < f(m2):
            hi = m2
        else:
            lo = m1
        if hi - lo < 1e-15:
            break
    x = 0.5 * (lo + hi)
    return x, float(f(x))


def _grid_minimum(f, points: int = 4096) -> float:
    xs = np.arange(points) / points
    vals = f(xs)
    i = int(np.argmin(vals))
    h = 1.0 / points
    _, refined = _ternary_min(lambda t: float(f(np.array(t))), xs[i] - h, xs[i] + h)
    return min(float(vals[i]), refined)


@dataclass(frozen=True)
class HStability:
    stable: bool
    offending_modes: tuple[int, ...] = field(default_factory=tuple)

    @property
    def label(self) -> str:
        return "H_stable" if self.stable else "not_H_stable"


def h_stability(W: CosineSeries, tol: float = 0.0) -> HStability:
    """Classify ``W`` by the sign of its nonzero Fourier modes.

    A mode counts as offending if its coefficient is not a nonnegative real
    number; for a pure cosine series this is just ``cos_coeffs[k] < 0``.
    """
    bad: list[int] = []
    for k in range(1, W.degree + 1):
        wk = W.fourier_coefficient(k)
        if wk.real < -tol or abs(wk.imag) > tol:
            bad.extend((-k, k))
    return HStability(not bad, tuple(sorted(bad, key=lambda m: (abs(m), m))))


def semiconvexity_kappa(V: CosineSeries, W: CosineSeries) -> float:
    """``min(inf V'' + inf W'', 0)``."""
    kappa = 0.0
    for p in (V, W):
        if not p.is_constant():
            kappa += _grid_minimum(p.second_derivative)
    return min(kappa, 0.0)


@dataclass(frozen=True)
class Hamiltonian:
    """``H(x) = sum_i V(x_i) + (1/2N) sum_{i != j} W(x_i - x_j)``."""

    V: CosineSeries
    W: CosineSeries
    N: int
    beta: float

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be a positive integer")
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    def _check(self, positions) -> np.ndarray:
        x = np.mod(np.asarray(positions, dtype=float), 1.0)
        if x.shape[-1] != self.N:
            raise ValueError(f"expected {self.N} positions, got {x.shape[-1]}")
        return x

    def energy(self, positions) -> np.ndarray | float:
        """Hamiltonian of one configuration or of a stack ``(..., N)``."""
        x = self._check(positions)
        onsite = np.sum(self.V.value(x), axis=-1)
        return onsite + interaction_sum(self.W, x) / (2.0 * self.N)

    def gradient(self, positions) -> np.ndarray:
        """``dH/dx_i``; uses the even part of ``W`` as the pair force."""
        x = self._check(positions)
        Ws = _even_part(self.W)
        return self.V.derivative(x) + pair_force_sum(Ws, x) / self.N


def hamiltonian_energy(h: Hamiltonian, positions: Sequence[float]) -> float:
    return float(h.energy(positions))


def _even_part(W: CosineSeries) -> CosineSeries:
    return CosineSeries(W.cos_coeffs) if not W.is_even else W


def _structure_factors(x: np.ndarray, degree: int) -> np.ndarray:
    """``S_k = sum_j exp(2 pi i k x_j)`` for ``k = 1..degree``; shape ``(..., degree)``."""
    k = np.arange(1, degree + 1)
    return np.exp(1j * TWO_PI * x[..., None] * k).sum(axis=-2)


def interaction_sum(W: CosineSeries, x: np.ndarray) -> np.ndarray:
    """``sum_{i != j} W(x_i - x_j)`` in O(N K) via structure factors."""
    n = x.shape[-1]
    total = W.cos_coeffs[0] * n * (n - 1) * np.ones(x.shape[:-1])
    if W.degree:
        S = _structure_factors(x, W.degree)
        c = np.asarray(W.cos_coeffs[1:])
        # sine parts cancel in the symmetric double sum
        total = total + (np.abs(S) ** 2 - n) @ c
    return total


def pair_force_sum(W: CosineSeries, x: np.ndarray) -> np.ndarray:
    """``F_i = sum_{j != i} W'(x_i - x_j)`` for every particle, O(N K)."""
    if W.degree == 0:
        return np.zeros_like(x)
    k = np.arange(1, W.degree + 1)
    w = TWO_PI * k
    c = np.asarray(W.cos_coeffs[1:])
    s = np.asarray(W.sin_coeffs)
    E = np.exp(1j * TWO_PI * x[..., None] * k)  # (..., N, K)
    S = E.sum(axis=-2, keepdims=True)
    Z = E * np.conj(S)  # sum_j exp(2 pi i k (x_i - x_j))
    # the j == i term contributes sin(0) = 0 and cos(0) = 1
    return (Z.imag @ (-w * c)) + ((Z.real - 1.0) @ (w * s))


def pair_force_sum_direct(W: CosineSeries, x: np.ndarray) -> np.ndarray:
    """O(N^2) reference for :func:`pair_force_sum`."""
    d = x[:, None] - x[None, :]
    F = W.derivative(d)
    np.fill_diagonal(F, 0.0)
    return F.sum(axis=1)
