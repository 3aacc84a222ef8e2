"""Interacting particles on the circle: SDE ensembles, Gibbs sampling and fluctuations.

Randomness comes from Philox streams keyed by ``(seed, chunk, first step)``
where a chunk is a fixed block of replicas, so results do not depend on how
many worker threads process the chunks.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .density import DensityField, mean_field_potential
from .potentials import CosineSeries, Hamiltonian, pair_force_sum
from .stationary import free_energy

CHUNK = 1024
THREADS_ENV = "MVLAB_THREADS"
TARGET_ACCEPTANCE = 0.574


class StepSizeError(ValueError):
    """Raised when ``dt`` times the drift Lipschitz bound is not below 0.1."""


class SamplerError(RuntimeError):
    """Raised when MALA cannot be tuned into a usable acceptance range."""


def _threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed) & (2**64 - 1), *key])))


@dataclass
class ParticleEnsemble:
    """``R`` independent replicas of an ``N``-particle system, on the line.

    ``positions`` has shape ``(R, N)``; :attr:`quotient` maps them to ``[0, 1)``.
    """

    positions: np.ndarray
    beta: float
    seed: int = 0
    time: float = 0.0
    steps: int = 0

    def __post_init__(self):
        x = np.array(self.positions, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] < 1:
            raise ValueError("positions must have shape (R, N) or (N,)")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        self.positions = x

    @property
    def N(self) -> int:
        return self.positions.shape[1]

    @property
    def replicas(self) -> int:
        return self.positions.shape[0]

    @property
    def quotient(self) -> np.ndarray:
        return np.mod(self.positions, 1.0)

    @classmethod
    def uniform(cls, replicas: int, N: int, beta: float, seed: int = 0) -> "ParticleEnsemble":
        rng = _stream(seed, 0xFFFF, 0)
        return cls(rng.random((replicas, N)), beta, seed)

    @classmethod
    def from_density(cls, nu: DensityField, replicas: int, N: int, beta: float, seed: int = 0) -> "ParticleEnsemble":
        rng = _stream(seed, 0xFFFE, 0)
        return cls(sample_density(nu, (replicas, N), rng), beta, seed)


def sample_density(nu: DensityField, size, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF sampling from ``nu`` on ``[0, 1)``."""
    n = max(4096, nu.grid_size)
    F = np.maximum.accumulate(nu.cdf_on_grid(n))
    x = np.arange(n + 1) / n
    return np.interp(rng.random(size), F, x)


@dataclass
class Trajectory:
    times: np.ndarray
    positions: np.ndarray  # (records, R, N), unwrapped
    ensemble: ParticleEnsemble


def drift_lipschitz(V: CosineSeries, W: CosineSeries, mean_field: Optional[DensityField] = None) -> float:
    if mean_field is not None:
        return mean_field_potential(V, W, mean_field).sup_derivative_bound(2)
    return V.sup_derivative_bound(2) + W.sup_derivative_bound(2)


def _drift(x: np.ndarray, V: CosineSeries, W: CosineSeries, U: Optional[CosineSeries]) -> np.ndarray:
    if U is not None:
        return -U.derivative(x)
    f = -V.derivative(x) if not V.is_constant() else np.zeros_like(x)
    if x.shape[-1] > 1 and not W.is_constant():
        f -= pair_force_sum(W, x) / x.shape[-1]
    return f


def simulate_sde(
    ens: ParticleEnsemble,
    V: CosineSeries,
    W: CosineSeries,
    dt: float,
    T: float,
    mean_field: Optional[DensityField] = None,
    record_every: Optional[int] = None,
) -> Trajectory:
    """Euler-Maruyama for ``dX_i = -V'(X_i) - N^{-1} sum_j W'(X_i - X_j) + sqrt(2/beta) dB_i``.

    With ``mean_field`` the interaction is replaced by the frozen drift
    ``-(W * nu)'``.  Positions stay unwrapped; forces are periodic so the
    quotient never has to be taken explicitly.
    """
    lip = drift_lipschitz(V, W, mean_field)
    if dt * lip >= 0.1:
        raise StepSizeError(f"dt * Lipschitz = {dt * lip:.3g} must be below 0.1")
    steps = int(round(T / dt))
    if steps < 1:
        raise ValueError("T must be at least one step")
    every = record_every or steps
    U = mean_field_potential(V, W, mean_field) if mean_field is not None else None
    sigma = math.sqrt(2.0 * dt / ens.beta)
    n_rec = steps // every + 1
    out = np.empty((n_rec, ens.replicas, ens.N))
    out[0] = ens.positions

    def run_chunk(c: int) -> np.ndarray:
        lo, hi = c * CHUNK, min((c + 1) * CHUNK, ens.replicas)
        rng = _stream(ens.seed, c, ens.steps)
        x = ens.positions[lo:hi].copy()
        r = 1
        for i in range(1, steps + 1):
            x += dt * _drift(x, V, W, U) + sigma * rng.standard_normal(x.shape)
            if i % every == 0:
                out[r, lo:hi] = x
                r += 1
        return x

    chunks = range((ens.replicas + CHUNK - 1) // CHUNK)
    workers = _threads()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            finals = list(pool.map(run_chunk, chunks))
    else:
        finals = [run_chunk(c) for c in chunks]
    final = ParticleEnsemble(np.concatenate(finals), ens.beta, ens.seed, ens.time + steps * dt, ens.steps + steps)
    times = ens.time + dt * every * np.arange(n_rec)
    return Trajectory(times, out, final)


# -- Gibbs sampling ---------------------------------------------------------

@dataclass
class GibbsSamples:
    chains: np.ndarray  # (n_chains, n_per_chain, N), quotient coordinates
    N: int
    beta: float
    acceptance: float
    step: float

    @property
    def configs(self) -> np.ndarray:
        return self.chains.reshape(-1, self.N)

    def __len__(self) -> int:
        return self.chains.shape[0] * self.chains.shape[1]


def mala_log_ratio(h: Hamiltonian, x: np.ndarray, y: np.ndarray, tau: float) -> np.ndarray:
    """Log Metropolis-Hastings ratio for a MALA move ``x -> y`` targeting ``exp(-beta H)``."""
    b = h.beta
    gx = -b * h.gradient(x)
    gy = -b * h.gradient(y)
    fwd = np.sum((y - x - tau * gx) ** 2, axis=-1)
    bwd = np.sum((x - y - tau * gy) ** 2, axis=-1)
    return -b * (h.energy(y) - h.energy(x)) - (bwd - fwd) / (4.0 * tau)


def gibbs_sample(
    N: int,
    V: CosineSeries,
    W: CosineSeries,
    beta: float,
    n_samples: int,
    thinning: int = 1,
    step: Optional[float] = None,
    seed: int = 0,
    n_chains: int = 16,
    warmup: int = 2000,
) -> GibbsSamples:
    """MALA chains on the torus targeting ``M_N`` proportional to ``exp(-beta H)``.

    The chain runs on the lifted coordinates; because the target is periodic
    and the proposal is translation covariant, the projected chain is exact
    for the torus target.  During ``warmup`` the step is adapted towards an
    acceptance rate of 0.574 and then frozen.
    """
    h = Hamiltonian(V, W, N, beta)
    rng = _stream(seed, 0xA11A, 0)
    x = rng.random((n_chains, N))
    tau = step if step is not None else 0.1 / (beta * (1.0 + drift_lipschitz(V, W)))
    log_tau = math.log(tau)

    def move(x, tau):
        g = -beta * h.gradient(x)
        y = x + tau * g + math.sqrt(2.0 * tau) * rng.standard_normal(x.shape)
        logr = mala_log_ratio(h, x, y, tau)
        accept = np.log(rng.random(x.shape[0])) < logr
        x = np.where(accept[:, None], y, x)
        return np.mod(x, 1.0), accept

    for i in range(warmup):
        x, acc = move(x, tau)
        if step is None:
            log_tau += (acc.mean() - TARGET_ACCEPTANCE) / math.sqrt(i + 10.0)
            tau = math.exp(min(log_tau, 5.0))

    per_chain = -(-n_samples // n_chains)
    chains = np.empty((n_chains, per_chain, N))
    accepted = 0
    for s in range(per_chain):
        for _ in range(thinning):
            x, acc = move(x, tau)
            accepted += int(acc.sum())
        chains[:, s] = x
    rate = accepted / (per_chain * thinning * n_chains)
    if not 0.1 <= rate <= 0.95:
        raise SamplerError(f"acceptance rate {rate:.3f} outside [0.1, 0.95] (step {tau:.3g})")
    return GibbsSamples(chains, N, float(beta), rate, tau)


# -- fluctuations -----------------------------------------------------------

def basis_function(k: int, x):
    """Orthonormal real Fourier basis: ``sqrt2 sin`` for ``k > 0``, 1, ``sqrt2 cos`` for ``k < 0``."""
    x = np.asarray(x, dtype=float)
    if k > 0:
        return math.sqrt(2.0) * np.sin(2.0 * np.pi * k * x)
    if k < 0:
        return math.sqrt(2.0) * np.cos(2.0 * np.pi * k * x)
    return np.ones_like(x)


def basis_mean(k: int, nu: DensityField) -> float:
    z = nu.mode(abs(k))  # int nu cos - i int nu sin
    if k > 0:
        return -math.sqrt(2.0) * z.imag
    if k < 0:
        return math.sqrt(2.0) * z.real
    return 1.0


def batch_stderr(series: np.ndarray, n_batches: int = 20) -> tuple[float, float]:
    """Batch-means standard error of the mean of ``series`` (shape ``(chains, T)``) and the ESS."""
    s = np.atleast_2d(np.asarray(series, dtype=float))
    C, T = s.shape
    b = max(T // n_batches, 1)
    nb = T // b
    means = s[:, : nb * b].reshape(C, nb, b).mean(axis=2).ravel()
    if means.size < 2:
        return math.nan, math.nan
    se = float(np.std(means, ddof=1) / math.sqrt(means.size))
    var = float(np.var(s, ddof=1))
    ess = var / se**2 if se > 0 else math.inf
    return se, ess


@dataclass(frozen=True)
class FluctuationSample:
    mode_index: int
    projections: np.ndarray  # (chains, samples)
    N: int
    beta: float
    variance: float
    stderr: float
    ess: float


def _as_chains(samples) -> tuple[np.ndarray, float]:
    if isinstance(samples, GibbsSamples):
        return samples.chains, samples.beta
    s = np.asarray(samples, dtype=float)
    return (s[None] if s.ndim == 2 else s), math.nan


def projections(samples, k: int, reference: DensityField) -> np.ndarray:
    """``<G^N, e_k> = sqrt(N) (N^{-1} sum_i e_k(x_i) - int e_k d nu)`` per sample."""
    chains, _ = _as_chains(samples)
    N = chains.shape[-1]
    return math.sqrt(N) * (basis_function(k, chains).mean(axis=-1) - basis_mean(k, reference))


def fluctuation_modes(samples, k_list: Sequence[int], reference: DensityField) -> dict[int, FluctuationSample]:
    chains, beta = _as_chains(samples)
    N = chains.shape[-1]
    out = {}
    for k in k_list:
        p = projections(chains, k, reference)
        sq = p - p.mean()
        se, ess = batch_stderr(sq * sq)
        out[k] = FluctuationSample(int(k), p, N, beta, float(np.var(p, ddof=1)), se, ess)
    return out


def interaction_fluctuation_energy(samples, W: CosineSeries, reference: DensityField) -> tuple[float, float]:
    """Monte Carlo estimate of ``E <W(x - y), G^N (x) G^N>`` with its standard error.

    Expanding ``W(x - y)`` in the product basis, only the even part survives:
    ``<W, G (x) G> = sum_k (c_k / 2) (<G, e_k>^2 + <G, e_-k>^2)``.
    """
    chains, _ = _as_chains(samples)
    total = np.zeros(chains.shape[:2])
    for k in range(1, W.degree + 1):
        c = W.cos_coeffs[k]
        if c:
            total += 0.5 * c * (projections(chains, k, reference) ** 2 + projections(chains, -k, reference) ** 2)
    se, _ = batch_stderr(total)
    return float(total.mean()), (0.0 if not np.any(total) else se)


def order_parameter(samples) -> np.ndarray:
    chains, _ = _as_chains(samples)
    return np.abs(np.exp(2j * np.pi * chains).mean(axis=-1)).ravel()


def empirical_quantile_distance(config: np.ndarray, nu: DensityField) -> float:
    """``W_2`` between the empirical measure of ``config`` and the ``N``-quantile discretisation of ``nu``."""
    from .metrics import _shift_cost, quantile_atoms

    x = np.sort(np.mod(config, 1.0))
    y = quantile_atoms(nu, x.size)
    n = x.size
    return math.sqrt(min(_shift_cost(x, y, s, 2) for s in range(-n, n + 1)))


# -- diffusivity ------------------------------------------------------------

@dataclass(frozen=True)
class MSDResult:
    A_hat: float
    stderr: float
    fit_r2: float
    times: np.ndarray
    msd: np.ndarray

    @property
    def diffusive(self) -> bool:
        return self.fit_r2 >= 0.99


def msd_diffusivity(paths: np.ndarray, times: np.ndarray) -> MSDResult:
    """Fit ``E|X_t - X_0|^2 = 2 A t`` through the origin on ``[T/2, T]``.

    ``paths`` has shape ``(records, paths)`` of unwrapped coordinates.  The
    standard error uses the spread of per-path slopes.
    """
    X = np.asarray(paths, dtype=float)
    t = np.asarray(times, dtype=float) - times[0]
    d2 = (X - X[0]) ** 2
    msd = d2.mean(axis=1)
    w = t >= 0.5 * t[-1]
    tw = t[w]
    denom = 2.0 * np.sum(tw * tw)
    A = float(np.sum(tw * msd[w]) / denom)
    per_path = (tw @ d2[w]) / denom
    se = float(np.std(per_path, ddof=1) / math.sqrt(per_path.size)) if per_path.size > 1 else math.nan
    resid = msd[w] - 2.0 * A * tw
    ss_tot = float(np.sum((msd[w] - msd[w].mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else math.nan
    return MSDResult(A, se, r2, t, msd)


# -- partition functions ----------------------------------------------------

def partition_function_smallN(N: int, V: CosineSeries, W: CosineSeries, beta: float, points: int = 256) -> float:
    """``Z_N`` by the tensor trapezoidal rule with ``points`` nodes per axis (``N <= 3``)."""
    if N not in (1, 2, 3):
        raise ValueError("partition_function_smallN supports N in {1, 2, 3}")
    x = np.arange(points) / points
    v = V.value(x)
    if N == 1:
        return float(np.mean(np.exp(-beta * v)))
    d = (np.arange(points)[:, None] - np.arange(points)[None, :]) % points / points
    Wd = W.value(d)
    pair = (Wd + Wd.T) / (2.0 * N)  # pair[i, j] = (W(x_i - x_j) + W(x_j - x_i)) / 2N
    if N == 2:
        return float(np.mean(np.exp(-beta * (v[:, None] + v[None, :] + pair))))
    total = 0.0
    base = v[:, None] + v[None, :] + pair
    for i in range(points):
        H = v[i] + base + pair[i][:, None] + pair[i][None, :]
        total += float(np.sum(np.exp(-beta * H)))
    return total / points**3


@dataclass(frozen=True)
class PartitionRatio:
    N: int
    beta: float
    Z_N: float
    Z_min: float
    literal_ratio: float  # Z_N / Z_min
    energetic_ratio: float  # exp(E^N[M_N] - E_MF[nu_min])
    free_energy_N: float
    free_energy_mf: float


def partition_ratio(
    N: int, V: CosineSeries, W: CosineSeries, beta: float, nu_min: DensityField, points: int = 256
) -> PartitionRatio:
    """Compare ``Z_N`` with the mean-field minimiser.

    The per-particle free energy of the Gibbs measure is
    ``E^N[M_N] = -(beta N)^{-1} log Z_N``, so the energetic ratio is
    ``Z_N^{-1/(beta N)} exp(-E_MF[nu_min])``.  ``Z_min`` is the normaliser
    ``int exp(-beta (V + W * nu_min))`` of the self-consistency equation.
    """
    ZN = partition_function_smallN(N, V, W, beta, points)
    U = mean_field_potential(V, W, nu_min)
    Zmin = float(np.mean(np.exp(-beta * U.grid(nu_min.grid_size))))
    eN = -math.log(ZN) / (beta * N)
    emf = free_energy(nu_min, V, W, beta)
    return PartitionRatio(N, float(beta), ZN, Zmin, ZN / Zmin, math.exp(eN - emf), eN, emf)
