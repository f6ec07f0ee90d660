"""Prime-power atoms, mollifier smoothing, main densities and fluctuations."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.special import expi

from .errors import (GridResolutionError, InvalidParameterError,
                     ResourceLimitError)
from .kernels import Kernel

DEFAULT_T_CAP = 18.0
LOG2 = math.log(2.0)


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on [lo, hi] with n nodes."""
    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise InvalidParameterError(f"grid needs n >= 2, got {self.n}")
        if not self.hi > self.lo:
            raise InvalidParameterError(f"grid needs hi > lo, got [{self.lo}, {self.hi}]")

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / (self.n - 1)

    def nodes(self) -> np.ndarray:
        return self.lo + self.spacing * np.arange(self.n)

    @staticmethod
    def from_spacing(lo: float, hi: float, max_spacing: float) -> "GridSpec":
        n = int(math.ceil((hi - lo) / max_spacing)) + 1
        return GridSpec(lo, lo + max_spacing * (n - 1), n)


@dataclass(frozen=True)
class AtomicMeasure:
    """Finite positive atomic measure with strictly ascending positions."""
    positions: np.ndarray
    weights: np.ndarray
    total_mass: float

    @staticmethod
    def build(positions, weights) -> "AtomicMeasure":
        pos = np.asarray(positions, dtype=float)
        w = np.asarray(weights, dtype=float)
        if pos.shape != w.shape or pos.ndim != 1:
            raise InvalidParameterError("positions and weights must be matching 1-D arrays")
        if pos.size:
            gaps = np.diff(pos)
            if np.any(gaps <= 1e-12):
                i = int(np.argmax(gaps <= 1e-12))
                raise InvalidParameterError(
                    f"positions must be strictly ascending (gap {gaps[i]:.3e} at index {i})")
            if np.any(w <= 0):
                raise InvalidParameterError("all weights must be positive")
        pos.setflags(write=False)
        w.setflags(write=False)
        return AtomicMeasure(pos, w, float(np.sum(w)))

    @property
    def count(self) -> int:
        return int(self.positions.size)

    def is_empty(self) -> bool:
        return self.positions.size == 0


@dataclass(frozen=True)
class GriddedDensity:
    """Density sampled on a uniform grid."""
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.grid.n,):
            raise InvalidParameterError("values shape must match grid node count")

    def integral(self) -> float:
        """Trapezoid integral over the whole grid."""
        return float(np.trapezoid(self.values, dx=self.grid.spacing))

    def l1_between(self, a: float, b: float) -> float:
        """Trapezoid integral of |values| over grid nodes inside [a, b]."""
        nodes = self.grid.nodes()
        sel = (nodes >= a - 1e-12) & (nodes <= b + 1e-12)
        if np.count_nonzero(sel) < 2:
            return 0.0
        return float(np.trapezoid(np.abs(self.values[sel]), dx=self.grid.spacing))

    def integral_between(self, a: float, b: float) -> float:
        nodes = self.grid.nodes()
        sel = (nodes >= a - 1e-12) & (nodes <= b + 1e-12)
        if np.count_nonzero(sel) < 2:
            return 0.0
        return float(np.trapezoid(self.values[sel], dx=self.grid.spacing))


@dataclass(frozen=True)
class FluctuationReport:
    """L1 sizes of the prime- and zero-side fluctuations with bound-shape ratios."""
    a_l1: float
    b_l1: float
    lemma_ratio_a: float
    lemma_ratio_b: float


def _eratosthenes(n: int) -> np.ndarray:
    """Primes <= n by a vectorized boolean sieve."""
    if n < 2:
        return np.empty(0, dtype=np.int64)
    sieve = np.ones(n + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, int(n ** 0.5) + 1):
        if sieve[p]:
            sieve[p * p:: p] = False
    return np.flatnonzero(sieve).astype(np.int64)


def sieve_limit(T: float) -> int:
    """Largest integer x with x <= e^T, robust to rounding of exp(T).

    The relative cushion keeps T = log N mapping to exactly N for every
    N <= 1e5 (and far beyond) while never reaching N + 1.
    """
    return int(math.floor(math.exp(T) * (1.0 + 1e-12) + 1e-9))


def prime_power_atoms(T: float, t_cap: float = DEFAULT_T_CAP) -> AtomicMeasure:
    """Atoms at log(p^k) with weight 1/k for every prime power p^k <= e^T."""
    if not T > 0:
        raise InvalidParameterError(f"T must be positive, got {T}")
    if T > t_cap:
        raise ResourceLimitError(
            f"T = {T} exceeds the sieve cap {t_cap} (e^T = {math.exp(T):.3g}); "
            "raise t_cap explicitly to go further")
    x_max = sieve_limit(T)
    if x_max < 2:
        return AtomicMeasure.build(np.empty(0), np.empty(0))
    primes = _eratosthenes(x_max)
    logs = np.log(primes.astype(float))
    pos_parts = [logs]
    w_parts = [np.ones_like(logs)]
    k = 2
    while 2 ** k <= x_max:
        lim = int(math.floor(x_max ** (1.0 / k))) + 1
        cand = primes[primes <= lim]
        if cand.size:
            keep = np.fromiter((int(p) ** k <= x_max for p in cand),
                               dtype=bool, count=cand.size)
            pk = cand[keep]
            if pk.size:
                pos_parts.append(k * np.log(pk.astype(float)))
                w_parts.append(np.full(pk.size, 1.0 / k))
        k += 1
    pos = np.concatenate(pos_parts)
    w = np.concatenate(w_parts)
    order = np.argsort(pos, kind="stable")
    return AtomicMeasure.build(pos[order], w[order])


def smooth_measure(atoms: AtomicMeasure, mollifier: Kernel, grid: GridSpec) -> GriddedDensity:
    """Mollifier smoothing of an atomic measure, sampled on the grid.

    density(t) = sum_i w_i theta_delta(t - t_i); per-offset accumulation with
    deterministic bincount reductions. Preconditions: the grid pads the atom
    range by at least delta and resolves the mollifier (spacing <= delta/8).
    """
    if mollifier.time_support is None:
        raise InvalidParameterError("smoothing kernel must have compact support")
    delta = mollifier.time_support[1]
    s = grid.spacing
    if s > delta / 8.0 + 1e-15:
        raise GridResolutionError(
            f"grid spacing {s:.3e} exceeds delta/8 = {delta / 8:.3e}")
    values = np.zeros(grid.n)
    if atoms.is_empty():
        return GriddedDensity(grid, values)
    if grid.lo > atoms.positions[0] - delta + 1e-12 or grid.hi < atoms.positions[-1] + delta - 1e-12:
        raise GridResolutionError(
            f"grid [{grid.lo}, {grid.hi}] must pad atom range "
            f"[{atoms.positions[0]}, {atoms.positions[-1]}] by delta = {delta}")
    idx0 = np.floor((atoms.positions - grid.lo) / s).astype(np.int64)
    halfwidth = int(math.ceil(delta / s)) + 1
    nodes = grid.nodes()
    for off in range(-halfwidth, halfwidth + 2):
        j = idx0 + off
        ok = (j >= 0) & (j < grid.n)
        if not np.any(ok):
            continue
        jj = j[ok]
        contrib = atoms.weights[ok] * mollifier.time_eval(nodes[jj] - atoms.positions[ok])
        values += np.bincount(jj, weights=contrib, minlength=grid.n)
    return GriddedDensity(grid, values)


def prime_main_density(t):
    """Smooth prime-side density e^t / t (defined for t > 0)."""
    t = np.asarray(t, dtype=float)
    return np.exp(t) / t


def zero_main_density(g):
    """Smooth zero-side density (2 pi)^{-1} log(|g|/2 pi), clamped at 0.

    The O(1/g) correction is omitted; the clamp below |g| = 2 pi keeps the
    density continuous and nonnegative, and the fluctuation field absorbs the
    difference.
    """
    g = np.asarray(g, dtype=float)
    with np.errstate(divide="ignore"):
        v = np.log(np.abs(g) / (2.0 * np.pi)) / (2.0 * np.pi)
    return np.maximum(0.0, np.where(np.abs(g) > 0, v, 0.0))


def main_densities(T: float, omega: float):
    """(m, n) pair of main-density callables for a pipeline scale."""
    if not (T > 0 and omega > 0):
        raise InvalidParameterError("T and omega must be positive")
    return prime_main_density, zero_main_density


def fluctuations(density: GriddedDensity,
                 main: Union[Callable, GriddedDensity]) -> GriddedDensity:
    """Pointwise difference between a smoothed measure and its main density."""
    if isinstance(main, GriddedDensity):
        g1, g2 = density.grid, main.grid
        if (g1.n != g2.n or abs(g1.lo - g2.lo) > 1e-12 or abs(g1.hi - g2.hi) > 1e-12):
            raise InvalidParameterError("fluctuations need densities on the same grid")
        main_vals = main.values
    else:
        main_vals = main(density.grid.nodes())
    return GriddedDensity(density.grid, density.values - main_vals)


def fluctuation_report(a: GriddedDensity, b: GriddedDensity, T: float,
                       omega: float, alpha: float) -> FluctuationReport:
    """L1 norms of the fluctuations against the integrability bound shapes.

    Denominators use T^alpha (e^T/T) e^{-sqrt T} and T^alpha log T with the
    unspecified constant set to 1; ratios are diagnostics, not pass/fail.
    """
    a_l1 = a.l1_between(LOG2, T)
    b_l1 = b.l1_between(-omega, omega)
    denom_a = T ** alpha * (math.exp(T) / T) * math.exp(-math.sqrt(T))
    denom_b = T ** alpha * math.log(T)
    return FluctuationReport(a_l1, b_l1, a_l1 / denom_a, b_l1 / denom_b)


def logarithmic_integral(x):
    """li(x) = Ei(log x) for x > 1 (principal value below the pole at 1)."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 1.0):
        raise InvalidParameterError("logarithmic_integral expects x > 1")
    return expi(np.log(x))


def step_count_J(atoms: AtomicMeasure, t):
    """J(e^t): cumulative atom mass with position <= t (vectorized)."""
    t = np.asarray(t, dtype=float)
    csum = np.concatenate([[0.0], np.cumsum(atoms.weights)])
    idx = np.searchsorted(atoms.positions, t, side="right")
    return csum[idx]
