"""Even kernel constructors: mollifier, Fejér, plateau windows, probes.

Fourier convention (fixed for the whole library):

    k_hat(xi) = integral k(t) exp(-i xi t) dt,
    k(t)      = (2 pi)^{-1} integral k_hat(xi) exp(i xi t) dxi.

For even real k this makes k_hat(xi) = integral k(t) cos(xi t) dt, so the
cosine-pairing identity holds literally. Every closed form below is written
in |x| so evaluators are exactly even.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.special import polygamma

from .errors import GridResolutionError, InvalidParameterError
from .quadrature import (adaptive_integrate, gauss_nodes, panel_nodes,
                         panels_for_oscillation)

# 1 / integral_{-1}^{1} exp(-1/(1-u^2)) du, frozen at 22 digits
MOLLIFIER_NORM = 2.2522836210435810105


def sinc(x):
    """sin(x)/x with the removable singularity filled by series below 1e-4."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    xs = np.where(small, 1.0, x)
    return np.where(small, 1.0 - x * x / 6.0, np.sin(xs) / xs)


def sinc_sq(x):
    """(sin(x)/x)^2 via series below 1e-4 (matches sinc()'s switch radius)."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    xs = np.where(small, 1.0, x)
    return np.where(small, 1.0 - x * x / 3.0, (np.sin(xs) / xs) ** 2)


@dataclass(frozen=True)
class Kernel:
    """An even real kernel with paired time- and frequency-side evaluators.

    Attributes:
        family: one of {mollifier, fejer, triangle_pd, selberg, tukey,
            fejer_probe, triangle_bump}.
        params: named real parameters of the family.
        time_eval / freq_eval: vectorized evaluators (exactly even).
        time_support / freq_support: closed interval outside which the
            corresponding side vanishes identically, or None.
        freq_nonneg: True when freq_eval >= 0 everywhere by construction.
        time_deriv: optional derivative of time_eval (mollifier only).
    """
    family: str
    params: dict
    time_eval: Callable
    freq_eval: Callable
    time_support: Optional[Tuple[float, float]] = None
    freq_support: Optional[Tuple[float, float]] = None
    freq_nonneg: bool = False
    time_deriv: Optional[Callable] = None


def _bump(u):
    """exp(-1/(1-u^2)) on (-1,1), zero outside, normalized to unit mass."""
    u = np.asarray(u, dtype=float)
    inside = np.abs(u) < 1.0
    safe = np.where(inside, 1.0 - u * u, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        v = np.where(inside, np.exp(-1.0 / safe), 0.0)
    return MOLLIFIER_NORM * v


def _bump_deriv(u):
    # d/du exp(-1/(1-u^2)) = exp(...) * (-2u/(1-u^2)^2)
    u = np.asarray(u, dtype=float)
    inside = np.abs(u) < 1.0
    safe = np.where(inside, 1.0 - u * u, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        v = np.where(inside, np.exp(-1.0 / safe) * (-2.0 * u / safe ** 2), 0.0)
    return MOLLIFIER_NORM * v


def make_mollifier(delta: float) -> Kernel:
    """Smooth unit-mass mollifier of half-width delta.

    theta_delta(t) = delta^{-1} * theta(t/delta) with theta the normalized
    C_c^infty bump exp(-1/(1-u^2)); frequency side has no closed form and is
    evaluated by panel quadrature over the compact support.
    """
    if not delta > 0:
        raise InvalidParameterError(f"mollifier half-width must be positive, got {delta}")
    d = float(delta)

    def time_eval(t):
        return _bump(np.asarray(t, dtype=float) / d) / d

    def time_deriv(t):
        return _bump_deriv(np.asarray(t, dtype=float) / d) / d ** 2

    def freq_eval(xi):
        arr = np.atleast_1d(np.asarray(xi, dtype=float))
        # theta_hat(xi) = 2 int_0^1 theta(u) cos(d xi u) du, panels per oscillation
        amax = float(np.max(np.abs(arr))) * d if arr.size else 0.0
        n_pan = panels_for_oscillation(0.0, 1.0, amax, min_panels=8)
        nodes, weights = panel_nodes(0.0, 1.0, n_pan, order=16)
        vals = _bump(nodes) * weights
        out = 2.0 * np.cos(np.abs(arr)[:, None] * (d * nodes)[None, :]) @ vals
        return float(out[0]) if np.ndim(xi) == 0 else out

    return Kernel(
        family="mollifier",
        params={"delta": d},
        time_eval=time_eval,
        freq_eval=freq_eval,
        time_support=(-d, d),
        freq_support=None,
        freq_nonneg=False,
        time_deriv=time_deriv,
    )


def fejer_time(lam: float, x):
    """Fejér kernel (lam/2pi) * (sin(lam x/2)/(lam x/2))^2, unit mass."""
    return (lam / (2.0 * np.pi)) * sinc_sq(0.5 * lam * np.asarray(x, dtype=float))


def make_fejer(lam: float) -> Kernel:
    """Fejér kernel with triangular transform (1 - |tau|/lam)_+."""
    if not lam > 0:
        raise InvalidParameterError(f"Fejér bandwidth must be positive, got {lam}")
    L = float(lam)

    def time_eval(x):
        return fejer_time(L, x)

    def freq_eval(tau):
        tau = np.asarray(tau, dtype=float)
        return np.maximum(0.0, 1.0 - np.abs(tau) / L)

    return Kernel(
        family="fejer",
        params={"lam": L},
        time_eval=time_eval,
        freq_eval=freq_eval,
        time_support=None,
        freq_support=(-L, L),
        freq_nonneg=True,
    )


def beurling_function(x):
    """Beurling's extremal majorant B of sgn.

    For x > 0 the partial-fraction series sums exactly to the trigamma form

        B(x) = 1 + 2 (sin(pi x)/pi)^2 (1/x^2 + 1/x - psi_1(x)),

    and B(-x) = 2 (sin(pi x)/(pi x))^2 - B(x); B(0) = 1. sin^2(pi x) is taken
    at the nearest-integer recentering so near-integer arguments cost no
    precision.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    ax = np.abs(x)
    out = np.ones_like(x)

    pos = ax > 1e-9
    y = ax[pos]
    r = y - np.round(y)
    s2 = np.sin(np.pi * np.abs(r)) ** 2
    bpos = 1.0 + 2.0 * (s2 / np.pi ** 2) * (1.0 / y ** 2 + 1.0 / y - polygamma(1, y))
    kk = np.where(np.abs(r) < 1e-15, 0.0, s2 / (np.pi * y) ** 2)
    vals = np.where(x[pos] > 0, bpos, 2.0 * kk - bpos)
    out[pos] = vals
    # |x| <= 1e-9: B(x) = 1 + 2x + O(x^2)
    out[~pos] = 1.0 + 2.0 * x[~pos]
    return float(out[0]) if scalar else out


def _selberg_freq_factory(T, dlt):
    def freq_eval(xi):
        # honest numeric transform everywhere (the declared band limit
        # [-2 pi dlt, 2 pi dlt] is what this evaluator is *tested* against,
        # never imposed); the 1/x^2 tails of eta oscillate at scale pi*dlt
        # so panel widths follow max(|xi|, 2 pi dlt)
        arr = np.atleast_1d(np.asarray(xi, dtype=float))
        if arr.size == 0:
            return arr
        U = max(50.0 * T, 400.0 / dlt)
        amax = float(np.max(np.abs(arr))) + 2.0 * np.pi * dlt
        n_pan = panels_for_oscillation(0.0, U, amax, per_period=6.0, min_panels=64)
        nodes, weights = panel_nodes(0.0, U, n_pan, order=12)
        eta_vals = 0.5 * (beurling_function(dlt * (nodes + T))
                          + beurling_function(dlt * (T - nodes))) * weights
        out = np.empty_like(arr)
        chunk = max(1, int(4e7) // max(1, nodes.size))
        for i in range(0, arr.size, chunk):
            blk = np.abs(arr[i:i + chunk])
            out[i:i + chunk] = 2.0 * np.cos(blk[:, None] * nodes[None, :]) @ eta_vals
        return float(out[0]) if np.ndim(xi) == 0 else out
    return freq_eval


def make_window(family: str, T: float, param: Optional[float] = None) -> Kernel:
    """Even plateau window over [-T, T]; three families, each satisfying a
    maximal subset of {exact plateau, nonnegative transform, band-limited}.

    triangle_pd: (1 - |t|/(C T))_+ with C = param (default 10); transform is a
        scaled squared sinc, hence nonnegative.
    tukey: exactly 1 on [-T, T], cosine half-taper of width W = param (default
        T/5) to zero; signed transform with stable closed form.
    selberg: 0.5*(B(dlt*(t+T)) + B(dlt*(T-t))), dlt = param (default 1);
        majorant of the interval indicator, transform supported in
        [-2 pi dlt, 2 pi dlt] (evaluated numerically).
    """
    if not T > 0:
        raise InvalidParameterError(f"window plateau T must be positive, got {T}")

    if family == "triangle_pd":
        C = 10.0 if param is None else float(param)
        if not C > 0:
            raise InvalidParameterError(f"triangle_pd slope parameter must be positive, got {param}")
        L = C * T

        def time_eval(t):
            return np.maximum(0.0, 1.0 - np.abs(np.asarray(t, dtype=float)) / L)

        def freq_eval(xi):
            return L * sinc_sq(0.5 * L * np.asarray(xi, dtype=float))

        return Kernel("triangle_pd", {"T": T, "C": C}, time_eval, freq_eval,
                      time_support=(-L, L), freq_support=None, freq_nonneg=True)

    if family == "tukey":
        W = T / 5.0 if param is None else float(param)
        if not W > 0:
            raise InvalidParameterError(f"tukey taper width must be positive, got {param}")

        def time_eval(t):
            a = np.abs(np.asarray(t, dtype=float))
            taper = 0.5 * (1.0 + np.cos(np.pi * (a - T) / W))
            return np.where(a <= T, 1.0, np.where(a >= T + W, 0.0, taper))

        M = T + 0.5 * W

        def freq_eval(xi):
            # pi^2 (sin(xi T) + sin(xi (T+W))) / (xi (pi^2 - W^2 xi^2)) in the
            # cancellation-free product form; both hinge singularities are
            # removable sincs
            a = np.abs(np.asarray(xi, dtype=float))
            y = 0.5 * W * (np.pi / W - a)
            return (np.pi ** 2 / W) * M * sinc(a * M) * sinc(y) / (np.pi / W + a)

        return Kernel("tukey", {"T": T, "W": W}, time_eval, freq_eval,
                      time_support=(-(T + W), T + W), freq_support=None, freq_nonneg=False)

    if family == "selberg":
        dlt = 1.0 if param is None else float(param)
        if not dlt > 0:
            raise InvalidParameterError(f"selberg type parameter must be positive, got {param}")

        def time_eval(t):
            t = np.asarray(t, dtype=float)
            return 0.5 * (beurling_function(dlt * (t + T)) + beurling_function(dlt * (T - t)))

        return Kernel("selberg", {"T": T, "delta": dlt}, time_eval,
                      _selberg_freq_factory(T, dlt),
                      time_support=None,
                      freq_support=(-2.0 * np.pi * dlt, 2.0 * np.pi * dlt),
                      freq_nonneg=False)

    raise InvalidParameterError(f"unknown window family '{family}'")


def make_probe(T: float, beta_scale: float = 1.0) -> Kernel:
    """Narrow-band probe: amplitude-scaled Fejér kernel.

    f = A F_beta with beta = beta_scale/T^2 and A = 1/(T beta), so the
    transform is the triangle A (1 - |xi|/beta)_+ and its L1 norm is A beta
    = 1/T exactly.
    """
    if not T > 0:
        raise InvalidParameterError(f"probe scale T must be positive, got {T}")
    if not beta_scale > 0:
        raise InvalidParameterError(f"beta_scale must be positive, got {beta_scale}")
    beta = beta_scale / T ** 2
    A = 1.0 / (T * beta)

    def time_eval(t):
        return A * fejer_time(beta, t)

    def freq_eval(xi):
        return A * np.maximum(0.0, 1.0 - np.abs(np.asarray(xi, dtype=float)) / beta)

    return Kernel("fejer_probe", {"T": T, "beta": beta, "amplitude": A},
                  time_eval, freq_eval,
                  time_support=None, freq_support=(-beta, beta), freq_nonneg=True)


def probe_fhat_l1(kernel: Kernel) -> float:
    """||f_hat||_1 for a probe-type kernel (closed form where available)."""
    if kernel.family == "fejer_probe":
        return kernel.params["amplitude"] * kernel.params["beta"] \
            * kernel.params.get("scaled_by", 1.0)
    if kernel.family == "triangle_bump":
        return kernel.params.get("scaled_by", 1.0)
    if kernel.family == "fejer":
        return kernel.params["lam"] * kernel.params.get("scaled_by", 1.0)
    if kernel.freq_support is not None:
        lo, hi = kernel.freq_support
        nodes, weights = panel_nodes(lo, hi, 512, order=16)
        return float(np.sum(np.abs(kernel.freq_eval(nodes)) * weights))
    raise InvalidParameterError(f"no transform mass available for family '{kernel.family}'")


def kernel_l1_deriv(kernel: Kernel, n_panels: int = 256) -> float:
    """L1 norm of the time-side derivative (panel quadrature of |k'|)."""
    if kernel.time_deriv is None or kernel.time_support is None:
        raise InvalidParameterError("kernel has no derivative/support metadata")
    lo, hi = kernel.time_support
    nodes, weights = panel_nodes(lo, hi, n_panels, order=16)
    return float(np.sum(np.abs(kernel.time_deriv(nodes)) * weights))


def numeric_ft_check(kernel: Kernel, grid, tol_osc_panels: float = 8.0) -> float:
    """Max residual between the numeric Fourier transform and the paired side.

    When the time side has compact support the forward transform of time_eval
    is compared against freq_eval at the grid's nodes; for band-limited
    kernels (compact frequency support) the inverse transform of freq_eval is
    compared against time_eval. Adaptive Gauss-Legendre everywhere.
    """
    nodes = grid.nodes() if hasattr(grid, "nodes") else np.asarray(grid, dtype=float)
    if nodes.size < 9:
        raise GridResolutionError("ft check grid needs at least 9 sample points")

    if kernel.time_support is not None:
        lo, hi = kernel.time_support
        half = max(abs(lo), abs(hi))
        resid = 0.0
        for xi in np.abs(nodes):
            val = 2.0 * adaptive_integrate(
                lambda t, xi=xi: kernel.time_eval(t) * np.cos(xi * t),
                0.0, half, tol=1e-13,
                order=24 if xi * half < 60 else 16,
                max_depth=52)
            resid = max(resid, abs(val - float(kernel.freq_eval(xi))))
        return resid

    if kernel.freq_support is not None:
        lo, hi = kernel.freq_support
        half = max(abs(lo), abs(hi))
        tmax = float(np.max(np.abs(nodes)))
        if tmax * half > 1e5:
            raise GridResolutionError("grid extends far beyond resolvable oscillation range")
        resid = 0.0
        for t in np.abs(nodes):
            val = (1.0 / np.pi) * adaptive_integrate(
                lambda xi, t=t: kernel.freq_eval(xi) * np.cos(xi * t),
                0.0, half, tol=1e-13, order=24, max_depth=52)
            resid = max(resid, abs(val - float(kernel.time_eval(t))))
        return resid

    raise GridResolutionError("kernel declares no compact support on either side")


def scale_kernel(kernel: Kernel, factor: float) -> Kernel:
    """Pointwise scaling on both sides (transform is linear)."""
    f = float(factor)
    return Kernel(
        family=kernel.family,
        params={**kernel.params, "scaled_by": f * kernel.params.get("scaled_by", 1.0)},
        time_eval=lambda t, k=kernel: f * k.time_eval(t),
        freq_eval=lambda xi, k=kernel: f * k.freq_eval(xi),
        time_support=kernel.time_support,
        freq_support=kernel.freq_support,
        freq_nonneg=kernel.freq_nonneg and f >= 0,
        time_deriv=None if kernel.time_deriv is None
        else (lambda t, k=kernel: f * k.time_deriv(t)),
    )


def _interval_hull(a, b):
    if a is None or b is None:
        return None
    return (min(a[0], b[0]), max(a[1], b[1]))


def combine_kernels(k1: Kernel, k2: Kernel, coeff: float) -> Kernel:
    """k1 + coeff * k2 with conservative support/nonnegativity metadata."""
    c = float(coeff)
    return Kernel(
        family=f"{k1.family}+{k2.family}",
        params={"coeff": c},
        time_eval=lambda t: k1.time_eval(t) + c * k2.time_eval(t),
        freq_eval=lambda xi: k1.freq_eval(xi) + c * k2.freq_eval(xi),
        time_support=_interval_hull(k1.time_support, k2.time_support),
        freq_support=_interval_hull(k1.freq_support, k2.freq_support),
        freq_nonneg=k1.freq_nonneg and k2.freq_nonneg and c >= 0,
    )
