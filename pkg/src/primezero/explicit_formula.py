"""Probe bundles, measure pairings, and the explicit-formula decomposition.

The bundle wires together a narrow-band probe f, a plateau window, and the
Fejér synchronization factor: g = f * F_hat, h = window * g, with the
transform of h available through two independent numerical routes (direct
cosine transform of h, and the scaled convolution of the window transform
with the Fejér-smoothed probe transform).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.special import sici

from .errors import InvalidParameterError, NumericalConsistencyError
from .kernels import Kernel, make_fejer
from .measures import LOG2, AtomicMeasure, GriddedDensity
from .quadrature import panel_nodes, panels_for_oscillation

_CHUNK = 1 << 22  # max elements per dense cos(outer) block


def _batched_cos_transform(xi, t_nodes, weighted_vals):
    """2 * cos(|xi| x t_nodes) @ weighted_vals, chunked over xi."""
    arr = np.atleast_1d(np.asarray(xi, dtype=float))
    out = np.empty(arr.shape, dtype=float)
    rows = max(1, _CHUNK // max(1, t_nodes.size))
    flat = np.abs(arr.ravel())
    res = np.empty(flat.size)
    for i in range(0, flat.size, rows):
        blk = flat[i:i + rows]
        res[i:i + rows] = 2.0 * (np.cos(blk[:, None] * t_nodes[None, :]) @ weighted_vals)
    out = res.reshape(arr.shape)
    return float(out[0]) if np.ndim(xi) == 0 else out


@dataclass(frozen=True)
class ProbeBundle:
    """Derived objects of one probe/window/Fejér triple."""
    probe: Kernel
    window: Kernel
    fejer: Kernel
    lam: float
    S: float
    halfwidth: float
    hhat_nonneg: bool
    h_l1: float
    hhat_l1: float
    hhat_tail_estimate: float
    xi_max: float
    g_eval: Callable
    h_eval: Callable
    hhat_eval: Callable
    hhat_convolution_eval: Optional[Callable]


def _window_support_end(window: Kernel) -> float:
    if window.time_support is not None:
        return window.time_support[1]
    return math.inf


def hhat_direct_factory(h_eval, halfwidth: float, xi_max: float,
                        per_period: float = 8.0, order: int = 16):
    """Direct cosine-transform evaluator of an even h supported in |t|<=hw."""
    n_pan = panels_for_oscillation(0.0, halfwidth, xi_max, per_period=per_period,
                                   min_panels=32)
    t_nodes, t_weights = panel_nodes(0.0, halfwidth, n_pan, order=order)
    weighted = h_eval(t_nodes) * t_weights

    def hhat(xi):
        return _batched_cos_transform(xi, t_nodes, weighted)

    return hhat


def _hhat_convolution_factory(probe: Kernel, window: Kernel, fejer: Kernel,
                              lam: float, xi_sample_max: float):
    """(2 pi)^{-1} (window_hat * (F_lam * probe_hat))(xi), all numeric.

    Needs a closed-form window transform; the probe transform must have
    compact support (triangular probes/bumps do).
    """
    if probe.freq_support is None:
        return None
    beta_end = probe.freq_support[1]
    # probe-side smoothing beta0(u) = int F_lam(u - v) probe_hat(v) dv;
    # the triangular transform is linear on each side, so one moderate panel
    # per side is exact
    vnodes_l, vw_l = panel_nodes(-beta_end, 0.0, 1, order=16)
    vnodes_r, vw_r = panel_nodes(0.0, beta_end, 1, order=16)
    vnodes = np.concatenate([vnodes_l, vnodes_r])
    vweights = np.concatenate([vw_l, vw_r]) * probe.freq_eval(vnodes)

    def beta0(u):
        u = np.asarray(u, dtype=float)
        return fejer.time_eval(u[..., None] - vnodes) @ vweights

    # outer convolution nodes: cover both the beta0 peak at 0 and the window
    # transform peak near xi, resolving both oscillation scales
    wsup = _window_support_end(window)
    osc = 0.5 * lam + (0.5 * wsup if math.isfinite(wsup) else 0.0)
    U = xi_sample_max + 32.0 * (2.0 * math.pi / lam)
    n_pan = panels_for_oscillation(-U, U, osc, per_period=5.0, min_panels=256)
    unodes, uweights = panel_nodes(-U, U, n_pan, order=10)
    ubeta = beta0(unodes) * uweights

    def conv_eval(xi):
        arr = np.atleast_1d(np.asarray(xi, dtype=float))
        out = np.empty(arr.shape)
        for i, x in enumerate(arr.ravel()):
            out.ravel()[i] = window.freq_eval(x - unodes) @ ubeta / (2.0 * math.pi)
        return float(out.ravel()[0]) if np.ndim(xi) == 0 else out

    return conv_eval


def build_bundle(probe: Kernel, window: Kernel, lam: float, *,
                 xi_max: float = 64.0, cross_check: bool = True,
                 cross_check_tol: float = 1e-7) -> ProbeBundle:
    """Wire the derived evaluators for one probe/window pair.

    xi_max is the largest |xi| the transform evaluator must resolve (panel
    density scales with it). When the window has a closed-form transform the
    two transform routes are cross-checked at construction and a
    numerical-consistency error is raised on disagreement.
    """
    if not lam > 0:
        raise InvalidParameterError(f"synchronization bandwidth must be positive, got {lam}")
    fejer = make_fejer(lam)
    hw = min(lam, _window_support_end(window))

    def g_eval(t):
        return probe.time_eval(t) * fejer.freq_eval(t)

    def h_eval(t):
        return window.time_eval(t) * probe.time_eval(t) * fejer.freq_eval(t)

    from .kernels import probe_fhat_l1
    S = probe_fhat_l1(probe)

    hhat = hhat_direct_factory(h_eval, hw, xi_max)
    conv = _hhat_convolution_factory(probe, window, fejer, lam,
                                     xi_sample_max=min(4.0 * lam, xi_max))

    if cross_check and conv is not None and window.family in ("triangle_pd", "tukey"):
        xs = np.linspace(0.0, min(4.0 * lam, xi_max), 33)
        a = hhat(xs)
        b = conv(xs)
        scale = float(np.max(np.abs(a)))
        worst = float(np.max(np.abs(a - b)))
        if worst > cross_check_tol * scale:
            raise NumericalConsistencyError(
                f"transform routes disagree: max |direct - convolution| = {worst:.3e} "
                f"vs scale {scale:.3e}")

    # L1 norms: |h| over its support, |h_hat| over [0, xi_max] plus a
    # xi^{-2}-envelope tail estimate
    tn, tw = panel_nodes(0.0, hw, 256, order=16)
    h_l1 = 2.0 * float(np.sum(np.abs(h_eval(tn)) * tw))
    n_pan = panels_for_oscillation(0.0, xi_max, hw, per_period=8.0, min_panels=64)
    xn, xw = panel_nodes(0.0, xi_max, n_pan, order=16)
    hv = np.abs(hhat(xn))
    hhat_l1_core = 2.0 * float(np.sum(hv * xw))
    tail_sel = xn > 0.9 * xi_max
    env = float(np.max(hv[tail_sel] * xn[tail_sel] ** 2)) if np.any(tail_sel) else 0.0
    tail = 2.0 * env / xi_max

    return ProbeBundle(
        probe=probe, window=window, fejer=fejer, lam=lam, S=S, halfwidth=hw,
        hhat_nonneg=bool(probe.freq_nonneg and window.freq_nonneg),
        h_l1=h_l1, hhat_l1=hhat_l1_core + tail, hhat_tail_estimate=tail,
        xi_max=xi_max, g_eval=g_eval, h_eval=h_eval, hhat_eval=hhat,
        hhat_convolution_eval=conv,
    )


def window_rule(mollifier: Kernel, order: int = 32):
    """Shared per-atom window rule: two GL panels of the given order, split at
    the atom, with the mollifier folded into the weights.

    (A single GL-32 panel leaves ~1e-8 of bump-quadrature bias; the split
    rule reaches ~2e-10 at the same evaluation style.)
    """
    delta = mollifier.time_support[1]
    offsets, weights = panel_nodes(-delta, delta, 2, order=order)
    return offsets, mollifier.time_eval(offsets) * weights


def pair_measure(fn, meas: AtomicMeasure, mollifier: Kernel, *,
                 kinks: Tuple[float, ...] = (), order: int = 32,
                 fn_support: Optional[Tuple[float, float]] = None) -> float:
    """integral of fn against the mollified measure: sum_i w_i (fn * theta)(t_i).

    Per-atom Gauss-Legendre over [t_i - delta, t_i + delta] (two panels of
    the given order, split at the atom); windows that straddle a declared
    kink of fn are split there as well so the quadrature only ever sees
    smooth pieces. fn_support skips atoms whose window cannot intersect the
    support of fn.
    """
    if meas.is_empty():
        return 0.0
    if mollifier.time_support is None:
        raise InvalidParameterError("pair_measure needs a compactly supported mollifier")
    delta = mollifier.time_support[1]
    pos, w = meas.positions, meas.weights
    if fn_support is not None:
        sel = (pos >= fn_support[0] - delta) & (pos <= fn_support[1] + delta)
        pos, w = pos[sel], w[sel]
        if pos.size == 0:
            return 0.0
    offsets, theta_w = window_rule(mollifier, order)
    kink_arr = np.asarray(kinks, dtype=float)
    if kink_arr.size:
        dmin = np.min(np.abs(pos[:, None] - kink_arr[None, :]), axis=1)
        plain = dmin >= delta
    else:
        plain = np.ones(pos.size, dtype=bool)

    total = 0.0
    p, pw = pos[plain], w[plain]
    rows = max(1, _CHUNK // offsets.size)
    for i in range(0, p.size, rows):
        blk = p[i:i + rows]
        vals = fn((blk[:, None] + offsets[None, :]).ravel()).reshape(blk.size, offsets.size)
        contrib = vals @ theta_w
        bad = ~np.isfinite(contrib)
        if np.any(bad):
            raise NumericalConsistencyError(
                f"non-finite pairing value at atom index {int(np.flatnonzero(plain)[i + int(np.argmax(bad))])}")
        total += float(np.sum(pw[i:i + rows] * contrib))

    for i in np.flatnonzero(~plain):
        t0 = pos[i]
        cuts = np.unique(np.concatenate([
            [t0 - delta, t0 + delta],
            kink_arr[(kink_arr > t0 - delta) & (kink_arr < t0 + delta)]]))
        acc = 0.0
        for a, b in zip(cuts[:-1], cuts[1:]):
            nodes, ws = panel_nodes(a, b, 1, order)
            acc += float(np.sum(fn(nodes) * mollifier.time_eval(nodes - t0) * ws))
        if not math.isfinite(acc):
            raise NumericalConsistencyError(f"non-finite pairing value at atom index {int(i)}")
        total += w[i] * acc
    return total


@dataclass(frozen=True)
class EFReport:
    """Scalar outputs of one explicit-formula evaluation."""
    pair_freq: float
    pair_time: float
    D: float
    M: float
    E: float
    E_ratio: float
    h_l1: float
    hhat_l1: float
    e_direct: Optional[float]
    e_route_diff: Optional[float]
    omega_snap: float


def ef_difference(bundle: ProbeBundle, prime_atoms: AtomicMeasure,
                  z_atoms: AtomicMeasure, mollifier: Kernel, T: float,
                  omega: float, *, prime_density: Optional[GriddedDensity] = None,
                  zero_density: Optional[GriddedDensity] = None,
                  m_fn: Optional[Callable] = None,
                  n_fn: Optional[Callable] = None) -> EFReport:
    """Both pairings, the main term, and the error split D = M + E.

    M := int h_hat n - int h m instantiates the main/archimedean block so
    that E pairs the transform pair against the fluctuation fields exactly.
    The zero-side main cut |gamma| <= omega is snapped to a grid node of the
    zero density (when given) so the subtractive and the direct fluctuation
    routes cut identically; E is the exact bookkeeping difference D - M, the
    direct route is carried as a conditioning diagnostic.
    """
    from .measures import prime_main_density, zero_main_density
    m_fn = m_fn or prime_main_density
    n_fn = n_fn or zero_main_density
    hw = bundle.halfwidth

    pair_time = pair_measure(bundle.h_eval, prime_atoms, mollifier,
                             kinks=(-hw, hw), fn_support=(-hw, hw))
    pair_freq = pair_measure(bundle.hhat_eval, z_atoms, mollifier)
    D = pair_freq - pair_time

    omega_snap = omega
    if zero_density is not None:
        nodes = zero_density.grid.nodes()
        inside = nodes[nodes <= omega + 1e-12]
        if inside.size:
            omega_snap = float(inside[-1])

    # t-side main term: h vanishes beyond hw, so the [log 2, T] cut only
    # bites from below
    t_hi = min(T, hw)
    m_part = 0.0
    if t_hi > LOG2:
        tn, tw = panel_nodes(LOG2, t_hi, 512, order=16)
        m_part = float(np.sum(bundle.h_eval(tn) * m_fn(tn) * tw))
    # zero-side main term (even integrand, clamp makes it vanish below 2 pi)
    n_part = 0.0
    two_pi = 2.0 * math.pi
    if omega_snap > two_pi:
        n_pan = panels_for_oscillation(two_pi, omega_snap, hw, per_period=8.0,
                                       min_panels=64)
        gn, gw_ = panel_nodes(two_pi, omega_snap, n_pan, order=16)
        n_part = 2.0 * float(np.sum(bundle.hhat_eval(gn) * n_fn(gn) * gw_))
    M = n_part - m_part
    E = D - M

    e_direct = None
    route_diff = None
    if prime_density is not None and zero_density is not None:
        # each route term is a jump-free trapezoid: the measure pairing over
        # the whole padded grid minus the main term over its node-aligned cut
        tg = prime_density.grid.nodes()
        dt = prime_density.grid.spacing
        hvals = np.where(np.abs(tg) <= hw, bundle.h_eval(tg), 0.0)
        e_t = float(np.trapezoid(hvals * prime_density.values, dx=dt))
        sel_t = tg >= LOG2 - 1e-12
        e_t -= float(np.trapezoid((hvals * m_fn(np.maximum(tg, 1e-9)))[sel_t], dx=dt))
        gg = zero_density.grid.nodes()
        dg = zero_density.grid.spacing
        hhat_g = bundle.hhat_eval(gg)
        e_g = float(np.trapezoid(hhat_g * zero_density.values, dx=dg))
        sel_g = np.abs(gg) <= omega_snap + 1e-12
        e_g -= float(np.trapezoid((hhat_g * n_fn(gg))[sel_g], dx=dg))
        e_direct = e_g - e_t
        route_diff = abs(e_direct - E)

    log_t_sq = math.log(T) ** 2 if T > 1 else 1.0
    e_ratio = abs(E) / ((bundle.h_l1 + bundle.hhat_l1) * log_t_sq)
    return EFReport(pair_freq=pair_freq, pair_time=pair_time, D=D, M=M, E=E,
                    E_ratio=e_ratio, h_l1=bundle.h_l1, hhat_l1=bundle.hhat_l1,
                    e_direct=e_direct, e_route_diff=route_diff,
                    omega_snap=omega_snap)


def _tail_cos_over_square(a, R):
    """int_R^inf cos(a u)/u^2 du for a >= 0 (vectorized, exact via Si)."""
    a = np.asarray(a, dtype=float)
    si, _ = sici(a * R)
    return np.cos(a * R) / R - a * (0.5 * np.pi - si)


def check_two_way_fejer(lam: float, samples) -> float:
    """Max residual of 1 - F_hat(t) cos(g t) = int (1 - cos(xi t)) F(g - xi) dxi.

    The right side is Gauss-Legendre on a core |xi - g| <= R plus exact
    Si/Ci tails of F(u) = (1 - cos(lam u))/(pi lam u^2).
    """
    if not lam > 0:
        raise InvalidParameterError("lam must be positive")
    samples = np.asarray(samples, dtype=float).reshape(-1, 2)
    g, t = samples[:, 0], samples[:, 1]
    fejer = make_fejer(lam)
    R = max(2.0, 8.0 * math.pi / lam)
    tmax = float(np.max(np.abs(t))) if t.size else lam
    n_pan = panels_for_oscillation(-R, R, lam + tmax, per_period=8.0, min_panels=32)
    unodes, uweights = panel_nodes(-R, R, n_pan, order=16)
    fw = fejer.time_eval(unodes) * uweights

    tail_dc = (2.0 / (math.pi * lam)) * (1.0 / R - _tail_cos_over_square(lam, R))

    worst = 0.0
    rows = max(1, _CHUNK // unodes.size)
    for i in range(0, g.size, rows):
        gb, tb = g[i:i + rows], t[i:i + rows]
        core = ((1.0 - np.cos((gb[:, None] - unodes[None, :]) * tb[:, None])) @ fw)
        at = np.abs(tb)
        tail_osc = (2.0 * np.cos(gb * tb) / (math.pi * lam)) * (
            _tail_cos_over_square(at, R)
            - 0.5 * _tail_cos_over_square(np.abs(lam - at), R)
            - 0.5 * _tail_cos_over_square(lam + at, R))
        rhs = core + tail_dc - tail_osc
        lhs = 1.0 - fejer.freq_eval(tb) * np.cos(gb * tb)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def check_cosine_pairing(h_eval, halfwidth: float, meas: AtomicMeasure,
                         mollifier: Kernel) -> float:
    """Residual of the Fubini swap: pairing the cosine transform of h against
    a finite atomic measure both as a nested iterated integral and through
    the transform evaluator.

    The two sides use deliberately different panelizations.
    """
    if meas.is_empty():
        return 0.0
    xi_max = float(np.max(np.abs(meas.positions))) + mollifier.time_support[1] + 1.0
    route_a = hhat_direct_factory(h_eval, halfwidth, xi_max, per_period=5.0, order=12)
    route_b = hhat_direct_factory(h_eval, halfwidth, xi_max, per_period=7.0, order=16)

    offsets, theta_w = window_rule(mollifier, order=32)
    # left: nested quadrature (outer mollifier window, inner transform)
    xi_nodes = (meas.positions[:, None] + offsets[None, :]).ravel()
    q = route_a(xi_nodes).reshape(meas.count, offsets.size)
    lhs = float(np.sum(meas.weights * (q @ theta_w)))
    # right: transform evaluator paired via pair_measure
    rhs = pair_measure(route_b, meas, mollifier)
    return abs(lhs - rhs)


@dataclass(frozen=True)
class NormReport:
    """Measured L1 sizes and their claimed-shape ratios (report-only)."""
    h_l1: float
    hhat_l1: float
    h_l1_over_T: float
    hhat_l1_vs_1: float


def norm_report(bundle: ProbeBundle, T: float) -> NormReport:
    return NormReport(h_l1=bundle.h_l1, hhat_l1=bundle.hhat_l1,
                      h_l1_over_T=bundle.h_l1 / T, hhat_l1_vs_1=bundle.hhat_l1)


def transform_mass_identity(bundle: ProbeBundle) -> Tuple[float, float]:
    """(integral of h_hat, 2 pi h(0)) — equal by Fourier inversion at 0."""
    n_pan = panels_for_oscillation(0.0, bundle.xi_max, bundle.halfwidth,
                                   per_period=8.0, min_panels=64)
    xn, xw = panel_nodes(0.0, bundle.xi_max, n_pan, order=16)
    hv = bundle.hhat_eval(xn)
    total = 2.0 * float(np.sum(hv * xw))
    sel = xn > 0.9 * bundle.xi_max
    env = float(np.max(hv[sel] * xn[sel] ** 2)) if np.any(sel) else 0.0
    total += 2.0 * env / bundle.xi_max
    return total, 2.0 * math.pi * float(bundle.h_eval(0.0))
