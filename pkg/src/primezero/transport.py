"""Normalized transport cost, dual bounds, and an entropic unbalanced oracle.

The cost is c(gamma, t) = window(t) (1 - cos(gamma t)) >= 0. Three views of
the transport value are provided: the averaged linear upper bound from the
probe bundle, a clamped c-transform witness for the truncated linear dual,
and a KL-regularized Sinkhorn oracle on small discretizations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from .errors import (CoverageError, InvalidParameterError, ResourceLimitError)
from .explicit_formula import ProbeBundle, pair_measure
from .kernels import Kernel
from .measures import AtomicMeasure, GridSpec, LOG2

EVAL_CAP = int(4e8)
_BLOCK_ELEMENTS = 1 << 23


@dataclass(frozen=True)
class CostSpec:
    """Plateau-weighted synchronization cost window(t) * (1 - cos(gamma t))."""
    window: Kernel

    def eval(self, gamma, t):
        g = np.asarray(gamma, dtype=float)
        tt = np.asarray(t, dtype=float)
        return self.window.time_eval(tt) * (1.0 - np.cos(g * tt))

    def eval_outer(self, gamma, t):
        """Dense cost block, gamma rows by t columns."""
        g = np.asarray(gamma, dtype=float)
        tt = np.asarray(t, dtype=float)
        return self.window.time_eval(tt)[None, :] * (1.0 - np.cos(g[:, None] * tt[None, :]))


@dataclass(frozen=True)
class PotentialPair:
    """Nonpositive dual potentials sampled on uniform grids."""
    phi: np.ndarray
    psi: np.ndarray
    gamma_grid: GridSpec
    t_grid: GridSpec

    def __post_init__(self):
        if self.phi.shape != (self.gamma_grid.n,) or self.psi.shape != (self.t_grid.n,):
            raise InvalidParameterError("potential arrays must match their grids")
        if not (np.all(np.isfinite(self.phi)) and np.all(np.isfinite(self.psi))):
            raise InvalidParameterError("potentials must be finite")
        if np.any(self.phi > 1e-12) or np.any(self.psi > 1e-12):
            raise InvalidParameterError("potentials must be nonpositive")


@dataclass(frozen=True)
class TransportResult:
    """Primal/dual values of one entropic unbalanced solve."""
    primal: float
    dual: float
    gap: float
    marginal_kl_mu: float
    marginal_kl_nu: float
    iterations: int
    converged: bool


def default_potential_grids(T: float, omega: float, delta: float) -> Tuple[GridSpec, GridSpec]:
    """Grids resolving both oscillation scales: t-step <= min(delta/8,
    pi/(8 omega)), gamma-step <= 1/(8 T)."""
    t_step = min(delta / 8.0, math.pi / (8.0 * omega))
    g_step = 1.0 / (8.0 * T)
    t_grid = GridSpec.from_spacing(LOG2, T, t_step)
    n_half = int(math.ceil(omega / g_step))
    g_grid = GridSpec(-n_half * g_step, n_half * g_step, 2 * n_half + 1)
    return g_grid, t_grid


def _check_cap(n_rows: int, n_cols: int):
    if n_rows * n_cols > EVAL_CAP:
        raise ResourceLimitError(
            f"cost grid product {n_rows} x {n_cols} = {n_rows * n_cols:.2e} exceeds "
            f"the evaluation cap {EVAL_CAP:.0e}; coarsen the grids or raise the cap")


def feasibility_margin(pair: PotentialPair, cost: CostSpec) -> float:
    """min over the grid product of cost(gamma, t) - phi(gamma) - psi(t)."""
    g = pair.gamma_grid.nodes()
    t = pair.t_grid.nodes()
    _check_cap(g.size, t.size)
    margin = math.inf
    rows = max(1, _BLOCK_ELEMENTS // t.size)
    wvals = cost.window.time_eval(t)
    for i in range(0, g.size, rows):
        gb = g[i:i + rows]
        block = wvals[None, :] * (1.0 - np.cos(gb[:, None] * t[None, :]))
        block -= pair.phi[i:i + rows, None]
        block -= pair.psi[None, :]
        margin = min(margin, float(block.min()))
    return margin


def _check_atom_coverage(grid: GridSpec, atoms: AtomicMeasure, side: str):
    if atoms.is_empty():
        return
    if atoms.positions[0] < grid.lo - 1e-9 or atoms.positions[-1] > grid.hi + 1e-9:
        raise CoverageError(
            f"{side} atoms span [{atoms.positions[0]:.6g}, {atoms.positions[-1]:.6g}] "
            f"outside the potential grid [{grid.lo:.6g}, {grid.hi:.6g}]")


def dual_value(pair: PotentialPair, mu_atoms: AtomicMeasure,
               nu_atoms: AtomicMeasure, mollifier: Kernel) -> float:
    """-int phi d(mu * theta) - int psi d(nu * theta), linear interpolants.

    Atoms must lie inside the grids; the mollifier spill past the grid edges
    pairs against the constant continuation of the end values.
    """
    _check_atom_coverage(pair.gamma_grid, mu_atoms, "zero-side")
    _check_atom_coverage(pair.t_grid, nu_atoms, "prime-side")
    val = 0.0
    if not mu_atoms.is_empty():
        gnodes = pair.gamma_grid.nodes()
        val -= pair_measure(lambda x: np.interp(x, gnodes, pair.phi),
                            mu_atoms, mollifier)
    if not nu_atoms.is_empty():
        tnodes = pair.t_grid.nodes()
        val -= pair_measure(lambda x: np.interp(x, tnodes, pair.psi),
                            nu_atoms, mollifier)
    return val


def r1_upper_bound(bundle: ProbeBundle, mu_atoms: AtomicMeasure,
                   nu_atoms: AtomicMeasure, mollifier: Kernel) -> float:
    """Averaged linear bound: int h_hat d(mu) - int h d(nu) + S int window d(nu).

    Guaranteed to dominate feasible truncated duals only when the transform
    of h is nonnegative (bundle.hhat_nonneg); otherwise the value is still
    computed and callers should treat it as advisory.
    """
    hw = bundle.halfwidth
    pf = pair_measure(bundle.hhat_eval, mu_atoms, mollifier)
    pt = pair_measure(bundle.h_eval, nu_atoms, mollifier,
                      kinks=(-hw, hw), fn_support=(-hw, hw))
    wsup = bundle.window.time_support
    pw = pair_measure(bundle.window.time_eval, nu_atoms, mollifier,
                      fn_support=wsup)
    return pf - pt + bundle.S * pw


def c_transform_ascent(cost: CostSpec, mu_atoms: AtomicMeasure,
                       nu_atoms: AtomicMeasure, mollifier: Kernel,
                       iters: int, *, gamma_grid: Optional[GridSpec] = None,
                       t_grid: Optional[GridSpec] = None,
                       T: Optional[float] = None, omega: Optional[float] = None,
                       delta: Optional[float] = None):
    """Alternating clamped c-transform updates from (0, 0).

    phi(g) <- min(0, min_t [cost(g,t) - psi(t)]) and symmetrically; every
    iterate is feasible by construction and the discrete dual value is
    nondecreasing. With a nonnegative cost and nonpositive potentials the
    update can never leave 0, so (0, 0) is the fixed point the truncated
    dual admits; the history records it faithfully.
    """
    if iters < 1:
        raise InvalidParameterError("iters must be >= 1")
    if gamma_grid is None or t_grid is None:
        if T is None or omega is None or delta is None:
            raise InvalidParameterError("pass grids or (T, omega, delta)")
        gamma_grid, t_grid = default_potential_grids(T, omega, delta)
    g = gamma_grid.nodes()
    t = t_grid.nodes()
    _check_cap(g.size, t.size)

    # bin atom masses to nearest grid nodes for the discrete objective
    mu_w = np.zeros(g.size)
    if not mu_atoms.is_empty():
        idx = np.clip(np.rint((mu_atoms.positions - gamma_grid.lo) / gamma_grid.spacing),
                      0, g.size - 1).astype(np.int64)
        mu_w = np.bincount(idx, weights=mu_atoms.weights, minlength=g.size)
    nu_w = np.zeros(t.size)
    if not nu_atoms.is_empty():
        idx = np.clip(np.rint((nu_atoms.positions - t_grid.lo) / t_grid.spacing),
                      0, t.size - 1).astype(np.int64)
        nu_w = np.bincount(idx, weights=nu_atoms.weights, minlength=t.size)

    wvals = cost.window.time_eval(t)
    phi = np.zeros(g.size)
    psi = np.zeros(t.size)
    history = []
    rows = max(1, _BLOCK_ELEMENTS // t.size)

    def min_over_t(psi_cur):
        out = np.empty(g.size)
        for i in range(0, g.size, rows):
            gb = g[i:i + rows]
            block = wvals[None, :] * (1.0 - np.cos(gb[:, None] * t[None, :]))
            out[i:i + rows] = np.min(block - psi_cur[None, :], axis=1)
        return out

    def min_over_g(phi_cur):
        out = np.full(t.size, np.inf)
        for i in range(0, g.size, rows):
            gb = g[i:i + rows]
            block = wvals[None, :] * (1.0 - np.cos(gb[:, None] * t[None, :]))
            out = np.minimum(out, np.min(block - phi_cur[i:i + rows, None], axis=0))
        return out

    for _ in range(iters):
        phi = np.minimum(0.0, min_over_t(psi))
        psi = np.minimum(0.0, min_over_g(phi))
        history.append(-float(np.sum(phi * mu_w)) - float(np.sum(psi * nu_w)))
    pair = PotentialPair(phi=phi, psi=psi, gamma_grid=gamma_grid, t_grid=t_grid)
    return pair, np.asarray(history)


def _kl(p, q, mask_tol: float = 0.0):
    """Unnormalized KL sum p log(p/q) - p + q over positive entries."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    out = np.where(p > 0, p * (np.log(np.where(p > 0, p, 1.0))
                               - np.log(np.where(q > 0, q, 1.0))) - p, 0.0)
    return float(np.sum(out + q))


def sinkhorn_unbalanced(cost: CostSpec, gamma_nodes, mu_masses, t_nodes,
                        nu_masses, eps: float, rho: float,
                        max_iters: int = 10000, tol: float = 1e-9) -> TransportResult:
    """Log-domain scaling iterations for the entropic unbalanced problem

        min_{plan >= 0} <cost, pi> + eps KL(pi | mu x nu)
                        + rho KL(pi 1 | mu) + rho KL(pi^T 1 | nu),

    scaling exponent rho/(rho + eps); stops when the log-scalings move less
    than tol in sup norm. Non-convergence returns converged=False with the
    last iterate rather than raising.
    """
    if not (eps > 0 and rho > 0):
        raise InvalidParameterError("eps and rho must be positive")
    g = np.asarray(gamma_nodes, dtype=float)
    t = np.asarray(t_nodes, dtype=float)
    mu = np.asarray(mu_masses, dtype=float)
    nu = np.asarray(nu_masses, dtype=float)
    if g.size > 10000 or t.size > 10000:
        raise ResourceLimitError("sinkhorn oracle is limited to 1e4 nodes per side")
    keep_g = mu > 0
    keep_t = nu > 0
    g, mu = g[keep_g], mu[keep_g]
    t, nu = t[keep_t], nu[keep_t]
    if g.size == 0 or t.size == 0:
        # one marginal vanishes: optimal plan is 0
        primal = rho * (_kl(np.zeros_like(mu), mu) + _kl(np.zeros_like(nu), nu))
        return TransportResult(primal, primal, 0.0, _kl(np.zeros_like(mu), mu),
                               _kl(np.zeros_like(nu), nu), 0, True)

    C = cost.eval_outer(g, t)
    log_mu = np.log(mu)
    log_nu = np.log(nu)
    fi = rho / (rho + eps)
    f = np.zeros(g.size)
    h = np.zeros(t.size)
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        f_prev, h_prev = f, h
        f = -eps * fi * logsumexp((h[None, :] - C) / eps + log_nu[None, :], axis=1)
        h = -eps * fi * logsumexp((f[:, None] - C) / eps + log_mu[:, None], axis=0)
        move = max(float(np.max(np.abs(f - f_prev))), float(np.max(np.abs(h - h_prev)))) / eps
        if move < tol:
            converged = True
            break

    log_plan = (f[:, None] + h[None, :] - C) / eps + log_mu[:, None] + log_nu[None, :]
    plan = np.exp(log_plan)
    row = plan.sum(axis=1)
    col = plan.sum(axis=0)
    cost_term = float(np.sum(plan * C))
    kl_joint = _kl(plan.ravel(), np.outer(mu, nu).ravel())
    kl_mu = _kl(row, mu)
    kl_nu = _kl(col, nu)
    primal = cost_term + eps * kl_joint + rho * (kl_mu + kl_nu)
    dual = (-rho * float(np.sum(mu * (np.exp(-f / rho) - 1.0)))
            - rho * float(np.sum(nu * (np.exp(-h / rho) - 1.0)))
            - eps * float(np.sum(np.outer(mu, nu) * (np.exp((f[:, None] + h[None, :] - C) / eps) - 1.0))))
    return TransportResult(primal=primal, dual=dual, gap=primal - dual,
                           marginal_kl_mu=kl_mu, marginal_kl_nu=kl_nu,
                           iterations=it, converged=converged)


def one_node_closed_form(cost_value: float, mu_mass: float, nu_mass: float,
                         eps: float, rho: float) -> Tuple[float, float]:
    """Exact optimum of the one-node-per-side problem.

    Stationarity of c p + eps(p log(p/(ab)) - p + ab) + rho(p log(p/a) - p + a)
    + rho(p log(p/b) - p + b) gives
    p* = (ab)^{(eps+rho)/(eps+2rho)} exp(-c/(eps+2rho)) (a = b = masses).
    Returns (p*, primal value at p*).
    """
    a, b = mu_mass, nu_mass
    p = (a * b) ** ((eps + rho) / (eps + 2.0 * rho)) * math.exp(-cost_value / (eps + 2.0 * rho))
    primal = (cost_value * p
              + eps * (p * math.log(p / (a * b)) - p + a * b)
              + rho * (p * math.log(p / a) - p + a)
              + rho * (p * math.log(p / b) - p + b))
    return p, primal
