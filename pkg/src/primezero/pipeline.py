"""End-to-end orchestration: per-scale pipeline, sweep, growth fit, emission."""
from __future__ import annotations

import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from .calibration import calibrate
from .errors import (CalibrationError, ConfigError, CoverageError,
                     PrimeZeroError, VerificationError)
from .explicit_formula import (EFReport, build_bundle, check_cosine_pairing,
                               check_two_way_fejer, ef_difference, pair_measure)
from .kernels import make_mollifier, make_probe, make_window
from .measures import (LOG2, AtomicMeasure, GriddedDensity, GridSpec,
                       fluctuation_report, fluctuations, main_densities,
                       prime_power_atoms, smooth_measure, DEFAULT_T_CAP)
from .transport import (CostSpec, c_transform_ascent, dual_value,
                        r1_upper_bound, sinkhorn_unbalanced)
from . import zerodata

ROW_FIELDS = (
    "T", "Delta", "Omega", "S_final", "c_star", "h_l1", "hhat_l1",
    "pair_freq", "pair_time", "D", "M", "E", "E_ratio", "r1_bound",
    "dual_witness", "sinkhorn_primal", "sinkhorn_gap", "a_l1", "b_l1",
    "lemma2_residual", "lemma3_residual", "runtime_ms",
)

ETA_FAMILIES = {"triangle": "triangle_pd", "triangle_pd": "triangle_pd",
                "tukey": "tukey", "selberg": "selberg"}


@dataclass(frozen=True)
class RunConfig:
    """Sweep configuration; defaults reproduce the reference desk-scale run."""
    t_list: Tuple[float, ...] = (8.0, 10.0, 12.0, 14.0, 16.0)
    alpha: float = 0.5
    kappa: float = 10.0
    eta_family: str = "triangle"
    eta_param: Optional[float] = None
    beta_scale: float = 1.0
    xi0_ladder: Tuple[float, ...] = (0.5, 1.0, 2.0, 4.0)   # multiples of 1/T
    epsilon: float = 0.5
    rho: float = 5.0
    sinkhorn_iters: int = 10000
    sinkhorn_tol: float = 1e-9
    sinkhorn_nodes: int = 512
    zeros_source: str = "builtin"
    zeros_path: Optional[str] = None
    grid_dt: Optional[float] = None
    grid_dgamma: Optional[float] = None
    ascent_iters: int = 4
    calibration: str = "attempt"   # attempt | require | off
    out_path: Optional[str] = None
    out_format: str = "csv"
    threads: int = 1
    seed: int = 0
    t_cap: float = DEFAULT_T_CAP
    timing: bool = False

    def validate(self) -> "RunConfig":
        if not self.t_list:
            raise ConfigError("t_list", "must be nonempty")
        if any(not t > 0 for t in self.t_list):
            raise ConfigError("t_list", "entries must be positive")
        if list(self.t_list) != sorted(self.t_list):
            raise ConfigError("t_list", "entries must ascend")
        if any(t > self.t_cap for t in self.t_list):
            raise ConfigError("t_list", f"entries must not exceed t_cap = {self.t_cap}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha", f"must lie in (0, 1), got {self.alpha}")
        if not self.kappa > 0:
            raise ConfigError("kappa", f"must be positive, got {self.kappa}")
        if self.eta_family not in ETA_FAMILIES:
            raise ConfigError("eta_family",
                              f"must be one of {sorted(set(ETA_FAMILIES))}, got {self.eta_family!r}")
        if not self.beta_scale > 0:
            raise ConfigError("beta_scale", "must be positive")
        if not all(m > 0 for m in self.xi0_ladder):
            raise ConfigError("xi0_ladder", "multipliers must be positive")
        if not self.epsilon > 0:
            raise ConfigError("epsilon", "must be positive")
        if not self.rho > 0:
            raise ConfigError("rho", "must be positive")
        if self.sinkhorn_iters < 1:
            raise ConfigError("sinkhorn_iters", "must be >= 1")
        if not 2 <= self.sinkhorn_nodes <= 10000:
            raise ConfigError("sinkhorn_nodes", "must lie in [2, 10000]")
        if self.zeros_source not in ("builtin", "locate", "file"):
            raise ConfigError("zeros_source", f"unknown source {self.zeros_source!r}")
        if self.zeros_source == "file" and not self.zeros_path:
            raise ConfigError("zeros_path", "required when zeros_source is 'file'")
        if self.grid_dt is not None and not self.grid_dt > 0:
            raise ConfigError("grid_dt", "must be positive")
        if self.grid_dgamma is not None and not self.grid_dgamma > 0:
            raise ConfigError("grid_dgamma", "must be positive")
        if self.calibration not in ("attempt", "require", "off"):
            raise ConfigError("calibration", f"unknown mode {self.calibration!r}")
        if self.out_format not in ("csv", "json", "both"):
            raise ConfigError("out_format", f"must be csv, json or both, got {self.out_format!r}")
        if self.threads < 1:
            raise ConfigError("threads", "must be >= 1")
        return self


def load_zero_table(cfg: RunConfig) -> zerodata.ZeroTable:
    needed = cfg.kappa * max(cfg.t_list)
    if cfg.zeros_source == "builtin":
        table = zerodata.builtin_zero_table()
    elif cfg.zeros_source == "locate":
        table = zerodata.locate_zeros(needed + 1.0)
    else:
        with open(cfg.zeros_path, "r", encoding="utf-8") as fh:
            table = zerodata.parse_zero_table(fh)
        table = zerodata.verify_table(table, min(needed + 1.0, table.coverage))
    if table.verified_up_to < needed:
        raise CoverageError(
            f"zero coverage {table.verified_up_to:.6g} below kappa * max(T) = {needed:.6g}")
    return table


def _smoothing_grids(T, delta, omega, cfg, prime_atoms):
    dt = cfg.grid_dt if cfg.grid_dt is not None else delta / 64.0
    dg = cfg.grid_dgamma if cfg.grid_dgamma is not None else delta / 64.0
    # t-grid anchored so log 2 is exactly a node
    pad_lo = int(math.ceil((delta + 2 * dt) / dt))
    hi_target = (prime_atoms.positions[-1] if not prime_atoms.is_empty() else T) + delta + 2 * dt
    n_hi = int(math.ceil((hi_target - LOG2) / dt))
    t_grid = GridSpec(LOG2 - pad_lo * dt, LOG2 + n_hi * dt, pad_lo + n_hi + 1)
    # gamma-grid symmetric with a node at 0
    half = int(math.ceil((omega + delta + 2 * dg) / dg))
    g_grid = GridSpec(-half * dg, half * dg, 2 * half + 1)
    return t_grid, g_grid


def _spill_mass(z_atoms: AtomicMeasure, mollifier, omega: float) -> float:
    """Mollified mass of zero atoms spilling past |gamma| = omega."""
    if z_atoms.is_empty():
        return 0.0
    delta = mollifier.time_support[1]
    from .quadrature import panel_nodes
    spill = 0.0
    for p, w in zip(z_atoms.positions, z_atoms.weights):
        gap = omega - abs(p)
        if gap < delta:
            nodes, ws = panel_nodes(gap, delta, 4, order=16)
            spill += w * float(np.sum(mollifier.time_eval(nodes) * ws))
    return spill


def run_pipeline(cfg: RunConfig, T: float, table: zerodata.ZeroTable):
    """One full per-scale run; returns (row dict, extras dict, advisories)."""
    start = time.perf_counter()
    advisories = []
    delta = T ** (-cfg.alpha)
    lam = T ** cfg.alpha
    omega = cfg.kappa * T

    mollifier = make_mollifier(delta)
    nu_atoms = prime_power_atoms(T, cfg.t_cap)
    mu_atoms = zerodata.zero_atoms(table, omega)

    t_grid, g_grid = _smoothing_grids(T, delta, omega, cfg, nu_atoms)
    nu_density = smooth_measure(nu_atoms, mollifier, t_grid)
    mu_density = smooth_measure(mu_atoms, mollifier, g_grid)
    for dens, atoms, side in ((nu_density, nu_atoms, "prime"),
                              (mu_density, mu_atoms, "zero")):
        if atoms.total_mass > 0:
            rel = abs(dens.integral() - atoms.total_mass) / atoms.total_mass
            if rel > 1e-6:
                raise VerificationError(
                    f"{side}-side smoothing lost mass: relative error {rel:.3e}")

    m_fn, n_fn = main_densities(T, omega)
    a_fluct = fluctuations(nu_density, lambda t: m_fn(np.maximum(t, 1e-12)))
    b_fluct = fluctuations(mu_density, n_fn)
    fluct = fluctuation_report(a_fluct, b_fluct, T, omega, cfg.alpha)

    window = make_window(ETA_FAMILIES[cfg.eta_family], T, cfg.eta_param)
    probe = make_probe(T, cfg.beta_scale)
    c_star = 0.0
    s_final = 1.0 / T
    if cfg.calibration != "off":
        try:
            result, probe = calibrate(probe, window, lam, m_fn, T,
                                      xi0_ladder=[m / T for m in cfg.xi0_ladder])
            c_star, s_final = result.c_star, result.S_final
        except CalibrationError:
            if cfg.calibration == "require":
                raise
            advisories.append("calibration failed; proceeding with the uncalibrated probe")

    bundle = build_bundle(probe, window, lam, xi_max=omega + delta + 1.5)
    if not bundle.hhat_nonneg:
        advisories.append(
            f"window family {cfg.eta_family} has a signed transform; the averaged "
            "linear bound is advisory only")

    ef = ef_difference(bundle, nu_atoms, mu_atoms, mollifier, T, omega,
                       prime_density=nu_density, zero_density=mu_density,
                       m_fn=m_fn, n_fn=n_fn)
    if ef.D - ef.M - ef.E != 0.0:
        raise VerificationError("explicit-formula bookkeeping identity violated")

    r1 = r1_upper_bound(bundle, mu_atoms, nu_atoms, mollifier)
    cost = CostSpec(window)
    witness, history = c_transform_ascent(cost, mu_atoms, nu_atoms, mollifier,
                                          cfg.ascent_iters, T=T, omega=omega,
                                          delta=delta)
    if np.any(np.diff(history) < -1e-12):
        raise VerificationError("c-transform ascent history is not monotone")
    dual_w = dual_value(witness, mu_atoms, nu_atoms, mollifier)

    # entropic oracle on a binned discretization
    nt = cfg.sinkhorn_nodes
    t_nodes = np.linspace(LOG2, T, nt)
    g_nodes = np.linspace(-omega, omega, nt + 1)
    nu_disc = np.zeros(nt)
    if not nu_atoms.is_empty():
        idx = np.clip(np.rint((nu_atoms.positions - LOG2) / (t_nodes[1] - t_nodes[0])),
                      0, nt - 1).astype(np.int64)
        nu_disc = np.bincount(idx, weights=nu_atoms.weights, minlength=nt)
    mu_disc = np.zeros(nt + 1)
    if not mu_atoms.is_empty():
        idx = np.clip(np.rint((mu_atoms.positions + omega) / (g_nodes[1] - g_nodes[0])),
                      0, nt).astype(np.int64)
        mu_disc = np.bincount(idx, weights=mu_atoms.weights, minlength=nt + 1)
    sink = sinkhorn_unbalanced(cost, g_nodes, mu_disc, t_nodes, nu_disc,
                               eps=cfg.epsilon, rho=cfg.rho,
                               max_iters=cfg.sinkhorn_iters, tol=cfg.sinkhorn_tol)
    if not sink.converged:
        advisories.append(f"sinkhorn oracle hit the iteration cap ({sink.iterations})")
    if sink.gap < -1e-8 * (1.0 + abs(sink.primal)):
        raise VerificationError(f"sinkhorn weak-duality gap {sink.gap:.3e} is negative")

    rng = np.random.default_rng(cfg.seed + int(round(1000 * T)))
    samples = np.column_stack([rng.uniform(-50.0, 50.0, 256),
                               rng.uniform(-lam, lam, 256)])
    lemma2 = check_two_way_fejer(lam, samples)
    small = mu_atoms if (not mu_atoms.is_empty() and mu_atoms.count <= 200) else (
        AtomicMeasure.build(mu_atoms.positions[:200], mu_atoms.weights[:200])
        if not mu_atoms.is_empty() else AtomicMeasure.build([15.0], [1.0]))
    lemma3 = check_cosine_pairing(bundle.h_eval, bundle.halfwidth, small, mollifier)

    runtime_ms = int(round(1000.0 * (time.perf_counter() - start))) if cfg.timing else 0
    row = {
        "T": T, "Delta": delta, "Omega": omega, "S_final": s_final,
        "c_star": c_star, "h_l1": bundle.h_l1, "hhat_l1": bundle.hhat_l1,
        "pair_freq": ef.pair_freq, "pair_time": ef.pair_time, "D": ef.D,
        "M": ef.M, "E": ef.E, "E_ratio": ef.E_ratio, "r1_bound": r1,
        "dual_witness": dual_w, "sinkhorn_primal": sink.primal,
        "sinkhorn_gap": sink.gap, "a_l1": fluct.a_l1, "b_l1": fluct.b_l1,
        "lemma2_residual": lemma2, "lemma3_residual": lemma3,
        "runtime_ms": runtime_ms,
    }
    for key, val in row.items():
        if key != "runtime_ms" and not math.isfinite(val):
            raise VerificationError(f"row field {key} is not finite at T = {T}")
    extras = {
        "e_direct": ef.e_direct,
        "e_route_diff": ef.e_route_diff,
        "omega_snap": ef.omega_snap,
        "lemma_ratio_a": fluct.lemma_ratio_a,
        "lemma_ratio_b": fluct.lemma_ratio_b,
        "zero_mass_spill": _spill_mass(mu_atoms, mollifier, omega),
        "nu_integral_full": nu_density.integral(),
        "nu_integral_0_T": nu_density.integral_between(t_grid.lo, T),
        "sinkhorn_iterations": sink.iterations,
        "sinkhorn_converged": sink.converged,
        "sinkhorn_marginal_kl_mu": sink.marginal_kl_mu,
        "sinkhorn_marginal_kl_nu": sink.marginal_kl_nu,
        "ascent_history": [float(v) for v in history],
    }
    return row, extras, advisories


def growth_fit(rows: Sequence[dict]) -> Optional[dict]:
    """Least-squares constant (through the origin) of sinkhorn_primal against
    T log^2 T, with the pointwise ratio band; needs >= 3 rows."""
    if len(rows) < 3:
        return None
    x = np.array([r["T"] * math.log(r["T"]) ** 2 for r in rows])
    v = np.array([r["sinkhorn_primal"] for r in rows])
    c = float(np.sum(v * x) / np.sum(x * x))
    ratios = v / x
    return {"C": c, "ratio_min": float(ratios.min()), "ratio_max": float(ratios.max()),
            "value_field": "sinkhorn_primal"}


@dataclass(frozen=True)
class SweepResult:
    rows: Tuple[dict, ...]
    extras: Tuple[dict, ...]
    fit: Optional[dict]
    advisories: Tuple[str, ...]
    errors: Tuple[str, ...]


def _run_one(args):
    cfg, T, table = args
    return run_pipeline(cfg, T, table)


def run_sweep(cfg: RunConfig, table: Optional[zerodata.ZeroTable] = None) -> SweepResult:
    """Rows for every T (parallel when cfg.threads > 1), fit, diagnostics.

    A row that raises aborts that row only; its error is carried in the
    result and the sweep continues.
    """
    cfg = cfg.validate()
    if table is None:
        table = load_zero_table(cfg)
    rows, extras, advisories, errors = [], [], [], []
    jobs = [(cfg, T, table) for T in cfg.t_list]
    if cfg.threads > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            outcomes = []
            for job in jobs:
                outcomes.append(pool.submit(_run_one, job))
            results = []
            for T, fut in zip(cfg.t_list, outcomes):
                try:
                    results.append(fut.result())
                except PrimeZeroError as exc:
                    results.append(exc)
    else:
        results = []
        for job in jobs:
            try:
                results.append(_run_one(job))
            except PrimeZeroError as exc:
                results.append(exc)
    for T, res in zip(cfg.t_list, results):
        if isinstance(res, Exception):
            errors.append(f"T={T:g}: {type(res).__name__}: {res}")
            continue
        row, extra, adv = res
        rows.append(row)
        extras.append(extra)
        advisories.extend(f"T={T:g}: {a}" for a in adv)
    return SweepResult(rows=tuple(rows), extras=tuple(extras),
                       fit=growth_fit(rows), advisories=tuple(advisories),
                       errors=tuple(errors))


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def to_csv(result: SweepResult) -> str:
    """CSV with the exact row field names; '.' decimal, no locale."""
    out = io.StringIO()
    out.write(",".join(ROW_FIELDS) + "\n")
    for row in result.rows:
        out.write(",".join(_fmt(row[k]) for k in ROW_FIELDS) + "\n")
    return out.getvalue()


def to_json(result: SweepResult, cfg: RunConfig) -> str:
    meta = {
        "config": {k: (list(v) if isinstance(v, tuple) else v)
                   for k, v in vars(cfg).items()},
        "policies": {
            "zero_main_density": "O(1/gamma) correction omitted; clamped at 0 below 2 pi",
            "zero_multiplicity": "weight 1 per ordinate (simple zeros assumed)",
            "lemma_ratio_constant": "c = 1 in the decay-shape denominators",
            "fit_value": "sinkhorn_primal",
        },
        "row_extras": list(result.extras),
        "advisories": list(result.advisories),
        "errors": list(result.errors),
    }
    doc = {"rows": list(result.rows), "fit": result.fit, "meta": meta}
    return json.dumps(doc, indent=2) + "\n"


def emit(result: SweepResult, cfg: RunConfig) -> Tuple[str, ...]:
    """Write the configured output files; returns the paths written."""
    if cfg.out_path is None:
        return ()
    written = []
    base = cfg.out_path
    if cfg.out_format in ("csv", "both"):
        path = base if base.endswith(".csv") or cfg.out_format == "csv" else base + ".csv"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(to_csv(result))
        written.append(path)
    if cfg.out_format in ("json", "both"):
        path = base if cfg.out_format == "json" else (
            base[:-4] + ".json" if base.endswith(".csv") else base + ".json")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(to_json(result, cfg))
        written.append(path)
    return tuple(written)
