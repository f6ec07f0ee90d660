"""Zeta-zero ordinates: table ingestion, internal locator, counting, atoms.

Two independent sources are kept deliberately separate: the packaged table of
published-quality ordinates, and an internal locator that scans a critical
line evaluator for sign changes. Tables are only trusted up to the height at
which the locator has verified them.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Union

import numpy as np
from scipy.special import bernoulli

from .errors import (CoverageError, InvalidParameterError, TableFormatError,
                     VerificationError)
from .measures import AtomicMeasure

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
_BERNOULLI = bernoulli(64)
_EM_TERMS = 14
_LOCATE_MAX = 1.0e4


@dataclass(frozen=True)
class ZeroTable:
    """Ascending positive zero ordinates with provenance and verified height."""
    ordinates: np.ndarray
    source: str
    verified_up_to: float

    @staticmethod
    def build(ordinates, source: str, verified_up_to: float = 0.0) -> "ZeroTable":
        arr = np.asarray(ordinates, dtype=float)
        if arr.ndim != 1:
            raise InvalidParameterError("ordinates must be a 1-D array")
        if arr.size:
            if np.any(arr <= 0):
                raise InvalidParameterError("ordinates must be positive")
            if np.any(np.diff(arr) <= 0):
                raise InvalidParameterError("ordinates must be strictly ascending")
            if not (14.0 < arr[0] < 15.0):
                raise InvalidParameterError(
                    f"first ordinate {arr[0]} outside (14, 15); not a zeta zero table")
        arr.setflags(write=False)
        return ZeroTable(arr, source, float(verified_up_to))

    def count_up_to(self, gamma: float) -> int:
        return int(np.searchsorted(self.ordinates, gamma, side="right"))

    @property
    def coverage(self) -> float:
        return float(self.ordinates[-1]) if self.ordinates.size else 0.0


def parse_zero_table(stream: Union[str, Iterable[str]]) -> ZeroTable:
    """Parse the zero-table text format.

    UTF-8 text, one positive decimal ordinate per line in ascending order;
    '#' starts a comment to end-of-line; blank lines ignored; no header.
    """
    if hasattr(stream, "read"):
        lines = stream.read().splitlines()
    elif isinstance(stream, str):
        lines = stream.splitlines()
    else:
        lines = [str(ln) for ln in stream]
    vals = []
    prev = None
    for lineno, raw in enumerate(lines, start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        try:
            v = float(text)
        except ValueError:
            raise TableFormatError(f"line {lineno}: not a decimal ordinate: {text!r}",
                                   line_number=lineno)
        if not math.isfinite(v) or v <= 0:
            raise TableFormatError(f"line {lineno}: ordinate must be a positive finite "
                                   f"number, got {text!r}", line_number=lineno)
        if prev is not None:
            if v <= prev - 1e-9:
                raise TableFormatError(f"line {lineno}: ordinates not ascending "
                                       f"({v} after {prev})", line_number=lineno)
            if abs(v - prev) <= 1e-9:
                raise TableFormatError(f"line {lineno}: duplicate ordinate {v}",
                                       line_number=lineno)
        vals.append(v)
        prev = v
    if not vals:
        raise TableFormatError("empty zero table", line_number=None)
    return ZeroTable.build(np.array(vals), source="file")


def builtin_zero_table() -> ZeroTable:
    """Packaged table of the first 650 zero ordinates (heights <= ~1001)."""
    text = resources.files("primezero").joinpath("data/zeta_zeros.txt").read_text("utf-8")
    table = parse_zero_table(text)
    return ZeroTable.build(table.ordinates, source="builtin",
                           verified_up_to=table.coverage)


def rs_theta(t):
    """Riemann-Siegel phase from the Stirling expansion (three correction terms)."""
    t = np.asarray(t, dtype=float)
    return (t / 2.0) * np.log(t / TWO_PI) - t / 2.0 - np.pi / 8.0 \
        + 1.0 / (48.0 * t) + 7.0 / (5760.0 * t ** 3) + 31.0 / (80640.0 * t ** 5)


def riemann_siegel_Z(t):
    """Riemann-Siegel Z with the main sum and first correction term.

    Z(t) = 2 sum_{n <= sqrt(t/2pi)} cos(theta(t) - t log n)/sqrt(n)
           + (-1)^{N-1} (t/2pi)^{-1/4} C0(p),
    C0(p) = cos(2 pi (p^2 - p - 1/16))/cos(2 pi p), p the fractional part.

    Sign-determination accuracy (absolute error ~1e-3 near t=15, shrinking
    like t^{-3/4}); use the locator's evaluator for magnitudes.
    """
    arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(arr < 2.0):
        raise InvalidParameterError("riemann_siegel_Z requires t >= 2")
    a = np.sqrt(arr / TWO_PI)
    N = a.astype(np.int64)
    p = a - N
    th = rs_theta(arr)
    nmax = int(N.max()) if arr.size else 0
    out = np.zeros_like(arr)
    if nmax > 0:
        n = np.arange(1, nmax + 1, dtype=float)
        terms = np.cos(th[:, None] - arr[:, None] * np.log(n)[None, :]) / np.sqrt(n)[None, :]
        mask = n[None, :] <= N[:, None]
        out = 2.0 * np.sum(terms * mask, axis=1)
    num = np.cos(2.0 * np.pi * (p * p - p - 1.0 / 16.0))
    den = np.cos(2.0 * np.pi * p)
    # C0 has removable singularities at p = 1/4, 3/4 with limit 1/2
    C0 = np.where(np.abs(den) < 1e-6, 0.5, num / np.where(np.abs(den) < 1e-6, 1.0, den))
    out = out + (-1.0) ** (N - 1) * (arr / TWO_PI) ** (-0.25) * C0
    return float(out[0]) if np.ndim(t) == 0 else out


def _zeta_half_line(t: np.ndarray) -> np.ndarray:
    """zeta(1/2 + it) by Euler-Maclaurin, abs error <~ 1e-11 up to t = 1e4."""
    t = np.asarray(t, dtype=float)
    s = 0.5 + 1j * t
    N = max(16, int(math.ceil(2.2 * float(np.max(np.abs(t))) / TWO_PI)) + 8)
    n = np.arange(1, N, dtype=float)
    val = np.sum(n[None, :] ** (-s[:, None]), axis=1)
    val += 0.5 * N ** (-s) + N ** (1.0 - s) / (s - 1.0)
    rising = s.copy()
    for k in range(1, _EM_TERMS + 1):
        val += (_BERNOULLI[2 * k] / math.factorial(2 * k)) * rising * N ** (-s - 2 * k + 1)
        rising = rising * (s + 2 * k - 1) * (s + 2 * k)
    return val


def z_function(t):
    """Accurate real Z(t) = e^{i theta(t)} zeta(1/2 + it); vectorized, chunked."""
    arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(arr < 2.0):
        raise InvalidParameterError("z_function requires t >= 2")
    out = np.empty_like(arr)
    order = np.argsort(arr, kind="stable")
    sorted_t = arr[order]
    chunk = 2048
    pieces = []
    for i in range(0, sorted_t.size, chunk):
        blk = sorted_t[i:i + chunk]
        zeta = _zeta_half_line(blk)
        pieces.append((np.exp(1j * rs_theta(blk)) * zeta).real)
    out[order] = np.concatenate(pieces) if pieces else np.empty(0)
    return float(out[0]) if np.ndim(t) == 0 else out


def zero_count_N(gamma: float) -> float:
    """Smooth Riemann-von Mangoldt count N(G) = (G/2pi)log(G/2pi) - G/2pi + 7/8."""
    if not gamma > TWO_PI:
        raise InvalidParameterError(f"zero_count_N requires gamma > 2 pi, got {gamma}")
    x = gamma / TWO_PI
    return x * math.log(x) - x + 7.0 / 8.0


def locate_zeros(gamma_max: float, step: float = 0.05, refine_tol: float = 1e-9) -> ZeroTable:
    """Find all zero ordinates below gamma_max by sign-change bisection.

    Scans the accurate Z on a grid of the given step, bisects each bracket to
    refine_tol, and cross-checks the count against the smooth zero count;
    a discrepancy beyond 1 zero raises (suspected missed zeros). Gram-point
    anomalies (suspiciously close pairs) are logged for manual review.
    """
    if not (2.0 < gamma_max <= _LOCATE_MAX):
        raise InvalidParameterError(
            f"locate_zeros supports 2 < gamma_max <= {_LOCATE_MAX:g}, got {gamma_max}")
    grid = np.arange(2.0, gamma_max + step, step)
    grid = grid[grid <= gamma_max]
    vals = z_function(grid)
    sign = np.sign(vals)
    flips = np.flatnonzero(sign[:-1] * sign[1:] < 0)
    lo = grid[flips].copy()
    hi = grid[flips + 1].copy()
    flo = vals[flips].copy()
    n_steps = int(math.ceil(math.log2(step / refine_tol))) + 1
    for _ in range(n_steps):
        mid = 0.5 * (lo + hi)
        fmid = z_function(mid) if mid.size else mid
        left = flo * fmid <= 0
        hi = np.where(left, mid, hi)
        lo = np.where(left, lo, mid)
        flo = np.where(left, flo, fmid)
    ordinates = 0.5 * (lo + hi)
    ordinates = ordinates[ordinates <= gamma_max]
    count = ordinates.size
    if gamma_max > TWO_PI:
        expected = zero_count_N(gamma_max)
        if abs(count - round(expected)) > 1:
            raise VerificationError(
                f"located {count} zeros below {gamma_max} but the smooth count "
                f"predicts {expected:.2f}; suspected missed zeros")
        if abs(count - round(expected)) == 1:
            log.warning("locate_zeros: count %d differs from rounded smooth count %d "
                        "below %.6g (fluctuation term; manual review advised)",
                        count, round(expected), gamma_max)
    if count > 1:
        close = np.flatnonzero(np.diff(ordinates) < 2 * step)
        for i in close:
            log.warning("locate_zeros: ordinates %.9f and %.9f are anomalously close",
                        ordinates[i], ordinates[i + 1])
    return ZeroTable.build(ordinates, source="located", verified_up_to=gamma_max)


def verify_table(table: ZeroTable, up_to: float, elementwise_tol: float = 1e-6) -> ZeroTable:
    """Cross-verify a table against the internal locator below `up_to`.

    Checks count exactness and elementwise agreement, then returns a copy
    carrying the verified height.
    """
    cap = min(up_to, table.coverage)
    located = locate_zeros(cap)
    n = located.ordinates.size
    if table.count_up_to(cap) != n:
        raise VerificationError(
            f"table holds {table.count_up_to(cap)} ordinates below {cap}, "
            f"locator finds {n}")
    diff = np.abs(table.ordinates[:n] - located.ordinates)
    if n and float(diff.max()) > elementwise_tol:
        k = int(np.argmax(diff))
        raise VerificationError(
            f"ordinate {k + 1} disagrees with the locator by {diff[k]:.3e}")
    return ZeroTable.build(table.ordinates, source=table.source, verified_up_to=cap)


def zero_atoms(table: ZeroTable, omega: float) -> AtomicMeasure:
    """Unit atoms at +-gamma for each table ordinate gamma <= omega."""
    if omega > table.verified_up_to:
        raise CoverageError(
            f"omega = {omega} exceeds the table's verified coverage "
            f"{table.verified_up_to}; verify or extend the table first")
    gs = table.ordinates[table.ordinates <= omega]
    if gs.size == 0:
        return AtomicMeasure.build(np.empty(0), np.empty(0))
    pos = np.concatenate([-gs[::-1], gs])
    return AtomicMeasure.build(pos, np.ones_like(pos))
