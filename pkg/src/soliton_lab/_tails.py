"""Tail-window statistics shared by the asymptotic checkers.

Every "X tends to L" statement in this package is tested on a finite
window.  The helpers here fix what that means: the window is the last
decade of the sampled radii, the deviation from L must be below a
threshold there, and its block maxima must not grow.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

N_BLOCKS = 4


def log_grid(lo: float, hi: float, num: int = 400) -> np.ndarray:
    """Log-spaced radii on [lo, hi]."""
    if not (0 < lo < hi):
        raise ValueError(f"need 0 < lo < hi, got ({lo}, {hi})")
    return np.geomspace(lo, hi, num)


def decade_mask(r: np.ndarray, r_hi: float | None = None) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    hi = r[-1] if r_hi is None else r_hi
    return (r >= hi / 10.0) & (r <= hi)


@dataclass(frozen=True)
class TailStats:
    r_lo: float
    r_hi: float
    n_samples: int
    target: float
    max_dev: float
    mean: float
    last: float
    block_max: tuple
    decreasing: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["block_max"] = list(self.block_max)
        return d


def _nonincreasing(bm: np.ndarray) -> bool:
    """Block maxima that do not grow and end clearly below where they start.

    Growth below 0.1% of the first block is treated as roundoff; a tail
    that merely levels off at a nonzero value does not count as decreasing.
    """
    first = float(bm[0])
    if first <= 1e-12:
        return bool(np.all(bm <= 1e-12))
    flat = np.all(np.diff(bm) <= 1e-3 * first + 1e-12)
    return bool(flat and bm[-1] <= 0.98 * first)


def tail_stats(r, values, target: float | np.ndarray = 0.0, mask=None) -> TailStats:
    """Deviation statistics of ``values - target`` on a tail window.

    ``target`` may be an array (a pointwise limit expression).  The
    default window is the last decade of ``r``.
    """
    r = np.asarray(r, dtype=float)
    v = np.asarray(values, dtype=float)
    t = np.broadcast_to(np.asarray(target, dtype=float), v.shape)
    if mask is None:
        mask = decade_mask(r)
    rw, dev = r[mask], np.abs(v[mask] - t[mask])
    if rw.size == 0:
        raise ValueError("empty tail window")
    blocks = np.array_split(dev, min(N_BLOCKS, rw.size))
    bm = np.array([b.max() for b in blocks])
    tgt = float(t[mask][-1])
    return TailStats(
        r_lo=float(rw[0]),
        r_hi=float(rw[-1]),
        n_samples=int(rw.size),
        target=tgt,
        max_dev=float(dev.max()),
        mean=float(np.mean(v[mask])),
        last=float(v[mask][-1]),
        block_max=tuple(float(x) for x in bm),
        decreasing=_nonincreasing(bm),
    )


def decay_verdict(stats: TailStats, threshold: float) -> str:
    """pass / fail / inconclusive for a "deviation tends to zero" claim."""
    if not np.isfinite(stats.max_dev):
        return "fail"
    if stats.max_dev < threshold and stats.decreasing:
        return "pass"
    if stats.block_max[-1] >= threshold and not stats.decreasing:
        return "fail"
    return "inconclusive"


@dataclass(frozen=True)
class IntegrabilityFit:
    model: str  # "power" or "exponential" or "zero"
    exponent: float  # slope of log|g| against log r
    rate: float  # slope of log|g| against r
    integrable: bool
    tail_allowance: float  # extrapolated integral beyond the last sample

    def to_dict(self) -> dict:
        return asdict(self)


def _lsq(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sum((A @ coef - y) ** 2))
    return float(coef[0]), resid


def integrability_fit(r, g, *, log_g=None, power_cut: float = -1.2,
                      rate_cut: float = -0.1) -> IntegrabilityFit:
    """Classify the tail of ``g`` as integrable or not.

    Fits ``log|g|`` against ``log r`` and against ``r`` on the last
    decade and keeps the model with the smaller residual.  ``log_g``
    may be supplied directly when ``g`` itself under- or overflows.
    """
    r = np.asarray(r, dtype=float)
    m = decade_mask(r)
    if log_g is None:
        a = np.abs(np.asarray(g, dtype=float))
        if np.all(a[m] == 0.0):
            return IntegrabilityFit("zero", -np.inf, -np.inf, True, 0.0)
        keep = m & (a > 1e-300)
        lg = np.log(a[keep])
        rr = r[keep]
    else:
        lg = np.asarray(log_g, dtype=float)[m]
        rr = r[m]
    if rr.size < 3:
        raise ValueError("too few positive tail samples for a fit")
    p, res_p = _lsq(np.log(rr), lg)
    k, res_k = _lsq(rr, lg)
    g_end, r_end = float(np.exp(lg[-1])), float(rr[-1])
    if res_k < res_p:
        model, ok = "exponential", k < rate_cut
        allowance = g_end / -k if ok else np.inf
    else:
        model, ok = "power", p < power_cut
        allowance = g_end * r_end / (-p - 1.0) if ok else np.inf
    return IntegrabilityFit(model, p, k, bool(ok), float(allowance))
