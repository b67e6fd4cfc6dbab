"""Model manifolds: radial curvature profiles, Jacobi warpings, surface metrics.

A model manifold with radial curvature ``-a(r)^2`` has the metric
``dr^2 + f(r)^2 dS^2`` where ``f`` solves the Jacobi equation
``f'' = a^2 f`` with ``f(0) = 0, f'(0) = 1``.  Two-dimensional warped
metrics ``dr^2 + h(r, theta)^2 dtheta^2`` are represented by
:class:`SurfaceMetric2D` with hand-coded partial derivatives.

Throughout, ``q = f/f'`` is the quantity most downstream code needs; it
stays bounded even when ``f`` itself overflows, so every warping exposes
``ratio`` (q), ``ratio_d1`` (q') and ``ratio_d2`` (q'') directly, plus
``log_f`` for growth comparisons.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import BPoly, CubicSpline

LOG_OVERFLOW = math.log(1e300)


# --------------------------------------------------------------------------
# small numerics


def log_sinh(x):
    """log(sinh x) for x > 0 without overflow."""
    x = np.asarray(x, dtype=float)
    big = x > 20.0
    xs = np.where(big, 1.0, x)
    return np.where(big, x - math.log(2.0) + np.log1p(-np.exp(-2.0 * np.where(big, x, 20.0))),
                    np.log(np.sinh(xs)))


def log_cosh(x):
    x = np.abs(np.asarray(x, dtype=float))
    return x - math.log(2.0) + np.log1p(np.exp(-2.0 * x))


def sech(x):
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) > 700.0, 0.0, 1.0 / np.cosh(np.clip(x, -700.0, 700.0)))


def smoothstep(s):
    """C^2 quintic ramp 10s^3 - 15s^4 + 6s^5 clipped to [0, 1] and its first three derivatives."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    inside = (s > 0.0) & (s < 1.0)
    S = s**3 * (10.0 - 15.0 * s + 6.0 * s**2)
    S1 = np.where(inside, 30.0 * s**2 * (1.0 - s) ** 2, 0.0)
    S2 = np.where(inside, 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s), 0.0)
    S3 = np.where(inside, 60.0 - 360.0 * s + 360.0 * s**2, 0.0)
    return S, S1, S2, S3


def smoothstep7(s):
    """C^3 septic ramp with vanishing first three derivatives at both ends."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    S = s**4 * (35.0 - 84.0 * s + 70.0 * s**2 - 20.0 * s**3)
    S1 = 140.0 * s**3 * (1.0 - s) ** 3
    S2 = 420.0 * s**2 * (1.0 - s) ** 2 * (1.0 - 2.0 * s)
    S3 = 840.0 * s * (1.0 - s) * (5.0 * s**2 - 5.0 * s + 1.0)
    return S, S1, S2, S3


def _as_array(r):
    return np.asarray(r, dtype=float)


# --------------------------------------------------------------------------
# curvature profiles


@dataclass(frozen=True)
class CurvatureProfile:
    """Radial curvature function ``a(r) >= 0``; sectional curvature is ``-a^2``.

    ``log_eval`` and ``dlog_eval`` (for ``log a`` and ``a'/a``) are
    optional; they matter only for doubly exponential profiles where
    ``a`` itself leaves floating-point range.
    """

    eval: Callable
    eval_deriv: Callable
    name: str
    monotone_flag: str = "none"
    log_eval: Callable | None = None
    dlog_eval: Callable | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.monotone_flag not in ("increasing", "decreasing", "none"):
            raise ValueError(f"bad monotone_flag {self.monotone_flag!r}")

    def __call__(self, r):
        return self.eval(_as_array(r))

    def deriv(self, r):
        return self.eval_deriv(_as_array(r))

    def log_a(self, r):
        if self.log_eval is not None:
            return self.log_eval(_as_array(r))
        with np.errstate(divide="ignore"):
            return np.log(self.eval(_as_array(r)))

    def dlog_a(self, r):
        """a'/a."""
        if self.dlog_eval is not None:
            return self.dlog_eval(_as_array(r))
        r = _as_array(r)
        return self.eval_deriv(r) / self.eval(r)

    def deriv_over_square(self, r):
        """a'/a^2, evaluated in log space."""
        r = _as_array(r)
        return self.dlog_a(r) * np.exp(-self.log_a(r))


def constant_profile(k: float = 1.0) -> CurvatureProfile:
    if k < 0:
        raise ValueError("curvature scale must be nonnegative")
    return CurvatureProfile(
        eval=lambda r: np.full_like(r, float(k), dtype=float),
        eval_deriv=lambda r: np.zeros_like(r, dtype=float),
        name=f"constant({k:g})",
        monotone_flag="none",
        dlog_eval=lambda r: np.zeros_like(r, dtype=float),
        params={"k": float(k)},
    )


def inverse_r_profile(alpha: float, core: float = 1.0) -> CurvatureProfile:
    """``a = alpha / sqrt(r^2 + core^2)``, i.e. alpha/r away from the pole."""
    if alpha <= 0 or core <= 0:
        raise ValueError("alpha and core must be positive")

    def ev(r):
        return alpha / np.sqrt(r * r + core * core)

    def dv(r):
        return -alpha * r / (r * r + core * core) ** 1.5

    return CurvatureProfile(ev, dv, f"inverse-r({alpha:g})", "decreasing",
                            dlog_eval=lambda r: -r / (r * r + core * core),
                            params={"alpha": float(alpha), "core": float(core)})


def _s_coth_s(s):
    """s*coth(s) with the removable singularity at 0 filled in."""
    small = np.abs(s) < 1e-4
    ss = np.where(small, 1.0, s)
    return np.where(small, 1.0 + s * s / 3.0, ss / np.tanh(ss))


def _coth_minus_s_csch2(s):
    """coth(s) - s*csch(s)^2, odd and ~ 2s/3 near 0."""
    small = np.abs(s) < 1e-3
    ss = np.where(small, 1.0, np.minimum(s, 300.0))
    big = s > 300.0
    val = 1.0 / np.tanh(ss) - ss / np.sinh(ss) ** 2
    return np.where(small, 2.0 * s / 3.0 - 4.0 * s**3 / 45.0, np.where(big, 1.0, val))


def sinh_sinh_profile() -> CurvatureProfile:
    """Curvature of ``f = sinh(sinh r)``: ``a^2 = cosh^2 r + sinh r coth(sinh r)``."""

    def log_a(r):
        s = np.sinh(np.minimum(r, 700.0))
        lc = log_cosh(r)
        # a^2 = cosh^2 (1 + s coth(s)/cosh^2)
        corr = _s_coth_s(s) * np.exp(-2.0 * lc)
        return lc + 0.5 * np.log1p(corr)

    def ev(r):
        return np.exp(log_a(r))

    def dlog(r):
        # (a^2)'/(2 a^2) with (a^2)' = cosh r (2 s + coth s - s csch^2 s)
        s = np.sinh(np.minimum(r, 700.0))
        corr = _s_coth_s(s) * np.exp(-2.0 * log_cosh(r))
        return 0.5 * (2.0 * s + _coth_minus_s_csch2(s)) * np.exp(-log_cosh(r)) / (1.0 + corr)

    def dv(r):
        return dlog(r) * ev(r)

    return CurvatureProfile(ev, dv, "sinh-sinh", "increasing", log_eval=log_a, dlog_eval=dlog)


def cosh_cosh_profile() -> CurvatureProfile:
    """``b`` with ``b^2 = 2 cosh(cosh t)``."""

    def log_b(t):
        C = np.cosh(np.minimum(np.abs(t), 700.0))
        return 0.5 * (C + np.log1p(np.exp(-2.0 * C)))

    def dlog(t):
        C = np.cosh(np.minimum(np.abs(t), 700.0))
        return 0.5 * np.tanh(C) * np.sinh(t)

    def ev(t):
        return np.exp(log_b(t))

    return CurvatureProfile(ev, lambda t: dlog(t) * ev(t), "cosh-cosh", "increasing",
                            log_eval=log_b, dlog_eval=dlog)


# splice used by the first worked warping pair: g = e^{1/delta} exp(-rho)
# where rho = (r^2 + delta^2)^{-1/2} near the pole and 1/r for r >= r2
PAIR1_DELTA = 1.0
PAIR1_SPLICE = (2.0, 4.0)


def _pair1_rho(r, delta=PAIR1_DELTA, splice=PAIR1_SPLICE):
    """rho and its first three derivatives for the pair-1 splice."""
    r = _as_array(r)
    r1, r2 = splice
    D2 = r * r + delta * delta
    p0 = D2**-0.5
    p01 = -r * D2**-1.5
    p02 = (2.0 * r * r - delta * delta) * D2**-2.5
    p03 = r * (9.0 * delta * delta - 6.0 * r * r) * D2**-3.5
    rs = np.maximum(r, 0.5 * r1)
    p1, p11, p12, p13 = 1.0 / rs, -1.0 / rs**2, 2.0 / rs**3, -6.0 / rs**4
    S, S1, S2, S3 = smoothstep7((r - r1) / (r2 - r1))
    L = r2 - r1
    S1, S2, S3 = S1 / L, S2 / L**2, S3 / L**3
    d0, d1, d2, d3 = p1 - p0, p11 - p01, p12 - p02, p13 - p03
    rho = p0 + S * d0
    rho1 = p01 + S1 * d0 + S * d1
    rho2 = p02 + S2 * d0 + 2 * S1 * d1 + S * d2
    rho3 = p03 + S3 * d0 + 3 * S2 * d1 + 3 * S1 * d2 + S * d3
    return rho, rho1, rho2, rho3


def _coth(r):
    rr = np.where(r == 0.0, 1.0, r)
    return np.where(r > 20.0, 1.0, 1.0 / np.tanh(np.minimum(rr, 20.0)))


def pair1_b_profile(delta: float = PAIR1_DELTA, splice=PAIR1_SPLICE) -> CurvatureProfile:
    """Curvature of ``g sinh r``: ``b^2 = 1 + 2 (g'/g) coth r + g''/g``."""

    def T(r):
        rho, rho1, rho2, _ = _pair1_rho(r, delta, splice)
        safe = np.where(r == 0.0, 1.0, r)
        # rho1 * coth r as (rho1 / r) * (r coth r); rho1/r is finite at the pole
        r_coth = np.where(r == 0.0, 1.0, _s_coth_s(r))
        rho1_over_r = np.where(r == 0.0, -(delta**-3.0), rho1 / safe)
        return -2.0 * rho1_over_r * r_coth + rho1**2 - rho2

    def Tp(r):
        rho, rho1, rho2, rho3 = _pair1_rho(r, delta, splice)
        rr = np.maximum(r, 1e-3)
        rho_b = _pair1_rho(rr, delta, splice)
        csch2 = np.where(rr > 300.0, 0.0, 1.0 / np.sinh(np.minimum(rr, 300.0)) ** 2)
        val = (-2.0 * rho_b[2] * _coth(rr) + 2.0 * rho_b[1] * csch2
               + 2.0 * rho_b[1] * rho_b[2] - rho_b[3])
        # T is even, so T' vanishes linearly at the pole
        return np.where(r < 1e-3, val * r / 1e-3, val)

    def ev(r):
        return np.sqrt(1.0 + T(_as_array(r)))

    def dv(r):
        r = _as_array(r)
        return Tp(r) / (2.0 * ev(r))

    return CurvatureProfile(ev, dv, "example-pair-1-b", "none",
                            params={"delta": delta, "splice": list(splice)})


def _mix_parts(r, s, b):
    """Scaled building blocks of ``s sinh r + (1-s) sinh(br)/b``.

    Everything is multiplied by ``exp(-m r)`` with ``m = max(1, b)``.
    """
    r = _as_array(r)
    m = max(1.0, b)

    def sh(k):
        return 0.5 * (np.exp((k - m) * r) - np.exp((-k - m) * r))

    def ch(k):
        return 0.5 * (np.exp((k - m) * r) + np.exp((-k - m) * r))

    f = s * sh(1.0) + (1 - s) * sh(b) / b
    f1 = s * ch(1.0) + (1 - s) * ch(b)
    f2 = s * sh(1.0) + (1 - s) * b * sh(b)
    f3 = s * ch(1.0) + (1 - s) * b * b * ch(b)
    return f, f1, f2, f3, m


def pair2_a_profile(s: float = 0.5, b: float = 2.0) -> CurvatureProfile:
    """Curvature of ``s sinh r + (1-s) sinh(br)/b``."""
    if not (0 < s < 1) or b <= 0:
        raise ValueError("need 0 < s < 1 and b > 0")
    a0sq = s + (1 - s) * b * b

    def a2(r):
        r = _as_array(r)
        f, _, f2, _, _ = _mix_parts(r, s, b)
        small = r < 1e-8
        return np.where(small, a0sq, f2 / np.where(small, 1.0, f))

    def ev(r):
        return np.sqrt(a2(r))

    def dv(r):
        r = _as_array(r)
        f, f1, f2, f3, _ = _mix_parts(r, s, b)
        small = r < 1e-6
        fs = np.where(small, 1.0, f)
        da2 = (f3 * fs - f2 * f1) / fs**2
        return np.where(small, 0.0, da2 / (2.0 * ev(r)))

    return CurvatureProfile(ev, dv, f"example-pair-2-a({s:g},{b:g})", "none",
                            params={"s": s, "b": b})


def tabulated_profile(r, a, name: str = "tabulated") -> CurvatureProfile:
    r = _as_array(r)
    a = _as_array(a)
    if r.ndim != 1 or r.size < 4 or np.any(np.diff(r) <= 0):
        raise ValueError("tabulated radii must be strictly increasing (>= 4 samples)")
    if np.any(~np.isfinite(a)) or np.any(a < 0):
        raise ValueError("tabulated curvature must be finite and nonnegative")
    spl = CubicSpline(r, a)
    d = np.diff(a)
    flag = "increasing" if np.all(d >= 0) else "decreasing" if np.all(d <= 0) else "none"

    def ev(x):
        x = _as_array(x)
        if np.any(x < r[0] - 1e-12) or np.any(x > r[-1] + 1e-12):
            raise ValueError(f"radius outside tabulated range [{r[0]}, {r[-1]}]")
        return np.maximum(spl(x), 0.0)

    return CurvatureProfile(ev, lambda x: spl(_as_array(x), 1), name, flag)


def load_profile_csv(path) -> CurvatureProfile:
    """Two-column CSV ``r, a(r)``; a non-numeric first row is taken as a header."""
    rows = []
    with open(path, newline="") as fh:
        for k, row in enumerate(csv.reader(fh)):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                if k == 0:
                    continue
                raise ValueError(f"{path}: bad row {k + 1}: {row!r}")
    arr = np.array(rows, dtype=float)
    if arr.size == 0:
        raise ValueError(f"{path}: no data rows")
    return tabulated_profile(arr[:, 0], arr[:, 1], name=f"csv:{path}")


PROFILES = {
    "constant": constant_profile,
    "inverse-r": inverse_r_profile,
    "sinh-sinh": sinh_sinh_profile,
    "cosh-cosh": cosh_cosh_profile,
    "example-pair-1-b": pair1_b_profile,
    "example-pair-2-a": pair2_a_profile,
}


def get_profile(name: str, **params) -> CurvatureProfile:
    if name.startswith("csv:"):
        return load_profile_csv(name[4:])
    try:
        return PROFILES[name](**params)
    except KeyError:
        raise ValueError(f"unknown curvature profile {name!r}; known: {sorted(PROFILES)}") from None


# --------------------------------------------------------------------------
# warping functions


class Warping:
    """Common interface of closed-form and tabulated warpings.

    Subclasses provide ``f, fp, fpp, log_f, ratio, ratio_d1, ratio_d2``.
    """

    name = "warping"
    r_max = math.inf

    def dlog(self, r):
        """f'/f."""
        r = _as_array(r)
        with np.errstate(divide="ignore"):
            return 1.0 / self.ratio(r)

    def curvature_sq(self, r):
        """a^2 = f''/f."""
        r = _as_array(r)
        return self.fpp(r) / self.f(r)

    def log_fp(self, r):
        r = _as_array(r)
        return self.log_f(r) - np.log(self.ratio(r))

    def observed_exponent(self, r):
        """d log f / d log r = r f'/f."""
        r = _as_array(r)
        return r / self.ratio(r)


class ClosedFormWarping(Warping):
    """Warping given by formulas.  Missing quotient evaluators fall back to f, f', f''."""

    def __init__(self, name, f, fp, fpp, *, ratio=None, ratio_d1=None, ratio_d2=None,
                 log_f=None, profile: CurvatureProfile | None = None, params=None):
        self.name = name
        self._f, self._fp, self._fpp = f, fp, fpp
        self._ratio, self._ratio_d1, self._ratio_d2 = ratio, ratio_d1, ratio_d2
        self._log_f = log_f
        self.profile = profile
        self.params = dict(params or {})

    def f(self, r):
        return self._f(_as_array(r))

    def fp(self, r):
        return self._fp(_as_array(r))

    def fpp(self, r):
        return self._fpp(_as_array(r))

    def log_f(self, r):
        r = _as_array(r)
        if self._log_f is not None:
            return self._log_f(r)
        with np.errstate(divide="ignore"):
            return np.log(self.f(r))

    def ratio(self, r):
        r = _as_array(r)
        if self._ratio is not None:
            return self._ratio(r)
        return self.f(r) / self.fp(r)

    def ratio_d1(self, r):
        r = _as_array(r)
        if self._ratio_d1 is not None:
            return self._ratio_d1(r)
        f, fp = self.f(r), self.fp(r)
        return 1.0 - f * self.fpp(r) / fp**2

    def ratio_d2(self, r):
        r = _as_array(r)
        if self._ratio_d2 is None:
            raise NotImplementedError(f"{self.name}: no closed form for (f/f')''")
        return self._ratio_d2(r)


def euclidean_warping() -> ClosedFormWarping:
    return ClosedFormWarping(
        "euclidean",
        f=lambda r: r.copy(),
        fp=lambda r: np.ones_like(r),
        fpp=lambda r: np.zeros_like(r),
        ratio=lambda r: r.copy(),
        ratio_d1=lambda r: np.ones_like(r),
        ratio_d2=lambda r: np.zeros_like(r),
        profile=constant_profile(0.0),
    )


def hyperbolic_warping(k: float = 1.0) -> ClosedFormWarping:
    if k <= 0:
        raise ValueError("hyperbolic scale must be positive")
    return ClosedFormWarping(
        f"hyperbolic({k:g})",
        f=lambda r: np.sinh(k * r) / k,
        fp=lambda r: np.cosh(k * r),
        fpp=lambda r: k * np.sinh(k * r),
        ratio=lambda r: np.tanh(k * r) / k,
        ratio_d1=lambda r: sech(k * r) ** 2,
        ratio_d2=lambda r: -2.0 * k * sech(k * r) ** 2 * np.tanh(k * r),
        log_f=lambda r: log_sinh(k * r) - math.log(k),
        profile=constant_profile(k),
        params={"k": k},
    )


def sinh2_warping() -> ClosedFormWarping:
    w = hyperbolic_warping(2.0)
    w.name = "sinh2"
    return w


def sinh_sinh_warping() -> ClosedFormWarping:
    """``f = sinh(sinh r)`` with quotients in stable closed form."""

    def S(r):
        return np.sinh(np.minimum(r, 700.0))

    def ratio(r):
        return np.tanh(S(r)) * sech(r)

    def d1(r):
        s = S(r)
        return sech(s) ** 2 - np.tanh(s) * np.tanh(r) * sech(r)

    def d2(r):
        s = S(r)
        ts, tr, sr = np.tanh(s), np.tanh(r), sech(r)
        # sech^2(S) cosh r written as sech(S)^2 / sech r, guarded for overflow
        sc = np.where(s > 350.0, 0.0, sech(s) ** 2 * np.cosh(np.minimum(r, 350.0)))
        return -2.0 * sc * ts - sech(s) ** 2 * tr - ts * sr * (sr**2 - tr**2)

    def log_f(r):
        return log_sinh(S(r))

    return ClosedFormWarping(
        "sinh-sinh",
        f=lambda r: np.sinh(S(r)),
        fp=lambda r: np.cosh(r) * np.cosh(S(r)),
        fpp=lambda r: S(r) * np.cosh(S(r)) + np.cosh(r) ** 2 * np.sinh(S(r)),
        ratio=ratio, ratio_d1=d1, ratio_d2=d2, log_f=log_f,
        profile=sinh_sinh_profile(),
    )


def pair1_warping(delta: float = PAIR1_DELTA, splice=PAIR1_SPLICE) -> ClosedFormWarping:
    """``g sinh r`` with ``g = e^{1/delta} exp(-rho)``; ``g -> e^{1/delta}`` at infinity."""
    lg0 = 1.0 / delta

    def g(r):
        return np.exp(lg0 - _pair1_rho(r, delta, splice)[0])

    def fp(r):
        _, r1, _, _ = _pair1_rho(r, delta, splice)
        return g(r) * (np.cosh(r) - r1 * np.sinh(r))

    def fpp(r):
        _, r1, r2, _ = _pair1_rho(r, delta, splice)
        return g(r) * ((r1**2 - r2 + 1.0) * np.sinh(r) - 2.0 * r1 * np.cosh(r))

    def Dfun(r):
        _, r1, _, _ = _pair1_rho(r, delta, splice)
        return _coth(r) - r1

    def csch2(r):
        rr = np.where(r == 0.0, 1.0, r)
        return np.where(r > 300.0, 0.0, 1.0 / np.sinh(np.minimum(rr, 300.0)) ** 2)

    def ratio(r):
        return np.where(r == 0.0, 0.0, 1.0 / Dfun(r))

    def d1(r):
        _, _, r2, _ = _pair1_rho(r, delta, splice)
        D = Dfun(r)
        return np.where(r == 0.0, 1.0, (csch2(r) + r2) / D**2)

    def d2(r):
        _, _, r2, r3 = _pair1_rho(r, delta, splice)
        D = Dfun(r)
        c2 = csch2(r)
        val = (-2.0 * c2 * _coth(r) + r3) / D**2 + 2.0 * (c2 + r2) ** 2 / D**3
        return np.where(r == 0.0, 0.0, val)

    return ClosedFormWarping(
        "example-pair-1",
        f=lambda r: g(r) * np.sinh(r), fp=fp, fpp=fpp,
        ratio=ratio, ratio_d1=d1, ratio_d2=d2,
        log_f=lambda r: lg0 - _pair1_rho(r, delta, splice)[0] + log_sinh(r),
        profile=pair1_b_profile(delta, splice),
        params={"delta": delta, "splice": list(splice)},
    )


def pair2_warping(s: float = 0.5, b: float = 2.0) -> ClosedFormWarping:
    """``s sinh r + (1-s) sinh(br)/b``; ``s = 1/2, b = 2`` is the worked example."""
    kp = 1.0 - 0.5 * (b + 1.0 / b)
    km = 1.0 + 0.5 * (b + 1.0 / b)

    def parts(r):
        return _mix_parts(r, s, b)

    def numer(r):
        # f'^2 - f f'' scaled by exp(-2 m r), expanded to avoid cancellation
        m = max(1.0, b)
        e = lambda k: 0.5 * (np.exp((k - 2 * m) * r) + np.exp((-k - 2 * m) * r))  # noqa: E731
        o = lambda k: 0.5 * (np.exp((k - 2 * m) * r) - np.exp((-k - 2 * m) * r))  # noqa: E731
        base = (s * s + (1 - s) ** 2) * np.exp(-2 * m * r)
        N = base + s * (1 - s) * (kp * e(b + 1) + km * e(b - 1))
        N1 = -2 * m * base * 0 + s * (1 - s) * (kp * (b + 1) * o(b + 1) + km * (b - 1) * o(b - 1))
        return N, N1

    def ratio(r):
        f, f1, *_ = parts(r)
        return f / f1

    def d1(r):
        _, f1, *_ = parts(r)
        N, _ = numer(r)
        return N / f1**2

    def d2(r):
        _, f1, f2, _, _ = parts(r)
        N, N1 = numer(r)
        return N1 / f1**2 - 2.0 * N * f2 / f1**3

    def log_f(r):
        f, *_, m = parts(r)
        return m * r + np.log(f)

    return ClosedFormWarping(
        "example-pair-2" if (s, b) == (0.5, 2.0) else f"mix({s:g},{b:g})",
        f=lambda r: s * np.sinh(r) + (1 - s) * np.sinh(b * r) / b,
        fp=lambda r: s * np.cosh(r) + (1 - s) * np.cosh(b * r),
        fpp=lambda r: s * np.sinh(r) + (1 - s) * b * np.sinh(b * r),
        ratio=ratio, ratio_d1=d1, ratio_d2=d2, log_f=log_f,
        profile=pair2_a_profile(s, b),
        params={"s": s, "b": b},
    )


WARPINGS = {
    "euclidean": euclidean_warping,
    "hyperbolic": hyperbolic_warping,
    "sinh-sinh": sinh_sinh_warping,
    "sinh2": sinh2_warping,
    "example-pair-1": pair1_warping,
    "example-pair-2": pair2_warping,
}


def get_warping(name: str, **params) -> ClosedFormWarping:
    try:
        return WARPINGS[name](**params)
    except KeyError:
        raise ValueError(f"unknown warping {name!r}; known: {sorted(WARPINGS)}") from None


class WarpingFunction(Warping):
    """Tabulated Jacobi solution ``(f, f')`` with quintic Hermite interpolation.

    Node data are ``(f, f', a^2 f)`` for ``f`` and ``(f', a^2 f, (a^2 f)')``
    for ``f'``, so both interpolants are sixth-order accurate and the
    quotient ``f/f'`` is C^1.
    """

    def __init__(self, profile: CurvatureProfile, grid, f, f_prime, status="complete",
                 overflow_at=None):
        self.profile = profile
        self.name = f"jacobi[{profile.name}]"
        self.grid = np.asarray(grid, dtype=float)
        self.f_values = np.asarray(f, dtype=float)
        self.f_prime = np.asarray(f_prime, dtype=float)
        self.status = status
        self.overflow_at = overflow_at
        self.r_max = float(self.grid[-1])
        a = profile(self.grid)
        da = profile.deriv(self.grid)
        a2f = a * a * self.f_values
        d_a2f = 2 * a * da * self.f_values + a * a * self.f_prime
        self._F = BPoly.from_derivatives(self.grid, np.column_stack([self.f_values, self.f_prime, a2f]))
        self._Fp = BPoly.from_derivatives(self.grid, np.column_stack([self.f_prime, a2f, d_a2f]))

    def _check(self, r):
        r = _as_array(r)
        if np.any(r < 0) or np.any(r > self.r_max * (1 + 1e-12)):
            raise ValueError(f"{self.name}: radius outside [0, {self.r_max}] ({self.status})")
        return r

    def f(self, r):
        return self._F(self._check(r))

    def fp(self, r):
        return self._Fp(self._check(r))

    def fpp(self, r):
        r = self._check(r)
        return self.profile(r) ** 2 * self._F(r)

    def log_f(self, r):
        with np.errstate(divide="ignore"):
            return np.log(self.f(r))

    def ratio(self, r):
        r = self._check(r)
        return self._F(r) / self._Fp(r)

    def ratio_d1(self, r):
        r = self._check(r)
        q = self.ratio(r)
        return 1.0 - self.profile(r) ** 2 * q * q

    def ratio_d2(self, r):
        r = self._check(r)
        q, q1 = self.ratio(r), self.ratio_d1(r)
        a, da = self.profile(r), self.profile.deriv(r)
        return -2.0 * q * a * (q1 * a + q * da)

    def curvature_sq(self, r):
        return self.profile(self._check(r)) ** 2


class LogWarpingFunction(Warping):
    """Jacobi solution tabulated as ``log q`` (``q = f/f'``) and ``log f``.

    Used when ``f`` outgrows double precision.  ``q`` solves the Riccati
    equation ``q' = 1 - a^2 q^2``; storing its logarithm keeps relative
    accuracy when ``q`` decays exponentially.  ``dense`` is the solver's
    continuous extension of ``(log q, log f)``.
    """

    def __init__(self, profile, grid, dense, r0):
        self.profile = profile
        self.name = f"jacobi-log[{profile.name}]"
        self.grid = np.asarray(grid, dtype=float)
        self._dense = dense
        self.r0 = r0
        self.r_max = float(self.grid[-1])
        self.status = "complete"
        self.overflow_at = None
        self._a0sq = float(profile(0.0)) ** 2

    def _eval(self, r, k):
        return self._dense(np.maximum(r, self.r0))[k]

    def _split(self, r):
        r = _as_array(r)
        if np.any(r < 0) or np.any(r > self.r_max * (1 + 1e-12)):
            raise ValueError(f"{self.name}: radius outside [0, {self.r_max}]")
        return r, r < self.r0

    def ratio(self, r):
        r, near = self._split(r)
        series = r - self._a0sq * r**3 / 3.0
        return np.where(near, series, np.exp(self._eval(r, 0)))

    def ratio_d1(self, r):
        r, _ = self._split(r)
        q = self.ratio(r)
        return 1.0 - self.profile(r) ** 2 * q * q

    def ratio_d2(self, r):
        r, _ = self._split(r)
        q, q1 = self.ratio(r), self.ratio_d1(r)
        a, da = self.profile(r), self.profile.deriv(r)
        return -2.0 * q * a * (q1 * a + q * da)

    def log_f(self, r):
        r, near = self._split(r)
        with np.errstate(divide="ignore"):
            series = np.log(np.where(r > 0, r, 1.0)) + self._a0sq * r * r / 6.0
            series = np.where(r > 0, series, -np.inf)
        return np.where(near, series, self._eval(r, 1))

    def f(self, r):
        return np.exp(self.log_f(r))

    def fp(self, r):
        return np.exp(self.log_fp(r))

    def fpp(self, r):
        r = _as_array(r)
        return self.profile(r) ** 2 * self.f(r)

    def curvature_sq(self, r):
        return self.profile(_as_array(r)) ** 2


def _node_spacing(tol: float) -> float:
    # quintic Hermite error on a cell of width H is about (a H)^6 / 46080
    return min(0.1, (4608.0 * tol) ** (1.0 / 6.0))


def solve_jacobi(a: CurvatureProfile, r_max: float, tol: float = 1e-10, *,
                 log_space: bool = False, r0: float = 1e-6, max_step: float = 0.05):
    """Solve ``f'' = a^2 f, f(0) = 0, f'(0) = 1`` on ``[0, r_max]``.

    The first-order system ``(f, f')`` is integrated by DOP853 from
    ``r0`` using the series ``f = r + a(0)^2 r^3 / 6``.  The accepted
    steps are refined with the integrator's dense output until every
    interpolation cell satisfies ``(1 + a) H <= (4608 tol)^(1/6)``.

    With ``log_space=True`` the Riccati form ``(q, log f)`` is integrated
    by Radau instead and a :class:`LogWarpingFunction` is returned.

    If ``f`` would exceed ~1e300 before ``r_max`` the grid is truncated
    and ``status`` reads ``"overflow at r = ..."``.
    """
    if not r_max > 0:
        raise ValueError("r_max must be positive")
    if not (1e-14 < tol < 1e-3):
        raise ValueError("tol must lie in (1e-14, 1e-3)")
    probe = np.linspace(0.0, r_max, 2049)
    av = a(probe)
    if not np.all(np.isfinite(av)) and not log_space:
        raise ValueError(f"curvature profile {a.name} is not finite on [0, {r_max}]")
    if np.any(np.isnan(av)):
        raise ValueError(f"curvature profile {a.name} returned NaN")
    a0sq = float(a(0.0)) ** 2
    if log_space:
        return _solve_jacobi_log(a, r_max, tol, r0, a0sq, max_step)

    def rhs(r, y):
        return [y[1], float(a(r)) ** 2 * y[0]]

    def overflow(r, y):
        return math.log(max(abs(y[0]), 1e-300)) - LOG_OVERFLOW

    overflow.terminal = True
    overflow.direction = 1
    y0 = [r0 + a0sq * r0**3 / 6.0, 1.0 + a0sq * r0**2 / 2.0]
    sol = solve_ivp(rhs, (r0, r_max), y0, method="DOP853", rtol=tol, atol=tol * 1e-6,
                    dense_output=True, events=overflow)
    if sol.status < 0:
        raise RuntimeError(f"Jacobi integration failed: {sol.message}")
    steps = sol.t
    status, r_star = "complete", None
    if sol.status == 1:
        r_star = float(sol.t_events[0][0])
        status = f"overflow at r = {r_star:.6g}"
    H = _node_spacing(tol)
    nodes = [np.array([0.0])]
    for lo, hi in zip(steps[:-1], steps[1:]):
        amid = float(a(0.5 * (lo + hi)))
        m = max(1, int(math.ceil((hi - lo) * (1.0 + amid) / H)))
        nodes.append(np.linspace(lo, hi, m + 1)[:-1] if m > 1 else np.array([lo]))
    nodes.append(np.array([steps[-1]]))
    grid = np.unique(np.concatenate(nodes))
    vals = sol.sol(grid[1:])
    f = np.concatenate([[0.0], vals[0]])
    fp = np.concatenate([[1.0], vals[1]])
    return WarpingFunction(a, grid, f, fp, status=status, overflow_at=r_star)


def _solve_jacobi_log(a, r_max, tol, r0, a0sq, max_step):
    # state (log q, log f); a^2 q^2 is formed in log space
    def rhs(r, y):
        la = float(a.log_a(r))
        e = math.exp(-y[0])
        return [e - math.exp(2.0 * la + y[0]), e]

    def jac(r, y):
        la = float(a.log_a(r))
        e = math.exp(-y[0])
        return [[-e - math.exp(2.0 * la + y[0]), 0.0], [-e, 0.0]]

    y0 = [math.log(r0 - a0sq * r0**3 / 3.0), math.log(r0) + a0sq * r0**2 / 6.0]
    sol = solve_ivp(rhs, (r0, r_max), y0, method="Radau", jac=jac, rtol=tol,
                    atol=tol, max_step=max_step, dense_output=True)
    if sol.status < 0:
        raise RuntimeError(f"log-space Jacobi integration failed: {sol.message}")
    return LogWarpingFunction(a, sol.t, sol.sol, r0)


def power_law_report(w: Warping, alpha: float, r) -> dict:
    """Observed growth exponent of ``f`` against two candidate formulas.

    For ``f'' = (alpha^2 / r^2) f`` the indicial equation gives
    ``p (p - 1) = alpha^2``.  The second candidate is kept so that the
    comparison can be reported side by side.
    """
    r = _as_array(r)
    obs = w.observed_exponent(r)
    p_indicial = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * alpha * alpha))
    p_alt = 0.5 * (1.0 + math.sqrt(1.0 + alpha * alpha))
    last = float(obs[-1])
    return {
        "alpha": alpha,
        "observed_exponent": last,
        "indicial_exponent": p_indicial,
        "alternative_exponent": p_alt,
        "matches": "indicial" if abs(last - p_indicial) < abs(last - p_alt) else "alternative",
        "discrepancy": abs(p_indicial - p_alt) > 1e-9,
    }


# --------------------------------------------------------------------------
# 2D metrics


@dataclass(frozen=True)
class SurfaceMetric2D:
    """Metric ``dr^2 + h(r, theta)^2 dtheta^2`` with analytic partials.

    ``lower``/``upper`` are the comparison model warpings for the
    curvature bounds ``-b^2 <= K <= -a^2`` (a from ``lower``).
    """

    h: Callable
    h_r: Callable
    h_theta: Callable
    h_rr: Callable
    h_rtheta: Callable
    h_thetatheta: Callable
    name: str
    params: dict = field(default_factory=dict)
    rotational: bool = False
    lower: Warping | None = None
    upper: Warping | None = None

    def gauss_curvature(self, r, theta):
        return -self.h_rr(r, theta) / self.h(r, theta)


def _zeros(r, t):
    return np.zeros(np.broadcast(r, t).shape)


def rotational_metric(w: Warping, name: str | None = None) -> SurfaceMetric2D:
    """Surface of revolution type metric ``h(r, theta) = f(r)``."""

    def bc(fn):
        return lambda r, t: fn(_as_array(r)) + _zeros(r, t)

    return SurfaceMetric2D(
        h=bc(w.f), h_r=bc(w.fp), h_theta=_zeros, h_rr=bc(w.fpp), h_rtheta=_zeros,
        h_thetatheta=_zeros, name=name or w.name, params=dict(getattr(w, "params", {})),
        rotational=True, lower=w, upper=w,
    )


def cor1_metric(a: float = 1.0, b: float = 2.0) -> SurfaceMetric2D:
    """``h = sinh(k r)/k`` with ``k(theta) = a cos^2 theta + b sin^2 theta``.

    ``h_rr / h = k^2`` so the Gauss curvature is ``-k(theta)^2``, pinched
    between ``-b^2`` and ``-a^2``.
    """
    if not 0 < a <= b:
        raise ValueError("need 0 < a <= b")

    def k(t):
        return a * np.cos(t) ** 2 + b * np.sin(t) ** 2

    def k1(t):
        return (b - a) * np.sin(2 * t)

    def k2(t):
        return 2 * (b - a) * np.cos(2 * t)

    def h(r, t):
        kk = k(t)
        return np.sinh(kk * r) / kk

    def h_r(r, t):
        return np.cosh(k(t) * r) + _zeros(r, t)

    def h_rr(r, t):
        kk = k(t)
        return kk * np.sinh(kk * r)

    def _g(r, t):
        kk = k(t)
        return r * np.cosh(kk * r) / kk - np.sinh(kk * r) / kk**2

    def h_t(r, t):
        return k1(t) * _g(r, t)

    def h_rt(r, t):
        return np.sinh(k(t) * r) * r * k1(t)

    def h_tt(r, t):
        kk = k(t)
        C, S = np.cosh(kk * r), np.sinh(kk * r)
        dg = r * r * S / kk - 2 * r * C / kk**2 + 2 * S / kk**3
        return k2(t) * _g(r, t) + k1(t) ** 2 * dg

    return SurfaceMetric2D(h, h_r, h_t, h_rr, h_rt, h_tt, f"cor1({a:g},{b:g})",
                           {"a": a, "b": b}, rotational=(a == b),
                           lower=hyperbolic_warping(a), upper=hyperbolic_warping(b))


def cor2_metric(alpha: float = 30.0, beta: float = 40.0, r_max: float = 20.0,
                tol: float = 1e-10) -> SurfaceMetric2D:
    """``h = cos^2 theta f_alpha + sin^2 theta f_beta`` for inverse-r curvature warpings."""
    if not 0 < alpha < beta:
        raise ValueError("need 0 < alpha < beta")
    fa = solve_jacobi(inverse_r_profile(alpha), r_max, tol)
    fb = solve_jacobi(inverse_r_profile(beta), r_max, tol)

    def mix(ga, gb):
        return lambda r, t: np.cos(t) ** 2 * ga(r) + np.sin(t) ** 2 * gb(r)

    def dmix(ga, gb, scale):
        return lambda r, t: scale(t) * (gb(r) - ga(r))

    s2 = lambda t: np.sin(2 * t)  # noqa: E731
    c2 = lambda t: 2 * np.cos(2 * t)  # noqa: E731
    return SurfaceMetric2D(
        h=mix(fa.f, fb.f), h_r=mix(fa.fp, fb.fp), h_theta=dmix(fa.f, fb.f, s2),
        h_rr=mix(fa.fpp, fb.fpp), h_rtheta=dmix(fa.fp, fb.fp, s2),
        h_thetatheta=dmix(fa.f, fb.f, c2), name=f"cor2({alpha:g},{beta:g})",
        params={"alpha": alpha, "beta": beta, "r_max": r_max}, lower=fa, upper=fb,
    )


def _rot(builder):
    return lambda **p: rotational_metric(builder(**p))


METRICS = {
    "euclidean": _rot(euclidean_warping),
    "hyperbolic": _rot(hyperbolic_warping),
    "sinh-sinh": _rot(sinh_sinh_warping),
    "sinh2": _rot(sinh2_warping),
    "example-pair-1": _rot(pair1_warping),
    "example-pair-2": _rot(pair2_warping),
    "cor1": cor1_metric,
    "cor2": cor2_metric,
}


def get_metric(name: str, **params) -> SurfaceMetric2D:
    try:
        builder = METRICS[name]
    except KeyError:
        raise ValueError(f"unknown metric {name!r}; known: {sorted(METRICS)}") from None
    return builder(**params)


# --------------------------------------------------------------------------
# pinching


@dataclass(frozen=True)
class PinchReport:
    max_K_plus_a2: float
    min_K_plus_b2: float
    argmax: tuple
    argmin: tuple
    tol: float
    holds: bool
    grid: tuple
    r_max: float

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def curvature_pinch_report(metric: SurfaceMetric2D, a: CurvatureProfile, b: CurvatureProfile,
                           grid=(64, 64), r_max: float = 6.0, tol: float = 1e-8) -> PinchReport:
    """Check ``-b^2 <= K <= -a^2`` with ``K = -h_rr/h`` on a polar sample grid."""
    n_r, n_t = grid
    if n_r < 16 or n_t < 16:
        raise ValueError("grid must be at least 16 x 16")
    r = np.linspace(0.0, r_max, n_r + 1)[1:]  # skip the pole
    t = np.linspace(0.0, 2 * np.pi, n_t, endpoint=False)
    R, T = np.meshgrid(r, t, indexing="ij")
    hrr = metric.h_rr(R, T)
    if not np.all(np.isfinite(hrr)):
        raise ValueError(f"{metric.name}: non-finite h_rr on the sample grid")
    K = -hrr / metric.h(R, T)
    up = K + a(R) ** 2
    lo = K + b(R) ** 2
    i = np.unravel_index(np.argmax(up), up.shape)
    j = np.unravel_index(np.argmin(lo), lo.shape)
    mx, mn = float(up[i]), float(lo[j])
    return PinchReport(mx, mn, (float(R[i]), float(T[i])), (float(R[j]), float(T[j])), tol,
                       bool(mx <= tol and mn >= -tol), (n_r, n_t), r_max)
