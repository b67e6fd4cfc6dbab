"""Barrier machinery: hypothesis checkers, difference bounds, residual-cancelling sequences.

The soliton residual on a surface ``dr^2 + h^2 dtheta^2`` is

    M(u) = W div(grad u / W) - c
         = Lap u - Hess u(grad u, grad u) / W^2 - c,   W^2 = 1 + u_r^2 + u_theta^2/h^2,

so ``M(u) >= 0`` marks a subsolution and ``M(u) <= 0`` a supersolution.
:func:`soliton_operator` writes it out in coordinates.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson, quad
from scipy.interpolate import CubicSpline

from ._tails import decade_mask, decay_verdict, integrability_fit, log_grid, tail_stats
from .manifold import CurvatureProfile, SurfaceMetric2D, Warping, smoothstep, solve_jacobi
from .radial import RadialProfile, integrate_bowl
from .reports import ConditionReport, ConditionResult, write_csv


class HypothesisError(ValueError):
    """A stated hypothesis of a construction fails on the sampled range."""


class GeometryError(ValueError):
    pass


class AssemblyError(RuntimeError):
    def __init__(self, msg, location):
        super().__init__(f"{msg} at r = {location[0]:.6g}, theta = {location[1]:.6g}")
        self.location = location


# --------------------------------------------------------------------------
# operator


def soliton_operator(u_r, u_rr, u_t, u_rt, u_tt, h, h_r, h_t, c, expansion="geometric"):
    """Pointwise ``M(u)`` from the partial derivatives of ``u`` and ``h``.

    ``expansion="as-printed"`` drops the ``-h_theta u_theta / h^3`` term of
    the Laplacian and uses ``h^-3`` in the last Hessian term, the form
    the coordinate expansion is sometimes quoted in; it agrees with the
    geometric operator whenever ``h_theta = 0``.
    """
    W2 = 1.0 + u_r**2 + (u_t / h) ** 2
    if expansion == "geometric":
        lap = u_rr + u_r * h_r / h + u_tt / h**2 - h_t * u_t / h**3
        hess = (u_r**2 * u_rr + 2.0 * u_r * u_t * u_rt / h**2 - h_r * u_r * u_t**2 / h**3
                + u_t**2 * u_tt / h**4 - h_t * u_t**3 / h**5)
    elif expansion == "as-printed":
        lap = u_rr + u_r * h_r / h + u_tt / h**2
        hess = (u_r**2 * u_rr + 2.0 * u_r * u_t * u_rt / h**2 - h_r * u_r * u_t**2 / h**3
                + u_t**2 * u_tt / h**4 - h_t * u_t**3 / h**3)
    else:
        raise ValueError(f"unknown expansion {expansion!r}")
    return lap - hess / W2 - c


def spectral_dtheta(values, order: int = 1, axis: int = -1):
    """Fourier derivative along a uniformly sampled periodic axis."""
    values = np.asarray(values, dtype=float)
    n = values.shape[axis]
    k = np.fft.rfftfreq(n, d=1.0 / n)
    mult = (1j * k) ** order
    if order % 2 == 1 and n % 2 == 0:
        mult[-1] = 0.0
    shape = [1] * values.ndim
    shape[axis] = -1
    spec = np.fft.rfft(values, axis=axis) * mult.reshape(shape)
    return np.fft.irfft(spec, n=n, axis=axis)


# --------------------------------------------------------------------------
# Lemma-type curvature comparison


def _quotient_logs(a: CurvatureProfile, fa: Warping, r):
    """log of f'/(a f) = -log a - log q."""
    return -a.log_a(r) - np.log(fa.ratio(r))


def lemma26_check(a: CurvatureProfile, r_max: float, *, fa: Warping | None = None,
                  threshold: float = 0.05, quotient_tol: float = 1e-3, samples: int = 400,
                  tol: float = 1e-10, tail_start: float = 0.5) -> ConditionReport:
    """Asymptotics of ``f_a'/(a f_a)`` from the behaviour of ``a``.

    Branch (i): ``a'/a^2 -> 0`` should force the quotient to 1.
    Branch (ii): ``a' <= -c a^2`` with ``a`` not integrable (or ``f_a' -> inf``)
    should give a quotient with liminf at least
    ``sqrt(1 + c^2/4) + c/2 > 1``.

    ``fa`` defaults to a log-space Jacobi solve.  The tail is
    ``[tail_start * r_max, r_max]``; the quotient limit in branch (i) is
    judged by its value at ``r_max``.
    """
    if fa is None:
        fa = solve_jacobi(a, r_max, tol, log_space=True)
    r = np.linspace(tail_start * r_max, r_max, samples)
    mask = np.ones_like(r, dtype=bool)
    av = a(r)
    if np.any(av[mask] <= 0):
        res = ConditionResult("a>0", "inconclusive", 0.0, None, note="a vanishes on the tail")
        return ConditionReport(f"comparison criteria for {a.name}", (res,))
    Q = np.exp(_quotient_logs(a, fa, r))
    ratio = a.deriv_over_square(r)
    st_i = tail_stats(r, ratio, 0.0, mask)
    v_i = decay_verdict(st_i, threshold)
    results = [ConditionResult("i:da/a^2->0", v_i, threshold, st_i, r, ratio)]
    if v_i == "pass":
        st_q = tail_stats(r, Q, 1.0, mask)
        end_dev = abs(float(Q[-1]) - 1.0)
        v_q = "pass" if (end_dev <= quotient_tol and (st_q.decreasing or st_q.max_dev <= quotient_tol)) \
            else ("fail" if end_dev > quotient_tol and not st_q.decreasing else "inconclusive")
        results.append(ConditionResult("i:quotient->1", v_q, quotient_tol, st_q, r, Q,
                                       note=f"quotient at r_max = {Q[-1]:.12g}"))
        return ConditionReport(f"comparison criteria for {a.name}", tuple(results))
    c_est = float(np.min(-ratio[mask]))
    st_c = tail_stats(r, -ratio, 0.0, mask)
    v_c = "pass" if c_est > 0 else "fail"
    results.append(ConditionResult("ii:da<=-c a^2", v_c, 0.0, st_c, r, -ratio,
                                   note=f"c = {c_est:.6g} (tail minimum of -a'/a^2)"))
    fit = integrability_fit(r, av)
    logfp = fa.log_fp(r)
    grows = bool(np.all(np.diff(logfp[mask]) > 0))
    v_ab = "pass" if (not fit.integrable or grows) else "fail"
    results.append(ConditionResult("ii:a-not-L1-or-fp->inf", v_ab, -1.2, None, r, av,
                                   note=f"a tail exponent {fit.exponent:.4g}; f' increasing: {grows}"))
    k = math.sqrt(1.0 + 0.25 * c_est * c_est) + 0.5 * c_est if c_est > 0 else 1.0
    q_min = float(np.min(Q[mask]))
    st_q = tail_stats(r, Q, k, mask)
    v_q = "pass" if (q_min > 1.0 and q_min >= k - quotient_tol) else "fail"
    results.append(ConditionResult("ii:liminf-quotient>1", v_q, k, st_q, r, Q,
                                   note=f"tail min {q_min:.9g}, lower bound {k:.9g}"))
    return ConditionReport(f"comparison criteria for {a.name}", tuple(results))


# --------------------------------------------------------------------------
# difference of model solutions


@dataclass(frozen=True)
class DifferenceBoundReport:
    bound: float
    sup_integral: float
    allowance: float
    checks: ConditionReport
    r_max: float

    @property
    def hypotheses_hold(self) -> bool:
        return self.checks.all_pass

    def to_dict(self):
        return {"bound": self.bound, "sup_integral": self.sup_integral,
                "allowance": self.allowance, "r_max": self.r_max,
                "hypotheses_hold": self.hypotheses_hold, "checks": self.checks.to_dict()}


def difference_bound(fa: Warping, fb: Warping, n: int, c: float, h, r_max: float, *,
                     h_prime=None, threshold: float = 0.05, samples: int = 400,
                     grid: int = 20001) -> DifferenceBoundReport:
    """Bound on ``|u_b - u_a|`` for the two model bowls.

    Returns ``sup_r |int_0^r c/(n-1) (q_b - q_a)|`` plus the allowance
    ``M int_{r_max}^inf dt/h`` where ``M`` is the largest sampled value of
    ``h |q_b - q_a| c/(n-1)`` on the last decade.
    """
    k = n - 1
    rt = log_grid(max(r_max / 1000.0, 1e-3), r_max, samples)
    mask = decade_mask(rt)
    hv = h(rt)
    if np.any(hv <= 0) or np.any(np.diff(hv) < 0):
        raise HypothesisError("weight h must be positive and increasing")
    fit = integrability_fit(rt, 1.0 / hv)
    if not fit.integrable:
        raise HypothesisError("hypothesis (intva) fails: 1/h is not integrable on the sampled range")
    step = 1e-6 * np.maximum(1.0, rt)
    hp = h_prime(rt) if h_prime is not None else (h(rt + step) - h(rt - step)) / (2 * step)

    dq = np.abs(fb.ratio(rt) - fa.ratio(rt))
    hd = hv * dq
    results = []
    if np.all(hd[mask] == 0):
        results.append(ConditionResult("asymptotic-as", "pass", 0.05, tail_stats(rt, hd, 0.0, mask),
                                       rt, hd, note="identical quotients"))
    else:
        slope = float(np.polyfit(np.log(rt[mask]), np.log(np.maximum(hd[mask], 1e-300)), 1)[0])
        v = "pass" if slope < 0.05 and np.all(np.isfinite(hd)) else "fail"
        results.append(ConditionResult("asymptotic-as", v, 0.05, tail_stats(rt, hd, 0.0, mask), rt, hd,
                                       note=f"log-log growth rate of h|q_b - q_a|: {slope:.4g}"))
    for tag, w in (("a", fa), ("b", fb)):
        val = hv * w.ratio_d1(rt)
        st = tail_stats(rt, val, 0.0, mask)
        results.append(ConditionResult(f"extra-curv-as:{tag}", decay_verdict(st, threshold),
                                       threshold, st, rt, val))
    lg = hp / hv
    st = tail_stats(rt, lg, 0.0, mask)
    results.append(ConditionResult("h'/h->0", decay_verdict(st, threshold), threshold, st, rt, lg))
    results.append(ConditionResult("intva", "pass", -1.2, None, rt, 1.0 / hv,
                                   note=f"1/h tail {fit.model} fit, exponent {fit.exponent:.4g}, "
                                        f"rate {fit.rate:.4g}"))
    checks = ConditionReport(f"difference hypotheses for {fa.name} / {fb.name}", tuple(results))

    r = np.linspace(0.0, min(r_max, 50.0), grid)
    if r_max > 50.0:
        r = np.concatenate([r, np.geomspace(50.0, r_max, grid // 4)[1:]])
    integrand = c / k * (fb.ratio(r) - fa.ratio(r))
    I = cumulative_simpson(integrand, x=r, initial=0.0)
    sup_int = float(np.max(np.abs(I)))
    M = float(np.max(hd[mask])) * c / k
    with np.errstate(over="ignore"):  # 1/h underflows to 0 for exponential weights
        tail_h, _ = quad(lambda t: 1.0 / float(h(t)), r_max, np.inf, limit=200)
    allowance = M * tail_h
    return DifferenceBoundReport(sup_int + allowance, sup_int, allowance, checks, r_max)


# --------------------------------------------------------------------------
# asymptotic Dirichlet hypotheses


def adp_conditions(a: CurvatureProfile, b: CurvatureProfile, kappa: float = 0.5, eps: float = 0.1,
                   k_list=(1.0,), *, fa: Warping | None = None, r_window=(8.0, 40.0),
                   samples: int = 400, threshold: float = 0.05,
                   positive_floor: float = 1e-2) -> ConditionReport:
    """Checkers for the growth conditions on a pinched pair ``a <= b``.

    All quantities are computed from ``log a``, ``log b``, ``log f_a`` and
    ``f_a/f_a'`` so that doubly exponential profiles stay in range.
    """
    if kappa <= 0 or eps <= 0:
        raise ValueError("kappa and eps must be positive")
    lo, hi = r_window
    r = log_grid(lo, hi, samples)
    mask = decade_mask(r)
    la, lb = a.log_a(r), b.log_a(r)
    if np.any(la > lb + 1e-12):
        i = int(np.argmax(la - lb))
        raise HypothesisError(f"a <= b fails at t = {r[i]:.6g}")
    if fa is None:
        fa = solve_jacobi(a, hi + 1.0, 1e-10, log_space=True)
    q = fa.ratio(r)
    with np.errstate(over="ignore", invalid="ignore"):
        out = _adp_results(r, mask, q, a, b, fa, kappa, eps, k_list, threshold, positive_floor)
    return ConditionReport(f"growth conditions for ({a.name}, {b.name})", tuple(out))


def _adp_results(r, mask, q, a, b, fa, kappa, eps, k_list, threshold, positive_floor):
    # overflowing ratios become inf and are judged as failures
    lb = b.log_a(r)
    out = []

    a1 = np.exp(np.log(q) + (1.0 + eps) * np.log(r))
    st = tail_stats(r, a1, 0.0, mask)
    out.append(ConditionResult("a1", decay_verdict(st, threshold), threshold, st, r, a1))

    b1 = b.deriv_over_square(r)
    st = tail_stats(r, b1, 0.0, mask)
    out.append(ConditionResult("b1", decay_verdict(st, threshold), threshold, st, r, b1))

    inv_b = np.exp(-lb)
    for kk in k_list:
        for sgn, tag in ((1.0, "+"), (-1.0, "-")):
            ratio = np.exp(b.log_a(r + sgn * kk * inv_b) - lb)
            lim = float(ratio[-1])
            st = tail_stats(r, ratio, lim, mask)
            ok = np.isfinite(lim) and lim > 0 and st.max_dev <= threshold * lim and st.decreasing
            out.append(ConditionResult(f"b2:{tag}k={kk:g}", "pass" if ok else "fail", threshold, st,
                                       r, ratio, note=f"c_{tag}k ~ {lim:.12g}"))
        ab1 = np.exp(fa.log_f(np.maximum(r - kk * inv_b, 0.0)) - fa.log_f(r))
        st = tail_stats(r, ab1, 0.0, mask)
        blocks = np.array_split(ab1[mask], 4)
        mins = np.array([blk.min() for blk in blocks])
        ok = mins.min() >= positive_floor and mins[-1] >= 0.5 * mins[0]
        out.append(ConditionResult(f"ab1:k={kk:g}", "pass" if ok else "fail", positive_floor, st,
                                   r, ab1, note=f"tail minimum {mins.min():.6g}"))

    ab2 = np.exp((1.0 + kappa) * np.log(r) + lb - fa.log_fp(r))
    st = tail_stats(r, ab2, 0.0, mask)
    out.append(ConditionResult("ab2", decay_verdict(st, threshold), threshold, st, r, ab2))
    return out


# --------------------------------------------------------------------------
# v-sequence


@dataclass
class BarrierSet:
    """Per-ray tabulation of ``v_0, ..., v_k`` and the residuals of their partial sums.

    Arrays have shape ``(len(r), len(rays))``.  ``residuals[i]`` is
    ``M(v_0 + ... + v_i)``.
    """

    metric: SurfaceMetric2D
    c: float
    rays: np.ndarray
    r: np.ndarray
    v: list
    v_r: list
    v_rr: list
    residuals: list
    branch_choice: list
    tail_fits: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.v) - 1

    def partial_sum(self, upto: int | None = None):
        k = self.depth if upto is None else upto
        return (sum(self.v[: k + 1]), sum(self.v_r[: k + 1]), sum(self.v_rr[: k + 1]))

    def residual_of(self, u, u_r, u_rr, expansion="geometric"):
        return _residual_on_grid(self.metric, self.r, self.rays, u, u_r, u_rr, self.c, expansion)

    def barrier_candidates(self, eps: float = 0.2):
        """``sum v_j +- eps v_k`` as (values, u_r, u_rr) triples."""
        s, sr, srr = self.partial_sum()
        plus = (s + eps * self.v[-1], sr + eps * self.v_r[-1], srr + eps * self.v_rr[-1])
        minus = (s - eps * self.v[-1], sr - eps * self.v_r[-1], srr - eps * self.v_rr[-1])
        return plus, minus

    def to_csv(self, path) -> str:
        T, R = np.meshgrid(self.rays, self.r)
        cols = [T, R] + list(self.v) + [self.residuals[-1]]
        head = ["theta", "r"] + [f"v{i}" for i in range(len(self.v))] + ["residual"]
        return write_csv(path, head, [np.asarray(col).ravel() for col in cols])


def _residual_on_grid(metric, r, rays, u, u_r, u_rr, c, expansion="geometric"):
    R, T = np.meshgrid(r, rays, indexing="ij")
    out = np.full(R.shape, np.nan)
    pos = r > 0
    Rp, Tp = R[pos], T[pos]
    h = metric.h(Rp, Tp)
    h_r = metric.h_r(Rp, Tp)
    h_t = metric.h_theta(Rp, Tp)
    u_t = spectral_dtheta(u, 1, axis=1)
    u_tt = spectral_dtheta(u, 2, axis=1)
    u_rt = spectral_dtheta(u_r, 1, axis=1)
    out[pos] = soliton_operator(u_r[pos], u_rr[pos], u_t[pos], u_rt[pos], u_tt[pos],
                                h, h_r, h_t, c, expansion)
    # value at the pole by quadratic extrapolation along each ray
    if not pos.all():
        out[~pos] = 3 * out[1] - 3 * out[2] + out[3]
    return out


def _gauss_cumulative(fun, r, rays, nodes: int = 6):
    """Cumulative integral of fun(r, theta) along r on every ray (Gauss-Legendre per cell)."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    a, b = r[:-1], r[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    pts = mid[:, None] + half[:, None] * x[None, :]
    T = rays[None, None, :]
    vals = fun(pts[:, :, None], T)
    cell = np.einsum("ijk,j->ik", vals, w) * half[:, None]
    return np.vstack([np.zeros((1, len(rays))), np.cumsum(cell, axis=0)])


def v_sequence(metric: SurfaceMetric2D, c: float = 1.0, depth: int = 1, rays: int = 64,
               r_max: float = 12.0, grid: int = 1200) -> BarrierSet:
    """Build ``v_0 = int_0^r c h/h_r`` and up to three correction levels.

    Level ``i`` integrates ``g_i = M(v_0 + ... + v_{i-1}) h/h_r`` along each
    ray: from infinity (``v_i = int_r^inf g_i``) when the tail of ``g_i``
    is integrable on every ray, otherwise from the pole
    (``v_i = -int_0^r g_i``).  Either way ``v_i' = -g_i``, which cancels
    the leading part of the residual.
    """
    if c < 0:
        raise ValueError("c must be nonnegative")
    if not 0 <= depth <= 3:
        raise ValueError("depth must be between 0 and 3")
    if rays < 64 or rays & (rays - 1):
        raise ValueError("ray count must be a power of two, at least 64")
    theta = np.linspace(0.0, 2 * np.pi, rays, endpoint=False)
    r = np.linspace(0.0, r_max, grid + 1)
    R, T = np.meshgrid(r, theta, indexing="ij")
    h = metric.h(R, T)
    h_r = metric.h_r(R, T)
    if np.any(h_r <= 0):
        i = np.unravel_index(np.argmin(h_r), h_r.shape)
        raise GeometryError(f"h_r <= 0 at r = {R[i]:.6g}, theta = {T[i]:.6g}")
    rho = np.where(R > 0, h / h_r, 0.0)  # 1/Delta r
    v0 = _gauss_cumulative(lambda rr, tt: c * metric.h(rr, tt) / metric.h_r(rr, tt), r, theta)
    v0_r = c * rho
    v0_rr = c * (1.0 - h * metric.h_rr(R, T) / h_r**2)
    bs = BarrierSet(metric, c, theta, r, [v0], [v0_r], [v0_rr], [], [])
    bs.residuals.append(bs.residual_of(v0, v0_r, v0_rr))
    mask = decade_mask(r)
    for level in range(1, depth + 1):
        g = bs.residuals[-1] * rho
        if not np.any(g):
            z = np.zeros_like(g)
            bs.v.append(z), bs.v_r.append(z.copy()), bs.v_rr.append(z.copy())
            bs.branch_choice.append("forward_integral")
            bs.residuals.append(bs.residuals[-1].copy())
            continue
        fits = []
        for j in range(rays):
            try:
                fits.append(integrability_fit(r[mask], g[mask, j]))
            except ValueError:
                fits.append(None)
        if any(f is None for f in fits):
            msg = f"level {level}: tail test inconclusive; using the forward branch"
            warnings.warn(msg)
            bs.warnings.append(msg)
            tail = False
        else:
            tail = all(f.integrable for f in fits)
        spl = CubicSpline(r, g, axis=0)
        G = spl.antiderivative()(r)  # int_0^r g
        if tail:
            allowance = np.array([f.tail_allowance * np.sign(g[-1, j]) for j, f in enumerate(fits)])
            vi = (G[-1] - G) + allowance[None, :]
            branch = "tail_integral"
        else:
            vi = -G
            branch = "forward_integral"
        bs.v.append(vi)
        bs.v_r.append(-g)
        bs.v_rr.append(-spl(r, 1))
        bs.branch_choice.append(branch)
        bs.tail_fits.append([f.to_dict() if f else None for f in fits])
        s, sr, srr = bs.partial_sum()
        bs.residuals.append(bs.residual_of(s, sr, srr))
    return bs


def decay_rate(r, values, window=(4.0, 8.0)):
    """Least-squares slope of ``log max_theta |values|`` against ``r`` on ``window``."""
    r = np.asarray(r)
    m = (r >= window[0]) & (r <= window[1])
    env = np.max(np.abs(values[m]), axis=1)
    return float(np.polyfit(r[m], np.log(env), 1)[0])


# --------------------------------------------------------------------------
# global barriers


@dataclass
class GlobalBarriers:
    r: np.ndarray
    rays: np.ndarray
    U1: np.ndarray
    U2: np.ndarray
    M_U1: np.ndarray
    M_U2: np.ndarray
    A: float
    B: float
    tol: float
    exceptional: dict
    outside_ok: bool
    gap_tail: np.ndarray
    gap_monotone: bool
    shifts: tuple

    def to_dict(self):
        return {"A": self.A, "B": self.B, "tol": self.tol, "exceptional": self.exceptional,
                "outside_ok": self.outside_ok, "gap_monotone": self.gap_monotone,
                "shifts": list(self.shifts),
                "max_M_U1_outside": float(np.nanmax(self._outside(self.M_U1))),
                "min_M_U2_outside": float(np.nanmin(self._outside(self.M_U2)))}

    def _outside(self, arr):
        m = (self.r <= self.A) | (self.r >= self.B)
        m &= self.r > 0
        return arr[m]


def model_bowls(metric: SurfaceMetric2D, c: float, delta: float, r_max: float, tol: float = 1e-10):
    """Radial profiles ``F_-`` (lower model, speed ``c + delta``) and ``F_+`` (upper, ``c - delta``)."""
    if not 0 < delta <= c:
        raise ValueError("need 0 < delta <= c")
    if metric.lower is None or metric.upper is None:
        raise ValueError(f"metric {metric.name} carries no comparison models")
    Fm = integrate_bowl(metric.lower, 2, c + delta, r_max, tol)
    Fp = integrate_bowl(metric.upper, 2, c - delta, r_max, tol)
    return Fm, Fp


def assemble_global_barriers(bset: BarrierSet, F_minus: RadialProfile, F_plus: RadialProfile,
                             A: float, B: float, *, eps: float = 0.2, tol: float = 1e-6,
                             margin: float | None = None) -> GlobalBarriers:
    """Glue model bowls near the pole to the far-field barriers ``sum v_j +- eps v_k``.

    ``U = chi (F + shift) + (1 - chi) u`` with the quintic cutoff ``chi``
    equal to 1 on ``r <= A`` and 0 on ``r >= B``; shifts match the
    theta-averages at ``(A + B)/2``.  The candidate with nonnegative far
    residual becomes the subsolution ``U2`` (glued to ``F_minus``).
    """
    r, rays = bset.r, bset.rays
    if not 0 < A < B <= r[-1]:
        raise ValueError("need 0 < A < B <= r_max")
    if F_minus.r_max < B or F_plus.r_max < B:
        raise ValueError("model profiles must extend to B")
    c = bset.c
    zone = (r >= A) & (r <= B)
    # model residuals on the surface (precondition)
    def lift(F):
        sel = r <= B
        u, p, pp = F.evaluate(r[sel])
        pad = np.zeros(len(r) - sel.sum())
        return [np.concatenate([x, pad]) for x in (u, p, pp)]

    Fm = lift(F_minus)
    Fp = lift(F_plus)
    ones = np.ones((1, len(rays)))
    Mm = bset.residual_of(Fm[0][:, None] * ones, Fm[1][:, None] * ones, Fm[2][:, None] * ones)
    Mp = bset.residual_of(Fp[0][:, None] * ones, Fp[1][:, None] * ones, Fp[2][:, None] * ones)
    zp = zone & (r > 0)
    margin = 0.0 if margin is None else margin
    if np.min(Mm[zp]) < margin or np.max(Mp[zp]) > -margin:
        raise HypothesisError("model profiles are not strict sub/supersolutions on the matching zone")

    plus, minus = bset.barrier_candidates(eps)
    far = r >= B
    Mplus = bset.residual_of(*plus)
    # candidate whose far-field residual is nonnegative is the subsolution
    if np.nanmedian(Mplus[far]) >= 0:
        sub, sup = plus, minus
    else:
        sub, sup = minus, plus
    S, S1, S2, _ = smoothstep((r - A) / (B - A))
    L = B - A
    chi, chi1, chi2 = 1.0 - S, -S1 / L, -S2 / L**2
    im = int(np.argmin(np.abs(r - 0.5 * (A + B))))

    def glue(F, u):
        shift = float(np.mean(u[0][im]) - F[0][im])
        Fv = F[0][:, None] + shift
        Fr, Frr = F[1][:, None], F[2][:, None]
        x, xr, xrr = chi[:, None], chi1[:, None], chi2[:, None]
        U = x * Fv + (1 - x) * u[0]
        Ur = xr * (Fv - u[0]) + x * Fr + (1 - x) * u[1]
        Urr = xrr * (Fv - u[0]) + 2 * xr * (Fr - u[1]) + x * Frr + (1 - x) * u[2]
        return U, Ur, Urr, shift

    U2, U2r, U2rr, s2 = glue(Fm, sub)
    U1, U1r, U1rr, s1 = glue(Fp, sup)
    M2 = bset.residual_of(U2, U2r, U2rr)
    M1 = bset.residual_of(U1, U1r, U1rr)
    outside = ((r <= A) | (r >= B)) & (r > 0)
    R, T = np.meshgrid(r, rays, indexing="ij")
    bad = (outside[:, None] & ((M1 > tol) | (M2 < -tol)))
    if np.any(bad):
        i = np.unravel_index(np.argmax(bad), bad.shape)
        raise AssemblyError("sign pattern violated outside the matching zone", (R[i], T[i]))
    inz = zone[:, None] & ((M1 > tol) | (M2 < -tol))
    exc = {"count": int(inz.sum()), "fraction_of_zone": float(inz.sum() / max(1, zone.sum() * len(rays)))}
    if inz.any():
        exc["r_range"] = [float(R[inz].min()), float(R[inz].max())]
    gap = U1 - U2
    sup_tail = np.array([np.max(gap[i:]) for i in range(len(r))])
    tail = r >= B
    mono = bool(np.all(np.diff(sup_tail[tail]) <= 1e-12 * max(1.0, abs(sup_tail[tail][0]))))
    return GlobalBarriers(r, rays, U1, U2, M1, M2, A, B, tol, exc, True, sup_tail, mono, (s1, s2))
