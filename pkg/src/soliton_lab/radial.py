"""Radial bowl solitons on model manifolds.

A rotationally symmetric graph ``u(r)`` over ``dr^2 + xi(r)^2 dS^{n-1}``
translates at speed ``c`` when ``phi = u'`` solves

    phi' = (1 + phi^2) (c - (n - 1) (xi'/xi) phi),   phi(0) = 0.

With ``q = xi/xi'`` the slope behaves like ``c q/(n-1)`` at infinity;
the deviation ``psi = phi - c q/(n-1)`` and the rescaled corrections
``lambda = q psi`` and ``eta = (lambda + q'/c) q^2`` are exposed by
:class:`RadialProfile` and compared with their predicted limits in
:func:`asymptotic_report`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import BPoly

from ._tails import TailStats, decade_mask, decay_verdict, integrability_fit, log_grid, tail_stats
from .manifold import Warping
from .reports import ConditionReport, ConditionResult, write_csv

SWITCH_SLOPE = 10.0


@dataclass(frozen=True)
class RadialProfile:
    """Sampled bowl profile.  ``status`` is ``"complete"`` or ``"truncated"``."""

    n: int
    c: float
    r: np.ndarray
    u: np.ndarray
    phi: np.ndarray
    phi_prime: np.ndarray
    xi: Warping = field(repr=False)
    status: str = "complete"
    r_star: float | None = None

    @property
    def r_max(self) -> float:
        return float(self.r[-1])

    def _q(self):
        return self.xi.ratio(self.r)

    def psi(self) -> np.ndarray:
        if self.c == 0:
            return self.phi.copy()
        return self.phi - self.c / (self.n - 1) * self._q()

    def lam(self) -> np.ndarray:
        return self._q() * self.psi()

    def eta(self) -> np.ndarray:
        q = self._q()
        return (self.lam() + self.xi.ratio_d1(self.r) / self.c) * q * q

    def interpolant(self):
        """Quintic Hermite evaluator of ``u`` built from ``(u, phi, phi')``."""
        return BPoly.from_derivatives(self.r, np.column_stack([self.u, self.phi, self.phi_prime]))

    def evaluate(self, r):
        """``(u, phi, phi')`` at arbitrary radii inside the sampled range.

        ``phi`` comes from its own cubic Hermite interpolant and ``phi'``
        from the ODE; differentiating the height interpolant twice would
        amplify node noise by the inverse squared spacing.
        """
        r = np.asarray(r, dtype=float)
        if np.any(r < 0) or np.any(r > self.r_max * (1 + 1e-12)):
            raise ValueError(f"radius outside [0, {self.r_max}]")
        u = self.interpolant()(r)
        phi = BPoly.from_derivatives(self.r, np.column_stack([self.phi, self.phi_prime]))(r)
        pos = r > 0
        dl = self.xi.dlog(np.where(pos, r, 1.0))
        dphi = np.where(pos, (1.0 + phi * phi) * (self.c - (self.n - 1) * dl * phi), self.c / self.n)
        return u, phi, dphi

    def to_csv(self, path) -> str:
        if self.c > 0:
            psi, lam, eta = self.psi(), self.lam(), self.eta()
        else:
            psi = self.phi
            lam = eta = np.full_like(self.r, np.nan)
        return write_csv(path, ["r", "phi", "u", "psi", "lambda", "eta"],
                         [self.r, self.phi, self.u, psi, lam, eta])


def bowl_rhs(r, phi, xi, n, c):
    """Right-hand side of the slope equation."""
    return (1.0 + phi * phi) * (c - (n - 1) * xi.dlog(r) * phi)


def _default_samples(r0, r_max):
    lin = np.linspace(0.0, r_max, 2001)
    geo = np.geomspace(r0, r_max, 1001)
    # near-coincident nodes make the Hermite interpolant's derivatives noisy
    dx = lin[1]
    near = np.abs(geo - dx * np.round(geo / dx)) < 0.25 * dx
    return np.unique(np.concatenate([lin, geo[~near | (geo < 0.5 * dx)]]))


def integrate_bowl(xi: Warping, n: int = 2, c: float = 1.0, r_max: float = 50.0,
                   tol: float = 1e-10, *, r_eval=None) -> RadialProfile:
    """Integrate the bowl profile on ``[0, r_max]``.

    The slope starts from the series ``phi = c r / n`` at
    ``r0 = max(1e-6, 1e-3/(1+c))``.  Once ``phi`` exceeds 10 the
    integration continues in the angle variable ``omega = arccot(phi)``
    (the complement of ``arctan phi``), which has bounded right-hand
    side ``omega' = (n-1)(xi'/xi) cot(omega) - c`` and keeps full relative
    precision on the small quantity that drives ``phi``.  Height is
    carried as a second component ``u' = phi``.
    """
    if c < 0:
        raise ValueError("speed c must be nonnegative; reflect u -> -u to normalize")
    if n < 2:
        raise ValueError("dimension n must be at least 2")
    if not r_max > 0:
        raise ValueError("r_max must be positive")
    if r_max > getattr(xi, "r_max", math.inf) * (1 + 1e-12):
        raise ValueError(f"warping {xi.name} is only valid up to r = {xi.r_max}")
    c = float(c)
    r0 = max(1e-6, 1e-3 / (1.0 + c))
    r_out = _default_samples(r0, r_max) if r_eval is None else np.unique(np.asarray(r_eval, float))
    if r_out[0] != 0.0:
        r_out = np.concatenate([[0.0], r_out])
    if c == 0.0:
        z = np.zeros_like(r_out)
        return RadialProfile(n, c, r_out, z, z.copy(), z.copy(), xi)

    k = n - 1

    def rhs1(r, y):
        p = y[0]
        return [(1.0 + p * p) * (c - k * float(xi.dlog(r)) * p), p]

    def big(r, y):
        return y[0] - SWITCH_SLOPE

    big.terminal, big.direction = True, 1
    atol = tol * 1e-3
    y0 = [c * r0 / n, c * r0 * r0 / (2 * n)]
    s1 = solve_ivp(rhs1, (r0, r_max), y0, method="DOP853", rtol=tol, atol=atol,
                   dense_output=True, events=big)
    if s1.status < 0:
        raise RuntimeError(f"bowl integration failed: {s1.message}")
    pieces = [(r0, s1.t[-1], lambda rr: s1.sol(rr), False)]
    status, r_star = "complete", None
    if s1.status == 1:
        r_sw = float(s1.t_events[0][0])
        y_sw = s1.y_events[0][0]

        def rhs2(r, y):
            w = y[0]
            return [k * float(xi.dlog(r)) / math.tan(w) - c, 1.0 / math.tan(w)]

        def blow(r, y):
            return y[0] - 1e-12

        blow.terminal, blow.direction = True, -1
        w0 = math.atan2(1.0, y_sw[0])
        s2 = solve_ivp(rhs2, (r_sw, r_max), [w0, y_sw[1]], method="DOP853", rtol=tol,
                       atol=[tol * 1e-6, atol], dense_output=True, events=blow)
        if s2.status < 0:
            raise RuntimeError(f"bowl integration (angle phase) failed: {s2.message}")
        if s2.status == 1:
            r_star = float(s2.t_events[0][0])
            status = "truncated"

        def from_angle(rr):
            w, uu = s2.sol(rr)
            return np.vstack([1.0 / np.tan(w), uu])

        pieces = [(r0, r_sw, lambda rr: s1.sol(rr), False), (r_sw, s2.t[-1], from_angle, True)]
    r_end = pieces[-1][1]
    r_out = r_out[r_out <= r_end]
    phi = np.empty_like(r_out)
    u = np.empty_like(r_out)
    near = r_out < r0
    phi[near] = c * r_out[near] / n
    u[near] = c * r_out[near] ** 2 / (2 * n)
    for i, (lo, _hi, fn, _) in enumerate(pieces):
        sel = (r_out >= lo) & ~near
        if i + 1 < len(pieces):
            sel &= r_out < pieces[i + 1][0]
        if np.any(sel):
            vals = fn(r_out[sel])
            phi[sel], u[sel] = vals[0], vals[1]
    phi[0] = 0.0
    u[0] = 0.0
    dl = np.where(r_out > 0, xi.dlog(np.where(r_out > 0, r_out, 1.0)), 0.0)
    phi_p = (1.0 + phi * phi) * (c - k * dl * phi)
    phi_p[0] = c / n
    return RadialProfile(n, c, r_out, u, phi, phi_p, xi, status, r_star)


# --------------------------------------------------------------------------
# asymptotics


@dataclass(frozen=True)
class QuantityTail:
    name: str
    stats: TailStats | None
    tolerance: float
    verdict: str  # converged / not converged / not applicable

    def to_dict(self):
        return {"name": self.name, "tolerance": self.tolerance, "verdict": self.verdict,
                "stats": None if self.stats is None else self.stats.to_dict()}


@dataclass(frozen=True)
class AsymptoticReport:
    psi_tail: QuantityTail
    lambda_tail: QuantityTail
    eta_tail: QuantityTail
    lambda_h_tail: QuantityTail | None
    limits_expected: dict
    window: tuple

    def to_dict(self):
        return {
            "psi_tail": self.psi_tail.to_dict(),
            "lambda_tail": self.lambda_tail.to_dict(),
            "eta_tail": self.eta_tail.to_dict(),
            "lambda_h_tail": None if self.lambda_h_tail is None else self.lambda_h_tail.to_dict(),
            "limits_expected": self.limits_expected,
            "window": list(self.window),
        }


def eta_limit_expression(xi: Warping, r, n: int, c: float):
    """Predicted limit of ``eta`` written pointwise in ``q, q', q''``."""
    q, q1, q2 = xi.ratio(r), xi.ratio_d1(r), xi.ratio_d2(r)
    k = n - 1
    return (-3.0 * k * q1 * q1 + k * k * q1 + k * q * q2) / c**3


def _window_mask(r, window):
    r_hi = r[-1]
    if window == "decade":
        return decade_mask(r)
    if window == "half":
        return r >= 0.5 * r_hi
    lo, hi = window
    return (r >= lo) & (r <= hi)


def _converged(stats: TailStats, tol: float) -> str:
    return "converged" if (stats.max_dev <= tol and stats.decreasing) else "not converged"


def asymptotic_report(profile: RadialProfile, xi: Warping, h=None, *, window="decade",
                      tol_psi: float = 1e-2, tol_lambda: float = 1e-2,
                      tol_eta: float = 1e-2) -> AsymptoticReport:
    """Tail statistics of ``psi, lambda, eta`` against their predicted limits.

    ``window`` is ``"decade"`` (last log-decade of the profile),
    ``"half"`` (``r >= r_max/2``) or an explicit ``(lo, hi)`` pair.  The
    deviation is measured pointwise against the limit expressions, so a
    verdict of ``"converged"`` means every sample in the window is
    within tolerance and the block maxima of the deviation decrease.
    """
    if profile.status != "complete":
        raise ValueError("asymptotics need a complete profile")
    r = profile.r
    mask = _window_mask(r, window)
    if mask.sum() < 50:
        raise ValueError(f"tail window has {int(mask.sum())} samples; need at least 50")
    n, c = profile.n, profile.c
    rw = r[mask]
    span = (float(rw[0]), float(rw[-1]))
    if c == 0:
        na = QuantityTail("lambda", None, tol_lambda, "not applicable")
        ps = tail_stats(r, profile.phi, 0.0, mask)
        return AsymptoticReport(QuantityTail("psi", ps, tol_psi, _converged(ps, tol_psi)), na,
                                QuantityTail("eta", None, tol_eta, "not applicable"), None,
                                {"lambda": "not applicable", "eta": "not applicable"}, span)
    rr = np.where(r > 0, r, 1.0)
    psi = profile.psi()
    lam = profile.lam()
    eta = profile.eta()
    lam_target = -xi.ratio_d1(rr) / c
    eta_target = eta_limit_expression(xi, rr, n, c)
    ps = tail_stats(r, psi, 0.0, mask)
    ls = tail_stats(r, lam, lam_target, mask)
    es = tail_stats(r, eta, eta_target, mask)
    lh = None
    if h is not None:
        lam_h = h(rr) * psi
        hs = tail_stats(r, lam_h, 0.0, mask)
        lh = QuantityTail("lambda_h", hs, tol_lambda, _converged(hs, tol_lambda))
    limits = {"lambda": float(lam_target[-1]), "eta": float(eta_target[-1]), "r_end": float(r[-1])}
    return AsymptoticReport(
        QuantityTail("psi", ps, tol_psi, _converged(ps, tol_psi)),
        QuantityTail("lambda", ls, tol_lambda, _converged(ls, tol_lambda)),
        QuantityTail("eta", es, tol_eta, _converged(es, tol_eta)),
        lh, limits, span)


def _weight_derivative(h, h_prime, r):
    if h_prime is not None:
        return h_prime(r)
    step = 1e-6 * np.maximum(1.0, r)
    return (h(r + step) - h(r - step)) / (2 * step)


def check_prop8_conditions(xi: Warping, h, r_window, *, h_prime=None, n: int = 2, c: float = 1.0,
                           threshold: float = 0.05, estimate_threshold: float = 0.9,
                           samples: int = 400) -> ConditionReport:
    """Ratios that must vanish for the first-order expansion, on a log-spaced tail.

    (i)   ``|q'| / min(max(1, q^2), max(q, 1/q))``
    (ii)  ``|h q'| / max(q, 1/q)``
    (iii) ``|h'/h| / max(1/q, q)``

    When the literal ratio in (iii) does not decay, the weaker
    requirement actually used to control ``lambda'`` is tested instead:
    ``(h'/h) / ((n-1)/q + c^2 q/(n-1))`` must stay below
    ``estimate_threshold`` (< 1) on the tail.  The note on the result
    records which form decided the verdict.
    """
    lo, hi = r_window
    r = log_grid(lo, hi, samples)
    mask = decade_mask(r)
    q, q1 = xi.ratio(r), xi.ratio_d1(r)
    hv = h(r)
    hp = _weight_derivative(h, h_prime, r)
    qi = np.maximum(q, 1.0 / q)
    ratios = {
        "i": np.abs(q1) / np.minimum(np.maximum(1.0, q * q), qi),
        "ii": np.abs(hv * q1) / qi,
        "iii": np.abs(hp / hv) / qi,
    }
    results = []
    for cid, vals in ratios.items():
        st = tail_stats(r, vals, 0.0, mask)
        verdict = decay_verdict(st, threshold)
        note = "literal ratio"
        if cid == "iii" and verdict != "pass":
            k = n - 1
            est = (hp / hv) / (k / q + c * c * q / k)
            st2 = tail_stats(r, est, 0.0, mask)
            v2 = "pass" if st2.max_dev < estimate_threshold else "fail"
            note = (f"literal ratio {verdict} (tail max {st.max_dev:.3g}); decided by the "
                    f"lambda-derivative estimate, tail max {st2.max_dev:.3g} < {estimate_threshold}"
                    if v2 == "pass" else
                    f"literal ratio {verdict}; lambda-derivative estimate tail max {st2.max_dev:.3g}")
            results.append(ConditionResult(cid, v2, estimate_threshold, st2, r, est, note))
            continue
        results.append(ConditionResult(cid, verdict, threshold, st, r, vals, note))
    return ConditionReport(f"first-order conditions for {xi.name}", tuple(results))


# --------------------------------------------------------------------------
# bounded entire solutions


@dataclass(frozen=True)
class BoundedSolutionReport:
    c1: float | None
    total_height: float | str
    integrable: bool
    fit: dict
    min_residual: float | None
    r_max: float

    def to_dict(self):
        return dict(self.__dict__)


def bounded_height(xi: Warping, n: int = 2, c: float = 1.0, *, r_max: float = 30.0,
                   samples: int = 4000, max_doublings: int = 40) -> BoundedSolutionReport:
    """Bounded radial subsolution ``v = c1/(n-1) * int_0^r q`` when ``q`` is integrable.

    ``c1`` is the first value in ``c, 2c, 4c, ...`` for which the radial
    residual ``c1 - c + (c1 q'/(n-1)) / (1 + (c1 q/(n-1))^2)`` is
    nonnegative on the sample grid.
    """
    if c < 0:
        raise ValueError("speed c must be nonnegative")
    r_max = min(r_max, getattr(xi, "r_max", math.inf))
    if c == 0:
        return BoundedSolutionReport(0.0, 0.0, True, {}, 0.0, r_max)
    rt = log_grid(r_max / 100.0, r_max, 400)
    fit = integrability_fit(rt, xi.ratio(rt), log_g=np.log(xi.ratio(rt)))
    if not fit.integrable:
        return BoundedSolutionReport(None, "divergent", False, fit.to_dict(), None, r_max)
    k = n - 1
    r = np.linspace(0.0, r_max, samples)
    q, q1 = xi.ratio(r), xi.ratio_d1(r)
    c1 = c
    for _ in range(max_doublings):
        v1 = c1 * q / k
        res = c1 - c + (c1 * q1 / k) / (1.0 + v1 * v1)
        if res.min() >= 0.0:
            break
        c1 *= 2.0
    else:
        raise RuntimeError("no admissible c1 found in the geometric scan")
    # integrate q on unit pieces; the tail past r_max comes from the fit
    edges = np.unique(np.concatenate([np.arange(0.0, r_max, 1.0), [r_max]]))
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = quad(lambda x: float(xi.ratio(x)), a, b, epsabs=1e-15, epsrel=1e-13, limit=200)
        total += val
    total += fit.tail_allowance
    return BoundedSolutionReport(c1, c1 / k * total, True, fit.to_dict(), float(res.min()), r_max)
