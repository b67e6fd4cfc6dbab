"""Soliton and capillary problems on geodesic disks of a 2D metric.

The equation ``div(grad u / W) = c / W`` (or ``eps u / W`` for the
capillary regularization) is discretized in divergence form on a
cell-centered polar grid ``r_i = (i + 1/2) dr``, ``theta_j = j dtheta``.
Fluxes live on cell faces, the face at the pole carries zero flux and
radial differences across the pole use the cell diametrically opposite.
Newton's method runs on the exact Jacobian of this discrete residual.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq
from scipy.sparse.linalg import spsolve

from .barriers import GeometryError, HypothesisError
from .manifold import SurfaceMetric2D
from .radial import integrate_bowl
from .reports import SCHEMA_VERSION, write_csv, write_json

ARMIJO = 1e-4
DAMPING_FLOOR = 2.0**-20


class SolverFailure(RuntimeError):
    """Newton stagnation or divergence; ``stats`` holds the residual history."""

    def __init__(self, msg, stats=None):
        super().__init__(msg)
        self.stats = stats or {}


# --------------------------------------------------------------------------
# grid data


@dataclass
class GridField:
    """Cell-centered solution on ``B(o, R)`` with its boundary data and solver record."""

    N_r: int
    N_theta: int
    R: float
    u: np.ndarray
    boundary_condition: dict
    solver_stats: dict = field(default_factory=dict)
    metric_name: str = ""

    @property
    def dr(self) -> float:
        return self.R / self.N_r

    @property
    def r(self) -> np.ndarray:
        return (np.arange(self.N_r) + 0.5) * self.dr

    @property
    def theta(self) -> np.ndarray:
        return np.arange(self.N_theta) * (2 * np.pi / self.N_theta)

    def center_value(self) -> float:
        """Mean over the innermost ring, a second-order value at the pole."""
        return float(np.mean(self.u[0]))

    def same_grid(self, other: "GridField") -> bool:
        return (self.N_r, self.N_theta) == (other.N_r, other.N_theta) and self.R == other.R

    def symmetry_deviation(self) -> float:
        """Largest spread of ``u`` along a ring."""
        return float(np.max(np.ptp(self.u, axis=1)))

    def to_csv(self, path) -> str:
        T, R = np.meshgrid(self.theta, self.r)
        return write_csv(path, ["r", "theta", "u"], [R.ravel(), T.ravel(), self.u.ravel()])

    def to_dict(self) -> dict:
        return {"schema": SCHEMA_VERSION, "metric": self.metric_name, "R": self.R,
                "grid": [self.N_r, self.N_theta],
                "boundary_condition": self.boundary_condition,
                "solver_stats": self.solver_stats}

    def write(self, stem) -> tuple:
        stem = os.fspath(stem)
        return self.to_csv(stem + ".csv"), write_json(stem + ".json", self.to_dict())


def _check_grid(grid):
    nr, nt = (int(g) for g in grid)
    if nr < 32 or nt < 32:
        raise ValueError(f"grid sizes must be at least 32, got {nr}x{nt}")
    if nt % 2:
        raise ValueError("N_theta must be even (cross-pole differences)")
    return nr, nt


class _Disk:
    """Geometry and linear difference operators for one grid.

    Gradient components at faces and cell centers are affine in ``u``;
    each is stored as a sparse matrix acting on the flattened field
    (index ``i * N_theta + j``) with the boundary-value offset kept
    separately where it applies.
    """

    def __init__(self, metric: SurfaceMetric2D, R: float, nr: int, nt: int):
        if not R > 0:
            raise ValueError("R must be positive")
        self.metric, self.R, self.nr, self.nt = metric, float(R), nr, nt
        self.N = nr * nt
        self.dr = R / nr
        self.dt = 2 * np.pi / nt
        self.r = (np.arange(nr) + 0.5) * self.dr
        self.theta = np.arange(nt) * self.dt
        i, j = np.meshgrid(np.arange(nr), np.arange(nt), indexing="ij")
        self.i, self.j = i, j
        hc = metric.h(*np.meshgrid(self.r, self.theta, indexing="ij"))
        rf = (np.arange(1, nr) * self.dr)
        hf = metric.h(*np.meshgrid(rf, self.theta, indexing="ij"))
        ha = metric.h(*np.meshgrid(self.r, self.theta + 0.5 * self.dt, indexing="ij"))
        hb = metric.h(np.full(nt, self.R), self.theta)
        for name, arr in (("cell", hc), ("face", hf), ("angular face", ha), ("boundary", hb)):
            if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
                raise GeometryError(f"metric {metric.name}: nonpositive h at {name} points")
        self.hc, self.hf, self.ha, self.hb = hc.ravel(), hf.ravel(), ha.ravel(), hb
        self.vol = self.hc * self.dr * self.dt
        # residual weight: the equation times h where h < 1, so that the
        # small pole cells do not amplify roundoff in u
        self.wt = np.minimum(self.hc, 1.0)
        self._build()

    def k(self, i, j):
        return np.asarray(i) * self.nt + np.mod(j, self.nt)

    def _mat(self, rows, cols, vals, nrows):
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(nrows, self.N))

    def _build(self):
        nr, nt, dr, dt = self.nr, self.nt, self.dr, self.dt
        # centered theta derivative at cells
        i, j = self.i.ravel(), self.j.ravel()
        row = np.arange(self.N)
        self.Qc = self._mat([row, row], [self.k(i, j + 1), self.k(i, j - 1)],
                            [np.full(self.N, 0.5 / dt), np.full(self.N, -0.5 / dt)], self.N)
        # centered r derivative at cells; ring 0 reaches across the pole
        inner = np.where(i == 0, self.k(0, j + nt // 2), self.k(np.maximum(i - 1, 0), j))
        mid = i < nr - 1
        rows = [row[mid], row[mid]]
        cols = [self.k(i[mid] + 1, j[mid]), inner[mid]]
        vals = [np.full(mid.sum(), 0.5 / dr), np.full(mid.sum(), -0.5 / dr)]
        self._Pc_interior = (rows, cols, vals)
        self.last = row[~mid]
        # radial faces i + 1/2, i = 0..nr-2
        fi, fj = np.meshgrid(np.arange(nr - 1), np.arange(nt), indexing="ij")
        fi, fj = fi.ravel(), fj.ravel()
        nf = fi.size
        frow = np.arange(nf)
        self.Pf = self._mat([frow, frow], [self.k(fi + 1, fj), self.k(fi, fj)],
                            [np.full(nf, 1 / dr), np.full(nf, -1 / dr)], nf)
        self.Qf = 0.5 * (self.Qc[self.k(fi, fj)] + self.Qc[self.k(fi + 1, fj)])
        # divergence of radial fluxes: out of cell i, into cell i+1
        self.Dr = sp.csr_matrix((np.concatenate([np.ones(nf), -np.ones(nf)]),
                                 (np.concatenate([self.k(fi, fj), self.k(fi + 1, fj)]),
                                  np.concatenate([frow, frow]))), shape=(self.N, nf))
        # angular faces (i, j + 1/2)
        self.Qa = self._mat([row, row], [self.k(i, j + 1), self.k(i, j)],
                            [np.full(self.N, 1 / dt), np.full(self.N, -1 / dt)], self.N)
        self.Da = sp.csr_matrix((np.concatenate([np.ones(self.N), -np.ones(self.N)]),
                                 (np.concatenate([row, self.k(i, j + 1)]), np.concatenate([row, row]))),
                                shape=(self.N, self.N))
        self.bcells = self.k(nr - 1, np.arange(nt))
        self.bcells2 = self.k(nr - 2, np.arange(nt))
        self.bcells3 = self.k(nr - 3, np.arange(nt))

    def center_ops(self, kind: str):
        """``(Pc, offset_coef)``: centered ``u_r`` with the last ring closed per ``kind``.

        Dirichlet uses the boundary value through the quadratic ghost
        ``(8 m - 6 u_{N-1} + u_{N-2}) / 3``; the contact-angle case uses a
        one-sided three-point difference inside the disk.
        """
        rows, cols, vals = (list(x) for x in self._Pc_interior)
        nt, dr = self.nt, self.dr
        b1, b2, b3 = self.bcells, self.bcells2, self.bcells3
        off = np.zeros(self.N)
        if kind == "dirichlet":
            rows += [b1, b1]
            cols += [b1, b2]
            vals += [np.full(nt, -1.0 / dr), np.full(nt, -1.0 / (3 * dr))]
            off[b1] = 4.0 / (3 * dr)
        else:
            rows += [b1, b1, b1]
            cols += [b1, b2, b3]
            vals += [np.full(nt, 1.5 / dr), np.full(nt, -2.0 / dr), np.full(nt, 0.5 / dr)]
        return self._mat(rows, cols, vals, self.N), off

    def angular_P(self, Pc):
        i, j = self.i.ravel(), self.j.ravel()
        return 0.5 * (Pc + Pc[self.k(i, j + 1)])


def _flux_r(P, Q, h, dt):
    """Radial flux ``h u_r / W dtheta`` and its partials in (u_r, u_theta)."""
    beta = 1.0 / (h * h)
    W = np.sqrt(1.0 + P * P + beta * Q * Q)
    W3 = W**3
    return h * P / W * dt, h * dt * (1.0 + beta * Q * Q) / W3, -h * dt * beta * P * Q / W3, W


def _flux_t(P, Q, h, dr):
    """Angular flux ``u_theta / (h W) dr`` and its partials."""
    beta = 1.0 / (h * h)
    W = np.sqrt(1.0 + P * P + beta * Q * Q)
    W3 = W**3
    a = dr / h
    return a * Q / W, -a * P * Q / W3, a * (1.0 + P * P) / W3, W


class _Problem:
    """Residual ``min(h, 1) (div(grad u/W) - s/W)`` at cell centers and its Jacobian."""

    def __init__(self, disk: _Disk, kind: str, *, c=0.0, m=0.0, phi=None, eps=None):
        self.d, self.kind = disk, kind
        self.c, self.m, self.eps = c, m, eps
        self.phi = phi
        self.Pc, pc_off = disk.center_ops(kind)
        self.pc_off = pc_off * (m if kind == "dirichlet" else 0.0)
        self.Pa = disk.angular_P(self.Pc)
        self.pa_off = disk.angular_P(sp.diags(self.pc_off).tocsr()) @ np.ones(disk.N)
        nt = disk.nt
        if kind == "dirichlet":
            # one-sided boundary-face derivative (8 m - 9 u_{N-1} + u_{N-2}) / (3 dr)
            dr = disk.dr
            rows = np.arange(nt)
            self.Pb = sp.csr_matrix((np.concatenate([np.full(nt, -3.0 / dr), np.full(nt, 1.0 / (3 * dr))]),
                                     (np.concatenate([rows, rows]),
                                      np.concatenate([disk.bcells, disk.bcells2]))), shape=(nt, disk.N))
            self.pb_off = np.full(nt, 8.0 * m / (3 * dr))
            self.Db = sp.csr_matrix((np.ones(nt), (disk.bcells, rows)), shape=(disk.N, nt))
        else:
            self.bflux = np.zeros(disk.N)
            self.bflux[disk.bcells] = -phi * disk.hb * disk.dt

    def gradients(self, u):
        d = self.d
        return (d.Pf @ u, d.Qf @ u, self.Pa @ u + self.pa_off, d.Qa @ u,
                self.Pc @ u + self.pc_off, d.Qc @ u)

    def evaluate(self, u, source_scale, *, jac=True):
        """Residual for the source ``source_scale / W_c`` (array or scalar).

        Returns ``(res, J, W_c, dS_ds, max_W)``;
        ``dS_ds = min(h, 1)/W_c`` is minus the derivative of the residual with
        respect to ``source_scale``.
        """
        d = self.d
        Pf, Qf, Pa, Qa, Pc, Qc = self.gradients(u)
        F, FP, FQ, Wf = _flux_r(Pf, Qf, d.hf, d.dt)
        G, GP, GQ, Wa = _flux_t(Pa, Qa, d.ha, d.dr)
        div = d.Dr @ F + d.Da @ G
        maxW = max(Wf.max(), Wa.max())
        if self.kind == "dirichlet":
            Pb = self.Pb @ u + self.pb_off
            Fb, FbP, _, Wb = _flux_r(Pb, np.zeros_like(Pb), d.hb, d.dt)
            div = div + self.Db @ Fb
            maxW = max(maxW, Wb.max())
        else:
            div = div + self.bflux
            maxW = max(maxW, float(np.max(1.0 / np.sqrt(1.0 - self.phi**2))))
        beta_c = 1.0 / (d.hc * d.hc)
        Wc = np.sqrt(1.0 + Pc * Pc + beta_c * Qc * Qc)
        maxW = float(max(maxW, Wc.max()))
        res = d.wt * (div / d.vol - source_scale / Wc)
        if not jac:
            return res, None, Wc, d.wt / Wc, maxW
        Vinv = sp.diags(d.wt / d.vol)
        J = d.Dr @ (sp.diags(FP) @ d.Pf + sp.diags(FQ) @ d.Qf)
        J = J + d.Da @ (sp.diags(GP) @ self.Pa + sp.diags(GQ) @ d.Qa)
        if self.kind == "dirichlet":
            J = J + self.Db @ (sp.diags(FbP) @ self.Pb)
        J = Vinv @ J
        W3 = Wc**3
        s = np.broadcast_to(source_scale, Wc.shape) * d.wt
        J = J + sp.diags(s * Pc / W3) @ self.Pc + sp.diags(s * beta_c * Qc / W3) @ d.Qc
        return res, J.tocsr(), Wc, d.wt / Wc, maxW


def _newton(F, x0, tol, max_iter, what):
    """Damped Newton with Armijo backtracking on the Euclidean residual norm.

    ``F(x, jac)`` returns ``(res, J, info)``.  Convergence is judged on the
    max-norm of ``res``.
    """
    x = np.array(x0, dtype=float)
    res, J, info = F(x, True)
    hist = [float(np.max(np.abs(res)))]
    damp = []
    it = 0
    while hist[-1] > tol:
        if it >= max_iter:
            raise SolverFailure(f"{what}: no convergence in {max_iter} Newton steps",
                                {"residual_history": hist, "damping_steps": damp})
        if not np.all(np.isfinite(res)):
            raise SolverFailure(f"{what}: nonfinite residual", {"residual_history": hist})
        dx = spsolve(J, -res)
        if not np.all(np.isfinite(dx)):
            raise SolverFailure(f"{what}: singular Newton system", {"residual_history": hist})
        n0 = float(np.linalg.norm(res))
        lam, halvings = 1.0, 0
        while True:
            xt = x + lam * dx
            rt, Jt, it_info = F(xt, True)
            if np.all(np.isfinite(rt)) and np.linalg.norm(rt) <= (1.0 - ARMIJO * lam) * n0:
                break
            # at roundoff level the norm cannot decrease further; accept a full step
            # once the max-norm already meets the tolerance
            if lam == 1.0 and np.all(np.isfinite(rt)) and np.max(np.abs(rt)) <= tol:
                break
            lam *= 0.5
            halvings += 1
            if lam < DAMPING_FLOOR:
                raise SolverFailure(f"{what}: damping floor reached",
                                    {"residual_history": hist, "damping_steps": damp})
        x, res, J, info = xt, rt, Jt, it_info
        damp.append(halvings)
        hist.append(float(np.max(np.abs(res))))
        it += 1
    return x, info, {"residual_history": hist, "newton_iterations": it, "damping_steps": damp}


def _lifted_profile(metric, c, R):
    """The radial bowl on the lower comparison model, sampled on [0, R]."""
    if metric.lower is None or c == 0:
        return None
    return integrate_bowl(metric.lower, 2, c, R * 1.0001, 1e-12)


# --------------------------------------------------------------------------
# Dirichlet problem


def solve_dirichlet(metric: SurfaceMetric2D, c: float, R: float, m: float, grid=(128, 64),
                    tol: float = 1e-10, *, u0=None, max_iter: int = 50) -> GridField:
    """Solve ``div(grad u/W) = c/W`` in ``B(o, R)`` with ``u = m`` on the boundary.

    The initial iterate is the lifted radial subsolution shifted to the
    boundary value, which for rotationally symmetric metrics is already
    within discretization error of the solution.
    """
    if c < 0:
        raise ValueError("c must be nonnegative")
    nr, nt = _check_grid(grid)
    disk = _Disk(metric, R, nr, nt)
    prob = _Problem(disk, "dirichlet", c=c, m=m)
    if u0 is None:
        prof = _lifted_profile(metric, c, R)
        if prof is None:
            u0 = np.full(disk.N, float(m))
        else:
            ua, _, _ = prof.evaluate(disk.r)
            ub, _, _ = prof.evaluate(np.array([R]))
            u0 = np.repeat(ua - ub[0] + m, nt)
    else:
        u0 = np.asarray(u0, dtype=float).ravel()

    def F(x, jac):
        res, J, _, _, maxW = prob.evaluate(x, c, jac=jac)
        return res, J, maxW

    u, maxW, stats = _newton(F, u0, tol, max_iter, "dirichlet solve")
    stats["max_W"] = maxW
    stats["tol"] = tol
    return GridField(nr, nt, float(R), u.reshape(nr, nt),
                     {"type": "dirichlet", "m": float(m), "c": float(c)}, stats, metric.name)


def soliton_residual(metric, field_: GridField) -> np.ndarray:
    """Weighted discrete residual ``min(h, 1) (div(grad u/W) - c/W)`` of a Dirichlet field."""
    bc = field_.boundary_condition
    disk = _Disk(metric, field_.R, field_.N_r, field_.N_theta)
    prob = _Problem(disk, "dirichlet", c=bc["c"], m=bc["m"])
    res, *_ = prob.evaluate(field_.u.ravel(), bc["c"], jac=False)
    return res.reshape(field_.N_r, field_.N_theta)


# --------------------------------------------------------------------------
# capillary problem


def _phi_values(phi, theta):
    if callable(phi):
        vals = np.asarray(phi(theta), dtype=float) * np.ones_like(theta)
    else:
        vals = np.full_like(theta, float(phi))
    if not np.all(np.isfinite(vals)) or np.max(np.abs(vals)) >= 1.0:
        raise HypothesisError("contact angle data must satisfy sup|phi| < 1")
    return vals


class _Capillary:
    """``div(grad u/W) = eps u/W`` with ``-u_r/W = phi`` at ``r = R``.

    Unknowns are ``(w, C)`` with ``eps u = C + eps w`` and the side
    condition that ``w`` vanishes at the pole (ring-0 mean).  The system
    stays well conditioned as ``eps`` tends to zero.
    """

    def __init__(self, metric, R, phi, grid):
        nr, nt = _check_grid(grid)
        self.disk = _Disk(metric, R, nr, nt)
        self.phi = _phi_values(phi, self.disk.theta)
        self.prob = _Problem(self.disk, "capillary", phi=self.phi)
        d = self.disk
        self.boundary_integral = float(np.sum(self.phi * d.hb) * d.dt)
        self.area = float(np.sum(d.vol))
        self.row0 = sp.csr_matrix((np.full(nt, 1.0 / nt), (np.zeros(nt, int), np.arange(nt))),
                                  shape=(1, d.N))

    def F(self, x, eps, jac):
        w, C = x[:-1], x[-1]
        res, J, Wc, dS, maxW = self.prob.evaluate(w, C + eps * w, jac=jac)
        res_all = np.concatenate([res, self.row0 @ w])
        if not jac:
            return res_all, None, (maxW, Wc)
        J = J - sp.diags(eps * dS)
        Jb = sp.bmat([[J, sp.csr_matrix(-dS).T], [self.row0, None]], format="csc")
        return res_all, Jb, (maxW, Wc)

    def solve(self, eps, x0, tol, max_iter=50):
        return _newton(lambda x, jac: self.F(x, eps, jac), x0, tol, max_iter,
                       f"capillary solve (eps={eps:g})")

    def initial(self, w0=None):
        w = np.zeros(self.disk.N) if w0 is None else np.asarray(w0, dtype=float).ravel()
        w = w - float((self.row0 @ w)[0])
        return np.concatenate([w, [-self.boundary_integral / self.area]])

    def identity_C(self, Wc) -> float:
        """``-int phi dsigma / int 1/W dA`` by the midpoint rule."""
        return -self.boundary_integral / float(np.sum(self.disk.vol / Wc))


def _capillary_field(cap, x, eps, stats, metric, phi, R):
    d = cap.disk
    w, C = x[:-1], x[-1]
    u = (C / eps + w) if eps > 0 else w
    bc = {"type": "capillary", "eps": float(eps), "phi": cap.phi.tolist()}
    stats = dict(stats, C_tilde=float(C))
    return GridField(d.nr, d.nt, float(R), u.reshape(d.nr, d.nt), bc, stats, metric.name)


def solve_capillary(metric: SurfaceMetric2D, R: float, phi, eps: float, grid=(64, 64),
                    tol: float = 1e-10, *, u0=None, max_iter: int = 50) -> GridField:
    """Solve ``div(grad u/W) = eps u/W`` with contact angle ``-u_r/W = phi`` on ``r = R``.

    ``phi`` is a constant or a callable of theta with ``sup|phi| < 1``.
    ``u0`` is an optional initial iterate.  The solver stats record
    ``eps_u_max``, the bound ``max|eps u|``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    cap = _Capillary(metric, R, phi, grid)
    x0 = cap.initial()
    if u0 is not None:
        u0 = np.asarray(u0, dtype=float).ravel()
        c0 = float((cap.row0 @ u0)[0])
        x0 = np.concatenate([u0 - c0, [eps * c0]])
    x, (maxW, Wc), stats = cap.solve(eps, x0, tol, max_iter)
    stats.update(max_W=maxW, tol=tol, eps_u_max=float(np.max(np.abs(x[-1] + eps * x[:-1]))))
    return _capillary_field(cap, x, eps, stats, metric, phi, R)


def capillary_residual(metric, field_: GridField) -> np.ndarray:
    """Weighted discrete residual ``min(h, 1) (div(grad u/W) - eps u/W)`` of a capillary field."""
    bc = field_.boundary_condition
    disk = _Disk(metric, field_.R, field_.N_r, field_.N_theta)
    prob = _Problem(disk, "capillary", phi=np.asarray(bc["phi"]))
    u = field_.u.ravel()
    res, *_ = prob.evaluate(u, bc["eps"] * u, jac=False)
    return res.reshape(field_.N_r, field_.N_theta)


@dataclass
class CapillaryResult:
    C: float
    u_normalized: GridField
    eps_path: list
    identity_residual: float
    identity_relative: float
    converged: bool
    metric_name: str = ""

    @property
    def max_W_variation(self) -> float:
        """Relative spread of max W along the path."""
        w = np.array([p[2] for p in self.eps_path])
        return float((w.max() - w.min()) / w.min())

    def to_dict(self) -> dict:
        return {"schema": SCHEMA_VERSION, "C": self.C, "eps_path": [list(p) for p in self.eps_path],
                "identity_residual": self.identity_residual,
                "identity_relative": self.identity_relative, "converged": self.converged,
                "grid": [self.u_normalized.N_r, self.u_normalized.N_theta],
                "R": self.u_normalized.R, "metric_name": self.metric_name}


def continuation_C(metric: SurfaceMetric2D, R: float, phi, eps0: float = 1.0, grid=(64, 64),
                   tol: float = 1e-7, *, solve_tol: float = 1e-10, max_levels: int = 80,
                   w_growth: float = 10.0) -> CapillaryResult:
    """Follow ``eps_k = eps0 2^-k`` until ``eps u`` is constant to ``tol``.

    Stops once both the spread of ``eps u`` and the change of the estimate
    ``C = eps u(pole)`` fall below ``tol`` on two consecutive levels.
    """
    if not eps0 > 0:
        raise ValueError("eps0 must be positive")
    cap = _Capillary(metric, R, phi, grid)
    x = cap.initial()
    path, hits, prev_C = [], 0, None
    W0 = None
    eps = eps0
    stats = {}
    converged = False
    for _ in range(max_levels):
        x, (maxW, Wc), stats = cap.solve(eps, x, solve_tol)
        C = float(x[-1]) + 0.0
        spread = eps * float(np.max(np.abs(x[:-1])))
        path.append((eps, spread, maxW))
        W0 = maxW if W0 is None else W0
        if maxW > w_growth * W0:
            raise SolverFailure(f"max W grew from {W0:.6g} to {maxW:.6g} along the eps path",
                                {"eps_path": path})
        ok = spread < tol and prev_C is not None and abs(C - prev_C) < tol
        hits = hits + 1 if ok else 0
        prev_C = C
        if hits >= 2:
            converged = True
            break
        eps *= 0.5
    Cid = cap.identity_C(Wc)
    absres = abs(C - Cid)
    rel = absres / abs(Cid) if Cid != 0 else absres
    stats.update(tol=solve_tol, max_W=maxW)
    d = cap.disk
    w = x[:-1].reshape(d.nr, d.nt)
    field_ = GridField(d.nr, d.nt, float(R), w,
                       {"type": "capillary", "eps": float(eps), "phi": cap.phi.tolist(),
                        "normalized": True}, stats, metric.name)
    return CapillaryResult(C, field_, path, float(absres), float(rel), converged, metric.name)


def isoperimetric_ratio(metric: SurfaceMetric2D, R: float, grid=(4096, 64)) -> float:
    """Midpoint-rule ``Length(dB) / Area(B)`` for ``B(o, R)``."""
    d = _Disk(metric, R, *_check_grid(grid))
    return float(np.sum(d.hb) * d.dt / np.sum(d.vol))


def gauss_curvature_max(metric, R, grid=(64, 64)) -> float:
    nr, nt = grid
    r = (np.arange(nr) + 0.5) * (R / nr)
    t = np.arange(nt) * (2 * np.pi / nt)
    return float(np.max(metric.gauss_curvature(*np.meshgrid(r, t, indexing="ij"))))


def find_phi_for_target_C(metric: SurfaceMetric2D, R: float, C0: float, tol: float = 1e-6, *,
                          A: float = 1.0, n: int = 2, grid=(32, 32), delta: float = 1e-3,
                          cont_tol: float | None = None) -> float:
    """Constant contact angle ``t`` whose capillary constant is ``C0``.

    ``C(t)`` is nonincreasing, so the root is bracketed between ``0`` and
    successively larger ``|t|`` on the side of ``-sign(C0)`` before a
    safeguarded secant/bisection search takes over.
    """
    if n != 2:
        raise ValueError("only surfaces (n = 2) are supported")
    if not abs(C0) < (n - 1) * A:
        raise HypothesisError(f"need |C0| < (n-1) A = {(n - 1) * A:g}")
    Kmax = gauss_curvature_max(metric, R)
    if Kmax > -A * A + 1e-9:
        raise HypothesisError(f"curvature pinch K <= -A^2 fails (max K = {Kmax:.6g})")
    if C0 == 0:
        return 0.0
    ct = tol / 10.0 if cont_tol is None else cont_tol

    def C(t):
        if t == 0:
            return 0.0
        return continuation_C(metric, R, t, 1.0, grid, ct).C

    side = -math.copysign(1.0, C0)
    lo, hi = 0.0, 0.5 * side
    while (C(hi) - C0) * math.copysign(1.0, C0) < 0:
        lo, hi = hi, 0.5 * (hi + side)
        if abs(hi) > 1.0 - delta:
            raise HypothesisError(f"no bracket for C0 = {C0:g} within |t| < 1 - {delta:g}")
    t = brentq(lambda s: C(s) - C0, min(lo, hi), max(lo, hi), xtol=tol / 10.0)
    if abs(C(t) - C0) > tol:
        raise SolverFailure(f"bisection ended at t = {t:.10g} with |C - C0| > {tol:g}")
    return float(t)


# --------------------------------------------------------------------------
# exhaustion


@dataclass
class ExhaustionReport:
    radii: list
    fields: list = field(repr=False)
    sup_differences: list  # consecutive solutions on B(o, 1)
    oracle_difference: float  # last solution against the lower bowl on B(o, 1)
    c_diff: float
    sandwich_violation: float
    sandwich_ok: bool
    decreasing: bool

    def to_dict(self) -> dict:
        return {"radii": self.radii, "sup_differences": self.sup_differences,
                "oracle_difference": self.oracle_difference, "c_diff": self.c_diff,
                "sandwich_violation": self.sandwich_violation, "sandwich_ok": self.sandwich_ok,
                "decreasing": self.decreasing,
                "solver_stats": [f.solver_stats for f in self.fields]}


def exhaustion_solve(metric: SurfaceMetric2D, c: float, radii, grid_per_R=(32, 64), *,
                     tol: float = 1e-10, c_diff: float | None = None, r_inner: float = 1.0,
                     sandwich_tol: float = 1e-3) -> ExhaustionReport:
    """Dirichlet solves on ``B(o, R_k)`` with data ``m_k = u_a(R_k)``.

    ``grid_per_R = (cells per unit radius, N_theta)`` keeps the radial
    spacing fixed, so the inner cells coincide across balls.  ``c_diff``
    defaults to ``sup (u_a - u_b)`` over the largest ball.
    """
    radii = [float(R) for R in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be increasing")
    if metric.lower is None or metric.upper is None:
        raise ValueError(f"metric {metric.name} carries no comparison models")
    per, nt = grid_per_R
    Rmax = radii[-1]
    if c > 0:
        ua = integrate_bowl(metric.lower, 2, c, Rmax * 1.0001, 1e-12)
        ub = integrate_bowl(metric.upper, 2, c, Rmax * 1.0001, 1e-12)
        A = lambda r: ua.evaluate(r)[0]  # noqa: E731
        Bf = lambda r: ub.evaluate(r)[0]  # noqa: E731
    else:
        A = Bf = lambda r: np.zeros_like(np.asarray(r, dtype=float))  # noqa: E731
    if c_diff is None:
        rr = np.linspace(0.0, Rmax, 2001)
        c_diff = float(max(0.0, np.max(A(rr) - Bf(rr))))
    fields, viol = [], 0.0
    for R in radii:
        nr = int(round(per * R))
        f = solve_dirichlet(metric, c, R, float(A(np.array([R]))[0]), (nr, nt), tol)
        low = A(f.r)[:, None]
        high = Bf(f.r)[:, None] + c_diff
        viol = max(viol, float(np.max(low - f.u)), float(np.max(f.u - high)))
        fields.append(f)
    ninner = int(round(per * r_inner))
    inner = [f.u[:ninner] for f in fields]
    diffs = [float(np.max(np.abs(b - a))) for a, b in zip(inner, inner[1:])]
    oracle = float(np.max(np.abs(inner[-1] - A(fields[-1].r[:ninner])[:, None])))
    dec = all(b < a for a, b in zip(diffs, diffs[1:]))
    return ExhaustionReport(radii, fields, diffs, oracle, c_diff, max(0.0, viol),
                            viol <= sandwich_tol, dec)


# --------------------------------------------------------------------------
# comparison


def comparison_check(u: GridField, v: GridField, metric: SurfaceMetric2D, tol: float | None = None) -> float:
    """``max(0, max(u - v))`` after verifying the comparison preconditions.

    Requires ``Q(u) >= Q(v) - tol`` cellwise for the discrete operator
    ``Q`` of the fields' problem, and boundary data ordered as
    ``phi_v <= phi_u + tol`` (capillary, same eps) or ``m_u <= m_v + tol``
    (Dirichlet, same c).
    """
    if not u.same_grid(v):
        raise ValueError("fields live on different grids")
    bu, bv = u.boundary_condition, v.boundary_condition
    if bu["type"] != bv["type"]:
        raise ValueError("fields solve different boundary problems")
    if tol is None:
        tol = max(u.solver_stats.get("tol") or 1e-10, v.solver_stats.get("tol") or 1e-10)
    if bu["type"] == "capillary":
        if bu["eps"] != bv["eps"]:
            raise HypothesisError("capillary fields must share eps")
        if np.any(np.asarray(bv["phi"]) > np.asarray(bu["phi"]) + tol):
            raise HypothesisError("boundary data not ordered: need phi_v <= phi_u")
        Qu, Qv = capillary_residual(metric, u), capillary_residual(metric, v)
    else:
        if bu["c"] != bv["c"]:
            raise HypothesisError("Dirichlet fields must share c")
        if bu["m"] > bv["m"] + tol:
            raise HypothesisError("boundary data not ordered: need m_u <= m_v")
        Qu, Qv = soliton_residual(metric, u), soliton_residual(metric, v)
    if np.any(Qu < Qv - tol):
        raise HypothesisError("residuals not ordered: need Q(u) >= Q(v)")
    return float(max(0.0, np.max(u.u - v.u)))
