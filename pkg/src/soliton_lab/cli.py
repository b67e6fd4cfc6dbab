"""Command-line front end.

Experiments are described by ``key = value`` config files with the flat
sections ``[experiment]``, ``[metric]``, ``[numeric]`` and ``[output]``;
flags of the same names override them.  Every JSON artifact embeds the
fully resolved config and the schema version.

Exit status: 0 on success, 2 when a hypothesis check fails or an input is
rejected, 1 when a
solver fails.
"""
from __future__ import annotations

import argparse
import configparser
import inspect
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import barriers, disk_solver, manifold, radial
from .reports import SCHEMA_VERSION, write_csv, write_json

COMMANDS = ("jacobi", "bowl", "asymptotics", "conditions", "barriers", "disk-dirichlet",
            "capillary", "find-phi", "exhaustion")
FORMATS = ("csv", "json", "both")

# numeric keys and defaults per command; anything else is rejected
_COMMON = {"n": 2, "c": 1.0}
NUMERIC = {
    "jacobi": {"r_max": 10.0, "tol": 1e-10, "step": 0.01, "log_space": False},
    "bowl": {"r_max": 50.0, "tol": 1e-10},
    "asymptotics": {"r_max": 200.0, "tol": 1e-12, "window": "decade", "weight": "none"},
    "conditions": {"battery": "adp", "b_profile": "same", "kappa": 0.5, "eps": 0.1,
                   "k_list": "1", "r_window": "8,40", "r_max": 12.0, "tol": 1e-10,
                   "weight": "r^2", "fb": "hyperbolic"},
    "barriers": {"r_max": 12.0, "depth": 1, "rays": 64, "grid_r": 1200, "A": 6.0, "B": 10.0,
                 "eps": 0.2, "delta": 0.5, "tol": 1e-6},
    "disk-dirichlet": {"R": 3.0, "m": 0.0, "grid": "128x64", "tol": 1e-10},
    "capillary": {"R": 2.0, "phi": 0.0, "eps0": 1.0, "grid": "64x64", "tol": 1e-7,
                  "solve_tol": 1e-10},
    "find-phi": {"R": 1.0, "target_C": 0.5, "A": 1.0, "grid": "32x32", "tol": 1e-6},
    "exhaustion": {"radii": "2,3,4", "cells_per_unit": 64, "N_theta": 64, "tol": 1e-10},
}

# metric name -> curvature-profile builder taking the warping's params
_PROFILE_OF = {
    "euclidean": lambda: manifold.constant_profile(0.0),
    "hyperbolic": lambda k=1.0: manifold.constant_profile(k),
    "sinh-sinh": manifold.sinh_sinh_profile,
    "sinh2": lambda: manifold.constant_profile(2.0),
    "example-pair-1": manifold.pair1_b_profile,
    "example-pair-2": manifold.pair2_a_profile,
}

WEIGHTS = {
    "r^2": (lambda r: r * r, lambda r: 2 * r),
    "exp": (np.exp, np.exp),
    "sinh": (np.sinh, np.cosh),
    "r/log": (lambda r: r / np.log(r), lambda r: (np.log(r) - 1) / np.log(r) ** 2),
    "exp/log": (lambda r: np.exp(r) / np.log(r),
                lambda r: np.exp(r) * (np.log(r) - 1 / r) / np.log(r) ** 2),
}


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# config handling


def _coerce(text):
    if isinstance(text, str):
        low = text.strip().lower()
        if low in ("true", "false"):
            return low == "true"
        for cast in (int, float):
            try:
                return cast(text)
            except ValueError:
                pass
        return text.strip()
    return text


def _metric_params(name: str):
    builder = manifold.METRICS.get(name)
    if builder is None and name not in _PROFILE_OF and name != "inverse-r":
        raise ConfigError(f"unknown metric {name!r}")
    if name == "inverse-r":
        return set(inspect.signature(manifold.inverse_r_profile).parameters)
    if name in manifold.WARPINGS:
        return set(inspect.signature(manifold.WARPINGS[name]).parameters)
    return set(inspect.signature(builder).parameters)


def resolve_config(sections: dict) -> dict:
    """Validate a raw ``{section: {key: value}}`` mapping and fill defaults."""
    unknown = set(sections) - {"experiment", "metric", "numeric", "output"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    exp = dict(sections.get("experiment", {}))
    command = exp.pop("command", None)
    if exp:
        raise ConfigError(f"unknown [experiment] keys: {sorted(exp)}")
    if command not in COMMANDS:
        raise ConfigError(f"command must be one of {COMMANDS}, got {command!r}")
    met = {k: _coerce(v) for k, v in sections.get("metric", {}).items()}
    name = met.pop("name", None)
    if name is None:
        raise ConfigError("[metric] needs a name")
    allowed = _metric_params(name)
    bad = set(met) - allowed
    if bad:
        raise ConfigError(f"metric {name!r} takes {sorted(allowed)}; got unknown {sorted(bad)}")
    defaults = dict(_COMMON, **NUMERIC[command])
    num = {k: _coerce(v) for k, v in sections.get("numeric", {}).items()}
    bad = set(num) - set(defaults)
    if bad:
        raise ConfigError(f"command {command!r} takes numeric keys {sorted(defaults)}; "
                          f"got unknown {sorted(bad)}")
    numeric = dict(defaults, **num)
    out = dict(sections.get("output", {}))
    odir = out.pop("dir", "out")
    fmt = out.pop("format", "both")
    if out:
        raise ConfigError(f"unknown [output] keys: {sorted(out)}")
    if fmt not in FORMATS:
        raise ConfigError(f"format must be one of {FORMATS}")
    return {"command": command, "metric": {"name": name, "params": met},
            "numeric": numeric, "output": {"dir": str(odir), "format": fmt}}


def read_config(path) -> dict:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keep key case (A, B, R)
    with open(path) as fh:
        cp.read_file(fh)
    return {s: dict(cp[s]) for s in cp.sections()}


def _apply_flags(sections: dict, args) -> dict:
    sec = {k: dict(v) for k, v in sections.items()}
    if args.command:
        sec.setdefault("experiment", {})["command"] = args.command
    if args.metric:
        sec.setdefault("metric", {})["name"] = args.metric
    name = sec.get("metric", {}).get("name")
    mparams = _metric_params(name) if name else set()
    for kv in args.param or []:
        if "=" not in kv:
            raise ConfigError(f"--param expects k=v, got {kv!r}")
        k, v = (s.strip() for s in kv.split("=", 1))
        sec.setdefault("metric" if k in mparams else "numeric", {})[k] = v
    if args.tol is not None:
        sec.setdefault("numeric", {})["tol"] = args.tol
    if args.grid:
        sec.setdefault("numeric", {})["grid"] = args.grid
    if args.out:
        sec.setdefault("output", {})["dir"] = args.out
    if args.format:
        sec.setdefault("output", {})["format"] = args.format
    return sec


def _grid(text):
    try:
        nr, nt = (int(x) for x in str(text).lower().split("x"))
    except ValueError:
        raise ConfigError(f"grid must look like NRxNT, got {text!r}") from None
    return nr, nt


def _floats(text):
    return tuple(float(x) for x in str(text).split(","))


# --------------------------------------------------------------------------
# dispatch


def _warping(cfg):
    m = cfg["metric"]
    return manifold.get_warping(m["name"], **m["params"])


def _profile(cfg):
    m = cfg["metric"]
    if m["name"] == "inverse-r":
        return manifold.inverse_r_profile(**m["params"])
    if m["name"] not in _PROFILE_OF:
        raise ConfigError(f"metric {m['name']!r} has no radial curvature profile")
    return _PROFILE_OF[m["name"]](**m["params"])


def _weight(name):
    try:
        return WEIGHTS[name]
    except KeyError:
        raise ConfigError(f"weight must be one of {sorted(WEIGHTS)}") from None


def _run_jacobi(cfg, num, out):
    a = _profile(cfg)
    w = manifold.solve_jacobi(a, num["r_max"], num["tol"], log_space=bool(num["log_space"]))
    r = np.linspace(0.0, w.r_max, int(round(w.r_max / num["step"])) + 1)
    cols = [r, w.log_f(r), np.log(w.ratio(r))] if num["log_space"] else [r, w.f(r), w.fp(r)]
    head = ["r", "log_f", "log_q"] if num["log_space"] else ["r", "f", "fp"]
    out.csv("jacobi", head, cols)
    res = {"status": w.status, "r_max": w.r_max}
    return res, f"status={w.status}", 0


def _run_bowl(cfg, num, out):
    p = radial.integrate_bowl(_warping(cfg), num["n"], num["c"], num["r_max"], num["tol"])
    if out.want_csv:
        p.to_csv(out.path("bowl.csv"))
    res = {"status": p.status, "r_max": p.r_max, "r_star": p.r_star,
           "phi_end": float(p.phi[-1]), "u_end": float(p.u[-1])}
    return res, f"phi(r_max)={p.phi[-1]:.12g} status={p.status}", 0


def _run_asymptotics(cfg, num, out):
    xi = _warping(cfg)
    p = radial.integrate_bowl(xi, num["n"], num["c"], num["r_max"], num["tol"])
    window = num["window"] if num["window"] in ("decade", "half") else _floats(num["window"])
    h = None if num["weight"] == "none" else _weight(num["weight"])[0]
    rep = radial.asymptotic_report(p, xi, h, window=window)
    if out.want_csv:
        p.to_csv(out.path("asymptotics.csv"))
    d = rep.to_dict()
    ok = all(d[k]["verdict"] in ("converged", "not applicable")
             for k in ("psi_tail", "lambda_tail", "eta_tail"))
    return d, f"eta max dev={rep.eta_tail.stats.max_dev if rep.eta_tail.stats else 0:.3g} " \
              f"{'converged' if ok else 'not converged'}", 0 if ok else 2


def _report_outcome(rep, out, stem):
    d = rep.to_dict()
    if out.want_csv:
        rows = [(c.condition_id, c.verdict) for c in rep.results]
        with open(out.path(stem + ".csv"), "w") as fh:
            fh.write("condition_id,verdict\n")
            fh.writelines(f"{a},{b}\n" for a, b in rows)
    summary = " ".join(f"{k}:{v}" for k, v in rep.verdicts.items())
    return d, summary, 0 if rep.all_pass else 2


def _run_conditions(cfg, num, out):
    battery = num["battery"]
    if battery == "adp":
        a = _profile(cfg)
        b = a if num["b_profile"] == "same" else manifold.get_profile(num["b_profile"])
        try:
            fa = _warping(cfg)
        except ValueError:
            fa = None
        rep = barriers.adp_conditions(a, b, num["kappa"], num["eps"], _floats(num["k_list"]),
                                      fa=fa, r_window=_floats(num["r_window"]))
        return _report_outcome(rep, out, "conditions")
    if battery == "lemma26":
        rep = barriers.lemma26_check(_profile(cfg), num["r_max"], tol=num["tol"])
        return _report_outcome(rep, out, "conditions")
    if battery == "prop8":
        h, hp = _weight(num["weight"])
        rep = radial.check_prop8_conditions(_warping(cfg), h, _floats(num["r_window"]), h_prime=hp,
                                            n=num["n"], c=num["c"])
        return _report_outcome(rep, out, "conditions")
    if battery == "difference":
        h, hp = _weight(num["weight"])
        fb = manifold.get_warping(num["fb"])
        rep = barriers.difference_bound(_warping(cfg), fb, num["n"], num["c"], h, num["r_max"],
                                        h_prime=hp)
        d, summary, status = _report_outcome(rep.checks, out, "conditions")
        return rep.to_dict(), f"bound={rep.bound:.12g} {summary}", status
    if battery == "bounded":
        rep = radial.bounded_height(_warping(cfg), num["n"], num["c"], r_max=num["r_max"])
        return rep.to_dict(), f"total_height={rep.total_height}", 0
    raise ConfigError(f"unknown battery {battery!r}")


def _metric2d(cfg):
    m = cfg["metric"]
    return manifold.get_metric(m["name"], **m["params"])


def _run_barriers(cfg, num, out):
    met = _metric2d(cfg)
    bs = barriers.v_sequence(met, num["c"], int(num["depth"]), int(num["rays"]), num["r_max"],
                             int(num["grid_r"]))
    rate = barriers.decay_rate(bs.r, bs.residuals[0])
    Fm, Fp = barriers.model_bowls(met, num["c"], num["delta"], num["r_max"])
    gb = barriers.assemble_global_barriers(bs, Fm, Fp, num["A"], num["B"], eps=num["eps"], tol=num["tol"])
    if out.want_csv:
        bs.to_csv(out.path("barriers.csv"))
    res = {"decay_rate": rate, "branch_choice": bs.branch_choice, "warnings": bs.warnings,
           "global": gb.to_dict()}
    return res, f"decay_rate={rate:.6g} sign_pattern=ok", 0


def _run_dirichlet(cfg, num, out):
    f = disk_solver.solve_dirichlet(_metric2d(cfg), num["c"], num["R"], num["m"], _grid(num["grid"]),
                                    num["tol"])
    if out.want_csv:
        f.to_csv(out.path("disk-dirichlet.csv"))
    return f.to_dict(), f"center u={f.center_value():.12g} newton={f.solver_stats['newton_iterations']}", 0


def _run_capillary(cfg, num, out):
    res = disk_solver.continuation_C(_metric2d(cfg), num["R"], num["phi"], num["eps0"],
                                     _grid(num["grid"]), num["tol"], solve_tol=num["solve_tol"])
    if out.want_csv:
        res.u_normalized.to_csv(out.path("capillary.csv"))
    return res.to_dict(), f"C={res.C:.12g} identity_rel={res.identity_relative:.3g}", \
        0 if res.converged else 1


def _run_find_phi(cfg, num, out):
    met = _metric2d(cfg)
    t = disk_solver.find_phi_for_target_C(met, num["R"], num["target_C"], num["tol"], A=num["A"],
                                          n=num["n"], grid=_grid(num["grid"]))
    return {"t": t, "target_C": num["target_C"]}, f"t={t:.12g}", 0


def _run_exhaustion(cfg, num, out):
    rep = disk_solver.exhaustion_solve(_metric2d(cfg), num["c"], _floats(num["radii"]),
                                       (int(num["cells_per_unit"]), int(num["N_theta"])), tol=num["tol"])
    if out.want_csv:
        write_csv(out.path("exhaustion.csv"), ["pair", "sup_difference"],
                  [np.arange(len(rep.sup_differences)), rep.sup_differences])
    status = 0 if rep.sandwich_ok else 2
    return rep.to_dict(), f"oracle_difference={rep.oracle_difference:.3g} " \
                          f"decreasing={rep.decreasing}", status


RUNNERS = {
    "jacobi": _run_jacobi, "bowl": _run_bowl, "asymptotics": _run_asymptotics,
    "conditions": _run_conditions, "barriers": _run_barriers, "disk-dirichlet": _run_dirichlet,
    "capillary": _run_capillary, "find-phi": _run_find_phi, "exhaustion": _run_exhaustion,
}


class _Output:
    def __init__(self, cfg):
        self.dir = cfg["output"]["dir"]
        fmt = cfg["output"]["format"]
        self.want_csv = fmt in ("csv", "both")
        self.want_json = fmt in ("json", "both")
        try:
            os.makedirs(self.dir, exist_ok=True)
        except OSError as e:
            raise OSError(f"cannot create output directory {self.dir}: {e}") from e

    def path(self, name):
        return os.path.join(self.dir, name)

    def csv(self, stem, head, cols):
        if self.want_csv:
            write_csv(self.path(stem + ".csv"), head, cols)


def run(cfg: dict) -> tuple:
    """Execute a resolved config; returns ``(exit_status, summary_line)``."""
    out = _Output(cfg)
    command = cfg["command"]
    payload = {"schema": SCHEMA_VERSION, "config": cfg}
    try:
        result, summary, status = RUNNERS[command](cfg, cfg["numeric"], out)
        payload["result"] = result
    except (barriers.HypothesisError, ConfigError) as e:
        status, summary = 2, f"hypothesis check failed: {e}"
        payload["failure"] = {"kind": type(e).__name__, "message": str(e)}
    except ValueError as e:  # geometry or parameter rejected before solving
        status, summary = 2, f"input rejected: {e}"
        payload["failure"] = {"kind": type(e).__name__, "message": str(e)}
    except (disk_solver.SolverFailure, barriers.AssemblyError, RuntimeError) as e:
        status, summary = 1, f"solver failed: {e}"
        payload["failure"] = {"kind": type(e).__name__, "message": str(e),
                              "report": getattr(e, "stats", None)}
    payload["exit_status"] = status
    if out.want_json:
        write_json(out.path(command + ".json"), payload)
    return status, f"{command}: {summary}"


def _threads(n_jobs: int) -> int:
    cap = os.environ.get("SOLITON_LAB_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(n_jobs, limit))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="soliton-lab", description=__doc__.splitlines()[0])
    p.add_argument("--config", action="append", help="config file (repeat for a batch)")
    p.add_argument("--command", choices=COMMANDS)
    p.add_argument("--metric", help="metric or warping name")
    p.add_argument("--param", action="append", metavar="K=V",
                   help="metric parameter or numeric setting (repeatable)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--tol", type=float)
    p.add_argument("--grid", help="NRxNT")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    paths = args.config or [None]
    jobs = []
    try:
        for path in paths:
            sections = read_config(path) if path else {}
            cfg = resolve_config(_apply_flags(sections, args))
            if len(paths) > 1:
                stem = os.path.splitext(os.path.basename(path))[0]
                cfg["output"]["dir"] = os.path.join(cfg["output"]["dir"], stem)
            jobs.append(cfg)
    except (ConfigError, OSError, configparser.Error) as e:
        print(f"soliton-lab: {e}", file=sys.stderr)
        return 2
    try:
        if len(jobs) == 1:
            results = [run(jobs[0])]
        else:
            with ThreadPoolExecutor(max_workers=_threads(len(jobs))) as ex:
                results = list(ex.map(run, jobs))
    except OSError as e:
        print(f"soliton-lab: {e}", file=sys.stderr)
        return 1
    for _, line in results:
        print(line)
    return max(s for s, _ in results)


if __name__ == "__main__":
    sys.exit(main())
