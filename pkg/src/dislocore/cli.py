"""
Command-line entry point ``dislocore``.

Exit status: 0 on success, 1 for configuration errors, 2 for solver failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from . import lattice as la
from .errors import ConfigError, DislocoreError

EPS_TARGET = 0.0475
EPS_HALF_WIDTH = 0.0005


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def _write_csv(path, header, rows):
    _ensure_dir(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in r])


def _write_json(path, obj):
    _ensure_dir(path)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _ensure_dir(path):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)


def _clean(obj):
    """Replace non-finite floats with None so that JSON stays valid."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _jobs(args):
    if getattr(args, "jobs", None):
        return args.jobs
    env = os.environ.get("DISLOCORE_THREADS")
    return int(env) if env and env.isdigit() else 1


def _out(args, cfg, name, default):
    return args.out or cfg.outputs.get(name) or default


# --- subcommands --------------------------------------------------------------


def cmd_gamma(args, cfg):
    from .gamma import GammaSurface, validate_gamma
    from .potentials import elastic_alpha

    V, U = cfg.potentials()
    g = GammaSurface.from_potential(U, elastic_alpha(V).alpha, grid_size=cfg.gamma_grid)
    path = args.csv or args.out or cfg.outputs.get("gamma", "gamma.csv")
    _write_csv(path, ["phi", "gamma"], zip(g.grid, g.values))
    rep = validate_gamma(g)
    print(f"gamma''(0) = {g.gamma2_at_0:.10g}  alpha = {g.alpha:.10g}  "
          f"c0 = {rep.c0:.4g}  m' = {rep.m_prime:.4g}  max violation = {rep.max_violation:.3g}")
    print(f"wrote {path}")
    return 0


def _pn_solution(cfg):
    from .gamma import GammaSurface
    from .pn import solve_pn
    from .potentials import elastic_alpha

    V, U = cfg.potentials()
    g = GammaSurface.from_potential(U, elastic_alpha(V).alpha, grid_size=cfg.gamma_grid)
    return solve_pn(g, L=cfg.pn_L, tol=cfg.pn_tol)


def cmd_pn_solve(args, cfg):
    from .pn import first_integral_residual, pn_energy

    sol = _pn_solution(cfg)
    path = _out(args, cfg, "profile", "profile.csv")
    vp, vm = sol.displacement(sol.grid)
    _write_csv(path, ["x", "phi", "dphi", "v_plus", "v_minus"],
               zip(sol.grid, sol.phi, sol.phi_derivs[0], vp, vm))
    print(f"E_PN = {pn_energy(sol):.12g}  mu = {sol.tail_rate:.8g}  L = {sol.L:.6g}  "
          f"first-integral residual = {first_integral_residual(sol):.3g}")
    print(f"wrote {path}")
    return 0


def cmd_pn_stability(args, cfg):
    from .pn import pn_stability_kappa

    sol = _pn_solution(cfg)
    N = cfg.kappa_grid
    kappa = pn_stability_kappa(sol, N)
    kappa2 = pn_stability_kappa(sol, 2 * N)
    rep = {"kappa": kappa, "N": N, "L": sol.L, "kappa_2N": kappa2,
           "relative_change": abs(kappa2 - kappa) / abs(kappa)}
    path = _out(args, cfg, "pn_stability", "pn_stability.json")
    _write_json(path, _clean(rep))
    print(f"kappa = {kappa:.8g} (N = {N}), {kappa2:.8g} (N = {2 * N})")
    print(f"wrote {path}")
    return 0


def _relaxed(cfg, study=None):
    from .pn import solve_pn

    study = cfg.study() if study is None else study
    g = study.gamma_surface()
    eps = cfg.eps
    N = study.window(eps, g.tail_rate)
    L = cfg.pn_L if cfg.pn_L is not None else 20.0 / g.tail_rate
    sol = solve_pn(g, L=max(L, eps * N), tol=cfg.pn_tol)
    v = la.sample_pn(sol, eps, N, study.model)
    rel, info = la.relax(v, mode=cfg.mode, tol=cfg.tol, max_iter=cfg.max_iter)
    return sol, v, rel, info


def cmd_relax(args, cfg):
    sol, v, rel, info = _relaxed(cfg)
    path = _out(args, cfg, "state", "state.csv")
    _write_csv(path, ["i", "u_plus", "u_minus", "u_perp"], la.state_to_rows(rel))
    if args.dump_grad:
        g = la.grad_a(rel)
        n = 2 * rel.N + 1
        _write_csv(args.dump_grad, ["i", "g_plus", "g_minus"], zip(rel.index, g[:n], g[n:]))
    err = la.x_eps_norm(rel.vector() - v.vector(), rel.eps)
    print(f"eps = {rel.eps:g}  N = {rel.N}  iterations = {info.iterations}  "
          f"|grad| = {info.grad_norm:.3g}  ||u - v||_X = {err:.6g}")
    print(f"wrote {path}")
    return 0


def cmd_sweep(args, cfg):
    from .analysis import convergence_sweep

    study = cfg.study(jobs=_jobs(args), stability=not args.no_stability)
    t0 = time.perf_counter()
    tab = convergence_sweep(cfg.eps_list, study)
    path = _out(args, cfg, "table", "table.csv")
    rows = [(r.eps, r.x_err, r.e_gap, r.consist) for r in tab.rows]
    s = tab.slopes
    rows.append(("slope", s["x_err"].slope, s["e_gap"].slope, s["consist"].slope))
    _write_csv(path, ["eps", "x_err", "e_gap", "consist"], rows)
    if args.json:
        _write_json(args.json, _clean({
            "rows": [r.__dict__ for r in tab.rows],
            "slopes": {k: v.__dict__ for k, v in s.items()},
            "kappa": tab.kappa,
        }))
    for r in tab.rows:
        flag = "" if r.ok else f"  FAILED ({r.message})"
        print(f"eps = {r.eps:<8g} x_err = {r.x_err:.4e}  e_gap = {r.e_gap:.4e}  "
              f"consist = {r.consist:.4e}  lambda_atom = {r.lambda_atom:.5g}{flag}")
    for k, v in s.items():
        print(f"slope[{k}] = {v.slope:.4f}  95% CI ({v.ci95[0]:.4f}, {v.ci95[1]:.4f})  R^2 = {v.r2:.6f}")
    print(f"wrote {path} ({time.perf_counter() - t0:.1f} s)")
    return 0 if all(r.ok for r in tab.rows) else 2


def cmd_delta(args, cfg):
    from .analysis import delta_gap

    V, _ = cfg.potentials()
    rep = delta_gap(V)
    path = _out(args, cfg, "gap", "gap.json")
    _write_json(path, _clean(rep.to_dict()))
    print(f"Delta = {rep.delta:.6g} (raw sup {rep.raw:.3g} at k = {rep.k_star:.6g}); "
          f"circulant = {rep.circulant:.6g}")
    print(f"wrote {path}")
    return 0


def cmd_stability(args, cfg):
    from .analysis import atom_stability
    from .pn import pn_stability_kappa

    sol, v, rel, info = _relaxed(cfg)
    pinned = atom_stability(rel, pin=True)
    free = atom_stability(rel, pin=False)
    pinned.lambda_min_pn = pn_stability_kappa(sol, cfg.kappa_grid, L=20.0 / sol.tail_rate)
    pinned.grid_size = cfg.kappa_grid
    rep = pinned.to_dict()
    rep["lambda_min_atom_unpinned"] = free.lambda_min_atom
    path = _out(args, cfg, "stability", "stability.json")
    _write_json(path, _clean(rep))
    print(f"lambda_min(atom) = {pinned.lambda_min_atom:.8g}  unpinned = {free.lambda_min_atom:.3g}  "
          f"kappa(PN) = {pinned.lambda_min_pn:.8g}")
    print(f"wrote {path}")
    return 0


def cmd_epsilon(args, cfg):
    from .gamma import graphene_epsilon

    t0 = time.perf_counter()
    fit = cfg.trig_fit()
    eps = graphene_epsilon(fit, cfg.gammafit["C11"])
    ok = abs(eps - EPS_TARGET) <= EPS_HALF_WIDTH
    status = "PASS" if ok else "FAIL"
    print(f"eps = {eps:.6f}  target {EPS_TARGET} +/- {EPS_HALF_WIDTH}  {status}")
    if args.out:
        _write_json(args.out, {"eps": eps, "target": EPS_TARGET, "tolerance": EPS_HALF_WIDTH,
                               "pass": ok, "seconds": time.perf_counter() - t0})
    return 0 if ok else 2


# --- parser ---------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="dislocore",
                                description="Atomistic and PN models of a bilayer edge dislocation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="key=value run configuration file")
    common.add_argument("-o", "--out", help="output path")
    common.add_argument("-j", "--jobs", type=int, help="worker threads (env DISLOCORE_THREADS)")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gamma", parents=[common], help="export the gamma-surface")
    g.add_argument("action", nargs="?", default="export", choices=["export"])
    g.add_argument("--csv", help="CSV path for (phi, gamma)")
    g.set_defaults(func=cmd_gamma)

    pn = sub.add_parser("pn", help="PN model")
    pn_sub = pn.add_subparsers(dest="action", required=True)
    pn_sub.add_parser("solve", parents=[common], help="solve and write the profile").set_defaults(func=cmd_pn_solve)
    pn_sub.add_parser("stability", parents=[common], help="PN stability constant").set_defaults(func=cmd_pn_stability)

    def relax_args(q):
        q.add_argument("--dump-grad", help="write the final gradient to this CSV")
        q.set_defaults(func=cmd_relax)

    relax_args(sub.add_parser("relax", parents=[common], help="relax the atomistic dislocation"))
    lat = sub.add_parser("lattice", help="atomistic model")
    lat_sub = lat.add_subparsers(dest="action", required=True)
    relax_args(lat_sub.add_parser("relax", parents=[common], help="relax the atomistic dislocation"))

    def sweep_args(q):
        q.add_argument("--json", help="also write the full table as JSON")
        q.add_argument("--no-stability", action="store_true", help="skip eigenvalue computations")
        q.set_defaults(func=cmd_sweep)

    sweep_args(sub.add_parser("sweep", parents=[common], help="convergence sweep over eps"))
    sub.add_parser("delta", parents=[common], help="stability gap").set_defaults(func=cmd_delta)
    sub.add_parser("stability", parents=[common], help="stability spectra").set_defaults(func=cmd_stability)
    an = sub.add_parser("analyze", help="analysis tasks")
    an_sub = an.add_subparsers(dest="action", required=True)
    sweep_args(an_sub.add_parser("sweep", parents=[common], help="convergence sweep over eps"))
    an_sub.add_parser("delta", parents=[common], help="stability gap").set_defaults(func=cmd_delta)
    an_sub.add_parser("stability", parents=[common], help="stability spectra").set_defaults(func=cmd_stability)

    sub.add_parser("epsilon-validate", parents=[common],
                   help="dimensionless parameter from the fitted 2D gamma-surface").set_defaults(func=cmd_epsilon)
    return p


def main(argv=None):
    from .config import load_config

    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error [{exc.key}]: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"config error [{exc.key}]: {exc}", file=sys.stderr)
        return 1
    except DislocoreError as exc:
        stage = getattr(args, "action", None) or args.command
        print(f"solver failure in {args.command} {stage if stage != args.command else ''}".rstrip()
              + f": {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
