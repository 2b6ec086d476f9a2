"""Command line entry point: ``machzero <command> --config run.cfg --out dir``.

Errors are reported as one JSON object on stderr with a nonzero exit code:
2 for configuration problems, 3 for solver or numerical failures, 1 for a
failed acceptance check.
"""
import argparse
import json
import os
import sys

import numpy as np

from . import io
from .compressible import (check_cutoff_inactive, compressible_state, solve_compressible,
                           truncated_density)
from .config import load_config
from .errors import ConfigError, MachZeroError
from .geometry import build_mesh
from .incompressible import as_force_field, incompressible_state, solve_incompressible
from .limit_lab import flux_drift, run_eps_sweep, run_L_sweep

EXIT_CHECK, EXIT_CONFIG, EXIT_SOLVER = 1, 2, 3


def _mesh(cfg):
    return build_mesh(cfg.nozzle(), cfg.domain_L, cfg.mesh_nx, cfg.mesh_nt)


def _outputs(cfg, args, phi, state, extra):
    out = args.out or cfg.output_dir
    os.makedirs(out, exist_ok=True)
    io.write_field_dump(os.path.join(out, "field.txt"), phi, state)
    if args.vtk or cfg.output_vtk:
        io.write_vtk(os.path.join(out, "field.vtk"), phi, state)
    items = [("m", cfg.flow_m), ("outlet_area", phi.mesh.outlet_area),
             ("mach_max", float(np.max(state.mach)))] + extra
    return io.write_summary(os.path.join(out, "summary.txt"), items)


def cmd_solve_incompressible(cfg, args):
    mesh = _mesh(cfg)
    ff = as_force_field(cfg.force(), mesh)
    phi = solve_incompressible(mesh, cfg.flow_m, cfg.solver_cg_tol)
    state = incompressible_state(phi, ff)
    extra = [("cutoff_margin", 0.0), ("flux_drift", flux_drift(phi, 1.0, cfg.flow_m)[0]),
             ("iterations", 1), ("cg_iterations", phi.info.iterations)]
    return _outputs(cfg, args, phi, state, extra)


def _eps(cfg):
    if cfg.eps is None:
        raise ConfigError("missing required key 'eps' for a compressible run")
    return cfg.eps


def cmd_solve_compressible(cfg, args):
    eps = _eps(cfg)
    mesh = _mesh(cfg)
    gas, spec = cfg.gas(), cfg.cutoff()
    ff = as_force_field(cfg.force(), mesh)
    sol = solve_compressible(mesh, gas, spec, eps, cfg.flow_m, ff,
                             tol=cfg.solver_picard_tol, maxiter=cfg.solver_picard_maxit,
                             cg_tol=cfg.solver_cg_tol)
    state = compressible_state(sol.field, gas, spec, eps, ff, sol.knots)
    chk = check_cutoff_inactive(sol.field, spec, gas, ff, sol.knots)
    w = truncated_density(sol.field, eps, sol.knots)
    extra = [("eps", eps), ("cutoff_margin", chk.ratio), ("cutoff_inactive", chk.inactive),
             ("flux_drift", flux_drift(sol.field, w, cfg.flow_m)[0]),
             ("iterations", sol.iterations), ("halvings", sol.halvings)]
    return _outputs(cfg, args, sol.field, state, extra)


def _sweep_out(cfg, args, report, extra):
    out = args.out or cfg.output_dir
    os.makedirs(out, exist_ok=True)
    io.write_sweep_csv(os.path.join(out, "sweep.csv"), report)
    items = [("m", cfg.flow_m), ("kind", report.kind)]
    items += [(f"slope_{k}", f.slope) for k, f in sorted(report.fits.items())]
    items += [(f"fit_residual_{k}", f.residual) for k, f in sorted(report.fits.items())]
    items += extra
    items += [(f"failure_{report.params[i]}", msg) for i, msg in sorted(report.failures.items())]
    return io.write_summary(os.path.join(out, "summary.txt"), items)


def cmd_sweep_eps(cfg, args):
    mesh = _mesh(cfg)
    eps_list = cfg.sweep_eps_list or (0.2, 0.1, 0.05, 0.025)
    report = run_eps_sweep(mesh, cfg.gas(), cfg.cutoff(), cfg.flow_m, cfg.force(), eps_list,
                           window=cfg.window(), tol=cfg.solver_picard_tol)
    extra = [("outlet_area", mesh.outlet_area),
             ("mach_max", float(np.nanmax(report.metrics["mach_max"]))),
             ("cutoff_margin", float(np.nanmax(report.metrics["cutoff_margin"]))),
             ("flux_drift", float(np.nanmax(report.metrics["flux_drift"]))),
             ("iterations", int(np.nansum(report.metrics["iters"])))]
    return _sweep_out(cfg, args, report, extra)


def cmd_sweep_L(cfg, args):
    L_list = cfg.sweep_L_list or (4.0, 8.0, 16.0)
    report = run_L_sweep(cfg.nozzle(), cfg.gas(), cfg.cutoff(), cfg.eps, cfg.flow_m,
                         cfg.force(), L_list, cfg.window(), cfg.sweep_cells_per_unit,
                         cfg.mesh_nt, tol=cfg.solver_picard_tol)
    dg = report.diagnostics
    mesh = dg["solutions"][-1].mesh
    extra = [("outlet_area", mesh.outlet_area),
             ("mach_max", float(np.max(report.metrics["mach_max"]))),
             ("cutoff_margin", float(np.max(report.metrics["cutoff_margin"]))),
             ("flux_drift", float(np.max(report.metrics["flux_drift"]))),
             ("iterations", int(np.sum(report.metrics["iters"]))),
             ("decay_ok", dg["decay_ok"])]
    extra += [(f"ratio_{k}", r) for k, r in enumerate(dg["ratios"])]
    extra += [(f"window_avg_max_L{L:g}", v) for L, v in zip(report.params, dg["window_avg_max"])]
    return _sweep_out(cfg, args, report, extra)


def cmd_check(cfg, args):
    from .acceptance import run_all
    results = run_all(cfg.cutoff() if cfg is not None else None)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_CHECK if failed else 0


COMMANDS = {
    "solve-incompressible": (cmd_solve_incompressible, "incompressible reference flow"),
    "solve-compressible": (cmd_solve_compressible, "cut-off compressible flow at config eps"),
    "sweep-eps": (cmd_sweep_eps, "compressibility sweep with rate fits"),
    "sweep-L": (cmd_sweep_L, "truncation-length sweep"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="machzero", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="run configuration file")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--vtk", action="store_true", help="also write field.vtk")
    p = sub.add_parser("check", help="run the acceptance criteria")
    p.add_argument("--config", help="take cutoff.theta and cutoff.eps0 from this file")
    return parser


def _fail(kind, exc, code):
    json.dump({"error": kind, "type": type(exc).__name__, "message": str(exc)}, sys.stderr)
    sys.stderr.write("\n")
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else None
    except ConfigError as exc:
        return _fail("config", exc, EXIT_CONFIG)
    if args.command == "check":
        return cmd_check(cfg, args)
    try:
        text = COMMANDS[args.command][0](cfg, args)
    except ConfigError as exc:
        return _fail("config", exc, EXIT_CONFIG)
    except (MachZeroError, ValueError, ArithmeticError) as exc:
        return _fail("solver", exc, EXIT_SOLVER)
    sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
