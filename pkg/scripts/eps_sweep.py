"""Low Mach sweep on the sinusoidal nozzle: rates of u, rho, M and the weak pressure gap.

    python scripts/eps_sweep.py [--nx 128 --nt 32 --gamma 1.4 --out out/eps_sweep]
"""
import argparse
import os
import time

from machzero import CutoffSpec, GasLaw, NozzleMap, build_mesh, run_eps_sweep
from machzero.io import write_sweep_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--L", type=float, default=4.0)
    ap.add_argument("--nx", type=int, default=128)
    ap.add_argument("--nt", type=int, default=32)
    ap.add_argument("--gamma", type=float, default=1.4)
    ap.add_argument("--amplitude", type=float, default=0.2)
    ap.add_argument("--m", type=float, default=1.0)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.2, 0.1, 0.05, 0.025, 0.0125])
    ap.add_argument("--out", default="out/eps_sweep")
    args = ap.parse_args()

    mesh = build_mesh(NozzleMap("sinusoidal_wall", args.amplitude, 4.0), args.L, args.nx, args.nt)
    t0 = time.perf_counter()
    rep = run_eps_sweep(mesh, GasLaw("polytropic", args.gamma), CutoffSpec(), args.m, None, args.eps)
    print(f"{len(args.eps)} solves in {time.perf_counter() - t0:.1f}s")
    print(f"{'eps':>8} {'err_u':>10} {'err_rho':>10} {'M_max':>8} {'p_gap':>10} {'drift':>8} {'iters':>5}")
    for row in rep.rows():
        eps, eu, er, M, gap, drift, _, it = row
        print(f"{eps:8.4f} {eu:10.3e} {er:10.3e} {M:8.4f} {gap:10.3e} {drift:8.1e} {it:5d}")
    for name, fit in rep.fits.items():
        print(f"slope {name:12s} {fit.slope:6.3f}  (max log residual {fit.residual:.1e})")
    os.makedirs(args.out, exist_ok=True)
    write_sweep_csv(os.path.join(args.out, "sweep.csv"), rep)


if __name__ == "__main__":
    main()
