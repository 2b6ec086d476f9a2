"""Cut-off threshold search: largest eps with inactive cut-off and subsonic flow, per flux m.

    python scripts/eps_c.py [--m 1 4 6 6.4 6.6]
"""
import argparse

from machzero import CutoffSpec, GasLaw, NozzleMap, build_mesh, find_eps_c


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=float, nargs="+", default=[1.0, 4.0, 6.0, 6.4, 6.6])
    ap.add_argument("--geometry", choices=["straight", "sinusoidal_wall"], default="straight")
    ap.add_argument("--gamma", type=float, default=2.0)
    ap.add_argument("--resolution", type=float, default=1e-3)
    args = ap.parse_args()

    nozzle = NozzleMap(args.geometry, 0.2 if args.geometry != "straight" else 0.0, 4.0)
    mesh = build_mesh(nozzle, 4.0, 64, 16)
    spec = CutoffSpec()
    for m in args.m:
        res = find_eps_c(mesh, GasLaw("polytropic", args.gamma), spec, m, resolution=args.resolution)
        print(f"m = {m:5.2f}: eps_c = {res.threshold:.4f}  ({len(res.eps)} solves, "
              f"M_max at eps0 = {res.mach_max[0]:.4f}, cut-off ratio = {res.ratio[0]:.3f})")


if __name__ == "__main__":
    main()
