"""Truncation study: window gradients on growing L and the local average bound.

    python scripts/L_sweep.py [--eps 0.1] [--L 4 8 16 32]
"""
import argparse

from machzero import CutoffSpec, GasLaw, NozzleMap, Window, run_L_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", type=float, default=None, help="omit for the incompressible flow")
    ap.add_argument("--L", type=float, nargs="+", default=[4, 8, 16, 32])
    ap.add_argument("--cells", type=int, default=8, help="cells per unit axial length")
    ap.add_argument("--nt", type=int, default=16)
    args = ap.parse_args()

    rep = run_L_sweep(NozzleMap("sinusoidal_wall", 0.2, 4.0), GasLaw("polytropic", 1.4),
                      CutoffSpec(), args.eps, 1.0, L_list=args.L, window=Window(-2.0, 2.0),
                      cells_per_unit=args.cells, nt=args.nt)
    dg = rep.diagnostics
    flow = "incompressible" if args.eps is None else f"eps = {args.eps}"
    print(f"sinusoidal nozzle, {flow}, window (-2, 2)")
    print(f"{'L':>6} {'d_L':>10} {'avg max':>9} {'poincare':>9}")
    d = dg["d_L"] + [0.0]
    for L, dl, avg, pc in zip(rep.params, d, dg["window_avg_max"], dg["poincare_max"]):
        print(f"{L:6.1f} {dl:10.3e} {avg:9.6f} {pc:9.4f}")
    print("ratios d_2L / d_L:", ", ".join(f"{r:.2e}" for r in dg["ratios"]),
          "(decay ok)" if dg["decay_ok"] else "(decay NOT ok)")


if __name__ == "__main__":
    main()
