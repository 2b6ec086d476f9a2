"""Acceptance criteria as runnable checks.

Each criterion returns a :class:`CriterionResult`; expensive solves shared by
several criteria are cached on an :class:`AcceptanceContext`.
"""
import time
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import brentq

from . import gas as gaslib
from .compressible import (check_cutoff_inactive, compressible_state, find_eps_c,
                           identity_restep, solve_compressible,
                           uniqueness_probe_compressible)
from .fem import ScalarField, functional_I, functional_J
from .gas import CutoffSpec, GasLaw
from .geometry import ForceField, NozzleMap, Window, build_mesh
from .incompressible import solve_incompressible, uniqueness_probe_incompressible
from .limit_lab import flux_drift, run_eps_sweep, run_L_sweep

__all__ = ["CriterionResult", "AcceptanceContext", "CRITERIA", "run_all",
           "straight_oracle"]

STRAIGHT = NozzleMap("straight")
SINUS = NozzleMap("sinusoidal_wall", amplitude=0.2, period=4.0)
EPS_SWEEP = (0.2, 0.1, 0.05, 0.025)
SLOPE2 = (1.8, 2.2)
SLOPE1 = (0.9, 1.1)


@dataclass(frozen=True)
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d}. {self.title}: {self.detail}"


def straight_oracle(eps, m, width=2.0):
    """Uniform speed and density in a straight duct, gamma = 2.

    Root of q * (1 - eps^2 q^2 / 4) = m / width on the subsonic branch.
    """
    target = m / width
    q = brentq(lambda q: q * (1.0 - 0.25 * eps**2 * q * q) - target,
               0.0, 2.0 / (np.sqrt(3.0) * eps), xtol=1e-15, rtol=1e-15)
    return q, 1.0 - 0.25 * eps**2 * q * q


class AcceptanceContext:
    def __init__(self, spec=None, seed=20240901):
        self.spec = spec if spec is not None else CutoffSpec(theta=0.5, eps0=0.2)
        self.seed = seed
        self.gas14 = GasLaw("polytropic", 1.4)
        self.gas2 = GasLaw("polytropic", 2.0)

    @cached_property
    def sweep_mesh(self):
        return build_mesh(SINUS, 4.0, 128, 32)

    @cached_property
    def eps_sweep(self):
        t0 = time.perf_counter()
        report = run_eps_sweep(self.sweep_mesh, self.gas14, self.spec, 1.0, None, EPS_SWEEP)
        report.diagnostics["runtime"] = time.perf_counter() - t0
        return report

    @cached_property
    def L_sweeps(self):
        window = Window(-2.0, 2.0)
        return {
            "incompressible": run_L_sweep(SINUS, self.gas14, self.spec, None, 1.0,
                                          L_list=(4, 8, 16), window=window),
            "compressible": run_L_sweep(SINUS, self.gas14, self.spec, 0.1, 1.0,
                                        L_list=(4, 8, 16), window=window),
        }


def _in(x, window):
    return window[0] <= x <= window[1]


def criterion_1(ctx):
    worst = 0.0
    for L, nx, nt in ((1.0, 2, 2), (3.0, 12, 5), (5.0, 40, 8), (2.5, 7, 3)):
        phi = solve_incompressible(build_mesh(STRAIGHT, L, nx, nt), 1.0)
        worst = max(worst, float(np.max(np.abs(phi.grad() - [0.0, 0.5]))))
    return CriterionResult(1, "straight-nozzle incompressible exactness", worst <= 1e-10,
                           f"max |grad phi - (0, 0.5)| = {worst:.3e} (tol 1e-10)")


def criterion_2(ctx):
    t0 = time.perf_counter()
    mesh = build_mesh(STRAIGHT, 2.0, 16, 8)
    sol = solve_compressible(mesh, ctx.gas2, ctx.spec, 0.1, 1.0)
    st = compressible_state(sol.field, ctx.gas2, ctx.spec, 0.1)
    runtime = time.perf_counter() - t0
    q_ref, rho_ref = straight_oracle(0.1, 1.0)
    q = np.sqrt(np.sum(st.u**2, axis=-1))
    err_q = float(np.max(np.abs(q - q_ref)))
    err_rho = float(np.max(np.abs(st.rho - rho_ref)))
    ok = err_q <= 1e-8 and err_rho <= 1e-8 and runtime < 10.0
    return CriterionResult(2, "straight-nozzle compressible oracle", ok,
                           f"q_ref={q_ref:.9f} rho_ref={rho_ref:.9f} |dq|={err_q:.2e} "
                           f"|drho|={err_rho:.2e} (tol 1e-8), runtime {runtime:.2f}s (< 10s)")


def criterion_3(ctx):
    rep = ctx.eps_sweep
    windows = {"err_u_max": SLOPE2, "err_rho_max": SLOPE2, "mach_max": SLOPE1,
               "weak_p_gap": SLOPE2}
    parts, ok = [], True
    for name, win in windows.items():
        fit = rep.fits.get(name)
        good = fit is not None and _in(fit.slope, win)
        ok &= good
        parts.append(f"{name} slope {fit.slope:.3f} in {list(win)}" if fit else f"{name} no fit")
    runtime = rep.diagnostics["runtime"]
    ok &= runtime < 300.0 and not rep.failures
    return CriterionResult(3, "low Mach convergence rates", ok,
                           "; ".join(parts) + f"; runtime {runtime:.1f}s (< 300s)")


def criterion_4(ctx):
    rep = ctx.eps_sweep
    drifts = list(rep.metrics["flux_drift"])
    phi_bar = rep.diagnostics["reference"]
    drifts.append(flux_drift(phi_bar, 1.0, 1.0, n_sections=11)[0])
    worst = max(drifts)
    return CriterionResult(4, "mass flux constancy", worst <= 1e-10,
                           f"max relative drift over 11 sections, {len(drifts)} solves: "
                           f"{worst:.2e} (tol 1e-10)")


def criterion_5(ctx):
    parts, ok = [], True
    for flow, rep in ctx.L_sweeps.items():
        ratios = rep.diagnostics["ratios"]
        good = bool(ratios) and all(r <= 0.5 for r in ratios)
        ok &= good
        d = ", ".join(f"{x:.2e}" for x in rep.diagnostics["d_L"])
        parts.append(f"{flow}: d_L=[{d}] ratios={[f'{r:.2e}' for r in ratios]}")
    return CriterionResult(5, "truncation decay", ok, "; ".join(parts) + " (bound 0.5)")


def criterion_6(ctx):
    parts, ok = [], True
    for flow, rep in ctx.L_sweeps.items():
        vals = dict(zip(rep.params, rep.diagnostics["window_avg_max"]))
        a, b = vals[8.0], vals[16.0]
        rel = abs(a - b) / max(a, b)
        ok &= rel <= 0.05
        parts.append(f"{flow}: L=8 {a:.6f}, L=16 {b:.6f}, rel diff {rel:.2e}")
    return CriterionResult(6, "local average bound", ok, "; ".join(parts) + " (tol 5%)")


def _random_perturbations(mesh, rng, n):
    for _ in range(n):
        eta = rng.standard_normal(mesh.n_nodes)
        eta[mesh.inlet_nodes] = 0.0
        yield ScalarField(mesh, eta * 10.0 ** rng.uniform(-3, 0))


def criterion_7(ctx):
    rng = np.random.default_rng(ctx.seed)
    mesh = build_mesh(SINUS, 4.0, 64, 16)
    phi_bar = solve_incompressible(mesh, 1.0)
    J0 = functional_J(phi_bar, 1.0)
    bad_J = sum(functional_J(phi_bar + eta, 1.0) <= J0
                for eta in _random_perturbations(mesh, rng, 100))
    eps = 0.1
    knots = gaslib.cutoff_knots(ctx.spec, ctx.gas14, np.zeros(mesh.qweights.shape))
    sol = solve_compressible(mesh, ctx.gas14, ctx.spec, eps, 1.0, reference=phi_bar, knots=knots)
    ff = ForceField.zero(mesh)
    I0 = functional_I(sol.field, phi_bar, ctx.gas14, ctx.spec, eps, ff, knots)
    bad_I = sum(functional_I(sol.field + eps**2 * eta, phi_bar, ctx.gas14, ctx.spec, eps, ff, knots) <= I0
                for eta in _random_perturbations(mesh, rng, 100))
    return CriterionResult(7, "minimizer optimality", bad_J == 0 and bad_I == 0,
                           f"J violations {bad_J}/100, I violations {bad_I}/100")


def criterion_8(ctx):
    straight = build_mesh(STRAIGHT, 2.0, 16, 8)
    sinus = build_mesh(SINUS, 4.0, 64, 16)
    d = {
        "incompressible/straight": uniqueness_probe_incompressible(straight, 1.0),
        "incompressible/sinusoidal": uniqueness_probe_incompressible(sinus, 1.0),
        "compressible/straight": uniqueness_probe_compressible(straight, ctx.gas2, ctx.spec, 0.1, 1.0),
        "compressible/sinusoidal": uniqueness_probe_compressible(sinus, ctx.gas14, ctx.spec, 0.2, 1.0),
    }
    worst = max(d.values())
    return CriterionResult(8, "uniqueness probes", worst <= 1e-9,
                           ", ".join(f"{k} {v:.1e}" for k, v in d.items()) + " (tol 1e-9)")


def criterion_9(ctx):
    rep = ctx.eps_sweep
    thr = find_eps_c(ctx.sweep_mesh, ctx.gas14, ctx.spec, 1.0)
    checked, ok, worst = 0, True, 0.0
    for eps, sol in zip(rep.params, rep.diagnostics["solutions"]):
        if eps > thr.threshold:
            continue
        chk = check_cutoff_inactive(sol.field, ctx.spec, ctx.gas14, None, sol.knots)
        change = identity_restep(sol, ctx.gas14, 1.0)
        worst = max(worst, change)
        ok &= chk.inactive and change <= 1e-10
        checked += 1
    ok &= checked > 0
    return CriterionResult(9, "cut-off removal", ok,
                           f"threshold eps_c={thr.threshold:.4f}, {checked} sweep points checked, "
                           f"max re-step change {worst:.1e} (tol 1e-10)")


def criterion_10(ctx):
    rng = np.random.default_rng(ctx.seed)
    spec = ctx.spec
    gases = (ctx.gas14, ctx.gas2, GasLaw("isothermal"))
    notes, ok = [], True

    rho = np.linspace(0.05, 5.0, 2001)
    mono = all(np.all(np.diff(gaslib.enthalpy_diff(g, rho)) > 0) for g in gases)
    rt = max(float(np.max(np.abs(gaslib.inv_enthalpy_diff(g, gaslib.enthalpy_diff(g, rho)) - rho) / rho))
             for g in gases)
    ok &= mono and rt <= 1e-12
    notes.append(f"h monotone={mono}, round-trip {rt:.1e}")

    worst_c1, min_slope = 0.0, np.inf
    for g in gases:
        for phi in (0.0, 0.4):
            k = gaslib.cutoff_knots(spec, g, phi)
            for knot in (float(k.lower), float(k.upper)):
                left = gaslib.cutoff_qhat(spec, g, knot * (1 - 1e-13), phi, k)[1]
                right = gaslib.cutoff_qhat(spec, g, knot * (1 + 1e-13), phi, k)[1]
                worst_c1 = max(worst_c1, abs(left - right))
            q2 = np.linspace(0.0, 1.5 * float(k.upper), 20001)
            vals = np.asarray(gaslib.cutoff_qhat(spec, g, q2, phi, k)[0])
            min_slope = min(min_slope, float(np.min(np.diff(vals) / np.diff(q2))))
    ok &= worst_c1 < 1e-10 and min_slope >= -1e-12
    notes.append(f"qhat C1 mismatch {worst_c1:.1e}, min slope {min_slope:.2e}")

    lam_min, cond_max = np.inf, 0.0
    for g in gases:
        n = 10_000 // len(gases) + 1
        phi = rng.uniform(0.0, 0.5, n)
        k = gaslib.cutoff_knots(spec, g, phi)
        speed = rng.uniform(0.0, 1.5, n) * np.sqrt(k.upper)
        ang = rng.uniform(0.0, 2 * np.pi, n)
        grad = np.stack([speed * np.cos(ang), speed * np.sin(ang)], axis=-1)
        for eps in (spec.eps0, 0.5 * spec.eps0, 0.01):
            a, _ = gaslib.hat_coefficients(spec, g, eps, grad, phi, None, k)
            ev = np.linalg.eigvalsh(a)
            lam_min = min(lam_min, float(ev.min()))
            cond_max = max(cond_max, float(np.max(ev[:, -1] / ev[:, 0])))
    ok &= lam_min > 0
    notes.append(f"a_ij min eigenvalue {lam_min:.3f}, max condition {cond_max:.2f}")

    worst_inv = 0.0
    for g in gases:
        for eps in (0.2, 0.05):
            for theta in (0.1, 0.5, 0.9):
                for phi in (0.0, 0.7):
                    q = gaslib.speed_at_mach(g, eps, theta, phi)
                    r = gaslib.density_from_speed(g, eps, q * q, phi)
                    worst_inv = max(worst_inv, abs(gaslib.mach(g, eps, q, r) - theta))
    ok &= worst_inv <= 1e-10
    notes.append(f"mach inversion {worst_inv:.1e}")
    return CriterionResult(10, "gas-module unit properties", bool(ok), "; ".join(notes))


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10)


def run_all(spec=None, emit=print):
    ctx = AcceptanceContext(spec)
    results = []
    for crit in CRITERIA:
        res = crit(ctx)
        results.append(res)
        if emit is not None:
            emit(res.line())
    return results
