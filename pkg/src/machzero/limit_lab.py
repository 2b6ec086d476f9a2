"""Sweeps in eps and L, log-log rate fits and the weak pressure gap."""
from dataclasses import dataclass, field

import numpy as np

from . import gas as gaslib
from .compressible import (PICARD_TOL, check_cutoff_inactive, compressible_state,
                           solve_compressible, truncated_density)
from .errors import MachZeroError, RangeError
from .fem import flux_through, poincare_check, window_avg_gradsq
from .geometry import Window, build_mesh, cross_section_facets
from .incompressible import as_force_field, incompressible_state, solve_incompressible

__all__ = [
    "FitResult", "SweepReport", "TestField", "fit_rate", "pressure_test_fields",
    "weak_pressure_gap", "run_eps_sweep", "run_L_sweep", "central_window",
    "flux_drift", "sliding_window_max", "CSV_COLUMNS",
]

CSV_COLUMNS = ("param", "err_u_max", "err_rho_max", "mach_max", "weak_p_gap",
               "flux_drift", "cutoff_margin", "iters")
FIT_METRICS = {"err_u_max": "eps", "err_rho_max": "eps", "mach_max": "eps", "weak_p_gap": "eps"}


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    residual: float
    used: int
    excluded: tuple = ()


def fit_rate(params, metrics):
    """Least-squares slope of log(metric) against log(param)."""
    p = np.asarray(params, dtype=float)
    v = np.asarray(metrics, dtype=float)
    keep = (v > 0) & (p > 0) & np.isfinite(v)
    excluded = tuple(float(x) for x in p[~keep])
    if keep.sum() < 3:
        raise ValueError(f"need at least 3 positive samples, got {int(keep.sum())}")
    x, y = np.log(p[keep]), np.log(v[keep])
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.max(np.abs(y - (slope * x + intercept))))
    return FitResult(float(slope), float(intercept), residual, int(keep.sum()), excluded)


# Mollified bump vector fields, laid out relative to the central window:
# (transverse centre, axial centre / half-window, transverse radius,
#  axial radius / half-window * 2, direction)
PRESSURE_BASKET = (
    (0.0, -0.6, 0.50, 0.6, (0.0, 1.0)),
    (0.3, -0.3, 0.40, 0.5, (1.0, 0.0)),
    (0.0, 0.0, 0.60, 0.8, (0.6, 0.8)),
    (-0.3, 0.3, 0.40, 0.5, (0.70710678118654752, 0.70710678118654752)),
    (0.0, 0.6, 0.50, 0.6, (-0.8, 0.6)),
)


@dataclass(frozen=True)
class TestField:
    center: tuple
    radii: tuple
    direction: tuple

    def evaluate(self, x):
        """Value (..., 2) and gradient (..., 2, 2) with grad[..., i, j] = d_j w_i."""
        z = (x - np.asarray(self.center)) / np.asarray(self.radii)
        s = np.sum(z * z, axis=-1)
        inside = s < 1.0
        denom = np.where(inside, 1.0 - s, 1.0)
        psi = np.where(inside, np.exp(-1.0 / denom), 0.0)
        dpsi = (psi * -2.0 / denom**2)[..., None] * z / np.asarray(self.radii)
        d = np.asarray(self.direction)
        return psi[..., None] * d, d[:, None] * dpsi[..., None, :]


def central_window(mesh):
    half = 0.5 * mesh.L
    return Window(mesh.center - half, mesh.center + half)


def pressure_test_fields(window):
    h = 0.5 * (window.b - window.a)
    mid = 0.5 * (window.a + window.b)
    return [TestField((c1, mid + c2 * h), (r1, r2 * h / 2.0), d)
            for c1, c2, r1, r2, d in PRESSURE_BASKET]


def weak_pressure_gap(state_eps, state_bar, fields=None):
    """max over test fields w of |integral (rho u (x) u - ubar (x) ubar) : grad w|."""
    mesh = state_eps.mesh
    if state_bar.mesh is not mesh:
        raise MachZeroError("states live on different meshes")
    if fields is None:
        fields = pressure_test_fields(central_window(mesh))
    u, ub = state_eps.u, state_bar.u
    flux = (state_eps.rho[..., None, None] * u[..., :, None] * u[..., None, :]
            - state_bar.rho[..., None, None] * ub[..., :, None] * ub[..., None, :])
    gaps = []
    for w in fields:
        _, gw = w.evaluate(mesh.qpoints)
        gaps.append(abs(float(np.sum(mesh.qweights * np.einsum("eqij,eqij->eq", flux, gw)))))
    return max(gaps)


def flux_drift(phi, weight, m, n_sections=11):
    """Max relative deviation from m of the residual-mode flux over interior sections."""
    mesh = phi.mesh
    positions = np.linspace(mesh.axial[0], mesh.axial[-1], n_sections + 2)[1:-1]
    fluxes = [flux_through(phi, weight, cross_section_facets(mesh, a)) for a in positions]
    scale = abs(m) if m != 0 else 1.0
    return float(np.max(np.abs(np.asarray(fluxes) - m)) / scale), fluxes


def sliding_window_max(phi, length=2.0, step=1.0, m=1.0):
    """Max of window-averaged |grad phi|^2 / m^2 over windows slid by ``step``."""
    mesh = phi.mesh
    lo, hi = mesh.axial[0], mesh.axial[-1]
    starts = np.arange(lo, hi - length + 1e-9, step)
    vals = [window_avg_gradsq(phi, Window(a, a + length)) for a in starts]
    return float(max(vals) / (m * m if m else 1.0))


def _unit_poincare_max(phi):
    mesh = phi.mesh
    starts = np.arange(mesh.axial[0], mesh.axial[-1] - 1.0 + 1e-9, 1.0)
    return float(max(poincare_check(phi, Window(a, a + 1.0)).ratio for a in starts))


@dataclass
class SweepReport:
    kind: str                                   # "eps" or "L"
    params: list
    metrics: dict = field(default_factory=lambda: {c: [] for c in CSV_COLUMNS[1:]})
    inactive: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)

    def rows(self):
        n = len(self.params)
        for k in range(n):
            yield [self.params[k]] + [self.metrics[c][k] for c in CSV_COLUMNS[1:]]

    def fit_all(self, names=tuple(FIT_METRICS)):
        ok = [i for i, a in enumerate(self.inactive) if a and i not in self.failures]
        p = [self.params[i] for i in ok]
        for name in names:
            try:
                self.fits[name] = fit_rate(p, [self.metrics[name][i] for i in ok])
            except ValueError:
                pass


def _append_failure(report, param, exc):
    report.failures[len(report.params) - 1] = f"{type(exc).__name__}: {exc}"
    for c in CSV_COLUMNS[1:]:
        report.metrics[c].append(float("nan"))
    report.inactive.append(False)


def run_eps_sweep(mesh, gas, spec, m, force=None, eps_list=(0.2, 0.1, 0.05, 0.025),
                  window=None, warm=True, tol=PICARD_TOL, n_sections=11):
    """Compressible solves over a decreasing eps list against one incompressible solve."""
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps list must be strictly decreasing")
    if any(e > spec.eps0 for e in eps_list):
        raise ValueError(f"every eps must be <= eps0 = {spec.eps0}")
    ff = as_force_field(force, mesh)
    knots = gaslib.cutoff_knots(spec, gas, ff.values)
    window = central_window(mesh) if window is None else window
    idx = mesh.window_elements(window)
    phi_bar = solve_incompressible(mesh, m)
    bar = incompressible_state(phi_bar, ff)
    report = SweepReport("eps", [])
    report.diagnostics["solutions"] = []
    prev = None
    for eps in eps_list:
        report.params.append(eps)
        try:
            sol = solve_compressible(mesh, gas, spec, eps, m, ff, init=prev if warm else None,
                                     reference=phi_bar, tol=tol, knots=knots)
        except MachZeroError as exc:
            _append_failure(report, eps, exc)
            continue
        prev = sol.field
        st = compressible_state(sol.field, gas, spec, eps, ff, knots)
        chk = check_cutoff_inactive(sol.field, spec, gas, ff, knots)
        du = np.sqrt(np.sum((st.u - bar.u) ** 2, axis=-1))[idx]
        drift, _ = flux_drift(sol.field, truncated_density(sol.field, eps, knots), m, n_sections)
        met = report.metrics
        met["err_u_max"].append(float(np.max(du)))
        met["err_rho_max"].append(float(np.max(np.abs(st.rho[idx] - 1.0))))
        met["mach_max"].append(float(np.max(st.mach[idx])))
        met["weak_p_gap"].append(weak_pressure_gap(st, bar, pressure_test_fields(window)))
        met["flux_drift"].append(drift)
        met["cutoff_margin"].append(chk.ratio)
        met["iters"].append(sol.iterations)
        report.inactive.append(chk.inactive)
        report.diagnostics["solutions"].append(sol)
    report.diagnostics["reference"] = phi_bar
    report.diagnostics["window"] = window
    if len(eps_list) >= 3:
        report.fit_all()
    return report


def _window_gradients(phi, window):
    mesh = phi.mesh
    idx = mesh.window_elements(window)
    return mesh.qpoints[idx], phi.grad()[idx]


def run_L_sweep(nozzle, gas, spec, eps, m, force=None, L_list=(4, 8, 16),
                window=Window(-2.0, 2.0), cells_per_unit=8, nt=16, ratio_bound=0.5,
                tol=PICARD_TOL):
    """Solve on growing truncations and measure gradient differences in a fixed window.

    ``eps=None`` runs the incompressible problem.  Element size is fixed by
    ``cells_per_unit`` so every mesh shares the window's quadrature points.
    """
    L_list = sorted(float(L) for L in L_list)
    for L in L_list:
        if L < max(abs(window.a), abs(window.b)) + 2.0:
            raise RangeError(f"L = {L} too short for window ({window.a}, {window.b})")
    report = SweepReport("L", [])
    grads, points, solutions = [], [], []
    for L in L_list:
        mesh = build_mesh(nozzle, L, int(round(2 * L * cells_per_unit)), nt)
        ff = as_force_field(force, mesh)
        phi_bar = solve_incompressible(mesh, m)
        if eps is None:
            phi, weight, iters, ratio, active = phi_bar, 1.0, 1, 0.0, True
            st = incompressible_state(phi, ff)
        else:
            knots = gaslib.cutoff_knots(spec, gas, ff.values)
            sol = solve_compressible(mesh, gas, spec, eps, m, ff, reference=phi_bar,
                                     tol=tol, knots=knots)
            phi, iters = sol.field, sol.iterations
            weight = truncated_density(phi, eps, knots)
            chk = check_cutoff_inactive(phi, spec, gas, ff, knots)
            ratio, active = chk.ratio, chk.inactive
            st = compressible_state(phi, gas, spec, eps, ff, knots)
        x, g = _window_gradients(phi, window)
        points.append(x)
        grads.append(g)
        solutions.append(phi)
        idx = mesh.window_elements(window)
        report.params.append(L)
        met = report.metrics
        met["err_rho_max"].append(float(np.max(np.abs(st.rho[idx] - 1.0))))
        met["mach_max"].append(float(np.max(st.mach[idx])))
        met["weak_p_gap"].append(float("nan"))
        met["flux_drift"].append(flux_drift(phi, weight, m)[0])
        met["cutoff_margin"].append(ratio)
        met["iters"].append(iters)
        report.inactive.append(active)
    for x in points[:-1]:
        if x.shape != points[-1].shape or np.max(np.abs(x - points[-1])) > 1e-10:
            raise MachZeroError("window quadrature points differ between truncations")
    d = [float(np.max(np.abs(g - grads[-1]))) for g in grads]
    report.metrics["err_u_max"] = d
    ratios = [d[k + 1] / d[k] if d[k] > 0 else 0.0 for k in range(len(d) - 2)]
    report.diagnostics.update(
        d_L=d[:-1], ratios=ratios, decay_ok=all(r <= ratio_bound for r in ratios),
        window_avg_max=[sliding_window_max(p, m=m) for p in solutions],
        poincare_max=[_unit_poincare_max(p) for p in solutions],
        solutions=solutions)
    return report
