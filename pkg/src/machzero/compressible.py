"""Cut-off compressible potential flow solved by Picard (frozen density) iteration."""
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import gas as gaslib
from .errors import NumericalError
from .fem import (ScalarField, assemble_weighted_stiffness, functional_I_terms,
                  outlet_flux_load, solve_spd)
from .incompressible import CG_TOL, FlowState, as_force_field, solve_incompressible

__all__ = [
    "CompressibleSolution", "CutoffCheck", "EpsThreshold", "solve_compressible",
    "compressible_state", "check_cutoff_inactive", "identity_restep",
    "find_eps_c", "uniqueness_probe_compressible", "truncated_density",
]

PICARD_TOL = 1e-10
MAX_PICARD = 500
MAX_HALVINGS = 5


@dataclass(eq=False)
class CompressibleSolution:
    field: ScalarField
    iterations: int
    history: list                       # functional I after each accepted step
    increments: list                    # max gradient change per step
    weight: np.ndarray                  # density used in the final linear solve
    reference: ScalarField
    knots: object
    force: object
    eps: float
    halvings: int = 0

    @property
    def contraction(self):
        d = np.asarray(self.increments)
        return list(d[1:] / np.where(d[:-1] > 0, d[:-1], np.inf))


def truncated_density(phi, eps, knots):
    g = phi.grad()
    q2 = np.sum(g * g, axis=-1)
    rho, _, _ = gaslib.cutoff_density(knots.spec, knots.gas, eps, q2, knots.phi_f, knots)
    return np.asarray(rho)


def _max_grad_change(a, b):
    return float(np.max(np.abs(a.grad() - b.grad())))


def solve_compressible(mesh, gas, spec, eps, m, force=None, init=None, reference=None,
                       tol=PICARD_TOL, maxiter=MAX_PICARD, cg_tol=CG_TOL, knots=None):
    """Solve the cut-off problem on ``mesh`` for compressibility ``eps``.

    The iteration starts from ``init`` (default: the incompressible solution)
    and stops once the largest quadrature-point gradient change is <= tol.
    """
    ff = as_force_field(force, mesh)
    if knots is None:
        knots = gaslib.cutoff_knots(spec, gas, ff.values)
    if reference is None:
        reference = solve_incompressible(mesh, m, cg_tol)
    phi = reference if init is None else init
    load = outlet_flux_load(mesh, m)

    def energy(f):
        return functional_I_terms(f, reference, gas, spec, eps, ff, knots)

    I_prev, _ = energy(phi)
    history, increments = [], []
    halvings = 0
    for k in range(1, maxiter + 1):
        w = truncated_density(phi, eps, knots)
        new = solve_spd(assemble_weighted_stiffness(mesh, w, load), cg_tol, x0=phi.values)
        cand = new
        I_new, noise = energy(cand)
        slack = 1e-12 * max(1.0, abs(I_prev)) + 64 * noise
        step = 1.0
        while I_new > I_prev + slack and step > 0.5**MAX_HALVINGS:
            step *= 0.5
            halvings += 1
            cand = phi + step * (new - phi)
            I_new, noise = energy(cand)
        if I_new > I_prev + slack:
            warnings.warn(f"functional increased by {I_new - I_prev:.3e} at Picard step {k}")
        increments.append(_max_grad_change(cand, phi))
        history.append(I_new)
        phi, I_prev = cand, I_new
        if increments[-1] <= tol:
            phi.info = new.info
            return CompressibleSolution(phi, k, history, increments, w, reference, knots,
                                        ff, eps, halvings)
    d = np.asarray(increments)
    raise NumericalError(
        f"Picard iteration did not converge in {maxiter} steps "
        f"(last increment {d[-1]:.3e})", list(d[1:] / d[:-1]))


@dataclass(frozen=True)
class CutoffCheck:
    inactive: bool
    ratio: float            # max over quadrature points of |grad phi| / lower knot speed


def check_cutoff_inactive(phi, spec, gas, force=None, knots=None):
    ff = as_force_field(force, phi.mesh)
    if knots is None:
        knots = gaslib.cutoff_knots(spec, gas, ff.values)
    g = phi.grad()
    q = np.sqrt(np.sum(g * g, axis=-1))
    ratio = float(np.max(q / np.sqrt(knots.lower)))
    return CutoffCheck(ratio < 1.0, ratio)


def compressible_state(phi, gas, spec, eps, force=None, knots=None):
    """Velocity, density, rescaled pressure and Mach number at quadrature points."""
    mesh = phi.mesh
    ff = as_force_field(force, mesh)
    if knots is None:
        knots = gaslib.cutoff_knots(spec, gas, ff.values)
    u = phi.grad()
    q2 = np.sum(u * u, axis=-1)
    check = check_cutoff_inactive(phi, spec, gas, ff, knots)
    if check.inactive:
        rho = np.asarray(gaslib.density_from_speed(gas, eps, q2, ff.values))
    else:
        rho = np.asarray(gaslib.cutoff_density(spec, gas, eps, q2, ff.values, knots)[0])
    p = np.asarray(gaslib.rescaled_pressure(gas, eps, rho))
    M = np.asarray(gaslib.mach(gas, eps, np.sqrt(q2), rho))
    return FlowState(mesh, u, rho, p, M, modified=not check.inactive)


def identity_restep(solution, gas, m, cg_tol=CG_TOL):
    """Gradient change from one Picard step with the un-truncated Bernoulli density."""
    phi = solution.field
    g = phi.grad()
    rho = np.asarray(gaslib.density_from_speed(gas, solution.eps, np.sum(g * g, axis=-1),
                                               solution.force.values))
    system = assemble_weighted_stiffness(phi.mesh, rho, outlet_flux_load(phi.mesh, m))
    new = solve_spd(system, cg_tol, x0=phi.values)
    return _max_grad_change(new, phi)


@dataclass
class EpsThreshold:
    threshold: float
    eps: list = field(default_factory=list)
    mach_max: list = field(default_factory=list)
    inactive: list = field(default_factory=list)
    ratio: list = field(default_factory=list)


def find_eps_c(mesh, gas, spec, m, force=None, resolution=1e-3, tol=PICARD_TOL):
    """Largest eps in (0, eps0] (to ``resolution``) with inactive cut-off and M_max < 1."""
    ff = as_force_field(force, mesh)
    knots = gaslib.cutoff_knots(spec, gas, ff.values)
    reference = solve_incompressible(mesh, m)
    out = EpsThreshold(0.0)
    warm = {}

    def subsonic(eps):
        start = warm.get("phi")
        sol = solve_compressible(mesh, gas, spec, eps, m, ff, init=start, reference=reference,
                                 tol=tol, knots=knots)
        warm["phi"] = sol.field
        st = compressible_state(sol.field, gas, spec, eps, ff, knots)
        chk = check_cutoff_inactive(sol.field, spec, gas, ff, knots)
        ok = chk.inactive and float(np.max(st.mach)) < 1.0
        out.eps.append(eps)
        out.mach_max.append(float(np.max(st.mach)))
        out.inactive.append(chk.inactive)
        out.ratio.append(chk.ratio)
        return ok

    if subsonic(spec.eps0):
        out.threshold = spec.eps0
        return out
    lo, hi = 0.0, spec.eps0
    if subsonic(resolution):
        lo = resolution
    else:
        return out
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if subsonic(mid):
            lo = mid
        else:
            hi = mid
    out.threshold = lo
    return out


def uniqueness_probe_compressible(mesh, gas, spec, eps, m, force=None, tol=PICARD_TOL):
    """Gradient discrepancy between Picard runs started from phi_bar_L and from 0."""
    ff = as_force_field(force, mesh)
    knots = gaslib.cutoff_knots(spec, gas, ff.values)
    reference = solve_incompressible(mesh, m)
    a = solve_compressible(mesh, gas, spec, eps, m, ff, init=reference, reference=reference,
                           tol=tol, knots=knots)
    b = solve_compressible(mesh, gas, spec, eps, m, ff, init=ScalarField.zeros(mesh),
                           reference=reference, tol=tol, knots=knots)
    return _max_grad_change(a.field, b.field)
