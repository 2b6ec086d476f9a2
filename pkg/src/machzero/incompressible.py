"""Truncated incompressible potential flow (inlet phi = 0, outlet flux m)."""
from dataclasses import dataclass

import numpy as np

from .fem import ScalarField, assemble_weighted_stiffness, outlet_flux_load, solve_spd
from .gas import ForcePotential
from .geometry import ForceField, force_potential_field

__all__ = ["FlowState", "solve_incompressible", "incompressible_state",
           "uniqueness_probe_incompressible", "as_force_field"]

CG_TOL = 1e-12


@dataclass(eq=False)
class FlowState:
    """Physical fields at quadrature points, arrays of shape (ne, 4[, 2])."""

    mesh: object
    u: np.ndarray
    rho: np.ndarray
    p: np.ndarray
    mach: np.ndarray
    modified: bool = False      # True when the cut-off was active somewhere


def as_force_field(force, mesh):
    if force is None:
        return ForceField.zero(mesh)
    if isinstance(force, ForcePotential):
        return force_potential_field(force, mesh)
    return force


def solve_incompressible(mesh, m, tol=CG_TOL, x0=None):
    system = assemble_weighted_stiffness(mesh, 1.0, outlet_flux_load(mesh, m))
    return solve_spd(system, tol, x0)


def incompressible_state(phi_bar, force=None):
    """Velocity grad(phi_bar), unit density and Bernoulli pressure phi_f - |u|^2/2."""
    mesh = phi_bar.mesh
    ff = as_force_field(force, mesh)
    u = phi_bar.grad()
    p = ff.values - 0.5 * np.sum(u * u, axis=-1)
    ones = np.ones(mesh.qweights.shape)
    return FlowState(mesh, u, ones, p, np.zeros_like(ones))


def uniqueness_probe_incompressible(mesh, m, tol=CG_TOL, seed=0):
    """Max gradient discrepancy between solves started from 0 and from noise."""
    a = solve_incompressible(mesh, m, tol)
    noise = np.random.default_rng(seed).standard_normal(mesh.n_nodes)
    noise[mesh.inlet_nodes] = 0.0
    b = solve_incompressible(mesh, m, tol, x0=noise)
    return float(np.max(np.abs(a.grad() - b.grad())))
