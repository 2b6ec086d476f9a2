"""Q1 finite element realisation of H_L: assembly, PCG, functionals, fluxes.

Members of H_L vanish on the inlet gridline.  Quadrature-point arrays have
shape (n_elements, 4); gradients (n_elements, 4, 2).
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import gas as gaslib
from .errors import AssemblyError, NumericalError, RangeError
from .geometry import GAUSS_X, REF_CORNERS, _shape_grads_ref

__all__ = [
    "ScalarField", "LinearSystem", "SolveInfo", "PoincareResult",
    "assemble_weighted_stiffness", "stiffness_matrix", "outlet_flux_load", "solve_spd", "pcg",
    "functional_J", "functional_I", "flux_through", "window_avg_gradsq",
    "poincare_check",
]


@dataclass
class SolveInfo:
    iterations: int = 0
    residual: float = 0.0
    floor: float = 0.0          # roundoff floor of the relative residual at the solution
    history: list = field(default_factory=list)


@dataclass(eq=False)
class ScalarField:
    """Nodal coefficients of a Q1 potential on ``mesh``."""

    mesh: object
    values: np.ndarray
    dirichlet: np.ndarray = None     # boolean mask of constrained nodes
    info: SolveInfo = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.n_nodes,):
            raise AssemblyError(f"field has {self.values.shape} values, mesh has {self.mesh.n_nodes} nodes")
        if self.dirichlet is None:
            self.dirichlet = np.zeros(self.mesh.n_nodes, dtype=bool)
            self.dirichlet[self.mesh.inlet_nodes] = True

    @classmethod
    def zeros(cls, mesh):
        return cls(mesh, np.zeros(mesh.n_nodes))

    @classmethod
    def interpolate(cls, mesh, func):
        """Nodal interpolant of ``func(x)`` with x of shape (n, 2)."""
        return cls(mesh, np.asarray(func(mesh.nodes), dtype=float))

    def grad(self):
        return np.einsum("eqai,ea->eqi", self.mesh.dN, self.values[self.mesh.elements])

    def at_qpoints(self):
        return self.values[self.mesh.elements] @ _QP_SHAPES.T

    def __add__(self, other):
        v = other.values if isinstance(other, ScalarField) else other
        return ScalarField(self.mesh, self.values + v, self.dirichlet)

    def __sub__(self, other):
        v = other.values if isinstance(other, ScalarField) else other
        return ScalarField(self.mesh, self.values - v, self.dirichlet)

    def __mul__(self, c):
        return ScalarField(self.mesh, self.values * c, self.dirichlet)

    __rmul__ = __mul__


def _qp_shapes():
    rows = []
    for eta in GAUSS_X:
        for xi in GAUSS_X:
            rows.append(0.25 * (1 + REF_CORNERS[:, 0] * xi) * (1 + REF_CORNERS[:, 1] * eta))
    return np.array(rows)


_QP_SHAPES = _qp_shapes()        # (4 qpoints, 4 basis)


@dataclass(eq=False)
class LinearSystem:
    """Full stiffness matrix plus the constrained (Dirichlet) node set."""

    mesh: object
    matrix: sp.csr_matrix
    rhs: np.ndarray
    constrained: np.ndarray
    values: np.ndarray = None        # Dirichlet values on ``constrained``

    def __post_init__(self):
        if self.values is None:
            self.values = np.zeros(len(self.constrained))
        free = np.ones(self.matrix.shape[0], dtype=bool)
        free[self.constrained] = False
        self.free = np.flatnonzero(free)

    def reduced(self):
        """Symmetrically eliminated system on the free nodes."""
        K = self.matrix
        A = K[self.free][:, self.free]
        b = self.rhs[self.free] - K[self.free][:, self.constrained] @ self.values
        return A.tocsr(), b


class _Template:
    """CSR pattern of the Q1 stiffness matrix with element-to-slot map."""

    def __init__(self, mesh):
        el = mesh.elements
        n = mesh.n_nodes
        rows = np.repeat(el, 4, axis=1).ravel()
        cols = np.tile(el, (1, 4)).ravel()
        key = rows.astype(np.int64) * n + cols
        uniq, self.slot = np.unique(key, return_inverse=True)
        r = uniq // n
        self.indices = (uniq % n).astype(np.int32)
        self.indptr = np.concatenate([[0], np.cumsum(np.bincount(r, minlength=n))]).astype(np.int32)
        self.nnz = uniq.size
        self.n = n
        self.local = np.einsum("eq,eqai,eqbi->eqab", mesh.qweights, mesh.dN, mesh.dN)

    def matrix(self, weight):
        loc = np.einsum("eq,eqab->eab", weight, self.local)
        loc = 0.5 * (loc + loc.transpose(0, 2, 1))      # bitwise symmetric
        data = np.bincount(self.slot, weights=loc.ravel(), minlength=self.nnz)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))


def _template(mesh):
    t = getattr(mesh, "_stiffness_template", None)
    if t is None:
        t = _Template(mesh)
        mesh._stiffness_template = t
    return t


def stiffness_matrix(mesh, weight=1.0):
    """Unconstrained matrix K_ij = sum_q omega_q w_q grad N_i . grad N_j."""
    w = np.broadcast_to(np.asarray(weight, dtype=float), mesh.qweights.shape)
    bad = np.argwhere(~(w > 0))
    if bad.size:
        e, q = bad[0]
        raise AssemblyError(f"non-positive weight {w[e, q]!r} at quadrature point "
                            f"{tuple(mesh.qpoints[e, q])} (element {e}, point {q})")
    return _template(mesh).matrix(w)


def assemble_weighted_stiffness(mesh, weight=1.0, rhs=None, constrained=None, values=None):
    K = stiffness_matrix(mesh, weight)
    if constrained is None:
        constrained = mesh.inlet_nodes
    if rhs is None:
        rhs = np.zeros(mesh.n_nodes)
    return LinearSystem(mesh, K, np.asarray(rhs, dtype=float), np.asarray(constrained), values)


def outlet_flux_load(mesh, m):
    """b_i = (m / |S_L+|) * integral over the outlet of N_i."""
    f = mesh.facets["outlet"]
    ell = mesh.facet_measure("outlet")
    b = np.zeros(mesh.n_nodes)
    np.add.at(b, f[:, 0], 0.5 * ell)
    np.add.at(b, f[:, 1], 0.5 * ell)
    return (m / mesh.outlet_area) * b


def pcg(A, b, x0=None, tol=1e-12, maxiter=None):
    """Jacobi-preconditioned conjugate gradients; returns (x, SolveInfo).

    Converged means the true relative residual is <= tol, or <= 4x its
    roundoff floor when tol lies below what double precision can certify.
    """
    n = b.shape[0]
    maxiter = 10 * n if maxiter is None else maxiter
    dinv = 1.0 / A.diagonal()
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    normb = np.linalg.norm(b)
    info = SolveInfo()
    if normb == 0.0:
        return np.zeros(n), info
    it = 0
    last = np.inf
    while True:
        # restart from the true residual; give up once restarts stop helping
        r = b - A @ x
        res = np.linalg.norm(r) / normb
        info.history.append(res)
        if res <= tol or res > 0.5 * last:
            break
        last = res
        z = dinv * r
        p = z.copy()
        rz = r @ z
        while it < maxiter:
            Ap = A @ p
            alpha = rz / (p @ Ap)
            x += alpha * p
            r -= alpha * Ap
            it += 1
            res = np.linalg.norm(r) / normb
            info.history.append(res)
            if res <= tol:
                break
            z = dinv * r
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
        if it >= maxiter:
            break
    true_res = np.linalg.norm(b - A @ x) / normb
    # |A||x| + |b| bounds the rounding error of evaluating the residual itself
    floor = np.finfo(float).eps * np.linalg.norm(abs(A) @ np.abs(x) + np.abs(b)) / normb
    info.iterations, info.residual, info.floor = it, true_res, floor
    if true_res > max(tol, 4.0 * floor):
        raise NumericalError(
            f"PCG stalled at relative residual {true_res:.3e} after {it} iterations "
            f"(tol {tol:.1e}, roundoff floor {floor:.1e})", info.history)
    return x, info


def solve_spd(system, tol=1e-12, x0=None):
    """Solve the eliminated system; returns the full nodal field."""
    if not 0 < tol < 1:
        raise ValueError(f"tol must lie in (0, 1), got {tol}")
    A, b = system.reduced()
    x_start = None if x0 is None else np.asarray(x0, dtype=float)[system.free]
    x, info = pcg(A, b, x_start, tol=tol)
    u = np.zeros(system.mesh.n_nodes)
    u[system.constrained] = system.values
    u[system.free] = x
    mask = np.zeros(system.mesh.n_nodes, dtype=bool)
    mask[system.constrained] = True
    return ScalarField(system.mesh, u, mask, info)


def outlet_integral(field):
    """Integral of the field over S_L+ (exact for Q1 on straight facets)."""
    mesh = field.mesh
    f = mesh.facets["outlet"]
    ell = mesh.facet_measure("outlet")
    return float(np.sum(0.5 * ell * (field.values[f[:, 0]] + field.values[f[:, 1]])))


def functional_J(field, m):
    mesh = field.mesh
    g = field.grad()
    dirichlet_energy = 0.5 * np.sum(mesh.qweights * np.sum(g * g, axis=-1))
    return float(dirichlet_energy - m / mesh.outlet_area * outlet_integral(field))


def functional_I(field, reference, gas, spec, eps, force, knots=None):
    """Comparison functional of a compressible candidate against phi_bar_L.

    Returns eps**-4 times the integral of
    G(|grad phi|^2) - G(|grad phi_bar|^2) - grad phi_bar . (grad phi - grad phi_bar).
    """
    return functional_I_terms(field, reference, gas, spec, eps, force, knots)[0]


def functional_I_terms(field, reference, gas, spec, eps, force, knots=None):
    """(value, roundoff scale) of :func:`functional_I`."""
    mesh = field.mesh
    if reference.mesh is not mesh:
        raise AssemblyError("field and reference live on different meshes")
    if knots is None:
        knots = gaslib.cutoff_knots(spec, gas, force.values)
    g = field.grad()
    gb = reference.grad()
    G = np.asarray(gaslib.density_integral(knots, eps, np.sum(g * g, axis=-1)))
    Gb = np.asarray(gaslib.density_integral(knots, eps, np.sum(gb * gb, axis=-1)))
    lin = np.sum(gb * (g - gb), axis=-1)
    w = mesh.qweights
    value = np.sum(w * (G - Gb - lin)) / eps**4
    scale = np.sum(w * (np.abs(G) + np.abs(Gb) + np.abs(lin))) / eps**4
    return float(value), float(scale * np.finfo(float).eps)


def _downstream_nodes(mesh, index):
    start = max(index, 1) * (mesh.nt + 1)
    return np.arange(start, mesh.n_nodes)


def _facet_gradients(mesh, values, elems, eta):
    """Gradients at the 2 Gauss points of the eta = const edge of ``elems``."""
    xy = mesh.nodes[mesh.elements[elems]]
    out = []
    for xi in GAUSS_X:
        G = _shape_grads_ref(xi, eta)
        jac = np.einsum("eai,ak->eik", xy, G)
        inv = np.linalg.inv(jac)
        dN = np.einsum("ak,eki->eai", G, inv)
        out.append(np.einsum("eai,ea->ei", dN, values[mesh.elements[elems]]))
    return np.stack(out, axis=1)            # (k, 2, 2)


def flux_through(field, weight, section, mode="residual"):
    """Discrete mass flux through a cross-section.

    ``residual`` sums the assembled weighted-stiffness action over every node
    downstream of the section, which is exactly the weak flux of the Galerkin
    scheme; ``quadrature`` integrates w * d(phi)/dx_n over the section facets.
    """
    mesh = field.mesh
    w = np.broadcast_to(np.asarray(weight, dtype=float), mesh.qweights.shape)
    if mode == "residual":
        K = stiffness_matrix(mesh, w)
        return float(np.sum((K @ field.values)[_downstream_nodes(mesh, section.index)]))
    if mode != "quadrature":
        raise ValueError(f"unknown flux mode {mode!r}")
    i = section.index
    sides = []
    if i > 0:
        sides.append((np.arange((i - 1) * mesh.nt, i * mesh.nt), 1.0))
    if i < mesh.nx:
        sides.append((np.arange(i * mesh.nt, (i + 1) * mesh.nt), -1.0))
    f = section.facets
    d = mesh.nodes[f[:, 1]] - mesh.nodes[f[:, 0]]
    ell = np.hypot(d[:, 0], d[:, 1])
    total = 0.0
    for elems, eta in sides:
        grads = _facet_gradients(mesh, field.values, elems, eta)
        wbar = np.mean(w[elems], axis=1)
        total += np.sum(wbar * ell * 0.5 * np.sum(grads[..., 1], axis=1))
    return float(total / len(sides))


def window_avg_gradsq(field, window):
    mesh = field.mesh
    idx = mesh.window_elements(window)
    g = field.grad()[idx]
    w = mesh.qweights[idx]
    return float(np.sum(w * np.sum(g * g, axis=-1)) / np.sum(w))


@dataclass(frozen=True)
class PoincareResult:
    ratio: float
    deviation: float      # ||phi - P(phi)||_L2 over the window
    gradient: float       # ||grad phi||_L2 over the window
    constant: bool


def poincare_check(field, window):
    mesh = field.mesh
    idx = mesh.window_elements(window)
    w = mesh.qweights[idx]
    v = field.at_qpoints()[idx]
    g = field.grad()[idx]
    mean = np.sum(w * v) / np.sum(w)
    dev = float(np.sqrt(np.sum(w * (v - mean) ** 2)))
    grad = float(np.sqrt(np.sum(w * np.sum(g * g, axis=-1))))
    if grad <= 1e-12 * max(1.0, float(np.max(np.abs(v)))) * np.sqrt(np.sum(w)):
        return PoincareResult(0.0, dev, grad, True)
    return PoincareResult(dev / grad, dev, grad, False)


def check_window(mesh, window):
    if window.a < mesh.axial[0] - 1e-12 or window.b > mesh.axial[-1] + 1e-12:
        raise RangeError(f"window ({window.a}, {window.b}) exceeds the mesh")
    return window
