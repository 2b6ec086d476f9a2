"""Nozzle maps, truncated-domain meshes, cross-sections and windows (2D).

Physical coordinates are x = (x1, x2) with x2 the axial direction.  The nozzle
is the image of the cylinder (-1, 1) x R under the inverse of a map T that
scales the transverse coordinate by a half-width a(x2):

    T(x1, x2) = (x1 / a(x2), x2),    T^{-1}(y1, y2) = (y1 * a(y2), y2).

Axial slices are preserved, as required of the nozzle map.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, GeometryError, RangeError

__all__ = [
    "NozzleMap", "Mesh", "Window", "CrossSection", "ForceField",
    "build_mesh", "cross_section_facets", "force_potential_field",
]

# 2-point Gauss rule on [-1, 1]
GAUSS_X = np.array([-1.0, 1.0]) / np.sqrt(3.0)
GAUSS_W = np.array([1.0, 1.0])

# reference corners (xi, eta), counter-clockwise; xi is transverse, eta axial
REF_CORNERS = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


@dataclass(frozen=True)
class NozzleMap:
    """Half-width family of nozzle maps.

    kinds: ``straight`` (a = 1), ``sinusoidal_wall``
    (a = 1 + amplitude * sin(2 pi x2 / period)) and ``custom_analytic``
    (user supplied ``wall`` and ``dwall`` callables).
    """

    kind: str = "straight"
    amplitude: float = 0.0
    period: float = 4.0
    wall: Optional[Callable] = None
    dwall: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in ("straight", "sinusoidal_wall", "custom_analytic"):
            raise ConfigError(f"unknown nozzle kind {self.kind!r}")
        if self.kind == "sinusoidal_wall":
            if not 0 <= self.amplitude < 1:
                raise ConfigError("sinusoidal amplitude must lie in [0, 1)")
            if self.period <= 0:
                raise ConfigError("sinusoidal period must be positive")
        if self.kind == "custom_analytic" and (self.wall is None or self.dwall is None):
            raise ConfigError("custom_analytic needs wall and dwall callables")

    def halfwidth(self, x2):
        x2 = np.asarray(x2, dtype=float)
        if self.kind == "straight":
            return np.ones_like(x2)
        if self.kind == "sinusoidal_wall":
            return 1.0 + self.amplitude * np.sin(2 * np.pi * x2 / self.period)
        return np.asarray(self.wall(x2), dtype=float) * np.ones_like(x2)

    def dhalfwidth(self, x2):
        x2 = np.asarray(x2, dtype=float)
        if self.kind == "straight":
            return np.zeros_like(x2)
        if self.kind == "sinusoidal_wall":
            k = 2 * np.pi / self.period
            return self.amplitude * k * np.cos(k * x2)
        return np.asarray(self.dwall(x2), dtype=float) * np.ones_like(x2)

    def forward(self, x):
        x = np.asarray(x, dtype=float)
        return np.stack([x[..., 0] / self.halfwidth(x[..., 1]), x[..., 1]], axis=-1)

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        return np.stack([y[..., 0] * self.halfwidth(y[..., 1]), y[..., 1]], axis=-1)

    def inverse_jacobian(self, y):
        """d(T^{-1})/dy, shape (..., 2, 2)."""
        y = np.asarray(y, dtype=float)
        jac = np.zeros(y.shape + (2,))
        jac[..., 0, 0] = self.halfwidth(y[..., 1])
        jac[..., 0, 1] = y[..., 0] * self.dhalfwidth(y[..., 1])
        jac[..., 1, 1] = 1.0
        return jac


@dataclass(frozen=True)
class Window:
    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise RangeError(f"window needs a < b, got ({self.a}, {self.b})")


@dataclass(eq=False)
class Mesh:
    """Structured Q1 mesh of the truncated nozzle.

    Node ``i * (nt + 1) + j`` sits on axial gridline ``i`` (0..nx) and transverse
    line ``j`` (0..nt).  Per-element quadrature data are stored with shapes
    (ne, 4) for weights and (ne, 4, 4, 2) for basis gradients ``[e, q, a, :]``.
    """

    nozzle: NozzleMap
    L: float
    nx: int
    nt: int
    center: float
    nodes: np.ndarray
    elements: np.ndarray
    axial: np.ndarray          # axial gridline coordinates, (nx + 1,)
    qpoints: np.ndarray
    qweights: np.ndarray       # Gauss weight * det J
    dN: np.ndarray
    detJ: np.ndarray
    facets: dict = field(default_factory=dict)

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_elements(self):
        return self.elements.shape[0]

    def node_id(self, i, j):
        return i * (self.nt + 1) + j

    def gridline_nodes(self, i):
        return np.arange(i * (self.nt + 1), (i + 1) * (self.nt + 1))

    @property
    def inlet_nodes(self):
        return self.gridline_nodes(0)

    @property
    def element_axial_index(self):
        return np.repeat(np.arange(self.nx), self.nt)

    @property
    def element_centroid_axial(self):
        mid = 0.5 * (self.axial[:-1] + self.axial[1:])
        return np.repeat(mid, self.nt)

    def facet_measure(self, tag):
        f = self.facets[tag]
        d = self.nodes[f[:, 1]] - self.nodes[f[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    @property
    def outlet_area(self):
        return float(np.sum(self.facet_measure("outlet")))

    @property
    def area(self):
        return float(np.sum(self.qweights))

    def window_elements(self, window):
        """Elements whose centroid lies strictly inside the axial window."""
        c = self.element_centroid_axial
        idx = np.flatnonzero((c > window.a) & (c < window.b))
        if idx.size == 0:
            raise RangeError(f"window ({window.a}, {window.b}) contains no elements")
        return idx


def _shape_grads_ref(xi, eta):
    """Reference gradients of the four bilinear basis functions, shape (4, 2)."""
    xs, es = REF_CORNERS[:, 0], REF_CORNERS[:, 1]
    return np.stack([0.25 * xs * (1 + es * eta), 0.25 * es * (1 + xs * xi)], axis=-1)


def _shape_values_ref(xi, eta):
    xs, es = REF_CORNERS[:, 0], REF_CORNERS[:, 1]
    return 0.25 * (1 + xs * xi) * (1 + es * eta)


def build_mesh(nozzle, L, nx, nt, center=0.0):
    """Map a structured grid of the cylinder through T^{-1} onto Omega_L."""
    if not L > 0:
        raise ConfigError(f"half-length L must be positive, got {L}")
    if nx < 2 or nt < 2:
        raise ConfigError(f"need nx >= 2 and nt >= 2, got nx={nx}, nt={nt}")
    nx, nt = int(nx), int(nt)
    axial = center - L + 2.0 * L * np.arange(nx + 1) / nx
    trans = -1.0 + 2.0 * np.arange(nt + 1) / nt
    Y2, Y1 = np.meshgrid(axial, trans, indexing="ij")
    cyl = np.stack([Y1.ravel(), Y2.ravel()], axis=-1)
    nodes = nozzle.inverse(cyl)

    I, J = np.meshgrid(np.arange(nx), np.arange(nt), indexing="ij")
    I, J = I.ravel(), J.ravel()
    n = lambda i, j: i * (nt + 1) + j
    elements = np.stack([n(I, J), n(I, J + 1), n(I + 1, J + 1), n(I + 1, J)], axis=-1)

    xy = nodes[elements]                                    # (ne, 4, 2)
    ne = elements.shape[0]
    qpoints = np.empty((ne, 4, 2))
    qweights = np.empty((ne, 4))
    detJ = np.empty((ne, 4))
    dN = np.empty((ne, 4, 4, 2))
    q = 0
    for eta, we in zip(GAUSS_X, GAUSS_W):
        for xi, wx in zip(GAUSS_X, GAUSS_W):
            Nref = _shape_values_ref(xi, eta)
            Gref = _shape_grads_ref(xi, eta)
            qpoints[:, q] = Nref @ xy
            jac = np.einsum("eai,ak->eik", xy, Gref)        # dx_i / dxi_k
            det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
            bad = np.flatnonzero(~(det > 0))
            if bad.size:
                e = bad[0]
                raise GeometryError(
                    f"non-positive Jacobian {det[e]!r} at quadrature point "
                    f"{tuple(qpoints[e, q])} of element {e}")
            inv = np.empty_like(jac)
            inv[:, 0, 0] = jac[:, 1, 1] / det
            inv[:, 1, 1] = jac[:, 0, 0] / det
            inv[:, 0, 1] = -jac[:, 0, 1] / det
            inv[:, 1, 0] = -jac[:, 1, 0] / det
            dN[:, q] = np.einsum("ak,eki->eai", Gref, inv)
            detJ[:, q] = det
            qweights[:, q] = wx * we * det
            q += 1

    ii = np.arange(nx)
    jj = np.arange(nt)
    facets = {
        "inlet": np.stack([n(0, jj), n(0, jj + 1)], axis=-1),
        "outlet": np.stack([n(nx, jj), n(nx, jj + 1)], axis=-1),
        "wall": np.concatenate([
            np.stack([n(ii, 0), n(ii + 1, 0)], axis=-1),
            np.stack([n(ii, nt), n(ii + 1, nt)], axis=-1),
        ]),
    }
    return Mesh(nozzle, float(L), nx, nt, float(center), nodes, elements, axial,
                qpoints, qweights, dN, detJ, facets)


@dataclass(frozen=True)
class CrossSection:
    index: int            # axial gridline index
    position: float       # snapped axial coordinate
    snap: float           # |requested - snapped|
    facets: np.ndarray    # (nt, 2) node pairs
    measure: float


def cross_section_facets(mesh, a):
    """Transverse facets on the gridline nearest to axial position ``a``."""
    lo, hi = mesh.axial[0], mesh.axial[-1]
    tol = 1e-12 * max(1.0, abs(hi))
    if not lo - tol <= a <= hi + tol:
        raise RangeError(f"section x_n = {a} outside [{lo}, {hi}]")
    i = int(np.argmin(np.abs(mesh.axial - a)))
    nodes = mesh.gridline_nodes(i)
    f = np.stack([nodes[:-1], nodes[1:]], axis=-1)
    d = mesh.nodes[f[:, 1]] - mesh.nodes[f[:, 0]]
    return CrossSection(i, float(mesh.axial[i]), float(abs(a - mesh.axial[i])), f,
                        float(np.sum(np.hypot(d[:, 0], d[:, 1]))))


@dataclass(frozen=True)
class ForceField:
    """Force potential sampled on a mesh (after the non-negativity shift)."""

    values: np.ndarray        # (ne, 4) at quadrature points
    grads: np.ndarray         # (ne, 4, 2)
    node_values: np.ndarray   # (n_nodes,)
    shift: float

    @classmethod
    def zero(cls, mesh):
        ne = mesh.n_elements
        return cls(np.zeros((ne, 4)), np.zeros((ne, 4, 2)), np.zeros(mesh.n_nodes), 0.0)


def force_potential_field(fp, mesh):
    """Sample phi_f and grad phi_f, shifted so the minimum over the closed domain is 0."""
    raw_nodes, _ = fp.raw(mesh.nodes)
    shift = -float(np.min(raw_nodes)) if fp.kind == "linear" else 0.0
    vals, grads = fp.raw(mesh.qpoints)
    vals = vals + shift
    node_vals = raw_nodes + shift
    top = fp.phi_star if fp.phi_star is not None else np.inf
    lo = min(float(np.min(vals)), float(np.min(node_vals)))
    hi = max(float(np.max(vals)), float(np.max(node_vals)))
    if lo < -1e-14 or hi > top:
        raise ConfigError(f"force potential range [{lo}, {hi}] violates 0 <= phi_f <= {top}")
    return ForceField(np.maximum(vals, 0.0), grads, np.maximum(node_vals, 0.0), shift)
