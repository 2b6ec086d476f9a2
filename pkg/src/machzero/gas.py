"""Barotropic gas laws, Bernoulli closures and the subsonic cut-off.

All functions accept scalars or numpy arrays and broadcast.  Only enthalpy
differences relative to the reference density rho = 1 are ever formed.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError, RangeError

__all__ = [
    "GasLaw", "CutoffSpec", "ForcePotential", "CutoffKnots",
    "pressure", "dpressure", "d2pressure", "enthalpy_diff", "inv_enthalpy_diff",
    "density_from_speed", "rescaled_pressure", "mach", "critical_density",
    "critical_speed", "speed_at_mach", "knot_speed", "cutoff_knots",
    "cutoff_qhat", "cutoff_density", "hat_coefficients", "density_integral",
]

ROOT_TOL = 1e-12
MAX_BISECT = 200


@dataclass(frozen=True)
class GasLaw:
    """Pressure law p(rho) = rho**gamma (polytropic) or p(rho) = rho (isothermal)."""

    kind: str = "polytropic"
    gamma: float = 1.4

    def __post_init__(self):
        if self.kind not in ("polytropic", "isothermal"):
            raise DomainError(f"unknown gas law kind {self.kind!r}")
        if self.kind == "polytropic" and not self.gamma > 1.0:
            raise DomainError(f"polytropic exponent must exceed 1, got {self.gamma}")


@dataclass(frozen=True)
class CutoffSpec:
    """Subsonic truncation parameters: Mach threshold theta and reference eps0."""

    theta: float = 0.5
    eps0: float = 0.2
    n_eps: int = 32

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise DomainError(f"theta must lie in (0, 1), got {self.theta}")
        if not 0.0 < self.eps0 < 1.0:
            raise DomainError(f"eps0 must lie in (0, 1), got {self.eps0}")

    @property
    def theta_upper(self):
        return 0.5 * (self.theta + 1.0)


@dataclass(frozen=True)
class ForcePotential:
    """Potential of the external force, F = grad(phi_f).

    ``linear`` is gravity ``g * x[axis]``, ``bump`` a Gaussian hill of the given
    height.  Values are made non-negative by a shift fixed when the potential is
    sampled on a mesh (see :func:`machzero.geometry.force_potential_field`).
    """

    kind: str = "zero"
    g: float = 0.0
    axis: int = 0
    center: tuple = (0.0, 0.0)
    width: float = 1.0
    height: float = 0.0
    phi_star: float = None

    def __post_init__(self):
        if self.kind not in ("zero", "linear", "bump"):
            raise DomainError(f"unknown force potential kind {self.kind!r}")
        if self.kind == "bump" and (self.height < 0 or self.width <= 0):
            raise DomainError("bump needs height >= 0 and width > 0")

    def raw(self, x):
        """Unshifted value and gradient at points ``x`` of shape (..., 2)."""
        x = np.asarray(x, dtype=float)
        val = np.zeros(x.shape[:-1])
        grad = np.zeros(x.shape)
        if self.kind == "linear":
            val = self.g * x[..., self.axis]
            grad[..., self.axis] = self.g
        elif self.kind == "bump":
            d = x - np.asarray(self.center, dtype=float)
            val = self.height * np.exp(-np.sum(d * d, axis=-1) / self.width**2)
            grad = (-2.0 / self.width**2) * val[..., None] * d
        return val, grad


def _check_rho(rho):
    rho = np.asarray(rho, dtype=float)
    if np.any(~(rho > 0)):
        raise DomainError(f"density must be positive, got min {np.min(rho)!r}")
    return rho


def _p(gas, rho):
    return rho**gas.gamma if gas.kind == "polytropic" else rho.copy()


def _dp(gas, rho):
    if gas.kind == "polytropic":
        return gas.gamma * rho ** (gas.gamma - 1.0)
    return np.ones_like(rho)


def _hdiff(gas, rho):
    if gas.kind == "polytropic":
        g = gas.gamma
        return g / (g - 1.0) * (rho ** (g - 1.0) - 1.0)
    with np.errstate(divide="ignore"):
        return np.log(rho)


def _scalar_or_array(x):
    x = np.asarray(x)
    return x.item() if x.ndim == 0 else x


def pressure(gas, rho):
    return _scalar_or_array(_p(gas, _check_rho(rho)))


def dpressure(gas, rho):
    return _scalar_or_array(_dp(gas, _check_rho(rho)))


def d2pressure(gas, rho):
    rho = _check_rho(rho)
    if gas.kind == "polytropic":
        g = gas.gamma
        return _scalar_or_array(g * (g - 1.0) * rho ** (g - 2.0))
    return _scalar_or_array(np.zeros_like(rho))


def enthalpy_diff(gas, rho):
    """h(rho) - h(1) with h' = p'/rho."""
    return _scalar_or_array(_hdiff(gas, _check_rho(rho)))


def _inv_hdiff(gas, s):
    """Inverse of enthalpy_diff; NaN where s lies below the vacuum limit."""
    s = np.asarray(s, dtype=float)
    if gas.kind == "polytropic":
        g = gas.gamma
        base = 1.0 + (g - 1.0) / g * s
        with np.errstate(invalid="ignore"):
            out = np.where(base > 0, np.abs(base) ** (1.0 / (g - 1.0)), np.nan)
        return out
    return np.exp(s)


def inv_enthalpy_diff(gas, s):
    rho = _inv_hdiff(gas, s)
    if np.any(~(rho > 0)):
        raise RangeError(f"enthalpy difference {np.min(s)!r} lies below the vacuum limit")
    return _scalar_or_array(rho)


def density_from_speed(gas, eps, q2, phi_f=0.0):
    """Bernoulli density for squared speed ``q2`` at force potential ``phi_f``."""
    if eps <= 0:
        raise DomainError(f"eps must be positive, got {eps}")
    q2 = np.asarray(q2, dtype=float)
    s = 0.5 * eps**2 * (2.0 * np.asarray(phi_f, dtype=float) - q2)
    rho = _inv_hdiff(gas, s)
    bad = ~(rho > 0)
    if np.any(bad):
        q2b = np.broadcast_to(q2, bad.shape)[bad]
        raise RangeError(f"vacuum reached: q2={np.max(q2b)!r}, eps={eps!r}")
    return _scalar_or_array(rho)


def rescaled_pressure(gas, eps, rho):
    rho = _check_rho(rho)
    if eps <= 0:
        raise DomainError(f"eps must be positive, got {eps}")
    return _scalar_or_array((_p(gas, rho) - 1.0) / eps**2)


def mach(gas, eps, q, rho):
    rho = _check_rho(rho)
    q = np.asarray(q, dtype=float)
    if np.any(q < 0) or eps <= 0:
        raise DomainError("mach needs q >= 0 and eps > 0")
    return _scalar_or_array(eps * q / np.sqrt(_dp(gas, rho)))


def _bisect(f, lo, hi, tol=ROOT_TOL, maxiter=MAX_BISECT):
    """Vectorised bisection for f increasing with f(lo) <= 0 <= f(hi)."""
    lo, hi = (np.array(a, dtype=float) for a in np.broadcast_arrays(lo, hi))
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        stuck = (mid == lo) | (mid == hi)
        up = f(mid) <= 0.0
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
        if np.all((hi - lo <= tol) | stuck):
            return 0.5 * (lo + hi)
    raise NumericalError(
        f"bisection did not converge in {maxiter} steps; "
        f"bracket [{np.min(lo)!r}, {np.max(hi)!r}]")


def critical_density(gas, eps, phi_f=0.0):
    """Sonic density: p'(rho)/2 + h(rho) - h(1) = eps**2 phi_f."""
    if np.any(np.asarray(eps) <= 0):
        raise DomainError(f"eps must be positive, got {eps}")
    target = np.asarray(eps, dtype=float) ** 2 * np.asarray(phi_f, dtype=float)

    def f(rho):
        with np.errstate(divide="ignore"):
            return 0.5 * _dp(gas, rho) + _hdiff(gas, rho) - target

    lo = np.full(np.shape(target), 1e-300)
    hi = np.ones(np.shape(target))
    for _ in range(64):
        short = f(hi) < 0
        if not np.any(short):
            break
        hi = np.where(short, 2.0 * hi, hi)
    else:
        raise NumericalError(f"no bracket for the critical density: [{lo.min()}, {hi.max()}]")
    return _scalar_or_array(_bisect(f, lo, hi))


def critical_speed(gas, eps, phi_f=0.0):
    rho_cr = np.asarray(critical_density(gas, eps, phi_f))
    return _scalar_or_array(np.sqrt(_dp(gas, rho_cr)) / eps)


def speed_at_mach(gas, eps, theta, phi_f=0.0):
    """Speed at which the Bernoulli flow reaches Mach number ``theta``."""
    if not 0.0 < theta <= 1.0:
        raise DomainError(f"theta must lie in (0, 1], got {theta}")
    eps_a = np.asarray(eps, dtype=float)
    phi = np.asarray(phi_f, dtype=float)
    q_cr = np.sqrt(_dp(gas, np.asarray(critical_density(gas, eps_a, phi)))) / eps_a
    if theta == 1.0:
        return _scalar_or_array(q_cr)

    def g(q):
        rho = _inv_hdiff(gas, 0.5 * eps_a**2 * (2.0 * phi - q * q))
        return eps_a * q / np.sqrt(_dp(gas, rho)) - theta

    return _scalar_or_array(_bisect(g, np.zeros_like(q_cr), q_cr))


def knot_speed(spec, gas, theta, phi_f=0.0):
    """Infimum over 0 < eps < eps0 of speed_at_mach(theta).

    eps * q_theta stays bounded, so the infimum sits at the large-eps end of
    the interval; a log grid ending at eps0 is sampled and minimised.  For
    gamma = 2 the closed form is used.
    """
    phi = np.asarray(phi_f, dtype=float)
    if gas.kind == "polytropic" and gas.gamma == 2.0:
        q2 = (2.0 * theta**2 / spec.eps0**2 + theta**2 * phi) / (1.0 + 0.5 * theta**2)
        return _scalar_or_array(np.sqrt(q2))
    grid = np.logspace(np.log10(spec.eps0) - 3.0, np.log10(spec.eps0), spec.n_eps)
    flat = phi.reshape(-1)
    uniq, inv = np.unique(flat, return_inverse=True)
    q = speed_at_mach(gas, grid[:, None], theta, uniq[None, :])
    best = np.min(np.asarray(q), axis=0)
    return _scalar_or_array(best[inv].reshape(phi.shape))


@dataclass(frozen=True)
class CutoffKnots:
    """Cut-off knots evaluated at a fixed set of force-potential samples.

    ``lower``/``upper`` are squared knot speeds for theta and (theta+1)/2, and
    ``plateau`` the constant value of qhat above the upper knot.
    """

    spec: CutoffSpec
    gas: GasLaw
    phi_f: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    plateau: float

    def with_phi(self, phi_f):
        """Same plateau, knots re-evaluated at other force-potential values."""
        return cutoff_knots(self.spec, self.gas, phi_f, plateau=self.plateau)


def cutoff_knots(spec, gas, phi_f=0.0, plateau=None):
    phi = np.asarray(phi_f, dtype=float)
    lower = np.asarray(knot_speed(spec, gas, spec.theta, phi)) ** 2
    upper = np.asarray(knot_speed(spec, gas, spec.theta_upper, phi)) ** 2
    local = float(np.max(upper - 2.0 * phi))
    if plateau is None:
        plateau = local
    return CutoffKnots(spec, gas, phi, lower, upper, float(plateau))


def _hermite_blend(q2, phi, lower, upper, plateau):
    q2, phi, lower, upper = np.broadcast_arrays(q2, phi, lower, upper)
    h = upper - lower
    t = np.clip((q2 - lower) / h, 0.0, 1.0)
    v0 = lower - 2.0 * phi
    # slope 1 at the lower knot, 0 at the upper knot
    h00 = 2 * t**3 - 3 * t**2 + 1
    h10 = t**3 - 2 * t**2 + t
    h01 = -2 * t**3 + 3 * t**2
    d00 = 6 * t**2 - 6 * t
    d10 = 3 * t**2 - 4 * t + 1
    d01 = -6 * t**2 + 6 * t
    val = h00 * v0 + h10 * h + h01 * plateau
    slope = (d00 * v0 + d01 * plateau) / h + d10
    val = np.where(q2 <= lower, q2 - 2.0 * phi, np.where(q2 >= upper, plateau, val))
    slope = np.where(q2 <= lower, 1.0, np.where(q2 >= upper, 0.0, slope))
    return val, slope


def cutoff_qhat(spec, gas, q2, phi_f=0.0, knots=None):
    """Cut-off function qhat(q2, phi_f) with its partials in q2 and phi_f.

    Without ``knots`` the plateau is the sup over the supplied ``phi_f`` values.
    """
    if knots is None:
        knots = cutoff_knots(spec, gas, phi_f)
    q2 = np.asarray(q2, dtype=float)
    if np.any(q2 < 0):
        raise DomainError("q2 must be non-negative")
    phi = np.asarray(phi_f, dtype=float)
    val, slope = _hermite_blend(q2, phi, knots.lower, knots.upper, knots.plateau)
    q2b, phib, lo, up = np.broadcast_arrays(q2, phi, knots.lower, knots.upper)
    dphi = np.where(q2b <= lo, -2.0, 0.0)
    blend = (q2b > lo) & (q2b < up)
    if np.any(blend):
        delta = 1e-6 * np.maximum(1.0, np.abs(phib[blend]))
        kp = knots.with_phi(phib[blend] + delta)
        km = knots.with_phi(phib[blend] - delta)
        vp, _ = _hermite_blend(q2b[blend], phib[blend] + delta, kp.lower, kp.upper, knots.plateau)
        vm, _ = _hermite_blend(q2b[blend], phib[blend] - delta, km.lower, km.upper, knots.plateau)
        dphi[blend] = (vp - vm) / (2.0 * delta)
    return _scalar_or_array(val), _scalar_or_array(slope), _scalar_or_array(dphi)


def cutoff_density(spec, gas, eps, q2, phi_f=0.0, knots=None):
    """Truncated density rho_hat with partials in q2 and phi_f."""
    if not 0.0 < eps <= spec.eps0 * (1.0 + 1e-12):
        raise DomainError(f"eps must lie in (0, eps0={spec.eps0}], got {eps}")
    qh, qh_l, qh_p = (np.asarray(a) for a in cutoff_qhat(spec, gas, q2, phi_f, knots))
    rho = _inv_hdiff(gas, -0.5 * eps**2 * qh)
    assert np.all(rho > 0), "plateau bound violated: truncated density reached vacuum"
    dinv = rho / _dp(gas, rho)
    rho_l = -0.5 * eps**2 * dinv * qh_l
    rho_p = -0.5 * eps**2 * dinv * qh_p
    return _scalar_or_array(rho), _scalar_or_array(rho_l), _scalar_or_array(rho_p)


def hat_coefficients(spec, gas, eps, grad_phi, phi_f=0.0, grad_phi_f=None, knots=None):
    """Non-divergence coefficients (a_ij, b_i) of the truncated equation.

    ``grad_phi`` has shape (..., n); returns arrays of shape (..., n, n) and (..., n).
    """
    grad_phi = np.asarray(grad_phi, dtype=float)
    if grad_phi_f is None:
        grad_phi_f = np.zeros_like(grad_phi)
    grad_phi_f = np.asarray(grad_phi_f, dtype=float)
    q2 = np.sum(grad_phi**2, axis=-1)
    qh, qh_l, qh_p = (np.asarray(a) for a in cutoff_qhat(spec, gas, q2, phi_f, knots))
    rho = np.asarray(cutoff_density(spec, gas, eps, q2, phi_f, knots)[0])
    c2 = _dp(gas, rho)
    n = grad_phi.shape[-1]
    outer = grad_phi[..., :, None] * grad_phi[..., None, :]
    a = rho[..., None, None] * (np.eye(n) - (eps**2 * qh_l / c2)[..., None, None] * outer)
    b = (eps**2 * rho * qh_p / c2)[..., None] * grad_phi_f
    return a, b


_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


def _adaptive_gauss(f, a, b, rtol=1e-12, max_depth=40):
    """Vectorised adaptive Gauss-Legendre for many integrals at once.

    ``f(x, idx)`` evaluates the integrand of problem ``idx`` at abscissae ``x``
    (both shaped (k, 10)).  Returns the integrals over [a, b].
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    total = np.zeros(a.shape)
    owner = np.flatnonzero(b > a)
    lo, hi = a[owner], b[owner]

    def rule(lo, hi, idx):
        half = 0.5 * (hi - lo)[:, None]
        x = 0.5 * (hi + lo)[:, None] + half * _GL_X
        return np.sum(f(x, idx[:, None]) * _GL_W, axis=1) * half[:, 0]

    whole = rule(lo, hi, owner)
    for _ in range(max_depth):
        if owner.size == 0:
            return total
        mid = 0.5 * (lo + hi)
        left = rule(lo, mid, owner)
        right = rule(mid, hi, owner)
        fine = left + right
        done = np.abs(fine - whole) <= rtol * np.abs(fine) + 1e-300
        np.add.at(total, owner[done], fine[done])
        keep = ~done
        owner = np.concatenate([owner[keep], owner[keep]])
        lo, hi = np.concatenate([lo[keep], mid[keep]]), np.concatenate([mid[keep], hi[keep]])
        whole = np.concatenate([left[keep], right[keep]])
    raise NumericalError(f"adaptive quadrature unresolved on {owner.size} intervals")


def density_integral(knots, eps, lam, rtol=1e-12):
    """G(lam, phi_f) = 1/2 * integral_0^lam rho_hat(s, phi_f) ds at every knot sample."""
    gas = knots.gas
    lam = np.asarray(lam, dtype=float)
    phi, lower, upper = (np.broadcast_to(a, lam.shape).ravel()
                         for a in (knots.phi_f, knots.lower, knots.upper))
    lam_f = lam.ravel()

    def rho_hat(s, idx):
        qh, _ = _hermite_blend(s, phi[idx], lower[idx], upper[idx], knots.plateau)
        return _inv_hdiff(gas, -0.5 * eps**2 * qh)

    zero = np.zeros_like(lam_f)
    pieces = [(zero, np.minimum(lam_f, lower)),
              (lower, np.clip(lam_f, lower, upper)),
              (upper, np.maximum(lam_f, upper))]
    out = sum(_adaptive_gauss(rho_hat, a, b, rtol) for a, b in pieces)
    return _scalar_or_array(0.5 * out.reshape(lam.shape))
