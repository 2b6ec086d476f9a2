import numpy as np
import pytest
from numpy.testing import assert_allclose

from machzero import gas as gaslib
from machzero.acceptance import straight_oracle
from machzero.compressible import (check_cutoff_inactive, compressible_state, find_eps_c,
                                   identity_restep, solve_compressible, truncated_density,
                                   uniqueness_probe_compressible)
from machzero.errors import NumericalError
from machzero.fem import (ScalarField, assemble_weighted_stiffness, flux_through, functional_I,
                          outlet_flux_load)
from machzero.gas import CutoffSpec
from machzero.geometry import ForceField, NozzleMap, build_mesh, cross_section_facets
from machzero.incompressible import solve_incompressible


@pytest.fixture(scope="module")
def straight_solution(straight_mesh, gas2, spec):
    return solve_compressible(straight_mesh, gas2, spec, 0.1, 1.0)


@pytest.fixture(scope="module")
def sinus_solution(sinus_mesh, gas14, spec):
    return solve_compressible(sinus_mesh, gas14, spec, 0.2, 1.0)


def test_straight_oracle(straight_solution, gas2, spec):
    q_ref, rho_ref = straight_oracle(0.1, 1.0)
    assert q_ref == pytest.approx(0.500313, abs=1e-6)
    assert rho_ref == pytest.approx(0.999374, abs=1e-6)
    st = compressible_state(straight_solution.field, gas2, spec, 0.1)
    assert_allclose(np.sqrt(np.sum(st.u**2, axis=-1)), q_ref, atol=1e-8)
    assert_allclose(st.rho, rho_ref, atol=1e-8)
    assert_allclose(st.mach, 0.1 * q_ref / np.sqrt(2 * rho_ref), atol=1e-10)
    assert st.mach.max() == pytest.approx(0.035389, abs=1e-6)
    assert not st.modified


def test_straight_converges_to_incompressible(straight_mesh, gas2, spec):
    errs = []
    for eps in (0.2, 0.1, 0.05):
        sol = solve_compressible(straight_mesh, gas2, spec, eps, 1.0)
        errs.append(np.max(np.abs(sol.field.grad() - [0.0, 0.5])))
    errs = np.array(errs)
    assert np.all(errs / np.array([0.2, 0.1, 0.05]) ** 2 < 0.05)


def test_zero_flux(sinus_mesh, gas14, spec):
    sol = solve_compressible(sinus_mesh, gas14, spec, 0.1, 0.0)
    assert sol.iterations == 1
    assert not np.any(sol.field.values)
    st = compressible_state(sol.field, gas14, spec, 0.1)
    assert np.all(st.rho == 1.0) and not np.any(st.p) and not np.any(st.mach)


def test_functional_history_nonincreasing(sinus_solution):
    h = np.asarray(sinus_solution.history)
    assert np.all(np.diff(h) <= 1e-12 * max(1.0, np.max(np.abs(h))))
    assert sinus_solution.halvings == 0


def test_picard_non_convergence_reports_history(sinus_mesh, gas14, spec):
    with pytest.raises(NumericalError) as exc:
        solve_compressible(sinus_mesh, gas14, spec, 0.2, 1.0, maxiter=2)
    assert len(exc.value.history) == 1


def test_weak_residual(sinus_solution, sinus_mesh):
    phi = sinus_solution.field
    # density re-evaluated at the converged state, not the last frozen one
    w = truncated_density(phi, sinus_solution.eps, sinus_solution.knots)
    system = assemble_weighted_stiffness(sinus_mesh, w, outlet_flux_load(sinus_mesh, 1.0))
    A, b = system.reduced()
    r = A @ phi.values[system.free] - b
    assert np.max(np.abs(r)) <= 1e-9 * np.max(np.abs(b))


def test_flux_through_sections(sinus_solution, sinus_mesh):
    w = truncated_density(sinus_solution.field, sinus_solution.eps, sinus_solution.knots)
    for a in np.linspace(-3.0, 3.0, 7):
        f = flux_through(sinus_solution.field, w, cross_section_facets(sinus_mesh, a))
        assert f == pytest.approx(1.0, abs=1e-10)


def test_I_optimality(sinus_solution, sinus_mesh, gas14, spec):
    rng = np.random.default_rng(11)
    ref, knots, eps = sinus_solution.reference, sinus_solution.knots, sinus_solution.eps
    ff = ForceField.zero(sinus_mesh)
    I0 = functional_I(sinus_solution.field, ref, gas14, spec, eps, ff, knots)
    for _ in range(20):
        eta = rng.standard_normal(sinus_mesh.n_nodes)
        eta[sinus_mesh.inlet_nodes] = 0.0
        cand = sinus_solution.field + eps**2 * ScalarField(sinus_mesh, eta)
        assert functional_I(cand, ref, gas14, spec, eps, ff, knots) > I0


def test_ellipticity_at_solution_uniform_in_eps(sinus_mesh, gas14, spec):
    lows = []
    for eps in (0.2, 0.05):
        sol = solve_compressible(sinus_mesh, gas14, spec, eps, 1.0)
        a, _ = gaslib.hat_coefficients(spec, gas14, eps, sol.field.grad(), 0.0, None, sol.knots)
        lows.append(np.linalg.eigvalsh(a)[..., 0].min())
    assert min(lows) > 0.9


def test_state_mach_consistent_with_speed_at_mach(sinus_solution, gas14, spec):
    st = compressible_state(sinus_solution.field, gas14, spec, 0.2)
    q = np.sqrt(np.sum(st.u**2, axis=-1))
    theta = 0.5
    q_theta = gaslib.speed_at_mach(gas14, 0.2, theta)
    assert (st.mach.max() < theta) == (q.max() < q_theta)
    theta = 0.9 * st.mach.max()
    q_theta = gaslib.speed_at_mach(gas14, 0.2, theta)
    assert (st.mach.max() < theta) == (q.max() < q_theta)


def test_cutoff_check_examples(straight_mesh, gas2):
    spec = CutoffSpec(theta=0.5, eps0=0.1)
    phi = solve_incompressible(straight_mesh, 1.0)
    chk = check_cutoff_inactive(phi, spec, gas2)
    assert chk.inactive
    assert chk.ratio == pytest.approx(0.075, abs=1e-3)
    knot = gaslib.knot_speed(spec, gas2, spec.theta)
    fast = ScalarField(straight_mesh, 2 * knot * straight_mesh.nodes[:, 1])
    chk = check_cutoff_inactive(fast, spec, gas2)
    assert not chk.inactive and chk.ratio == pytest.approx(2.0, rel=1e-10)


def test_cutoff_active_state_flagged(straight_mesh, gas2):
    spec = CutoffSpec(theta=0.5, eps0=0.2)
    knot = gaslib.knot_speed(spec, gas2, spec.theta)
    fast = ScalarField(straight_mesh, 2 * knot * straight_mesh.nodes[:, 1])
    st = compressible_state(fast, gas2, spec, 0.2)
    assert st.modified
    assert np.all(st.rho > 0)


def test_cutoff_ratio_nonincreasing_in_eps(sinus_mesh, gas14, spec):
    ratios = []
    for eps in (0.2, 0.1, 0.05):
        sol = solve_compressible(sinus_mesh, gas14, spec, eps, 1.0)
        ratios.append(check_cutoff_inactive(sol.field, spec, gas14).ratio)
    assert all(b <= a + 1e-9 for a, b in zip(ratios, ratios[1:]))


def test_identity_restep(sinus_solution, gas14):
    assert identity_restep(sinus_solution, gas14, 1.0) <= 1e-10


def test_find_eps_c_zero_flux(straight_mesh, gas2, spec):
    assert find_eps_c(straight_mesh, gas2, spec, 0.0).threshold == spec.eps0


def test_find_eps_c_matches_oracle(gas2, spec):
    mesh = build_mesh(NozzleMap("straight"), 1.0, 4, 2)
    m = 6.4          # inactive as eps -> 0 (q -> 3.2), active at eps0
    res = find_eps_c(mesh, gas2, spec, m, resolution=1e-3)
    assert 0 < res.threshold < spec.eps0
    knot = gaslib.knot_speed(spec, gas2, spec.theta)

    def inactive(eps):
        q, _ = straight_oracle(eps, m)
        return q < knot

    assert inactive(res.threshold)
    assert not inactive(res.threshold + 2e-3)


@pytest.mark.parametrize("case", ["straight", "sinus"])
def test_uniqueness_probe(case, straight_mesh, sinus_mesh, gas2, gas14, spec):
    if case == "straight":
        args = (straight_mesh, gas2, spec, 0.1)
    else:
        args = (sinus_mesh, gas14, spec, 0.2)
    assert uniqueness_probe_compressible(*args, 1.0) <= 1e-9
    assert uniqueness_probe_compressible(*args, 0.0) == 0.0
