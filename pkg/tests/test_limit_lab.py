import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from machzero import limit_lab
from machzero.acceptance import straight_oracle
from machzero.compressible import compressible_state, solve_compressible
from machzero.errors import NumericalError, RangeError
from machzero.geometry import NozzleMap, Window, build_mesh
from machzero.incompressible import incompressible_state, solve_incompressible
from machzero.limit_lab import (CSV_COLUMNS, PRESSURE_BASKET, central_window, fit_rate,
                                pressure_test_fields, run_eps_sweep, run_L_sweep,
                                weak_pressure_gap)

EPS = (0.2, 0.1, 0.05, 0.025)


# rate fitting

@given(st.floats(1e-3, 1e3))
def test_fit_quadratic_exact(c):
    eps = np.array(EPS)
    fit = fit_rate(eps, c * eps**2)
    assert fit.slope == pytest.approx(2.0, abs=1e-12)
    assert fit.residual <= 1e-12


def test_fit_linear():
    eps = np.array(EPS)
    assert fit_rate(eps, 3.0 * eps).slope == pytest.approx(1.0, abs=1e-12)


def test_fit_with_higher_order_term():
    eps = np.array(EPS)
    fit = fit_rate(eps, eps**2 + 0.1 * eps**4)
    assert 1.99 <= fit.slope <= 2.01


def test_fit_excludes_zeros_and_needs_three():
    eps = np.array(EPS)
    fit = fit_rate(eps, np.array([4e-2, 1e-2, 2.5e-3, 0.0]))
    assert fit.excluded == (0.025,)
    assert fit.used == 3
    with pytest.raises(ValueError):
        fit_rate(eps[:2], eps[:2] ** 2)


# weak pressure gap

def test_basket_layout():
    fields = pressure_test_fields(Window(-2.0, 2.0))
    assert len(fields) == len(PRESSURE_BASKET) == 5
    for f in fields:
        assert -2.0 <= f.center[1] - f.radii[1] and f.center[1] + f.radii[1] <= 2.0


def test_gap_zero_for_identical_states(sinus_mesh):
    st_ = incompressible_state(solve_incompressible(sinus_mesh, 1.0))
    assert weak_pressure_gap(st_, st_) == 0.0


def test_gap_straight_oracle(straight_mesh, gas2, spec):
    eps = 0.1
    sol = solve_compressible(straight_mesh, gas2, spec, eps, 1.0)
    st_eps = compressible_state(sol.field, gas2, spec, eps)
    st_bar = incompressible_state(solve_incompressible(straight_mesh, 1.0))
    q, rho = straight_oracle(eps, 1.0)
    fields = pressure_test_fields(central_window(straight_mesh))
    expected = []
    for w in fields:
        _, gw = w.evaluate(straight_mesh.qpoints)
        div_n = np.sum(straight_mesh.qweights * gw[..., 1, 1])
        expected.append(abs(rho * q * q - 0.25) * abs(div_n))
    assert weak_pressure_gap(st_eps, st_bar, fields) == pytest.approx(max(expected), rel=1e-6, abs=1e-15)
    assert abs(rho * q * q - 0.25) < eps**2


# sweeps

def test_straight_eps_sweep_rates(straight_mesh, gas2, spec):
    rep = run_eps_sweep(straight_mesh, gas2, spec, 1.0, None, EPS)
    assert all(rep.inactive) and not rep.failures
    assert 1.9 <= rep.fits["err_u_max"].slope <= 2.1
    assert 1.9 <= rep.fits["err_rho_max"].slope <= 2.1
    assert 0.95 <= rep.fits["mach_max"].slope <= 1.05
    # oracle values
    for eps, err_u, err_rho in zip(EPS, rep.metrics["err_u_max"], rep.metrics["err_rho_max"]):
        q, rho = straight_oracle(eps, 1.0)
        assert err_u == pytest.approx(q - 0.5, abs=1e-9)
        assert err_rho == pytest.approx(1.0 - rho, abs=1e-9)
    assert max(rep.metrics["flux_drift"]) <= 1e-10


def test_single_eps_no_fit(straight_mesh, gas2, spec):
    rep = run_eps_sweep(straight_mesh, gas2, spec, 1.0, None, (0.1,))
    assert rep.fits == {}
    rows = list(rep.rows())
    assert len(rows) == 1 and len(rows[0]) == len(CSV_COLUMNS)


def test_eps_list_validation(straight_mesh, gas2, spec):
    with pytest.raises(ValueError):
        run_eps_sweep(straight_mesh, gas2, spec, 1.0, None, (0.05, 0.1))
    with pytest.raises(ValueError):
        run_eps_sweep(straight_mesh, gas2, spec, 1.0, None, (0.5, 0.1))


def test_failed_solve_recorded(straight_mesh, gas2, spec, monkeypatch):
    real = limit_lab.solve_compressible

    def flaky(mesh, gas, spec, eps, *args, **kw):
        if eps == 0.1:
            raise NumericalError("injected", [0.9])
        return real(mesh, gas, spec, eps, *args, **kw)

    monkeypatch.setattr(limit_lab, "solve_compressible", flaky)
    rep = run_eps_sweep(straight_mesh, gas2, spec, 1.0, None, (0.2, 0.1, 0.05, 0.025))
    assert list(rep.failures) == [1] and "injected" in rep.failures[1]
    assert np.isnan(rep.metrics["err_u_max"][1])
    assert rep.fits["err_u_max"].used == 3


def test_warm_and_cold_sweeps_agree(sinus_mesh, gas14, spec):
    warm = run_eps_sweep(sinus_mesh, gas14, spec, 1.0, None, EPS[:3], warm=True)
    cold = run_eps_sweep(sinus_mesh, gas14, spec, 1.0, None, EPS[:3], warm=False)
    for name in ("err_u_max", "err_rho_max", "mach_max"):
        assert np.allclose(warm.metrics[name], cold.metrics[name], rtol=0, atol=1e-9)


def test_sinusoidal_sweep_small_mesh(sinus_mesh, gas14, spec):
    rep = run_eps_sweep(sinus_mesh, gas14, spec, 1.0, None, EPS)
    assert 1.8 <= rep.fits["err_u_max"].slope <= 2.2
    assert 1.8 <= rep.fits["weak_p_gap"].slope <= 2.2
    assert all(f.residual < 0.05 for f in rep.fits.values())


def test_straight_L_sweep(straight, gas2, spec):
    for eps in (None, 0.1):
        rep = run_L_sweep(straight, gas2, spec, eps, 1.0, L_list=(4, 8), cells_per_unit=4, nt=4)
        assert max(rep.diagnostics["d_L"]) <= 1e-10


def test_sinusoidal_L_sweep_decays(sinus, gas14, spec):
    rep = run_L_sweep(sinus, gas14, spec, None, 1.0, L_list=(4, 8, 16), cells_per_unit=4, nt=8)
    d4, d8 = rep.diagnostics["d_L"]
    assert d4 / d8 >= 2.0
    assert rep.diagnostics["decay_ok"]


def test_L_sweep_rejects_short_domain(sinus, gas14, spec):
    with pytest.raises(RangeError):
        run_L_sweep(sinus, gas14, spec, None, 1.0, L_list=(3, 8))
