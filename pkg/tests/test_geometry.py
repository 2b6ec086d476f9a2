import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from machzero.errors import ConfigError, GeometryError, RangeError
from machzero.gas import ForcePotential
from machzero.geometry import (NozzleMap, Window, build_mesh, cross_section_facets,
                               force_potential_field)


def test_small_straight_mesh_counts(straight):
    mesh = build_mesh(straight, 1.0, 2, 2)
    assert (mesh.n_nodes, mesh.n_elements) == (9, 4)
    assert mesh.outlet_area == pytest.approx(2.0, abs=1e-15)
    assert len(mesh.facets["outlet"]) == 2
    assert len(mesh.facets["inlet"]) == 2
    assert len(mesh.facets["wall"]) == 4


@given(st.integers(2, 12), st.integers(2, 12), st.floats(0.5, 10.0))
def test_facet_counts_and_area(nx, nt, L):
    mesh = build_mesh(NozzleMap("straight"), L, nx, nt)
    assert mesh.n_nodes == (nx + 1) * (nt + 1)
    assert len(mesh.facets["wall"]) == 2 * nx
    assert len(mesh.facets["inlet"]) == len(mesh.facets["outlet"]) == nt
    assert mesh.area == pytest.approx(4.0 * L, rel=1e-13)


def test_sinusoidal_jacobian_positive(sinus_mesh):
    assert np.min(sinus_mesh.detJ) > 0


def test_node_numbering(sinus_mesh):
    m = sinus_mesh
    i, j = 5, 3
    k = m.node_id(i, j)
    assert m.nodes[k, 1] == pytest.approx(m.axial[i])
    assert list(m.gridline_nodes(0)) == list(m.inlet_nodes)


def test_degenerate_wall_raises():
    bad = NozzleMap("custom_analytic", wall=lambda x: np.cos(x), dwall=lambda x: -np.sin(x))
    with pytest.raises(GeometryError, match=r"\("):
        build_mesh(bad, 4.0, 32, 4)


def test_bad_half_length():
    with pytest.raises(ConfigError):
        build_mesh(NozzleMap("straight"), 0.0, 4, 4)


def test_map_round_trip(sinus):
    rng = np.random.default_rng(0)
    y = np.stack([rng.uniform(-1, 1, 50), rng.uniform(-8, 8, 50)], axis=-1)
    assert_allclose(sinus.forward(sinus.inverse(y)), y, atol=1e-14)


def test_area_refinement_order(sinus):
    # off-period interval: over whole periods the polygonal wall integrates exactly
    L, c = 3.0, 0.7
    a, b = c - L, c + L
    k = 2 * np.pi / sinus.period
    exact = 2 * (b - a) - 2 * sinus.amplitude / k * (np.cos(k * b) - np.cos(k * a))
    errs = [abs(build_mesh(sinus, L, nx, 4, center=c).area - exact) for nx in (16, 32, 64, 128)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.9)


def test_outlet_area_exact_for_straight_outlet(sinus):
    # the outlet is a straight segment, so its measure is exact on any grid
    for nt in (4, 8, 16):
        mesh = build_mesh(sinus, 4.0, 32, nt)
        assert mesh.outlet_area == pytest.approx(2 * sinus.halfwidth(4.0), rel=1e-14)


@given(st.floats(-5.0, 5.0))
def test_straight_translation_invariance(c):
    a = build_mesh(NozzleMap("straight"), 2.0, 8, 3)
    b = build_mesh(NozzleMap("straight"), 2.0, 8, 3, center=c)
    assert_allclose(b.nodes - [0.0, c], a.nodes, atol=1e-12)
    assert_allclose(b.detJ, a.detJ, rtol=1e-12)
    assert_allclose(b.dN, a.dN, rtol=1e-9, atol=1e-12)


def test_cross_section_examples(straight, sinus):
    m = build_mesh(straight, 1.0, 4, 3)
    sec = cross_section_facets(m, 0.0)
    assert sec.measure == pytest.approx(2.0)
    out = cross_section_facets(m, 1.0)
    assert {tuple(sorted(f)) for f in out.facets} == {tuple(sorted(f)) for f in m.facets["outlet"]}
    s = build_mesh(sinus, 4.0, 16, 4)          # gridlines every 0.5
    sec = cross_section_facets(s, 0.3)
    assert sec.snap <= 0.25 + 1e-12
    assert sec.position == pytest.approx(0.5)
    with pytest.raises(RangeError):
        cross_section_facets(s, 4.5)


def test_window_elements(straight_mesh):
    idx = straight_mesh.window_elements(Window(0.0, 1.0))
    assert len(idx) == 4 * straight_mesh.nt
    with pytest.raises(RangeError):
        straight_mesh.window_elements(Window(0.01, 0.02))


def test_force_zero(straight_mesh):
    ff = force_potential_field(ForcePotential(), straight_mesh)
    assert np.all(ff.values == 0) and np.all(ff.grads == 0)


def test_force_linear_shifted(straight):
    mesh = build_mesh(straight, 1.0, 4, 4)
    ff = force_potential_field(ForcePotential("linear", g=0.5, axis=0), mesh)
    assert np.min(ff.node_values) == pytest.approx(0.0, abs=1e-15)
    assert np.max(ff.node_values) == pytest.approx(1.0, abs=1e-15)
    assert_allclose(ff.grads[..., 0], 0.5)


def test_force_bump_bounded(sinus_mesh):
    ff = force_potential_field(ForcePotential("bump", width=0.5, height=0.3), sinus_mesh)
    assert np.max(ff.values) <= 0.3
    assert np.max(ff.node_values) <= 0.3


def test_force_bound_violation(straight_mesh):
    fp = ForcePotential("bump", width=0.5, height=0.3, phi_star=0.1)
    with pytest.raises(ConfigError):
        force_potential_field(fp, straight_mesh)
