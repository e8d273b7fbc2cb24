import numpy as np
import pytest

from cellhom.density import PointClass
from cellhom.gallery import conv_quad, get_density, translate
from cellhom.homogenize import (
    HWMemo,
    cell_value,
    counting_bound,
    hw_estimate,
    lattice_cells,
    periodic_oscillation,
    subadditive_trace,
)
from cellhom.geometry import Box
from cellhom.mesh import PwAffineField, build_mesh, energy
from cellhom.hyper2d import hyper2d_density

from oracles import COUNTING_BOUND_10_2, G_AT_ZERO, OSC_CELLS_03, OSC_RESIDUAL_03, TWOPHASE_HARMONIC


def test_cell_value_convex_is_identity():
    W = conv_quad()
    for xi in (-1.3, 0.2, 2.0):
        r = cell_value(W, xi, 2, 8)
        assert r.value == pytest.approx(xi**2, abs=1e-10)
        assert r.field.sup_norm() < 1e-6


def test_cell_value_harmonic_mean():
    r = cell_value(get_density("twophase1d"), 1.0, 1, 64)
    assert abs(r.value - TWOPHASE_HARMONIC) <= 0.01 * TWOPHASE_HARMONIC


def test_cell_value_zero_field_bound_hyper2d():
    W = hyper2d_density()
    r = cell_value(W, np.zeros((2, 2)), 1, 4)
    zero = energy(W, np.zeros((2, 2)), PwAffineField.zeros(build_mesh(2, 1, 4), 2))
    assert r.value <= zero + 1e-12
    assert zero >= G_AT_ZERO


def test_cell_value_exterior():
    r = cell_value(get_density("abs_box_1d"), 2.0)
    assert r.value == np.inf and r.branch is PointClass.EXTERIOR and r.field is None


def test_hw_estimate_convex_all_rows():
    est = hw_estimate(conv_quad(), 0.5, (1, 2), (16, 32))
    assert len(est.table) == 4
    assert all(v == pytest.approx(0.25, abs=1e-10) for _, _, v, _, _ in est.rows())
    assert est.best == min(r.value for r in est.table)


def test_hw_estimate_twophase_k_consistency():
    est = hw_estimate(get_density("twophase1d"), 1.0, (1, 2), (64,))
    v1, v2 = (r.value for r in est.table)
    assert abs(v1 - v2) <= 1e-8 and est.tiling_ok


def test_hw_estimate_exterior_and_boundary():
    assert hw_estimate(get_density("barrier_1d"), 1.5).best == np.inf
    est = hw_estimate(get_density("abs_box_1d"), 1.0, (1,), (8,))
    assert est.branch is PointClass.BOUNDARY and est.best == pytest.approx(1.0, abs=1e-6)


def test_translation_invariance():
    W = get_density("twophase1d")
    a = cell_value(W, 0.8, 1, 16).value
    b = cell_value(translate(W, [3.0]), 0.8, 1, 16).value
    assert a == b


def test_refinement_monotone():
    W = get_density("double_well_1d")
    est = hw_estimate(W, 0.3, (1,), (4, 8, 16))
    vals = [r.value for r in est.table]
    assert all(b <= a + 1e-10 for a, b in zip(vals, vals[1:]))


def test_memo_values_and_cache():
    W = get_density("twophase1d")
    memo = HWMemo(W)
    v, g, _ = memo.lookup(1.0)
    assert v == pytest.approx(TWOPHASE_HARMONIC, rel=1e-8)
    assert g[0, 0] == pytest.approx(2 * TWOPHASE_HARMONIC, rel=1e-6)
    memo.lookup(1.0 + 1e-9)
    assert memo.hits == 1 and len(memo) == 1
    H = memo.density()
    assert H(np.zeros(1), [[0.5]]) == pytest.approx(TWOPHASE_HARMONIC / 4, rel=1e-6)


def test_periodic_oscillation_zero_field():
    W = get_density("twophase1d")
    phi = PwAffineField.zeros(build_mesh(1, 1, 8))
    rep = periodic_oscillation(phi, 1, 0.25, Box.unit(1), W, 1.0)
    assert rep.lhs == pytest.approx(rep.rhs, rel=1e-12)
    assert rep.rhs == pytest.approx(1.5, rel=1e-12)


def test_periodic_oscillation_1d_identity():
    W = get_density("twophase1d")
    phi = cell_value(W, 1.0, 1, 16).field
    rep = periodic_oscillation(phi, 1, 1 / 8, Box.unit(1), W, 1.0)
    assert rep.n_cells == 8 and rep.residual_volume == 0.0
    assert rep.rel_error <= 1e-12


def test_periodic_oscillation_2d_counts(rng):
    W = conv_quad(2, 1)
    mesh = build_mesh(2, 1, 4)
    v = rng.normal(scale=0.05, size=mesh.n_vertices)
    v[mesh.boundary] = 0.0
    phi = PwAffineField(mesh, v, zero_boundary=True)
    rep = periodic_oscillation(phi, 1, 1 / 3, Box.unit(2), W, [[0.3, 0.1]])
    assert rep.n_cells == 9 and rep.residual_volume == pytest.approx(0.0, abs=1e-12)
    assert rep.rel_error <= 1e-10
    rep2 = periodic_oscillation(phi, 1, 0.3, Box.unit(2))
    assert rep2.n_cells == OSC_CELLS_03
    assert rep2.residual_volume == pytest.approx(OSC_RESIDUAL_03, abs=1e-12)


def test_oscillation_field_values():
    phi = PwAffineField(build_mesh(1, 1, 2), [0.0, 0.5, 0.0], zero_boundary=True)
    rep = periodic_oscillation(phi, 1, 0.25, Box.unit(1))
    vals = rep.field(np.array([[0.125], [0.25], [0.375], [0.9375]]))[:, 0]
    assert np.allclose(vals, [0.125, 0.0, 0.125, 0.0625])


def test_lattice_cells_requires_containment():
    assert len(lattice_cells(Box([0.1], [0.9]), 0.25)) == 2


def test_counting_bound():
    assert counting_bound(10, 2) == pytest.approx(COUNTING_BOUND_10_2)
    assert counting_bound(2, 3) == 1.0


def test_subadditive_trace_convex():
    tr = subadditive_trace(conv_quad(), 0.6, eps_schedule=(0.5, 0.25), k_ref_list=(1, 2), n=8)
    assert all(v == pytest.approx(0.36, abs=1e-10) for v in tr.values())
    assert tr.reference == pytest.approx(0.36, abs=1e-10)


def test_subadditive_trace_validation_and_skip():
    W = get_density("twophase1d")
    with pytest.raises(ValueError):
        subadditive_trace(W, 1.0, eps_schedule=(0.25, 0.5))
    tr = subadditive_trace(W, 1.0, eps_schedule=(0.5, 0.001), k_ref_list=(1,), n=8, vertex_cap=100)
    assert tr.entries[1].status == "SKIPPED"
