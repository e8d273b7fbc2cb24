import numpy as np
import pytest

from cellhom.density import PointClass
from cellhom.gallery import conv_quad, get_density
from cellhom.geometry import Box, IntervalUnion
from cellhom.homogenize import HWMemo
from cellhom.mesh import PwAffineField, build_mesh
from cellhom.relaxation import (
    continuity_probe,
    laminate_bound,
    vitali_pack,
    vitali_transfer,
    z_value,
    zh_value,
)

from oracles import TWOPHASE_HARMONIC, VITALI_1D_CELLS, VITALI_1D_SIDE, two_slope_laminate


def _dw(z):
    return (np.asarray(z, dtype=float).ravel()[0] ** 2 - 1.0) ** 2


def _random_phi(rng, d, level, scale=0.1):
    mesh = build_mesh(d, 1, 2**level)
    v = rng.normal(scale=scale, size=mesh.n_vertices)
    v[mesh.boundary] = 0.0
    return PwAffineField(mesh, v, zero_boundary=True)


@pytest.mark.parametrize("xi", [-1.0, 0.3, 1.7])
def test_z_convex_identity(xi):
    assert z_value(conv_quad(), xi, 3).value == pytest.approx(xi**2, abs=1e-6)


def test_z_double_well_zero_and_laminate():
    r = z_value(get_density("double_well_1d"), 0.0, 3)
    assert r.value <= 1e-3
    oracle = two_slope_laminate(_dw, 0.0, np.linspace(0, 1.5, 151))
    assert oracle == 0.0
    assert abs(r.value - oracle) <= 1e-3
    assert laminate_bound(lambda z: _dw(z), np.array([[0.0]]), [[1.0]], np.linspace(0, 1.5, 151)) == 0.0


def test_z_double_well_at_well_bottom():
    assert z_value(get_density("double_well_1d"), 1.0, 3).value <= 1e-12


def test_z_never_increases_and_refines(rng):
    W = get_density("double_well_1d")
    for xi in rng.uniform(-1.5, 1.5, size=5):
        vals = [z_value(W, xi, lv).value for lv in (1, 2, 3)]
        assert vals[0] <= _dw(xi) + 1e-9
        assert all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))


def test_vitali_pack_examples():
    one = vitali_pack(Box.unit(2), 1.1)
    assert len(one) == 1 and one.scales[0] == 1.0 and one.residual == 0.0
    four = vitali_pack(Box.unit(1), 0.3)
    assert len(four) == VITALI_1D_CELLS and np.all(four.scales == VITALI_1D_SIDE) and four.residual == 0.0
    partial = vitali_pack(Box.unit(2), 0.6, residual_tol=0.01)
    assert partial.residual <= 0.01 and set(partial.scales) <= {0.5, 0.25, 0.125}


def test_vitali_pack_invariants():
    cov = vitali_pack(IntervalUnion([(0.0, 0.7)]), 0.6, residual_tol=0.01)
    assert cov.covered + cov.residual == pytest.approx(0.7, rel=1e-12)
    assert np.max(cov.scales) < 0.6
    order = np.argsort(cov.anchors[:, 0])
    a, s = cov.anchors[order, 0], cov.scales[order]
    assert np.all(a[1:] >= a[:-1] + s[:-1] - 1e-15)
    assert np.all(a >= 0) and np.all(a + s <= 0.7 + 1e-15)


def test_vitali_incomplete_flag():
    cov = vitali_pack(IntervalUnion([(0.0, 0.7)]), 0.6, max_level=3)
    assert cov.status == "INCOMPLETE" and cov.residual > 0


def test_vitali_transfer_zero_field():
    W = get_density("double_well_1d")
    rep = vitali_transfer(PwAffineField.zeros(build_mesh(1, 1, 4)), vitali_pack(Box.unit(1), 0.3), W, 0.5)
    assert rep.lhs == pytest.approx(_dw(0.5), rel=1e-14) and rep.rhs == pytest.approx(_dw(0.5), rel=1e-14)


def test_vitali_transfer_identities(rng):
    W = get_density("double_well_1d")
    phi = _random_phi(rng, 1, 3)
    full = vitali_transfer(phi, vitali_pack(Box.unit(1), 0.3), W, 0.2)
    assert full.rel_error <= 1e-12
    assert full.sup_norm <= full.sup_bound
    cov = vitali_pack(IntervalUnion([(0.0, 0.7)]), 0.6, residual_tol=0.01)
    rep = vitali_transfer(phi, cov, W, 0.2)
    assert rep.residual_term == pytest.approx(cov.residual * _dw(0.2), rel=1e-14)
    assert rep.rel_error <= 1e-12


def test_transferred_field_vanishes_outside_cells(rng):
    phi = _random_phi(rng, 1, 2)
    rep = vitali_transfer(phi, vitali_pack(Box.unit(1), 0.3), conv_quad(), 0.0)
    assert np.allclose(rep.field(np.array([[0.0], [0.25], [0.5], [1.0]]))[:, 0], 0.0)


def test_zh_examples():
    W = conv_quad()
    assert zh_value(W, 0.7).value == pytest.approx(0.49, abs=1e-10)
    tp = get_density("twophase1d")
    memo = HWMemo(tp)
    r = zh_value(tp, 1.0, 3, memo)
    assert abs(r.value - TWOPHASE_HARMONIC) <= 0.02 * TWOPHASE_HARMONIC
    assert memo.lookup(1.0)[0] - r.value <= 1e-8
    ext = zh_value(get_density("barrier_1d"), 2.0)
    assert ext.value == np.inf and ext.branch is PointClass.EXTERIOR


def test_zh_boundary_radial_limit():
    r = zh_value(get_density("abs_box_1d"), 1.0, 2)
    assert r.branch is PointClass.BOUNDARY and r.value == pytest.approx(1.0, abs=1e-4)


def test_continuity_probe_double_well():
    assert continuity_probe(get_density("double_well_1d"), 1.5).passed
