import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from cellhom.cli import _fmt
from cellhom.gallery import get_density
from cellhom.geometry import IntervalUnion
from cellhom.hyper2d import det_inequality_check, in_G
from cellhom.relaxation import vitali_pack, z_value

finite = st.floats(-3.0, 3.0, allow_nan=False)


@settings(max_examples=25, deadline=None)
@given(finite)
def test_z_below_density(xi):
    W = get_density("double_well_1d")
    assert z_value(W, xi, 2).value <= (xi * xi - 1.0) ** 2 + 1e-9


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 2.0), st.floats(0.05, 1.0), st.floats(0.0, 0.1))
def test_vitali_measure_balance(length, cap, tol):
    cov = vitali_pack(IntervalUnion([(0.0, length)]), cap, residual_tol=tol)
    assert math.isclose(cov.covered + cov.residual, length, rel_tol=1e-12, abs_tol=1e-15)
    assert np.all(cov.scales < cap)
    if cov.status == "COMPLETE":
        assert cov.residual <= tol * length + 1e-12 * length


@settings(max_examples=200, deadline=None)
@given(st.lists(finite, min_size=4, max_size=4))
def test_det_chain_on_members(entries):
    xi = np.array(entries).reshape(2, 2)
    if in_G(xi[None])[0]:
        assert det_inequality_check(xi).holds


@given(st.floats(allow_nan=True, allow_infinity=True))
def test_csv_float_roundtrip(v):
    s = _fmt(v)
    back = float(s)
    assert (math.isnan(v) and math.isnan(back)) or back == v
