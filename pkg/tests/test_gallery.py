import numpy as np
import pytest

from cellhom.gallery import GALLERY, UnknownDensityError, get_density, translate, twophase_coefficient


def test_ids_resolve():
    for name in GALLERY:
        assert get_density(name).name == name


def test_unknown_id():
    with pytest.raises(UnknownDensityError, match="unknown density"):
        get_density("nope")


def test_twophase_coefficient_values():
    x = np.array([[0.0], [0.25], [0.5], [0.75], [1.25], [-0.25]])
    assert twophase_coefficient(x).tolist() == [1.0, 1.0, 2.0, 2.0, 1.0, 2.0]


def test_conv_quad_dimensions():
    W = get_density("conv_quad", d=2, m=3)
    assert W.shape == (3, 2)
    assert W(np.zeros(2), np.ones((3, 2))) == 6.0


def test_translate_integer_shift_is_identity(rng):
    W = get_density("twophase1d")
    Wz = translate(W, [2.0])
    x = rng.random((50, 1))
    xi = rng.normal(size=(50, 1, 1))
    assert np.array_equal(W.eval_batch(x, xi), Wz.eval_batch(x, xi))


def test_boundary_behaviour():
    assert get_density("abs_box_1d")(np.zeros(1), [[1.0]]) == 1.0
    assert get_density("abs_box_1d")(np.zeros(1), [[1.01]]) == np.inf
    assert get_density("barrier_1d")(np.zeros(1), [[1.0]]) == np.inf
