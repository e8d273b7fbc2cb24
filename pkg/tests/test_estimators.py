import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from cellhom import HomogenizedEnergy, RadialEnvelope, RelaxedEnergy
from cellhom.gallery import conv_quad

from oracles import HAT_ABS_BOX_AT_1


def test_params_roundtrip():
    est = HomogenizedEnergy(density="twophase1d", n_list=(8,))
    assert est.get_params()["n_list"] == (8,)
    c = clone(est.set_params(seed=3))
    assert c.seed == 3 and not hasattr(c, "density_")


@pytest.mark.parametrize("cls", [HomogenizedEnergy, RelaxedEnergy, RadialEnvelope])
def test_not_fitted(cls):
    with pytest.raises(NotFittedError):
        cls().predict([[0.0]])


def test_homogenized_predict():
    est = HomogenizedEnergy(n_list=(8,), n_starts=1).fit()
    assert np.allclose(est.predict([[0.5], [1.0]]), [0.25, 1.0], atol=1e-9)
    est = HomogenizedEnergy(density=conv_quad(d=2), n_list=(4,), n_starts=1).fit()
    assert est.predict(np.array([[1.0, 2.0]]))[0] == pytest.approx(5.0, abs=1e-9)


def test_relaxed_predict():
    z = RelaxedEnergy(level=3).fit().predict([[0.0], [2.0]])
    assert z[0] <= 1e-3 and z[1] == pytest.approx(9.0, rel=1e-9)


def test_radial_envelope():
    v = RadialEnvelope().fit().predict([[0.5], [1.0], [1.5]])
    assert v[0] == pytest.approx(0.5) and v[1] == pytest.approx(HAT_ABS_BOX_AT_1, abs=1e-9) and v[2] == np.inf


def test_bad_inputs():
    with pytest.raises(ValueError):
        RelaxedEnergy(of="X").fit()
    with pytest.raises(ValueError):
        RadialEnvelope(schedule=(0.9, 1.0)).fit()
    with pytest.raises(ValueError):
        HomogenizedEnergy(k_list=(0,)).fit()
    with pytest.raises(ValueError):
        HomogenizedEnergy().fit().predict([[1.0, 2.0]])
