import numpy as np
import pytest

from cellhom.density import INFINITY, EnergyDensity, PeriodicWeight, PointClass
from cellhom.gallery import GALLERY, ONE_D, conv_quad, get_density
from cellhom.hyper2d import G_AT_ZERO, G_SET, g_eval, sample_G
from cellhom.ruusc import (
    NoFeasibleSamplesError,
    RadialProbe,
    delta_lower,
    hat,
    lsc_envelope_oracle,
    radial_probe,
    radial_samples,
    ru_usc_audit,
)

from oracles import HAT_ABS_BOX_AT_1


def _step_density():
    # 1 on the closed unit ball, 0 outside: jumps up along rays entering the ball
    return EnergyDensity("step", lambda x, xi: np.where(np.abs(xi[:, 0, 0]) <= 1.0, 1.0, 0.0), 1, 1,
                         x_dependent=False)


@pytest.mark.parametrize("name", sorted(GALLERY))
def test_delta_at_one_is_zero(name, rng):
    W = get_density(name)
    Z = radial_samples(W.domain.member, W.shape, 64, rng)
    assert delta_lower(W, 1.0, 1.0, rng.random((4, W.d)), Z) == 0.0


def test_delta_quadratic_is_zero():
    xi = np.linspace(0, 3, 31).reshape(-1, 1, 1)
    for t in (0.5, 0.9, 0.99):
        assert delta_lower(conv_quad(), 1.0, t, np.zeros((1, 1)), xi) == 0.0


def test_audit_quadratic_passes_nonpositive():
    rep = ru_usc_audit(conv_quad(), 1.0, xi_samples=np.linspace(0, 3, 31).reshape(-1, 1, 1), x_samples=np.zeros((1, 1)))
    assert rep.passed and all(d <= 0 for d in rep.delta)
    assert [r[0] for r in rep.rows()] == [0.9, 0.99, 0.999]


def test_audit_barrier_gauge_convexity_bound(rng):
    W = EnergyDensity("g", lambda x, xi: g_eval(xi), 2, 2, x_dependent=False, domain=G_SET)
    Z = sample_G(2000, rng)
    for t in (0.9, 0.99, 0.999):
        assert delta_lower(W, G_AT_ZERO + 1.0, t, np.zeros((1, 2)), Z) <= (1 - t) * G_AT_ZERO + 1e-12
    assert ru_usc_audit(W, G_AT_ZERO + 1.0, x_samples=np.zeros((1, 2)), xi_samples=Z).passed


def test_audit_detects_upward_jump():
    t_grid = (0.9, 0.99, 0.999)
    xi = np.array([1.0000001, 1.001, 2.0]).reshape(-1, 1, 1)
    rep = ru_usc_audit(_step_density(), 1.0, t_grid, np.zeros((1, 1)), xi)
    assert not rep.passed and min(rep.delta) >= 1.0 - 1e-12


def test_periodic_weight_accepted(rng):
    W = get_density("twophase1d")
    a = PeriodicWeight(lambda x: 1.0 + 0.5 * np.sin(np.pi * x[:, 0]) ** 2)
    assert delta_lower(W, a, 0.9, rng.random((8, 1)), rng.normal(size=(8, 1, 1))) <= 0.0


def test_no_feasible_samples():
    with pytest.raises(NoFeasibleSamplesError):
        delta_lower(get_density("barrier_1d"), 1.0, 0.9, np.zeros((1, 1)), np.full((3, 1, 1), 2.0))


def test_radial_samples_are_members(rng):
    Z = radial_samples(G_SET.member, (2, 2), 500, rng)
    assert np.all(G_SET.member(Z))


def test_hat_examples():
    r = hat(conv_quad(), [[1.7]])
    assert r.value == pytest.approx(1.7**2) and r.branch is PointClass.INTERIOR
    r = hat(get_density("abs_box_1d"), [[1.0]])
    assert r.branch is PointClass.BOUNDARY and r.value == pytest.approx(HAT_ABS_BOX_AT_1, abs=1e-9)
    r = hat(get_density("barrier_1d"), [[1.0]])
    assert r.branch is PointClass.BOUNDARY and r.value == INFINITY
    assert hat(get_density("barrier_1d"), [[1.5]]).branch is PointClass.EXTERIOR


def test_hat_nonconverged_flag():
    def wobble(z):
        s = float(np.ravel(z)[0])
        if abs(s) > 1:
            return INFINITY
        return 1.0 + 0.5 * np.sin(1.0 / (1.0 - abs(s) + 1e-300))

    r = hat(wobble, np.array([[1.0]]))
    assert r.flag == "NONCONVERGED"
    assert r.value == min(r.probe.values[len(r.probe.values) // 2:])


def test_probe_schedule_validation():
    with pytest.raises(ValueError):
        RadialProbe((0.9, 0.8))
    with pytest.raises(ValueError):
        RadialProbe((0.9, 1.0))


def test_remark_limsup_below_value(rng):
    for name in ONE_D:
        W = get_density(name)
        Z = radial_samples(W.domain.member, W.shape, 20, rng, near_boundary=0.0)
        for z in Z:
            pr = radial_probe(W, z)
            assert pr.limit <= W(np.zeros(1), z) + 1e-6


def test_oracle_examples():
    nodes = np.linspace(-1.0, 1.0, 21)
    W = get_density("abs_box_1d")
    env = lsc_envelope_oracle(W, nodes, 1e-3)
    assert np.allclose(env, np.abs(nodes), atol=1e-12)
    Wq = conv_quad()
    assert np.allclose(lsc_envelope_oracle(Wq, nodes, 1e-3), nodes**2, atol=1e-12)

    def indicator(z):
        return 0.0 if abs(float(np.ravel(z)[0])) < 1 else INFINITY

    env = lsc_envelope_oracle(indicator, np.array([-1.0, 0.0, 1.0]), 1e-3)
    assert env.tolist() == [0.0, 0.0, 0.0]
    assert lsc_envelope_oracle(get_density("barrier_1d"), np.array([1.0]), 1e-2)[0] == INFINITY
