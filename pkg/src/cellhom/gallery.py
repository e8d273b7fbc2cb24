"""Named densities used by the command line, the tests and the examples."""

from __future__ import annotations

from dataclasses import replace
from typing import Callable, Dict

import numpy as np

from .density import INFINITY, ConstraintSet, ConvexGauge, EnergyDensity, Growth, whole_space
from .hyper2d import Hyper2DConfig, hyper2d_density


def _sq(xi):
    return np.sum(xi * xi, axis=(-2, -1))


def conv_quad(d: int = 1, m: int = 1) -> EnergyDensity:
    """``|xi|^2`` (x-independent, convex)."""
    gauge = ConvexGauge(_sq, whole_space())
    return EnergyDensity(
        name="conv_quad",
        func=lambda x, xi: _sq(xi),
        d=d,
        m=m,
        grad=lambda x, xi: 2.0 * xi,
        x_dependent=False,
        coercivity_c=1.0,
        exponent_p=2.0,
        growth=Growth(1.0, 1.0, gauge),
        domain=whole_space(),
    )


def double_well_1d() -> EnergyDensity:
    """``(zeta^2 - 1)^2``; nonconvex with wells at +-1, no coercivity claimed."""
    return EnergyDensity(
        name="double_well_1d",
        func=lambda x, xi: (xi[:, 0, 0] ** 2 - 1.0) ** 2,
        d=1,
        m=1,
        grad=lambda x, xi: 4.0 * xi * (xi**2 - 1.0),
        x_dependent=False,
        coercivity_c=None,
        exponent_p=4.0,
        domain=whole_space(),
    )


def twophase_coefficient(x) -> np.ndarray:
    """1 on ``[0, 1/2)`` and 2 on ``[1/2, 1)``, extended 1-periodically."""
    frac = np.mod(np.asarray(x, dtype=float)[:, 0], 1.0)
    return np.where(frac < 0.5, 1.0, 2.0)


def twophase1d() -> EnergyDensity:
    """``c(x) zeta^2`` with a two-phase periodic coefficient; HW is ``(4/3) zeta^2``."""
    gauge = ConvexGauge(_sq, whole_space())
    return EnergyDensity(
        name="twophase1d",
        func=lambda x, xi: twophase_coefficient(x) * xi[:, 0, 0] ** 2,
        d=1,
        m=1,
        grad=lambda x, xi: (2.0 * twophase_coefficient(x))[:, None, None] * xi,
        x_dependent=True,
        coercivity_c=1.0,
        exponent_p=2.0,
        growth=Growth(1.0, 2.0, gauge),
        domain=whole_space(),
    )


def _closed_unit(z):
    return np.abs(np.asarray(z)[:, 0, 0]) <= 1.0


def _open_unit(z):
    return np.abs(np.asarray(z)[:, 0, 0]) < 1.0


def abs_box_1d() -> EnergyDensity:
    """``|zeta|`` on ``[-1, 1]``, ``inf`` outside (finite boundary values)."""
    dom = ConstraintSet(_closed_unit, True, 1.0, "[-1,1]")
    gauge = ConvexGauge(lambda xi: np.where(_closed_unit(xi), np.abs(xi[:, 0, 0]), INFINITY), dom)
    return EnergyDensity(
        name="abs_box_1d",
        func=lambda x, xi: np.where(_closed_unit(xi), np.abs(xi[:, 0, 0]), INFINITY),
        d=1,
        m=1,
        grad=lambda x, xi: np.sign(xi),
        x_dependent=False,
        coercivity_c=1.0,
        exponent_p=2.0,
        growth=Growth(1.0, 1.0, gauge),
        domain=dom,
    )


def barrier_1d() -> EnergyDensity:
    """``1/(1 - zeta^2)`` on ``(-1, 1)``, ``inf`` elsewhere (diverges at the boundary)."""

    def func(x, xi):
        z = xi[:, 0, 0]
        inside = np.abs(z) < 1.0
        return np.where(inside, 1.0 / np.where(inside, 1.0 - z * z, 1.0), INFINITY)

    dom = ConstraintSet(_open_unit, True, 1.0, "(-1,1)")
    return EnergyDensity(
        name="barrier_1d",
        func=func,
        d=1,
        m=1,
        grad=lambda x, xi: 2.0 * xi / (1.0 - xi**2) ** 2,
        x_dependent=False,
        coercivity_c=1.0,
        exponent_p=2.0,
        growth=Growth(1.0, 1.0, ConvexGauge(lambda xi: func(None, xi), dom)),
        domain=dom,
    )


def hyper2d_default() -> EnergyDensity:
    return hyper2d_density(Hyper2DConfig())


GALLERY: Dict[str, Callable[..., EnergyDensity]] = {
    "conv_quad": conv_quad,
    "double_well_1d": double_well_1d,
    "twophase1d": twophase1d,
    "abs_box_1d": abs_box_1d,
    "barrier_1d": barrier_1d,
    "hyper2d_default": hyper2d_default,
}

ONE_D = ("conv_quad", "double_well_1d", "twophase1d", "abs_box_1d", "barrier_1d")


class UnknownDensityError(KeyError):
    pass


def get_density(name: str, **params) -> EnergyDensity:
    """Gallery density by id; ``conv_quad`` accepts ``d`` and ``m``."""
    try:
        factory = GALLERY[name]
    except KeyError:
        raise UnknownDensityError(f"unknown density id {name!r}; choose from {sorted(GALLERY)}") from None
    return factory(**params)


def translate(W: EnergyDensity, z) -> EnergyDensity:
    """``W(x + z, xi)``: the same density sampled from a shifted origin."""
    z = np.asarray(z, dtype=float).reshape(1, W.d)
    grad = None if W.grad is None else (lambda x, xi: W.grad(x + z, xi))
    return replace(W, func=lambda x, xi: W.func(x + z, xi), grad=grad, name=f"{W.name}+shift")


__all__ = [
    "GALLERY",
    "ONE_D",
    "UnknownDensityError",
    "abs_box_1d",
    "barrier_1d",
    "conv_quad",
    "double_well_1d",
    "get_density",
    "hyper2d_default",
    "translate",
    "twophase1d",
    "twophase_coefficient",
]
