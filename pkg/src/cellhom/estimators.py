"""Estimator-style wrappers: fit on a gallery density, predict on batches of
gradients ``X`` (rows of ``m*d`` entries).

Parameters live in ``__init__`` unchanged, fitted state ends in ``_``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .density import EnergyDensity
from .gallery import get_density
from .homogenize import HWMemo, hw_estimate
from .optimize import OptimizerConfig
from .relaxation import z_value, zh_value
from .ruusc import hat
from .validation import check_positive_int, check_schedule, check_xi_batch


def _resolve(density) -> EnergyDensity:
    return density if isinstance(density, EnergyDensity) else get_density(density)


class HomogenizedEnergy(BaseEstimator):
    """Coarse ``HW``: minimum over the ``k`` and ``n`` schedules of the cell problem."""

    def __init__(self, density="conv_quad", k_list=(1,), n_list=(16,), n_starts=4, max_iters=500, seed=0):
        self.density = density
        self.k_list = k_list
        self.n_list = n_list
        self.n_starts = n_starts
        self.max_iters = max_iters
        self.seed = seed

    def fit(self, X=None, y=None):
        self.density_ = _resolve(self.density)
        self.k_list_ = check_schedule(self.k_list, "k_list", int, 1)
        self.n_list_ = check_schedule(self.n_list, "n_list", int, 1)
        self.cfg_ = OptimizerConfig(
            n_starts=check_positive_int(self.n_starts, "n_starts"),
            max_iters=check_positive_int(self.max_iters, "max_iters"),
            seed=int(self.seed),
        )
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "density_")
        W = self.density_
        Z = check_xi_batch(X, W.m, W.d)
        return np.array([hw_estimate(W, z, self.k_list_, self.n_list_, self.cfg_).best for z in Z])


class RelaxedEnergy(BaseEstimator):
    """``Z`` at a dyadic level, applied to ``W`` or (``of="HW"``) to the coarse ``HW``."""

    def __init__(self, density="double_well_1d", level=3, of="W", n_cell=16, seed=0):
        self.density = density
        self.level = level
        self.of = of
        self.n_cell = n_cell
        self.seed = seed

    def fit(self, X=None, y=None):
        if self.of not in ("W", "HW"):
            raise ValueError("of must be 'W' or 'HW'")
        self.density_ = _resolve(self.density)
        self.level_ = check_positive_int(self.level, "level", 0)
        self.cfg_ = OptimizerConfig(seed=int(self.seed))
        self.memo_ = HWMemo(self.density_, n=check_positive_int(self.n_cell, "n_cell")) if self.of == "HW" else None
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "density_")
        W = self.density_
        Z = check_xi_batch(X, W.m, W.d)
        if self.memo_ is None:
            return np.array([z_value(W, z, self.level_, self.cfg_).value for z in Z])
        return np.array([zh_value(W, z, self.level_, self.memo_).value for z in Z])


class RadialEnvelope(BaseEstimator):
    """Radial limit ``L-hat`` of a density (``L`` on the interior, ``inf`` outside)."""

    def __init__(self, density="abs_box_1d", schedule=(0.9, 0.99, 0.999, 0.9999)):
        self.density = density
        self.schedule = schedule

    def fit(self, X=None, y=None):
        self.density_ = _resolve(self.density)
        self.schedule_ = check_schedule(self.schedule, "schedule", float, 0.0, strict_min=True)
        if any(t >= 1 for t in self.schedule_):
            raise ValueError("schedule entries must be below 1")
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "density_")
        W = self.density_
        Z = check_xi_batch(X, W.m, W.d)
        return np.array([hat(W, z, self.schedule_).value for z in Z])
