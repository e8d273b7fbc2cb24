"""Cell problems, relaxation and radial calculus for periodic homogenization
of integrands that may take the value ``inf``."""

__version__ = "0.1.0"

from .density import INFINITY, ConstraintSet, EnergyDensity, PointClass, classify_point
from .estimators import HomogenizedEnergy, RadialEnvelope, RelaxedEnergy
from .gallery import GALLERY, get_density
from .gamma import Stage, i_eps, limsup_experiment, recovery_build
from .geometry import DomainSpec, star_shaped_check
from .homogenize import HWMemo, cell_value, hw_estimate, periodic_oscillation, subadditive_trace
from .hyper2d import Hyper2DConfig, hyper2d_density, prop24_suite
from .mesh import PwAffineField, box_mesh, build_mesh, energy
from .optimize import OptimizerConfig, minimize_feasible, multistart
from .relaxation import vitali_pack, vitali_transfer, z_value, zh_value
from .ruusc import delta_lower, hat, lsc_envelope_oracle, ru_usc_audit

__all__ = [
    "INFINITY",
    "ConstraintSet",
    "DomainSpec",
    "EnergyDensity",
    "GALLERY",
    "HWMemo",
    "HomogenizedEnergy",
    "Hyper2DConfig",
    "OptimizerConfig",
    "PointClass",
    "PwAffineField",
    "RadialEnvelope",
    "RelaxedEnergy",
    "Stage",
    "box_mesh",
    "build_mesh",
    "cell_value",
    "classify_point",
    "delta_lower",
    "energy",
    "get_density",
    "hat",
    "hw_estimate",
    "hyper2d_density",
    "i_eps",
    "limsup_experiment",
    "lsc_envelope_oracle",
    "minimize_feasible",
    "multistart",
    "periodic_oscillation",
    "prop24_suite",
    "recovery_build",
    "ru_usc_audit",
    "star_shaped_check",
    "subadditive_trace",
    "vitali_pack",
    "vitali_transfer",
    "z_value",
    "zh_value",
]
