"""Ballistic random walks in random environments: Monte Carlo exit
estimates, exact absorbing-chain solves, and certified tower arithmetic
for the fast-growing renormalization scales."""

__version__ = "0.1.0"

from .conditions import (
    ConditionReport,
    check_polynomial,
    direction_neighborhood,
    effective_criterion,
    fit_gamma,
    gamma_regression,
)
from .env import DirichletFloor, Environment, EnvironmentLaw, Homogeneous, TwoPoint
from .geometry import BoxSpec, PolyBox, box_spec, build_rotation
from .renorm import (
    ScaleError,
    ScaleParams,
    build_scales,
    case_scales,
    check_G,
    check_refined_bound,
    f_tower,
    gamma_effective,
    hypothesis_phi0,
    locate_k,
    propagate_phi,
    superadditivity_check,
)
from .solver import exact_exit, rho_moment
from .towermath import (
    TowerReal,
    tower_from_real,
    tower_from_string,
    tower_to_real,
    tower_to_string,
)
from .walk import mc_box_annealed, mc_box_estimate, mc_slab_estimate, run_box, run_slab

__all__ = [
    "__version__",
    "ConditionReport",
    "check_polynomial",
    "direction_neighborhood",
    "effective_criterion",
    "fit_gamma",
    "gamma_regression",
    "DirichletFloor",
    "Environment",
    "EnvironmentLaw",
    "Homogeneous",
    "TwoPoint",
    "BoxSpec",
    "PolyBox",
    "box_spec",
    "build_rotation",
    "ScaleError",
    "ScaleParams",
    "build_scales",
    "case_scales",
    "check_G",
    "check_refined_bound",
    "f_tower",
    "gamma_effective",
    "hypothesis_phi0",
    "locate_k",
    "propagate_phi",
    "superadditivity_check",
    "exact_exit",
    "rho_moment",
    "TowerReal",
    "tower_from_real",
    "tower_from_string",
    "tower_to_real",
    "tower_to_string",
    "mc_box_annealed",
    "mc_box_estimate",
    "mc_slab_estimate",
    "run_box",
    "run_slab",
]
