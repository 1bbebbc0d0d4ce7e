"""Reference methods and verification oracles."""

from .cmaes import EsConfig, cmaes_minimize, cmaes_optimize
from .common import BaselineResult, BoxEncoding
from .oracle import grid_oracle, simplex_grid
from .pso import SwarmConfig, pso_minimize, pso_optimize
from .reference import lc_baseline, rbmm_method, single_medium_baseline

__all__ = [
    "BaselineResult",
    "BoxEncoding",
    "EsConfig",
    "SwarmConfig",
    "cmaes_minimize",
    "cmaes_optimize",
    "grid_oracle",
    "lc_baseline",
    "pso_minimize",
    "pso_optimize",
    "rbmm_method",
    "simplex_grid",
    "single_medium_baseline",
]
