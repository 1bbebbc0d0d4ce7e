"""Joint task partitioning and compute allocation for fog offloading over VLC and RF links."""

from .campaign import emit_csv, run_campaign
from .config import ExperimentConfig, load_config
from .rbmm import RbmmConfig, RbmmResult, initialize, run

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig",
    "RbmmConfig",
    "RbmmResult",
    "emit_csv",
    "initialize",
    "load_config",
    "run",
    "run_campaign",
]
