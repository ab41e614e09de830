from .dcra import BaselineConfig, HashingConfig, SolverConfig, load_configs

__all__ = [
    "SolverConfig",
    "HashingConfig",
    "BaselineConfig",
    "load_configs",
]
