"""MIMO detection with Hamiltonian Monte Carlo: Python bindings over the C++ core."""

from ._core import (
    ConfigError,
    Constellation,
    LdpcCode,
    detect,
    draw_system,
    ess,
    exhaustive_ml,
    r_hat,
    run_experiment,
    setting_keys,
)

__all__ = [
    "ConfigError",
    "Constellation",
    "LdpcCode",
    "detect",
    "draw_system",
    "ess",
    "exhaustive_ml",
    "r_hat",
    "run_experiment",
    "setting_keys",
]
