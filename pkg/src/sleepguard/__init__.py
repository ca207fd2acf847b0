"""Clustered sensor-network simulator with a two-level denial-of-sleep defence."""
from .core import NetworkConfig, load_config
from .engine import run_simulation
from .kernels import BACKEND

__all__ = ["NetworkConfig", "load_config", "run_simulation", "BACKEND"]
__version__ = "0.1.0"
