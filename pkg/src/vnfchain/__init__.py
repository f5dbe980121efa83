"""Markov-chain analysis and simulation of VNF task chains in edge networks."""

__version__ = "0.1.0"

from .config import ConfigError, SystemConfig, load_config, one_bs, two_bs
from .pipeline import analyze

__all__ = ["ConfigError", "SystemConfig", "analyze", "load_config", "one_bs", "two_bs"]
