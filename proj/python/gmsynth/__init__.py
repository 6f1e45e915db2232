"""Stochastic ground motion fitting, simulation and validation."""

from ._gmsynth import *  # noqa: F401,F403
from ._gmsynth import DataError, ValidationError, ConvergenceError  # noqa: F401

__version__ = "0.1.0"
