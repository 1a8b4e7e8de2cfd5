"""Path-integral Glauber dynamics and cavity analysis for the transverse-field Ising model."""

__version__ = "0.1.0"

from .trajectory import ModelParams, PiecewiseField, Trajectory  # noqa: E402

__all__ = ["ModelParams", "PiecewiseField", "Trajectory", "__version__"]
