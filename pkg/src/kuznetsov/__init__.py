"""Finite-difference solver and verification harness for Kuznetsov's equation."""
from ._accel import BACKEND
from .domain import (Disk, Domain, Interval, NormOrder, PhysicalParams, Rectangle,
                     analytic_lambda0, discrete_norm, numeric_lambda0, omega0)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Disk", "Domain", "Interval", "NormOrder", "PhysicalParams", "Rectangle",
    "analytic_lambda0", "discrete_norm", "numeric_lambda0", "omega0", "__version__",
]
