"""Solvers, operator catalog and certificates for affinely constrained
composite convex minimization."""

from . import bench, certificates, kernels, linalg, maps, objectives, problems, solvers
from .errors import FmhsdmError
from .kernels import BACKEND

__all__ = [
    "bench",
    "certificates",
    "kernels",
    "linalg",
    "maps",
    "objectives",
    "problems",
    "solvers",
    "FmhsdmError",
    "BACKEND",
]

__version__ = "0.1.0"
