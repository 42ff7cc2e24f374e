"""High-order field transforms and topological analysis."""

from .demo import make_demo_mesh
from .errors import HotopoError
from .field import AnalyticField, HighOrderField, analytic, interpolate, project
from .mesh import Mesh

__version__ = "0.1.0"

__all__ = [
    "AnalyticField",
    "HighOrderField",
    "HotopoError",
    "Mesh",
    "analytic",
    "interpolate",
    "make_demo_mesh",
    "project",
]
