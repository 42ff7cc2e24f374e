"""Piecewise-linear scalar-field topology."""

from .complex import TriangulatedField, from_pl, grid_simplices, triangulate_grid
from .trees import ContourTree, Segment, Segmentation, contour_tree, segmentation
from .critical import CriticalPoint, classify_critical_points, link_components
from .persistence import (
    PersistencePair,
    count_in_range,
    persistence_curve,
    persistence_pairs,
    persistence_values,
)
from .simplification import simplify

__all__ = [
    "ContourTree",
    "CriticalPoint",
    "PersistencePair",
    "Segment",
    "Segmentation",
    "TriangulatedField",
    "classify_critical_points",
    "contour_tree",
    "count_in_range",
    "from_pl",
    "grid_simplices",
    "link_components",
    "persistence_curve",
    "persistence_pairs",
    "persistence_values",
    "segmentation",
    "simplify",
    "triangulate_grid",
]
