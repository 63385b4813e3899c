"""Bimanual affordance toolkit: mask algebra, extraction pipeline,
dataset management, losses, and benchmark evaluation."""

from .masks import BBox, BinaryMask
from .metrics import Heatmap, MetricReport
from .taxonomy import TaxonomyLabel

__version__ = "0.1.0"

__all__ = ["BBox", "BinaryMask", "Heatmap", "MetricReport", "TaxonomyLabel", "__version__"]
