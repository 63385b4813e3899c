"""Four-way interaction taxonomy and its collapse to the 3-way form
used by prediction heads (left / right / bimanual)."""

from __future__ import annotations

from enum import Enum


class TaxonomyLabel(str, Enum):
    UNIMANUAL_LEFT = "unimanual_left"
    UNIMANUAL_RIGHT = "unimanual_right"
    BIMANUAL_SYMMETRIC = "bimanual_symmetric"
    BIMANUAL_ASYMMETRIC = "bimanual_asymmetric"

    def collapse(self) -> str:
        """Deterministic 3-way form: left, right, or bimanual."""
        if self is TaxonomyLabel.UNIMANUAL_LEFT:
            return "left"
        if self is TaxonomyLabel.UNIMANUAL_RIGHT:
            return "right"
        return "bimanual"

    def hflipped(self) -> "TaxonomyLabel":
        """Label after mirroring the scene left-right."""
        if self is TaxonomyLabel.UNIMANUAL_LEFT:
            return TaxonomyLabel.UNIMANUAL_RIGHT
        if self is TaxonomyLabel.UNIMANUAL_RIGHT:
            return TaxonomyLabel.UNIMANUAL_LEFT
        return self

    @property
    def uses_left(self) -> bool:
        return self in (TaxonomyLabel.UNIMANUAL_LEFT, TaxonomyLabel.BIMANUAL_SYMMETRIC,
                        TaxonomyLabel.BIMANUAL_ASYMMETRIC)

    @property
    def uses_right(self) -> bool:
        return self in (TaxonomyLabel.UNIMANUAL_RIGHT, TaxonomyLabel.BIMANUAL_SYMMETRIC,
                        TaxonomyLabel.BIMANUAL_ASYMMETRIC)
