"""Training losses as pure functions with hand-derived gradients.

Dice, focal cross-entropy, the per-hand gated combination, and the 3-way
taxonomy cross-entropy. No autodiff: every gradient here is the closed
form, and the test suite checks each one against central finite
differences. Probabilities are clamped to [EPS, 1-EPS] so logs and the
focal power terms stay finite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .masks import BinaryMask, DimensionMismatchError

EPS = 1e-7

TAXONOMY_CLASSES = ("left", "right", "bimanual")


@dataclass(frozen=True)
class SoftMask:
    """Predicted per-pixel foreground probabilities."""

    width: int
    height: int
    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(self.height, self.width)
        if arr.shape != (self.height, self.width):
            raise DimensionMismatchError(
                f"soft mask shape {arr.shape} != {self.height}x{self.width}"
            )
        if not np.isfinite(arr).all():
            raise ValueError("soft mask values must be finite")
        object.__setattr__(self, "values", np.clip(arr, EPS, 1.0 - EPS))


@dataclass(frozen=True)
class LossValue:
    value: float
    gradient: np.ndarray


@dataclass(frozen=True)
class PairLossValue:
    """Loss over a (left, right) prediction pair with per-hand gradients."""

    value: float
    gradient_left: np.ndarray
    gradient_right: np.ndarray


def _check_dims(pred: SoftMask, gt: BinaryMask) -> None:
    if (pred.width, pred.height) != (gt.width, gt.height):
        raise DimensionMismatchError(
            f"prediction {pred.width}x{pred.height} vs target {gt.width}x{gt.height}"
        )


def dice_loss(pred: SoftMask, gt: BinaryMask, smooth: float = 1.0) -> LossValue:
    """1 - (2*sum(p*g)+s) / (sum(p)+sum(g)+s), with its exact gradient."""
    _check_dims(pred, gt)
    if smooth <= 0:
        raise ValueError("smooth must be > 0")
    p = pred.values
    g = gt.to_array().astype(np.float64)
    numer = 2.0 * float((p * g).sum()) + smooth
    denom = float(p.sum()) + float(g.sum()) + smooth
    value = 1.0 - numer / denom
    grad = (numer - 2.0 * g * denom) / (denom * denom)
    return LossValue(value, grad)


def focal_ce_loss(pred: SoftMask, gt: BinaryMask, gamma: float = 2.0,
                  alpha: float = 0.25) -> LossValue:
    """Mean per-pixel -alpha_t (1-p_t)^gamma log(p_t).

    gamma=0, alpha=0.5 reduces to half the standard binary cross-entropy.
    """
    _check_dims(pred, gt)
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    p = pred.values
    g = gt.to_array().astype(bool)
    p_t = np.where(g, p, 1.0 - p)
    a_t = np.where(g, alpha, 1.0 - alpha)
    one_minus = 1.0 - p_t
    log_pt = np.log(p_t)
    n = p.size
    value = float((-a_t * one_minus ** gamma * log_pt).sum()) / n
    # dL/dp_t, then a sign flip for background pixels where p_t = 1 - p
    if gamma == 0.0:
        d_pt = -a_t / p_t
    else:
        d_pt = a_t * (gamma * one_minus ** (gamma - 1.0) * log_pt - one_minus ** gamma / p_t)
    sign = np.where(g, 1.0, -1.0)
    grad = d_pt * sign / n
    return LossValue(value, grad)


def combined_mask_loss(
    pred_left: SoftMask,
    pred_right: SoftMask,
    gt_left: Optional[BinaryMask],
    gt_right: Optional[BinaryMask],
    dice_weight: float = 1.0,
    focal_weight: float = 1.0,
    smooth: float = 1.0,
    gamma: float = 2.0,
    alpha: float = 0.25,
) -> PairLossValue:
    """Per-hand dice + focal sum; a hand without ground truth is gated to
    exactly zero loss and zero gradient."""
    if gt_left is None and gt_right is None:
        raise ValueError("at least one ground-truth mask is required")

    def _hand(pred: SoftMask, gt: Optional[BinaryMask]) -> tuple[float, np.ndarray]:
        if gt is None:
            return 0.0, np.zeros((pred.height, pred.width))
        d = dice_loss(pred, gt, smooth)
        f = focal_ce_loss(pred, gt, gamma, alpha)
        return (dice_weight * d.value + focal_weight * f.value,
                dice_weight * d.gradient + focal_weight * f.gradient)

    left_value, left_grad = _hand(pred_left, gt_left)
    right_value, right_grad = _hand(pred_right, gt_right)
    return PairLossValue(left_value + right_value, left_grad, right_grad)


def taxonomy_ce(logits, label: str) -> LossValue:
    """Softmax cross-entropy over the 3-way taxonomy; gradient is
    softmax(logits) - one_hot(label)."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.shape != (3,):
        raise ValueError(f"expected 3 logits, got shape {logits.shape}")
    if not np.isfinite(logits).all():
        raise ValueError("logits must be finite")
    if label not in TAXONOMY_CLASSES:
        raise ValueError(f"unknown taxonomy label {label!r}")
    idx = TAXONOMY_CLASSES.index(label)
    shifted = logits - logits.max()
    log_z = np.log(np.exp(shifted).sum())
    value = float(log_z - shifted[idx])
    softmax = np.exp(shifted - log_z)
    grad = softmax.copy()
    grad[idx] -= 1.0
    return LossValue(value, grad)
