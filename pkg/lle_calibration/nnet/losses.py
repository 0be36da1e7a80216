"""Scalar losses returning ``(value, d value / d prediction)``."""

from collections.abc import Callable
from typing import TypeAlias

import numpy as np
from numpy.typing import NDArray
from scipy.special import expit

from ..constants import AdversarialLoss
from ..core import check_same_shape

ScalarLoss: TypeAlias = Callable[[NDArray], tuple[float, NDArray]]


def mse_loss(pred: NDArray, target: NDArray) -> tuple[float, NDArray]:
    check_same_shape(pred, target, what="prediction and target")
    diff = pred - target
    return float(np.mean(diff * diff)), (2.0 / diff.size) * diff


def l1_loss(pred: NDArray, target: NDArray) -> tuple[float, NDArray]:
    check_same_shape(pred, target, what="prediction and target")
    diff = pred - target
    return float(np.mean(np.abs(diff))), np.sign(diff) / diff.size


def adversarial_loss(
    scores: NDArray, real: bool, form: AdversarialLoss = AdversarialLoss.LSGAN
) -> tuple[float, NDArray]:
    """Patch-discriminator loss against an all-real or all-fake label map."""
    label = 1.0 if real else 0.0
    if form == AdversarialLoss.LSGAN:
        return mse_loss(scores, np.full_like(scores, label))
    # binary cross-entropy on logits
    value = np.maximum(scores, 0.0) - scores * label + np.log1p(np.exp(-np.abs(scores)))
    grad = (expit(scores) - label) / scores.size
    return float(np.mean(value)), grad.astype(scores.dtype, copy=False)
