"""Lightness-order error."""

import numpy as np
from numpy.typing import NDArray

from ..constants import LOE_TARGET_SIDE
from ..core import ImageTensor, check_same_shape


def lightness(img: ImageTensor) -> NDArray[np.float64]:
    """Per-pixel maximum over channels."""
    return np.asarray(img, dtype=np.float64).max(axis=0)


def _nearest_downsample(plane: NDArray, ratio: float) -> NDArray:
    h, w = plane.shape
    nh, nw = max(1, round(h * ratio)), max(1, round(w * ratio))
    rows = (np.arange(nh) * h) // nh
    cols = (np.arange(nw) * w) // nw
    return plane[np.ix_(rows, cols)]


def relative_order_difference(l_enh: NDArray, l_orig: NDArray) -> NDArray[np.int64]:
    """Per pixel, how many other pixels swapped lightness order (flattened inputs)."""
    before = l_orig[:, None] >= l_orig[None, :]
    after = l_enh[:, None] >= l_enh[None, :]
    return np.count_nonzero(before ^ after, axis=1)


def loe(enhanced: ImageTensor, original: ImageTensor) -> float:
    """Mean relative order difference over a nearest-neighbour downsampled grid.

    Both lightness maps are downsampled by r = min(1, 50 / min(H, W)) so the
    pairwise comparison stays bounded.
    """
    check_same_shape(enhanced, original, what="images")
    ratio = min(1.0, LOE_TARGET_SIDE / min(enhanced.shape[-2:]))
    l_enh = _nearest_downsample(lightness(enhanced), ratio).ravel()
    l_orig = _nearest_downsample(lightness(original), ratio).ravel()
    return float(relative_order_difference(l_enh, l_orig).mean())
