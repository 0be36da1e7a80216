"""Full-reference metrics: PSNR and luma SSIM."""

import numpy as np
from skimage.metrics import structural_similarity

from ..constants import PSNR_CAP_DB, PSNR_MIN_MSE, SSIM_K1, SSIM_K2, SSIM_SIGMA, SSIM_WINDOW
from ..core import ImageTensor, InvalidShapeError, check_same_shape, luma


def psnr(a: ImageTensor, b: ImageTensor) -> float:
    """Peak signal-to-noise ratio in dB for unit dynamic range, capped at 99 dB."""
    check_same_shape(a, b, what="images")
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    mse = float(np.mean(diff * diff))
    if mse < PSNR_MIN_MSE:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * np.log10(1.0 / mse))


def ssim(a: ImageTensor, b: ImageTensor) -> float:
    """Mean SSIM over the valid region of an 11x11 Gaussian window on BT.601 luma.

    Raises:
        InvalidShapeError: If the shapes differ or either side is under 11 pixels.
    """
    check_same_shape(a, b, what="images")
    if min(a.shape[-2:]) < SSIM_WINDOW:
        raise InvalidShapeError(f"SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {a.shape}")
    # sigma 1.5 with skimage's 3.5-sigma truncation gives the 11x11 window
    return float(
        structural_similarity(
            luma(a),
            luma(b),
            gaussian_weights=True,
            sigma=SSIM_SIGMA,
            use_sample_covariance=False,
            data_range=1.0,
            K1=SSIM_K1,
            K2=SSIM_K2,
        )
    )
