"""Natural-scene-statistics quality model (NIQE) and its distribution fits.

Features follow the usual construction: MSCN coefficients of the grey image,
a GGD fit of the coefficients and AGGD fits of four neighbour products per
patch, at full and half resolution.
"""

from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np
from loguru import logger
from numpy.typing import NDArray
from scipy.linalg import solve_triangular
from scipy.ndimage import gaussian_filter, zoom
from scipy.special import gammaln

from ..constants import (
    GGD_MIN_SAMPLES,
    NIQE_FEATURES,
    NIQE_MIN_PATCHES,
    NIQE_PATCH,
    NIQE_RIDGE,
    NIQE_SHARPNESS_FRACTION,
    NIQE_WINDOW,
    LogMessage,
)
from ..core import ImageTensor, InvalidParameterError, InvalidShapeError, LleCalibrationError, luma

_SHAPE_GRID = np.arange(0.2, 10.0 + 1e-9, 0.001)
# E[x^2] / E[|x|]^2 of a GGD as a function of its shape
_GGD_RATIO = np.exp(gammaln(1.0 / _SHAPE_GRID) + gammaln(3.0 / _SHAPE_GRID) - 2.0 * gammaln(2.0 / _SHAPE_GRID))
_AGGD_RATIO = 1.0 / _GGD_RATIO
_PAIR_SHIFTS = ((0, 1), (1, 0), (1, 1), (-1, 1))
_MAX_RIDGE = 1.0
# grey levels; below this a patch counts as flat
_MIN_SHARPNESS = 1e-3


class DegenerateDistributionError(LleCalibrationError, ValueError):
    """Samples carry no spread to fit a distribution to."""


class EmptyFeaturesError(LleCalibrationError):
    """No patch survived selection, or too few patches to fit a model."""


@dataclass(frozen=True)
class NiqeModel:
    """Multivariate Gaussian of pristine patch features.

    Attributes:
        mean: Feature mean, shape (36,).
        cov: Symmetric feature covariance, shape (36, 36).
        patch_size: Patch side at full resolution.
        sharpness_fraction: Fraction of the sharpest patch a patch must reach.
        ridge: Diagonal loading applied before inversion.
    """

    mean: NDArray[np.float64]
    cov: NDArray[np.float64]
    patch_size: int = NIQE_PATCH
    sharpness_fraction: float = NIQE_SHARPNESS_FRACTION
    ridge: float = NIQE_RIDGE


def _check_spread(samples: NDArray, min_samples: int) -> NDArray[np.float64]:
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < min_samples:
        raise DegenerateDistributionError(f"need at least {min_samples} samples, got {x.size}")
    if not np.isfinite(x).all() or np.ptp(x) == 0.0:
        raise DegenerateDistributionError("samples are constant or non-finite")
    return x


def fit_ggd(samples: NDArray, *, min_samples: int = GGD_MIN_SAMPLES) -> tuple[float, float]:
    """Moment-matching GGD fit of zero-mean samples.

    Returns:
        Shape and scale; the scale is the root mean square of the samples.
    """
    x = _check_spread(samples, min_samples)
    sigma_sq = float(np.mean(x * x))
    rho = sigma_sq / float(np.mean(np.abs(x))) ** 2
    shape = float(_SHAPE_GRID[np.argmin(np.abs(rho - _GGD_RATIO))])
    return shape, float(np.sqrt(sigma_sq))


def fit_aggd(
    samples: NDArray, *, min_samples: int = GGD_MIN_SAMPLES
) -> tuple[float, float, float, float]:
    """Asymmetric GGD fit.

    Returns:
        Shape, left scale, right scale and the mean offset implied by the fit.
    """
    x = _check_spread(samples, min_samples)
    left, right = x[x < 0], x[x > 0]
    if left.size == 0 or right.size == 0:
        raise DegenerateDistributionError("AGGD fit needs samples on both sides of zero")
    left_std = float(np.sqrt(np.mean(left * left)))
    right_std = float(np.sqrt(np.mean(right * right)))
    gamma_hat = left_std / right_std
    r_hat = float(np.mean(np.abs(x))) ** 2 / float(np.mean(x * x))
    r_norm = r_hat * (gamma_hat**3 + 1.0) * (gamma_hat + 1.0) / (gamma_hat**2 + 1.0) ** 2
    shape = float(_SHAPE_GRID[np.argmin((_AGGD_RATIO - r_norm) ** 2)])
    ratio = np.exp(gammaln(2.0 / shape) - 0.5 * (gammaln(1.0 / shape) + gammaln(3.0 / shape)))
    mean_offset = (right_std - left_std) * float(ratio)
    return shape, left_std, right_std, mean_offset


def mscn(gray: NDArray) -> tuple[NDArray, NDArray]:
    """Mean-subtracted contrast-normalised coefficients and the local deviation map."""
    sigma = NIQE_WINDOW / 6.0
    truncate = (NIQE_WINDOW // 2) / sigma
    mu = gaussian_filter(gray, sigma, truncate=truncate, mode="nearest")
    var = gaussian_filter(gray * gray, sigma, truncate=truncate, mode="nearest") - mu * mu
    deviation = np.sqrt(np.abs(var))
    return (gray - mu) / (deviation + 1.0), deviation


def _patch_features(coeffs: NDArray) -> list[float]:
    shape, scale = fit_ggd(coeffs, min_samples=1)
    feats = [shape, scale * scale]
    for dy, dx in _PAIR_SHIFTS:
        pair = coeffs * np.roll(coeffs, (dy, dx), axis=(0, 1))
        a, left, right, offset = fit_aggd(pair, min_samples=1)
        feats.extend([a, offset, left * left, right * right])
    return feats


def _patches(plane: NDArray, size: int, rows: int, cols: int) -> list[NDArray]:
    return [
        plane[r * size : (r + 1) * size, c * size : (c + 1) * size]
        for r in range(rows)
        for c in range(cols)
    ]


def niqe_features(
    img: ImageTensor,
    *,
    patch_size: int = NIQE_PATCH,
    sharpness_fraction: float = NIQE_SHARPNESS_FRACTION,
) -> NDArray[np.float64]:
    """36-dimensional features of every selected patch, shape (P, 36).

    A patch is kept when it is not flat and its mean local deviation reaches
    ``sharpness_fraction`` of the sharpest patch's. Patches whose statistics
    cannot be fitted are dropped.

    Raises:
        InvalidShapeError: If the image holds no full patch.
        EmptyFeaturesError: If no patch is kept.
    """
    if patch_size < 4 or patch_size % 2:
        raise InvalidParameterError(f"patch size must be even and >= 4, got {patch_size}")
    gray = luma(img) * 255.0
    if min(gray.shape) < patch_size:
        raise InvalidShapeError(f"image {gray.shape} is smaller than one {patch_size}px patch")
    rows, cols = gray.shape[0] // patch_size, gray.shape[1] // patch_size

    half = zoom(gray, 0.5, order=3, mode="nearest")
    coeffs_full, deviation = mscn(gray)
    coeffs_half, _ = mscn(half)
    full = _patches(coeffs_full, patch_size, rows, cols)
    small = _patches(coeffs_half, patch_size // 2, rows, cols)
    sharpness = np.array([p.mean() for p in _patches(deviation, patch_size, rows, cols)])

    threshold = sharpness_fraction * sharpness.max()
    kept = []
    for i in np.flatnonzero((sharpness > _MIN_SHARPNESS) & (sharpness >= threshold)):
        try:
            kept.append(_patch_features(full[i]) + _patch_features(small[i]))
        except DegenerateDistributionError:
            logger.debug(f"skipping patch {i}: degenerate statistics")
    if not kept:
        raise EmptyFeaturesError("no patch passed the sharpness selection")
    return np.asarray(kept, dtype=np.float64)


def fit_niqe_model(
    images: Iterable[ImageTensor],
    *,
    patch_size: int = NIQE_PATCH,
    sharpness_fraction: float = NIQE_SHARPNESS_FRACTION,
    ridge: float = NIQE_RIDGE,
    min_patches: int = NIQE_MIN_PATCHES,
) -> NiqeModel:
    """Fit the pristine feature Gaussian over every selected patch of ``images``.

    Raises:
        EmptyFeaturesError: If fewer than ``min_patches`` patches were selected.
    """
    pooled = []
    for img in images:
        try:
            pooled.append(niqe_features(img, patch_size=patch_size, sharpness_fraction=sharpness_fraction))
        except EmptyFeaturesError:
            logger.debug("pristine image contributed no patches")
    feats = np.concatenate(pooled) if pooled else np.empty((0, NIQE_FEATURES))
    if len(feats) < min_patches:
        raise EmptyFeaturesError(f"only {len(feats)} patches selected; need {min_patches}")
    cov = np.cov(feats, rowvar=False)
    logger.info(f"NIQE model fitted on {len(feats)} patches")
    return NiqeModel(
        mean=feats.mean(axis=0),
        cov=0.5 * (cov + cov.T),
        patch_size=patch_size,
        sharpness_fraction=sharpness_fraction,
        ridge=ridge,
    )


def _mahalanobis(diff: NDArray, cov: NDArray, ridge: float) -> float:
    eye = np.eye(cov.shape[0])
    while True:
        try:
            factor = np.linalg.cholesky(cov + ridge * eye)
            break
        except np.linalg.LinAlgError:
            if ridge >= _MAX_RIDGE:
                raise
            ridge *= 10.0
            logger.warning(LogMessage.AUTO_RIDGE.format(ridge))
    solved = solve_triangular(factor, diff, lower=True)
    return float(np.sqrt(max(float(solved @ solved), 0.0)))


def niqe_score(img: ImageTensor, model: NiqeModel) -> float:
    """Distance between the image's patch-feature Gaussian and the pristine one.

    Every non-flat patch of the test image is used; the sharpness selection only
    applies when fitting. Lower is better.
    """
    feats = niqe_features(img, patch_size=model.patch_size, sharpness_fraction=0.0)
    cov = np.cov(feats, rowvar=False) if len(feats) > 1 else np.zeros_like(model.cov)
    pooled = 0.5 * (model.cov + cov)
    return _mahalanobis(model.mean - feats.mean(axis=0), pooled, model.ridge)
