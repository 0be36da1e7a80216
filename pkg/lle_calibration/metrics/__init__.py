"""Full-reference and no-reference image quality metrics."""

from .cds import cds, discriminator_score
from .lightness import lightness, loe
from .niqe import (
    DegenerateDistributionError,
    EmptyFeaturesError,
    NiqeModel,
    fit_aggd,
    fit_ggd,
    fit_niqe_model,
    niqe_features,
    niqe_score,
)
from .reference import psnr, ssim

__all__ = [
    "DegenerateDistributionError",
    "EmptyFeaturesError",
    "NiqeModel",
    "cds",
    "discriminator_score",
    "fit_aggd",
    "fit_ggd",
    "fit_niqe_model",
    "lightness",
    "loe",
    "niqe_features",
    "niqe_score",
    "psnr",
    "ssim",
]
