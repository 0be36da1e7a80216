"""Enhancer pretraining, distillation and calibrated inference."""

from .calibration import (
    NetworkPredictor,
    build_schedule,
    calibrate,
    crop_to,
    ftd_pseudo_ref,
    gamma_adjust,
    pad_to_multiple,
)
from .enhancers import (
    CurveEnhancer,
    Enhancer,
    NetworkEnhancer,
    as_enhancer,
    enhance_in_domain,
    enhance_out_of_domain,
)
from .training import DistillResult, UemModels, ftd_finetune, random_crop, train_denoiser, train_uem

__all__ = [
    "CurveEnhancer",
    "DistillResult",
    "Enhancer",
    "NetworkEnhancer",
    "NetworkPredictor",
    "UemModels",
    "as_enhancer",
    "build_schedule",
    "calibrate",
    "crop_to",
    "enhance_in_domain",
    "enhance_out_of_domain",
    "ftd_finetune",
    "ftd_pseudo_ref",
    "gamma_adjust",
    "pad_to_multiple",
    "random_crop",
    "train_denoiser",
    "train_uem",
]
