"""Diffusion-guided degradation calibration and distillation for low-light enhancement."""

from .config import AppConfig, ConfigError, parse_config
from .core import LleCalibrationError, SeededRng, seeded_rng
from .diffusion import NoisePredictor, roundtrip_calibrate
from .models import ImageMetrics, MetricReport, TrainingHistory
from .pipeline import (
    CurveEnhancer,
    Enhancer,
    NetworkPredictor,
    enhance_in_domain,
    enhance_out_of_domain,
    ftd_finetune,
    gamma_adjust,
    train_denoiser,
    train_uem,
)
from .storage import ResultStorage

__all__ = [
    "AppConfig",
    "ConfigError",
    "CurveEnhancer",
    "Enhancer",
    "ImageMetrics",
    "LleCalibrationError",
    "MetricReport",
    "NetworkPredictor",
    "NoisePredictor",
    "ResultStorage",
    "SeededRng",
    "TrainingHistory",
    "enhance_in_domain",
    "enhance_out_of_domain",
    "ftd_finetune",
    "gamma_adjust",
    "parse_config",
    "roundtrip_calibrate",
    "seeded_rng",
    "train_denoiser",
    "train_uem",
]
