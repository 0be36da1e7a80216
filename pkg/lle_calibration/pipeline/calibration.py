"""Degradation calibration: lightness curve plus a diffusion round-trip."""

import numpy as np

from ..config import CalibrationConfig, ScheduleConfig
from ..constants import CurveMode, NetworkKind, WindowEnd
from ..core import ImageTensor, InvalidParameterError, SeededRng, clamp01
from ..diffusion import NoisePredictor, roundtrip_calibrate
from ..nnet import NetworkParams, forward
from ..schedule import NoiseSchedule, ddim_subsequence, make_linear_schedule, with_eta


def pad_to_multiple(img: ImageTensor, multiple: int) -> tuple[ImageTensor, tuple[int, int]]:
    """Reflect-pad H and W up to ``multiple``; returns the padded image and the original size."""
    h, w = img.shape[-2:]
    ph, pw = (-h) % multiple, (-w) % multiple
    if ph == 0 and pw == 0:
        return img, (h, w)
    mode = "reflect" if min(h, w) > max(ph, pw) else "symmetric"
    padding = [(0, 0)] * (img.ndim - 2) + [(0, ph), (0, pw)]
    return np.pad(img, padding, mode=mode), (h, w)


def crop_to(img: ImageTensor, size: tuple[int, int]) -> ImageTensor:
    return img[..., : size[0], : size[1]]


def build_schedule(cfg: ScheduleConfig, *, eta: float = 0.0) -> NoiseSchedule:
    """Linear chain of the configured length with its DDIM subsequence and sigmas."""
    sched = make_linear_schedule(cfg.num_steps, cfg.beta_start, cfg.beta_end)
    return with_eta(ddim_subsequence(sched, cfg.ddim_steps), eta)


class NetworkPredictor:
    """Adapts trained denoiser parameters to the ``NoisePredictor`` interface."""

    def __init__(self, net: NetworkParams):
        if net.kind != NetworkKind.DENOISER:
            raise InvalidParameterError(f"expected denoiser parameters, got {net.kind}")
        self.net = net

    def predict(self, x_t: ImageTensor, t: int) -> ImageTensor:
        padded, size = pad_to_multiple(x_t, 2)
        eps, _ = forward(self.net, padded, t)
        return crop_to(eps, size).astype(x_t.dtype, copy=False)


def gamma_adjust(y: ImageTensor, cfg: CalibrationConfig) -> ImageTensor:
    """Per-pixel power curve; brighten mode uses 1/gamma, literal mode gamma."""
    exponent = 1.0 / cfg.gamma if cfg.curve_mode == CurveMode.BRIGHTEN else cfg.gamma
    return np.power(clamp01(y), exponent).astype(y.dtype, copy=False)


def calibrate(
    y: ImageTensor,
    cfg: CalibrationConfig,
    predictor: NoisePredictor,
    sched: NoiseSchedule,
    rng: SeededRng,
    *,
    end: WindowEnd = WindowEnd.CLEAN,
) -> ImageTensor:
    """Pull an out-of-domain input toward the training domain before enhancement."""
    return roundtrip_calibrate(gamma_adjust(y, cfg), cfg.omega, predictor, sched, rng, end=end)


def ftd_pseudo_ref(
    r0: ImageTensor,
    cfg: CalibrationConfig,
    predictor: NoisePredictor,
    sched: NoiseSchedule,
    rng: SeededRng,
    *,
    end: WindowEnd = WindowEnd.CLEAN,
) -> ImageTensor:
    """Refine a coarse enhanced result into a pseudo-reference by a round-trip."""
    return roundtrip_calibrate(clamp01(r0), cfg.omega, predictor, sched, rng, end=end)
