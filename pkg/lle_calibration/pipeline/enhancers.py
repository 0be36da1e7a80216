"""In-domain and out-of-domain inference over any enhancer."""

from typing import Protocol, runtime_checkable

import numpy as np

from ..config import CalibrationConfig
from ..constants import NetworkKind, WindowEnd
from ..core import ImageTensor, InvalidParameterError, SeededRng, clamp01
from ..diffusion import NoisePredictor
from ..nnet import NetworkParams, forward
from ..schedule import NoiseSchedule
from .calibration import calibrate, crop_to, pad_to_multiple

# stride-2 twice inside the enhancer
_ENHANCER_MULTIPLE = 4
DEFAULT_CURVE_TARGET = 0.45


@runtime_checkable
class Enhancer(Protocol):
    """Anything that maps a low-light image to an enhanced one."""

    def enhance(self, y: ImageTensor) -> ImageTensor: ...


def enhance_in_domain(y: ImageTensor, phi: NetworkParams) -> ImageTensor:
    """Single enhancer pass; inputs are reflect-padded to a multiple of 4 and cropped back."""
    if phi.kind != NetworkKind.ENHANCER:
        raise InvalidParameterError(f"expected enhancer parameters, got {phi.kind}")
    padded, size = pad_to_multiple(y, _ENHANCER_MULTIPLE)
    out, _ = forward(phi, padded)
    return clamp01(crop_to(out, size)).astype(y.dtype, copy=False)


class NetworkEnhancer:
    """The learned enhancer behind the :class:`Enhancer` interface."""

    def __init__(self, phi: NetworkParams):
        self.phi = phi

    def enhance(self, y: ImageTensor) -> ImageTensor:
        return enhance_in_domain(y, self.phi)


class CurveEnhancer:
    """Classical baseline: one global power curve lifting mean lightness to ``target``."""

    def __init__(self, target: float = DEFAULT_CURVE_TARGET):
        if not 0.0 < target < 1.0:
            raise InvalidParameterError(f"target lightness must be in (0, 1), got {target}")
        self.target = target

    def enhance(self, y: ImageTensor) -> ImageTensor:
        mean = float(np.max(y, axis=0).mean())
        if mean <= 0.0 or mean >= 1.0:
            return clamp01(y)
        exponent = float(np.clip(np.log(self.target) / np.log(mean), 0.05, 1.0))
        return np.power(clamp01(y), exponent).astype(y.dtype, copy=False)


def as_enhancer(enhancer: NetworkParams | Enhancer) -> Enhancer:
    return NetworkEnhancer(enhancer) if isinstance(enhancer, NetworkParams) else enhancer


def enhance_out_of_domain(
    y: ImageTensor,
    enhancer: NetworkParams | Enhancer,
    cfg: CalibrationConfig,
    predictor: NoisePredictor,
    sched: NoiseSchedule,
    rng: SeededRng,
    *,
    end: WindowEnd = WindowEnd.CLEAN,
) -> ImageTensor:
    """Calibrate the input (curve + round-trip), then enhance it."""
    calibrated = calibrate(y, cfg, predictor, sched, rng, end=end)
    return clamp01(as_enhancer(enhancer).enhance(calibrated))
