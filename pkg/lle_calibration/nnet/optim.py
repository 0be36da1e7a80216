"""Adam with bias correction and the learning-rate policies used by training."""

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from ..constants import DEFAULT_ADAM_BETA1, DEFAULT_ADAM_BETA2, DEFAULT_ADAM_EPS
from ..core import InvalidParameterError, InvalidShapeError, LleCalibrationError
from .networks import NetworkParams


class NonFiniteGradientError(LleCalibrationError, ArithmeticError):
    """A gradient contains NaN or infinity.

    Attributes:
        name: The offending parameter.
    """

    def __init__(self, name: str):
        super().__init__(f"non-finite gradient for parameter {name!r}")
        self.name = name


@dataclass
class AdamState:
    """First and second moments per parameter plus the step counter."""

    beta1: float = DEFAULT_ADAM_BETA1
    beta2: float = DEFAULT_ADAM_BETA2
    eps: float = DEFAULT_ADAM_EPS
    step: int = 0
    m: dict[str, NDArray] = field(default_factory=dict)
    v: dict[str, NDArray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise InvalidParameterError(f"Adam betas must lie in [0, 1), got {self.beta1}, {self.beta2}")
        if self.eps <= 0.0:
            raise InvalidParameterError(f"Adam eps must be positive, got {self.eps}")


def adam_step(
    params: NetworkParams,
    grads: dict[str, NDArray],
    state: AdamState,
    lr: float,
) -> tuple[NetworkParams, AdamState]:
    """One bias-corrected Adam update; neither input is modified.

    Raises:
        NonFiniteGradientError: If any gradient is NaN or infinite.
        InvalidShapeError: If a gradient's shape differs from its parameter.
    """
    for name, p in params.tensors.items():
        g = grads[name]
        if g.shape != p.shape:
            raise InvalidShapeError(f"gradient {name}: shape {g.shape}, parameter {p.shape}")
        if not np.isfinite(g).all():
            raise NonFiniteGradientError(name)

    step = state.step + 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1**step
    correction2 = 1.0 - b2**step
    tensors: dict[str, NDArray] = {}
    m: dict[str, NDArray] = {}
    v: dict[str, NDArray] = {}
    for name, p in params.tensors.items():
        g = grads[name].astype(np.float64)
        m_prev = state.m.get(name, np.zeros(p.shape))
        v_prev = state.v.get(name, np.zeros(p.shape))
        m[name] = b1 * m_prev + (1.0 - b1) * g
        v[name] = b2 * v_prev + (1.0 - b2) * g * g
        if lr == 0.0:
            tensors[name] = p.copy()
            continue
        update = lr * (m[name] / correction1) / (np.sqrt(v[name] / correction2) + state.eps)
        tensors[name] = (p - update).astype(p.dtype)

    new_state = AdamState(b1, b2, state.eps, step, m, v)
    return params.with_tensors(tensors), new_state


def linear_decay_lr(base_lr: float, epoch: int, epochs: int, decay_fraction: float) -> float:
    """Constant for the first part of training, then linearly down to 0.

    ``decay_fraction`` of the epochs decay; at ``epoch == epochs`` the rate is 0.
    """
    decay_epochs = max(1, round(epochs * decay_fraction))
    start = epochs - decay_epochs
    if epoch < start:
        return base_lr
    return base_lr * max(0.0, 1.0 - (epoch - start) / decay_epochs)


def cosine_lr(lr_max: float, lr_min: float, epoch: int, epochs: int) -> float:
    """Cosine annealing from ``lr_max`` at epoch 0 to ``lr_min`` at ``epochs - 1``."""
    if epochs <= 1:
        return lr_max
    progress = min(epoch, epochs - 1) / (epochs - 1)
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + math.cos(math.pi * progress))
