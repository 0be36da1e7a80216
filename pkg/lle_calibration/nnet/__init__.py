"""Convolutional networks with hand-written gradients and the Adam optimizer."""

from .gradcheck import GradCheckReport, grad_check, numerical_gradient
from .losses import adversarial_loss, l1_loss, mse_loss
from .networks import (
    ArchDescriptor,
    GradTape,
    MissingTimestepError,
    NetworkParams,
    StaleTapeError,
    backward,
    forward,
    identity_enhancer,
    init_network,
    parameter_shapes,
)
from .optim import AdamState, NonFiniteGradientError, adam_step, cosine_lr, linear_decay_lr
from .training import denoiser_train_step

__all__ = [
    "AdamState",
    "ArchDescriptor",
    "GradCheckReport",
    "GradTape",
    "MissingTimestepError",
    "NetworkParams",
    "NonFiniteGradientError",
    "StaleTapeError",
    "adam_step",
    "adversarial_loss",
    "backward",
    "cosine_lr",
    "denoiser_train_step",
    "forward",
    "grad_check",
    "identity_enhancer",
    "init_network",
    "l1_loss",
    "linear_decay_lr",
    "mse_loss",
    "numerical_gradient",
    "parameter_shapes",
]
