"""Single optimisation step of the noise predictor."""

import numpy as np
from loguru import logger
from numpy.typing import NDArray

from ..constants import NetworkKind
from ..core import InvalidParameterError, InvalidShapeError, SeededRng
from ..schedule import NoiseSchedule
from .losses import mse_loss
from .networks import NetworkParams, backward, forward
from .optim import AdamState, adam_step


def denoiser_train_step(
    net: NetworkParams,
    state: AdamState,
    batch: NDArray,
    sched: NoiseSchedule,
    rng: SeededRng,
    lr: float,
) -> tuple[float, NetworkParams, AdamState]:
    """Epsilon-prediction step: noise ``batch`` to uniform t and regress the noise.

    Returns:
        The batch-mean squared error before the update, and the updated net and state.
    """
    if net.kind != NetworkKind.DENOISER:
        raise InvalidParameterError(f"expected a denoiser, got {net.kind}")
    if batch.ndim != 4 or batch.shape[0] == 0:
        raise InvalidShapeError(f"expected a non-empty (N, C, H, W) batch, got {batch.shape}")

    batch = batch.astype(net.dtype, copy=False)
    n = batch.shape[0]
    t = rng.integers(1, sched.num_steps + 1, size=n)
    eps = rng.normal(batch.shape, dtype=net.dtype)
    a_t = sched.alpha_bars[t].astype(net.dtype)[:, None, None, None]
    x_t = np.sqrt(a_t) * batch + np.sqrt(1.0 - a_t) * eps

    pred, tape = forward(net, x_t, t)
    loss, grad_out = mse_loss(pred, eps)
    grads, _ = backward(net, tape, grad_out)
    net, state = adam_step(net, grads, state, lr)
    logger.trace(f"denoiser step {state.step}: loss = {loss:.6f}")
    return loss, net, state
