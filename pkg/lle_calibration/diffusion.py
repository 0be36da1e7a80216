"""Forward noising, DDIM reverse steps and the add-then-remove calibration round-trip."""

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np
from loguru import logger

from .constants import MIN_ALPHA_BAR, WindowEnd
from .core import (
    ImageTensor,
    InvalidParameterError,
    LleCalibrationError,
    SeededRng,
    check_same_shape,
    clamp01,
    sample_gaussian,
)
from .schedule import NoiseSchedule, tail_window


class ChainExhaustedError(LleCalibrationError):
    """A forward step was requested past the end of the chain."""


class NumericalSingularityError(LleCalibrationError, ArithmeticError):
    """The cumulative alpha is too small to invert the forward marginal."""


class InvalidSigmaError(LleCalibrationError, ValueError):
    """The requested DDIM sigma exceeds the noise budget of the target step."""


@dataclass(frozen=True)
class LatentState:
    """A tensor on the diffusion chain together with its timestep (0 = clean)."""

    tensor: ImageTensor
    t: int


@runtime_checkable
class NoisePredictor(Protocol):
    """Anything that estimates the noise contained in ``x_t`` at timestep ``t``."""

    def predict(self, x_t: ImageTensor, t: int) -> ImageTensor: ...


def q_sample_closed(
    x0: ImageTensor, t: int, eps: ImageTensor, sched: NoiseSchedule
) -> ImageTensor:
    """Closed-form forward marginal sqrt(a_t) * x0 + sqrt(1 - a_t) * eps."""
    check_same_shape(x0, eps, what="x0 and eps")
    sched.check_timestep(t)
    a_t = sched.alpha_bars[t]
    return (np.sqrt(a_t) * x0 + np.sqrt(1.0 - a_t) * eps).astype(x0.dtype, copy=False)


def forward_step(
    state: LatentState,
    sched: NoiseSchedule,
    rng: SeededRng,
    *,
    target: int | None = None,
) -> LatentState:
    """Diffuse ``state`` to ``target`` (default t + 1) with fresh Gaussian noise.

    The coefficient is the alpha at the destination, so an adjacent step uses
    alpha_{t+1}; a jump between non-adjacent DDIM steps uses the product of the
    per-step alphas in between, a_target / a_t.

    Raises:
        ChainExhaustedError: If the state is already at T.
    """
    if state.t >= sched.num_steps:
        raise ChainExhaustedError(f"state is at T={sched.num_steps}; cannot step forward")
    target = state.t + 1 if target is None else target
    if not state.t < target <= sched.num_steps:
        raise InvalidParameterError(
            f"forward target {target} must lie in ({state.t}, {sched.num_steps}]"
        )
    coeff = sched.alpha_bars[target] / sched.alpha_bars[state.t]
    eps = sample_gaussian(rng, state.tensor.shape, dtype=state.tensor.dtype)
    tensor = np.sqrt(coeff) * state.tensor + np.sqrt(1.0 - coeff) * eps
    return LatentState(tensor=tensor.astype(state.tensor.dtype, copy=False), t=target)


def predict_x0(
    x_t: ImageTensor, t: int, eps_hat: ImageTensor, sched: NoiseSchedule
) -> ImageTensor:
    """Denoising function: invert the forward marginal with an estimated noise.

    Raises:
        NumericalSingularityError: If a_t is below 1e-12.
    """
    check_same_shape(x_t, eps_hat, what="x_t and eps_hat")
    sched.check_timestep(t)
    a_t = sched.alpha_bars[t]
    if a_t < MIN_ALPHA_BAR:
        raise NumericalSingularityError(f"alpha_bar[{t}] = {a_t:.3e} is too small to invert")
    return ((x_t - np.sqrt(1.0 - a_t) * eps_hat) / np.sqrt(a_t)).astype(x_t.dtype, copy=False)


def ddim_step(
    x_t: ImageTensor,
    t: int,
    s: int,
    predictor: NoisePredictor,
    sched: NoiseSchedule,
    rng: SeededRng | None = None,
    *,
    sigma: float | None = None,
) -> ImageTensor:
    """One DDIM move from timestep ``t`` down to ``s`` (s = 0 means clean).

    x_s = sqrt(a_s) f(x_t) + sqrt(1 - a_s - sigma^2) eps_hat + sigma * eps.
    ``sigma`` defaults to the schedule's sigma at ``t``.

    Raises:
        InvalidSigmaError: If sigma^2 > 1 - a_s, or sigma > 0 without an rng.
    """
    if not 0 <= s < t:
        raise InvalidParameterError(f"need 0 <= s < t, got s={s}, t={t}")
    sched.check_timestep(t)
    sigma = float(sched.sigmas[t]) if sigma is None else float(sigma)
    a_s = sched.alpha_bars[s]
    budget = 1.0 - a_s - sigma**2
    if budget < 0.0:
        if budget < -1e-12:
            raise InvalidSigmaError(f"sigma^2 = {sigma**2:.3e} exceeds 1 - a_s = {1.0 - a_s:.3e}")
        budget = 0.0

    eps_hat = predictor.predict(x_t, t)
    check_same_shape(x_t, eps_hat, what="latent and predicted noise")
    x0_hat = predict_x0(x_t, t, eps_hat, sched)
    x_s = np.sqrt(a_s) * x0_hat + np.sqrt(budget) * eps_hat
    if sigma > 0.0:
        if rng is None:
            raise InvalidSigmaError("sigma > 0 requires an rng")
        x_s = x_s + sigma * sample_gaussian(rng, x_t.shape, dtype=x_t.dtype)
    return x_s.astype(x_t.dtype, copy=False)


def reverse_chain(
    x_omega: ImageTensor,
    steps: list[int],
    predictor: NoisePredictor,
    sched: NoiseSchedule,
    rng: SeededRng | None = None,
) -> ImageTensor:
    """Run DDIM down the reversed ``steps`` and finish at the clean index.

    The final move targets s = 0 with sigma forced to 0, so the result never
    carries injected noise. Intermediate moves use the schedule's sigmas, which
    are zero unless the schedule was built with a positive eta.
    """
    if not steps:
        raise InvalidParameterError("reverse chain needs at least one timestep")
    if any(b <= a for a, b in zip(steps, steps[1:])):
        raise InvalidParameterError(f"steps must be strictly ascending, got {steps}")

    x = x_omega
    targets = [0, *steps[:-1]]
    for t, s in zip(reversed(steps), reversed(targets)):
        sigma = 0.0 if s == 0 else None
        x = ddim_step(x, t, s, predictor, sched, rng, sigma=sigma)
        logger.trace(f"DDIM {t} -> {s}")
    return x


def roundtrip_calibrate(
    x: ImageTensor,
    omega: int,
    predictor: NoisePredictor,
    sched: NoiseSchedule,
    rng: SeededRng,
    *,
    end: WindowEnd = WindowEnd.CLEAN,
) -> ImageTensor:
    """Add ``omega`` noise steps through the tail window, then denoise back to clean.

    ``omega = 0`` is the no-calibration case and only clamps. Latents are not
    clamped mid-chain; the returned image is.
    """
    if omega == 0:
        return clamp01(x)
    window = tail_window(sched, omega, end=end)
    state = LatentState(tensor=x, t=0)
    for t in window:
        state = forward_step(state, sched, rng, target=t)
    restored = reverse_chain(state.tensor, window, predictor, sched, rng)
    return clamp01(restored)
