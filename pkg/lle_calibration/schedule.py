"""Noise schedules and DDIM timestep subsequences."""

from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import NDArray

from .constants import WindowEnd
from .core import InvalidParameterError


def _frozen(values: NDArray) -> NDArray[np.float64]:
    arr = np.array(values, dtype=np.float64)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step and cumulative noise coefficients of a diffusion chain.

    Timesteps run 1..T. The cumulative arrays carry an extra entry at index 0
    for the clean state, so ``alpha_bars[0] == 1`` and ``alpha_bars[t]`` is the
    product of ``alphas[1..t]``.

    Attributes:
        num_steps: Chain length T.
        betas: beta_t for t = 1..T, stored at index t (index 0 is 0).
        alphas: 1 - beta_t, stored at index t (index 0 is 1).
        alpha_bars: Cumulative products, index 0 is 1.
        sigmas: DDIM stochasticity at each timestep (zero unless eta > 0).
        ddim_steps: Strictly increasing subsequence of 1..T used for sampling.
    """

    num_steps: int
    betas: NDArray[np.float64]
    alphas: NDArray[np.float64]
    alpha_bars: NDArray[np.float64]
    sigmas: NDArray[np.float64]
    ddim_steps: tuple[int, ...]

    def alpha_bar(self, t: int) -> float:
        self.check_timestep(t, allow_clean=True)
        return float(self.alpha_bars[t])

    def check_timestep(self, t: int, *, allow_clean: bool = False) -> None:
        low = 0 if allow_clean else 1
        if not low <= t <= self.num_steps:
            raise InvalidParameterError(
                f"timestep {t} outside [{low}, {self.num_steps}]"
            )

    def previous_ddim_step(self, t: int) -> int:
        """DDIM step immediately below ``t`` (0 for the lowest one)."""
        idx = self.ddim_steps.index(t)
        return self.ddim_steps[idx - 1] if idx > 0 else 0


def schedule_from_alphas(alphas: NDArray | list[float]) -> NoiseSchedule:
    """Build a schedule from per-step alphas in (0, 1].

    Unlike :func:`make_linear_schedule` this accepts alpha = 1 steps, which is
    how degenerate (noise-free) chains are expressed.

    Raises:
        InvalidParameterError: If the list is empty or an alpha is outside (0, 1].
    """
    per_step = np.asarray(alphas, dtype=np.float64)
    if per_step.ndim != 1 or per_step.size == 0:
        raise InvalidParameterError("alphas must be a non-empty 1-D sequence")
    if np.any(per_step <= 0.0) or np.any(per_step > 1.0):
        raise InvalidParameterError("every alpha must lie in (0, 1]")

    num_steps = per_step.size
    alphas_full = np.concatenate([[1.0], per_step])
    betas_full = 1.0 - alphas_full
    alpha_bars = np.cumprod(alphas_full)
    return NoiseSchedule(
        num_steps=num_steps,
        betas=_frozen(betas_full),
        alphas=_frozen(alphas_full),
        alpha_bars=_frozen(alpha_bars),
        sigmas=_frozen(np.zeros(num_steps + 1)),
        ddim_steps=tuple(range(1, num_steps + 1)),
    )


def make_linear_schedule(T: int, beta_start: float, beta_end: float) -> NoiseSchedule:
    """Linear beta ramp from ``beta_start`` to ``beta_end`` inclusive.

    Raises:
        InvalidParameterError: If T < 1 or the betas violate
            0 < beta_start <= beta_end < 1.
    """
    if T < 1:
        raise InvalidParameterError(f"T must be >= 1, got {T}")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise InvalidParameterError(
            f"need 0 < beta_start <= beta_end < 1, got [{beta_start}, {beta_end}]"
        )
    betas = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    return schedule_from_alphas(1.0 - betas)


def ddim_subsequence(sched: NoiseSchedule, n: int) -> NoiseSchedule:
    """Select ``n`` near-uniformly spaced timesteps that always include T.

    Step i (1-based) is ``floor(i * T / n)``; consecutive gaps are T/n when n
    divides T.
    """
    T = sched.num_steps
    if not 1 <= n <= T:
        raise InvalidParameterError(f"DDIM length must be in [1, {T}], got {n}")
    steps = tuple((i * T) // n for i in range(1, n + 1))
    return replace(sched, ddim_steps=steps, sigmas=_frozen(np.zeros(T + 1)))


def with_eta(sched: NoiseSchedule, eta: float) -> NoiseSchedule:
    """Assign DDIM sigmas for each subsequence step from a global ``eta``.

    sigma_t = eta * sqrt((1 - a_s) / (1 - a_t)) * sqrt(1 - a_t / a_s), where s
    is the DDIM step below t. The lowest step always targets the clean index and
    gets sigma 0.
    """
    if not 0.0 <= eta <= 1.0:
        raise InvalidParameterError(f"eta must be in [0, 1], got {eta}")
    sigmas = np.zeros(sched.num_steps + 1)
    if eta > 0.0:
        for t in sched.ddim_steps:
            s = sched.previous_ddim_step(t)
            a_t, a_s = sched.alpha_bars[t], sched.alpha_bars[s]
            if s == 0 or a_t >= 1.0:
                continue
            sigmas[t] = eta * np.sqrt((1.0 - a_s) / (1.0 - a_t)) * np.sqrt(1.0 - a_t / a_s)
    return replace(sched, sigmas=_frozen(sigmas))


def tail_window(
    sched: NoiseSchedule, omega: int, *, end: WindowEnd = WindowEnd.CLEAN
) -> list[int]:
    """The ``omega`` DDIM steps used by a calibration round-trip, ascending.

    With ``end=CLEAN`` these are the lowest-noise steps (nearest the clean
    image); ``end=NOISY`` takes the highest-noise steps instead.
    """
    steps = sched.ddim_steps
    if not 1 <= omega <= len(steps):
        raise InvalidParameterError(
            f"omega must be in [1, {len(steps)}], got {omega}"
        )
    window = steps[:omega] if end == WindowEnd.CLEAN else steps[-omega:]
    return list(window)
