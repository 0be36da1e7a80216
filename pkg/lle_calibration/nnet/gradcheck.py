"""Central finite-difference verification of the hand-written backward passes."""

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from loguru import logger
from numpy.typing import NDArray

from ..core import CHECK_DTYPE, ImageTensor, InvalidParameterError, SeededRng
from .layers import ConvCache
from .losses import ScalarLoss
from .networks import GradTape, NetworkParams, backward, forward

MAX_CHECKED_PARAMETERS = 50_000
REL_ERROR_FLOOR = 1e-6

BackwardFn = Callable[[NetworkParams, GradTape, NDArray], tuple[dict[str, NDArray], NDArray]]


@dataclass(frozen=True)
class GradCheckReport:
    max_rel_error: float
    worst_parameter: str
    checked: int
    skipped: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.checked > 0 and self.max_rel_error <= self.tol


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic) + abs(numeric), REL_ERROR_FLOOR)


def numerical_gradient(f: Callable[[], float], x: NDArray, h: float = 1e-4) -> NDArray:
    """Central differences of ``f`` w.r.t. every entry of ``x`` (perturbed in place)."""
    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        plus = f()
        flat[i] = orig - h
        minus = f()
        flat[i] = orig
        grad.reshape(-1)[i] = (plus - minus) / (2.0 * h)
    return grad


def _activation_pattern(node) -> list[NDArray]:
    """Every rectifier mask recorded on a tape, in recording order."""
    if isinstance(node, dict):
        return [a for v in node.values() for a in _activation_pattern(v)]
    if isinstance(node, tuple | list):
        return [a for v in node for a in _activation_pattern(v)]
    if isinstance(node, ConvCache):
        return []
    if hasattr(node, "act_cache"):
        return [] if node.act_cache is None else [node.act_cache]
    if isinstance(node, np.ndarray) and node.dtype == bool:
        return [node]
    return []


def grad_check(
    net: NetworkParams,
    x: ImageTensor,
    loss: ScalarLoss,
    tol: float = 1e-4,
    *,
    t: int | NDArray | None = None,
    rng: SeededRng | None = None,
    fraction: float = 0.01,
    min_samples: int = 10,
    h: float = 1e-4,
    backward_fn: BackwardFn = backward,
) -> GradCheckReport:
    """Compare analytic parameter gradients with central differences.

    Runs in 64-bit on a copy of ``net``. A random ``fraction`` of parameters
    (at least ``min_samples``) is perturbed by +-h. Samples whose two perturbed
    passes switch any rectifier sit on a kink of the loss and are skipped.
    """
    work = net.astype(CHECK_DTYPE)
    if work.num_parameters > MAX_CHECKED_PARAMETERS:
        raise InvalidParameterError(
            f"{work.num_parameters} parameters is too many for finite differences"
        )
    x = np.asarray(x, dtype=CHECK_DTYPE)
    rng = rng or SeededRng(0)

    y, tape = forward(work, x, t)
    _, grad_out = loss(y)
    grads, _ = backward_fn(work, tape, grad_out)

    names = list(work.tensors)
    sizes = np.array([work.tensors[n].size for n in names])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    total = int(offsets[-1])
    count = min(total, max(min_samples, int(np.ceil(fraction * total))))
    picks = rng.generator.choice(total, size=count, replace=False)

    def evaluate() -> tuple[float, list[NDArray]]:
        out, trial = forward(work, x, t)
        return loss(out)[0], _activation_pattern(trial.caches)

    worst, worst_name, checked, skipped = 0.0, "", 0, 0
    for flat_index in sorted(int(i) for i in picks):
        k = int(np.searchsorted(offsets, flat_index, side="right") - 1)
        name, local = names[k], flat_index - int(offsets[k])
        param = work.tensors[name].reshape(-1)
        orig = param[local]
        param[local] = orig + h
        plus, pattern_plus = evaluate()
        param[local] = orig - h
        minus, pattern_minus = evaluate()
        param[local] = orig
        if any(not np.array_equal(a, b) for a, b in zip(pattern_plus, pattern_minus)):
            skipped += 1
            continue
        numeric = (plus - minus) / (2.0 * h)
        err = relative_error(float(grads[name].reshape(-1)[local]), numeric)
        checked += 1
        if err > worst:
            worst, worst_name = err, name

    report = GradCheckReport(worst, worst_name, checked, skipped, tol)
    logger.debug(
        f"grad_check {net.kind}: max rel error {worst:.2e} on {worst_name or '-'} "
        f"({checked} checked, {skipped} on kinks)"
    )
    return report
