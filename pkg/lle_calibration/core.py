"""Tensor conventions, seeded random streams and shared elementwise primitives.

An image is a planar, channel-major ``numpy.ndarray`` of shape (C, H, W). Images
are treated as immutable values: operations return new arrays and never write
into their inputs. Latents and gradients share the layout but are unbounded.
"""

from collections.abc import Sequence
from typing import TypeAlias

import numpy as np
from numpy.typing import DTypeLike, NDArray

from .constants import LUMA_WEIGHTS

ImageTensor: TypeAlias = NDArray[np.floating]

DEFAULT_DTYPE: DTypeLike = np.float32
CHECK_DTYPE: DTypeLike = np.float64


class LleCalibrationError(Exception):
    """Base class for every error raised by this package."""


class InvalidShapeError(LleCalibrationError, ValueError):
    """Tensor shape is zero-sized or does not match its counterpart."""


class InvalidParameterError(LleCalibrationError, ValueError):
    """A scalar parameter is outside its documented range."""


class SeededRng:
    """Counter-based random stream whose output is a pure function of its seed.

    Draws come from numpy's Philox4x64 bit generator; Gaussian variates use
    numpy's ziggurat transform on that stream. Children for parallel work are
    derived from ``(seed, index)`` through ``numpy.random.SeedSequence``, so a
    child stream never depends on how many siblings were created before it.

    Attributes:
        seed: The 64-bit seed this stream was created from.
        generator: The underlying numpy generator.
    """

    def __init__(self, seed: int, *, spawn_key: tuple[int, ...] = ()):
        if seed < 0:
            raise InvalidParameterError(f"seed must be non-negative, got {seed}")
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.spawn_key = spawn_key
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=spawn_key)
        self.generator = np.random.Generator(np.random.Philox(sequence))

    def child(self, index: int) -> "SeededRng":
        """Derive an independent stream for task ``index``."""
        return SeededRng(self.seed, spawn_key=(*self.spawn_key, int(index)))

    def normal(self, shape: Sequence[int], dtype: DTypeLike = DEFAULT_DTYPE) -> NDArray:
        return self.generator.standard_normal(tuple(shape)).astype(dtype, copy=False)

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        return self.generator.uniform(low, high, size)

    def integers(self, low: int, high: int | None = None, size=None):
        return self.generator.integers(low, high, size)

    def permutation(self, n: int) -> NDArray[np.int64]:
        return self.generator.permutation(n)

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed}, spawn_key={self.spawn_key})"


def seeded_rng(seed: int) -> SeededRng:
    """Create a random stream whose samples depend only on ``seed``."""
    return SeededRng(seed)


def sample_gaussian(
    rng: SeededRng, shape: Sequence[int], dtype: DTypeLike = DEFAULT_DTYPE
) -> ImageTensor:
    """Draw i.i.d. standard-normal values, advancing ``rng``.

    Raises:
        InvalidShapeError: If any dimension is not positive.
    """
    if len(shape) == 0 or any(int(d) <= 0 for d in shape):
        raise InvalidShapeError(f"shape dimensions must be positive, got {tuple(shape)}")
    return rng.normal(shape, dtype=dtype)


def clamp01(t: ImageTensor) -> ImageTensor:
    """Map every value into [0, 1]."""
    return np.clip(t, 0.0, 1.0)


def check_same_shape(a: NDArray, b: NDArray, *, what: str = "tensors") -> None:
    if a.shape != b.shape:
        raise InvalidShapeError(f"{what} differ in shape: {a.shape} vs {b.shape}")


def as_image(data: NDArray, dtype: DTypeLike = DEFAULT_DTYPE) -> ImageTensor:
    """Validate and normalize an array to the (C, H, W) image layout.

    2-D arrays are promoted to a single channel.

    Raises:
        InvalidShapeError: If the array is not (C, H, W) with C in (1, 3), or is empty.
    """
    arr = np.asarray(data, dtype=dtype)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[0] not in (1, 3) or 0 in arr.shape:
        raise InvalidShapeError(f"expected a (C, H, W) image with C in (1, 3), got {arr.shape}")
    return arr


def luma(img: ImageTensor) -> NDArray[np.float64]:
    """BT.601 luma of a (C, H, W) image; single-channel images pass through."""
    img = np.asarray(img, dtype=np.float64)
    if img.shape[0] == 1:
        return img[0]
    weights = np.asarray(LUMA_WEIGHTS, dtype=np.float64)
    return np.tensordot(weights, img, axes=(0, 0))
