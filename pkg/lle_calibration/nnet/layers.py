"""Layer primitives with explicit forward caches and exact backward passes.

Every forward returns ``(output, cache)``; the matching backward consumes the
output gradient and the cache and returns the input gradient followed by any
parameter gradients. Tensors are batched (N, C, H, W).
"""

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from numpy.typing import NDArray

from ..constants import LEAKY_SLOPE, NORM_EPS


def reflect_pad(x: NDArray, pad: int) -> NDArray:
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)), mode="reflect")


def _fold_reflect(g: NDArray, pad: int, axis: int) -> NDArray:
    size = g.shape[axis] - 2 * pad
    # padded position -> source position by np.pad's own rule; a 1-long axis repeats its only value
    source = np.pad(np.arange(size), pad, mode="reflect")
    moved = np.moveaxis(g, axis, 0)
    core = np.zeros((size, *moved.shape[1:]), dtype=g.dtype)
    np.add.at(core, source, moved)
    return np.moveaxis(core, 0, axis)


def reflect_pad_backward(g: NDArray, pad: int) -> NDArray:
    if pad == 0:
        return g
    return _fold_reflect(_fold_reflect(g, pad, axis=3), pad, axis=2)


@dataclass
class ConvCache:
    padded: NDArray
    weight: NDArray
    stride: int
    pad: int
    has_bias: bool


def conv2d_forward(
    x: NDArray,
    weight: NDArray,
    bias: NDArray | None,
    *,
    stride: int = 1,
    pad: int = 1,
) -> tuple[NDArray, ConvCache]:
    """Cross-correlation with reflection padding ``pad`` and stride ``stride``."""
    k = weight.shape[-1]
    padded = reflect_pad(x, pad)
    windows = sliding_window_view(padded, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    # (N, H', W', Cout) -> (N, Cout, H', W')
    y = np.tensordot(windows, weight, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    y = np.ascontiguousarray(y)
    if bias is not None:
        y += bias[None, :, None, None]
    return y, ConvCache(padded, weight, stride, pad, bias is not None)


def conv2d_backward(
    dy: NDArray, cache: ConvCache
) -> tuple[NDArray, NDArray, NDArray | None]:
    weight, stride = cache.weight, cache.stride
    k = weight.shape[-1]
    _, _, ho, wo = dy.shape
    windows = sliding_window_view(cache.padded, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    dw = np.tensordot(dy, windows, axes=([0, 2, 3], [0, 2, 3]))
    db = dy.sum(axis=(0, 2, 3)) if cache.has_bias else None

    dpadded = np.zeros_like(cache.padded)
    for i in range(k):
        for j in range(k):
            # (Cin, N, H', W') -> (N, Cin, H', W')
            contrib = np.tensordot(weight[:, :, i, j], dy, axes=([0], [1])).transpose(1, 0, 2, 3)
            dpadded[:, :, i : i + stride * (ho - 1) + 1 : stride, j : j + stride * (wo - 1) + 1 : stride] += contrib
    return reflect_pad_backward(dpadded, cache.pad), dw, db


@dataclass
class NormCache:
    normalized: NDArray
    inv_std: NDArray
    gain: NDArray


def instance_norm_forward(
    x: NDArray, gain: NDArray, shift: NDArray, eps: float = NORM_EPS
) -> tuple[NDArray, NormCache]:
    """Per-sample, per-channel normalization over H and W with a learnable affine."""
    mean = x.mean(axis=(2, 3), keepdims=True)
    centered = x - mean
    var = (centered * centered).mean(axis=(2, 3), keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    normalized = centered * inv_std
    y = gain[None, :, None, None] * normalized + shift[None, :, None, None]
    return y, NormCache(normalized, inv_std, gain)


def instance_norm_backward(
    dy: NDArray, cache: NormCache
) -> tuple[NDArray, NDArray, NDArray]:
    xhat = cache.normalized
    m = xhat.shape[2] * xhat.shape[3]
    dgain = (dy * xhat).sum(axis=(0, 2, 3))
    dshift = dy.sum(axis=(0, 2, 3))
    dxhat = dy * cache.gain[None, :, None, None]
    sum_d = dxhat.sum(axis=(2, 3), keepdims=True)
    sum_dx = (dxhat * xhat).sum(axis=(2, 3), keepdims=True)
    dx = cache.inv_std * (dxhat - sum_d / m - xhat * sum_dx / m)
    return dx, dgain, dshift


def relu_forward(x: NDArray) -> tuple[NDArray, NDArray]:
    mask = x > 0
    return x * mask, mask


def relu_backward(dy: NDArray, mask: NDArray) -> NDArray:
    return dy * mask


def leaky_relu_forward(x: NDArray, slope: float = LEAKY_SLOPE) -> tuple[NDArray, NDArray]:
    scale = np.where(x > 0, 1.0, slope).astype(x.dtype)
    return x * scale, scale


def leaky_relu_backward(dy: NDArray, scale: NDArray) -> NDArray:
    return dy * scale


def upsample2_forward(x: NDArray) -> NDArray:
    return x.repeat(2, axis=2).repeat(2, axis=3)


def upsample2_backward(dy: NDArray) -> NDArray:
    n, c, h, w = dy.shape
    return dy.reshape(n, c, h // 2, 2, w // 2, 2).sum(axis=(3, 5))


def timestep_embedding(t: NDArray, dim: int, dtype=np.float32) -> NDArray:
    """Sinusoidal embedding of integer timesteps, shape (N, dim)."""
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half, dtype=np.float64) / half)
    args = np.asarray(t, dtype=np.float64)[:, None] * freqs[None, :]
    return np.concatenate([np.sin(args), np.cos(args)], axis=1).astype(dtype)


def linear_forward(e: NDArray, weight: NDArray, bias: NDArray) -> NDArray:
    return e @ weight.T + bias


def linear_backward(
    dy: NDArray, e: NDArray, weight: NDArray
) -> tuple[NDArray, NDArray, NDArray]:
    return dy @ weight, dy.T @ e, dy.sum(axis=0)
