"""The three network families and their explicit forward/backward passes.

Parameters live in a flat, ordered name -> tensor mapping whose shapes are a
pure function of the :class:`ArchDescriptor`. ``forward`` records whatever
each layer needs on a :class:`GradTape`; ``backward`` walks the same layers in
reverse and returns exact parameter and input gradients.
"""

import itertools
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import DTypeLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..constants import OUTPUT_INIT_SCALE, NetworkKind
from ..core import (
    DEFAULT_DTYPE,
    ImageTensor,
    InvalidShapeError,
    LleCalibrationError,
    SeededRng,
)
from . import layers

_UIDS = itertools.count()

# output convs of the image-to-image nets
_OUTPUT_LAYERS = {NetworkKind.ENHANCER: "head.w", NetworkKind.DENOISER: "out.w"}

_RELU = "relu"
_LEAKY = "leaky"


class StaleTapeError(LleCalibrationError):
    """A tape was replayed against parameters it was not recorded with."""


class MissingTimestepError(LleCalibrationError, ValueError):
    """The denoiser was called without a timestep."""


class ArchDescriptor(BaseModel):
    """Everything that determines a network's parameter shapes.

    ``residual_blocks`` is only read by the enhancer and ``time_dim`` only by
    the denoiser.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: NetworkKind
    image_channels: int = Field(default=3, description="Input/output image channels")
    channels: int = Field(ge=1, description="Base feature width")
    residual_blocks: int = Field(default=0, ge=0, description="Enhancer residual blocks")
    time_dim: int = Field(default=0, ge=0, description="Denoiser timestep embedding width")

    @model_validator(mode="after")
    def _check_kind_fields(self) -> "ArchDescriptor":
        if self.image_channels not in (1, 3):
            raise ValueError(f"image_channels must be 1 or 3, got {self.image_channels}")
        if self.kind == NetworkKind.DENOISER and (self.time_dim < 2 or self.time_dim % 2):
            raise ValueError(f"denoiser time_dim must be even and >= 2, got {self.time_dim}")
        return self


def parameter_shapes(arch: ArchDescriptor) -> dict[str, tuple[int, ...]]:
    """Ordered parameter names and shapes for ``arch``."""
    c, f = arch.image_channels, arch.channels
    shapes: dict[str, tuple[int, ...]] = {}

    def conv(name: str, c_in: int, c_out: int, *, bias: bool = False, norm: bool = False) -> None:
        shapes[f"{name}.w"] = (c_out, c_in, 3, 3)
        if bias:
            shapes[f"{name}.b"] = (c_out,)
        if norm:
            shapes[f"{name}.norm.g"] = (c_out,)
            shapes[f"{name}.norm.b"] = (c_out,)

    match arch.kind:
        case NetworkKind.ENHANCER:
            conv("stem", c, f, norm=True)
            conv("down1", f, 2 * f, norm=True)
            conv("down2", 2 * f, 2 * f, norm=True)
            for i in range(arch.residual_blocks):
                conv(f"block{i}.conv1", 2 * f, 2 * f, norm=True)
                conv(f"block{i}.conv2", 2 * f, 2 * f, norm=True)
            conv("up1", 2 * f, 2 * f, norm=True)
            conv("up2", 2 * f, f, norm=True)
            conv("head", f, c, bias=True)
        case NetworkKind.DENOISER:
            conv("in", c, f, bias=True)
            shapes["temb1.w"] = (f, arch.time_dim)
            shapes["temb1.b"] = (f,)
            conv("down", f, 2 * f, bias=True)
            shapes["temb2.w"] = (2 * f, arch.time_dim)
            shapes["temb2.b"] = (2 * f,)
            conv("up", 2 * f, f, bias=True)
            conv("out", f, c, bias=True)
        case NetworkKind.DISCRIMINATOR:
            conv("conv1", c, f, bias=True)
            conv("conv2", f, 2 * f, norm=True)
            conv("conv3", 2 * f, 4 * f, norm=True)
            conv("head", 4 * f, 1, bias=True)
    return shapes


@dataclass
class NetworkParams:
    """Named parameter tensors of one network plus its descriptor.

    Attributes:
        arch: Descriptor the tensor shapes were derived from.
        tensors: Ordered parameter name -> array.
        uid: Identity used to match tapes to the parameters they were recorded on.
    """

    arch: ArchDescriptor
    tensors: dict[str, NDArray]
    uid: int = field(default_factory=lambda: next(_UIDS), compare=False)

    def __post_init__(self) -> None:
        expected = parameter_shapes(self.arch)
        if list(expected) != list(self.tensors):
            raise InvalidShapeError(
                f"{self.arch.kind} parameters {sorted(self.tensors)} do not match descriptor"
            )
        for name, shape in expected.items():
            if self.tensors[name].shape != shape:
                raise InvalidShapeError(
                    f"parameter {name}: shape {self.tensors[name].shape}, descriptor needs {shape}"
                )

    @property
    def kind(self) -> NetworkKind:
        return self.arch.kind

    @property
    def dtype(self) -> np.dtype:
        return next(iter(self.tensors.values())).dtype

    @property
    def num_parameters(self) -> int:
        return sum(t.size for t in self.tensors.values())

    def with_tensors(self, tensors: dict[str, NDArray]) -> "NetworkParams":
        return NetworkParams(self.arch, tensors)

    def copy(self) -> "NetworkParams":
        return self.with_tensors({k: v.copy() for k, v in self.tensors.items()})

    def astype(self, dtype: DTypeLike) -> "NetworkParams":
        return self.with_tensors({k: v.astype(dtype) for k, v in self.tensors.items()})

    def is_finite(self) -> bool:
        return all(np.isfinite(t).all() for t in self.tensors.values())


@dataclass
class GradTape:
    """Activations cached by one forward pass."""

    kind: NetworkKind
    params_uid: int
    output_shape: tuple[int, ...]
    squeeze: bool
    caches: dict[str, Any]


def init_network(
    kind: NetworkKind | str,
    arch: ArchDescriptor,
    rng: SeededRng,
    dtype: DTypeLike = DEFAULT_DTYPE,
) -> NetworkParams:
    """Kaiming-normal kernels, zero biases and shifts, unit norm gains.

    The output conv of the enhancer and denoiser is scaled by
    ``OUTPUT_INIT_SCALE``: the enhancer starts close to the identity and the
    denoiser close to predicting zero noise.
    """
    kind = NetworkKind(kind)
    if arch.kind != kind:
        raise InvalidShapeError(f"descriptor is for {arch.kind}, not {kind}")
    tensors: dict[str, NDArray] = {}
    for name, shape in parameter_shapes(arch).items():
        if name.endswith(".norm.g"):
            tensors[name] = np.ones(shape, dtype=dtype)
        elif len(shape) == 1:
            tensors[name] = np.zeros(shape, dtype=dtype)
        else:
            fan_in = int(np.prod(shape[1:]))
            std = np.sqrt(2.0 / fan_in)
            if _OUTPUT_LAYERS.get(kind) == name:
                std *= OUTPUT_INIT_SCALE
            tensors[name] = (rng.normal(shape, dtype=np.float64) * std).astype(dtype)
    return NetworkParams(arch, tensors)


def identity_enhancer(net: NetworkParams) -> NetworkParams:
    """Zero the enhancer head so the network returns its input unchanged."""
    if net.kind != NetworkKind.ENHANCER:
        raise InvalidShapeError(f"identity head only exists on the enhancer, not {net.kind}")
    tensors = {k: v.copy() for k, v in net.tensors.items()}
    tensors["head.w"][...] = 0
    tensors["head.b"][...] = 0
    return net.with_tensors(tensors)


# ---------------------------------------------------------------------------
# Shared conv block: conv -> optional instance norm -> optional activation
# ---------------------------------------------------------------------------


@dataclass
class _BlockCache:
    name: str
    conv: layers.ConvCache
    norm: layers.NormCache | None
    act: str | None
    act_cache: NDArray | None


def _block(
    x: NDArray,
    p: dict[str, NDArray],
    name: str,
    *,
    stride: int = 1,
    pad: int = 1,
    act: str | None = None,
) -> tuple[NDArray, _BlockCache]:
    y, conv_cache = layers.conv2d_forward(
        x, p[f"{name}.w"], p.get(f"{name}.b"), stride=stride, pad=pad
    )
    norm_cache = None
    if f"{name}.norm.g" in p:
        y, norm_cache = layers.instance_norm_forward(y, p[f"{name}.norm.g"], p[f"{name}.norm.b"])
    act_cache = None
    if act == _RELU:
        y, act_cache = layers.relu_forward(y)
    elif act == _LEAKY:
        y, act_cache = layers.leaky_relu_forward(y)
    return y, _BlockCache(name, conv_cache, norm_cache, act, act_cache)


def _block_backward(dy: NDArray, cache: _BlockCache, grads: dict[str, NDArray]) -> NDArray:
    if cache.act == _RELU:
        dy = layers.relu_backward(dy, cache.act_cache)
    elif cache.act == _LEAKY:
        dy = layers.leaky_relu_backward(dy, cache.act_cache)
    if cache.norm is not None:
        dy, grads[f"{cache.name}.norm.g"], grads[f"{cache.name}.norm.b"] = (
            layers.instance_norm_backward(dy, cache.norm)
        )
    dx, grads[f"{cache.name}.w"], db = layers.conv2d_backward(dy, cache.conv)
    if db is not None:
        grads[f"{cache.name}.b"] = db
    return dx


# ---------------------------------------------------------------------------
# Enhancer: stem, two stride-2 downs, residual blocks, two upsampling convs, residual head
# ---------------------------------------------------------------------------


def _enhancer_forward(p: dict[str, NDArray], x: NDArray, blocks: int) -> tuple[NDArray, dict]:
    """Residual enhancer on H, W divisible by 4.

    A side of 4 leaves a 1-pixel bottleneck for the residual blocks; reflection
    padding repeats that pixel, so the shape is supported, not an error.
    """
    tape: dict[str, Any] = {}
    h, tape["stem"] = _block(x, p, "stem", act=_RELU)
    h, tape["down1"] = _block(h, p, "down1", stride=2, act=_RELU)
    h, tape["down2"] = _block(h, p, "down2", stride=2, act=_RELU)
    for i in range(blocks):
        r, c1 = _block(h, p, f"block{i}.conv1", act=_RELU)
        r, c2 = _block(r, p, f"block{i}.conv2")
        tape[f"block{i}"] = (c1, c2)
        h = h + r
    h, tape["up1"] = _block(layers.upsample2_forward(h), p, "up1", act=_RELU)
    h, tape["up2"] = _block(layers.upsample2_forward(h), p, "up2", act=_RELU)
    out, tape["head"] = _block(h, p, "head")
    return x + out, tape


def _enhancer_backward(tape: dict, dy: NDArray, blocks: int) -> tuple[dict, NDArray]:
    grads: dict[str, NDArray] = {}
    dh = _block_backward(dy, tape["head"], grads)
    dh = layers.upsample2_backward(_block_backward(dh, tape["up2"], grads))
    dh = layers.upsample2_backward(_block_backward(dh, tape["up1"], grads))
    for i in reversed(range(blocks)):
        c1, c2 = tape[f"block{i}"]
        dh = dh + _block_backward(_block_backward(dh, c2, grads), c1, grads)
    dh = _block_backward(dh, tape["down2"], grads)
    dh = _block_backward(dh, tape["down1"], grads)
    dx = _block_backward(dh, tape["stem"], grads)
    return grads, dy + dx


# ---------------------------------------------------------------------------
# Denoiser: two-level conv U-shape, timestep embedding added as per-channel shift
# ---------------------------------------------------------------------------


def _denoiser_forward(
    p: dict[str, NDArray], x: NDArray, t: NDArray, time_dim: int
) -> tuple[NDArray, dict]:
    emb = layers.timestep_embedding(t, time_dim, dtype=x.dtype)
    h1, c_in = _block(x, p, "in")
    h1 = h1 + layers.linear_forward(emb, p["temb1.w"], p["temb1.b"])[:, :, None, None]
    h1, m1 = layers.relu_forward(h1)
    h2, c_down = _block(h1, p, "down", stride=2)
    h2 = h2 + layers.linear_forward(emb, p["temb2.w"], p["temb2.b"])[:, :, None, None]
    h2, m2 = layers.relu_forward(h2)
    h3, c_up = _block(layers.upsample2_forward(h2), p, "up", act=_RELU)
    out, c_out = _block(h3 + h1, p, "out")
    return out, {"emb": emb, "in": c_in, "m1": m1, "down": c_down, "m2": m2, "up": c_up, "out": c_out}


def _denoiser_backward(p: dict[str, NDArray], tape: dict, dy: NDArray) -> tuple[dict, NDArray]:
    grads: dict[str, NDArray] = {}
    emb = tape["emb"]
    dskip = _block_backward(dy, tape["out"], grads)
    dh2 = layers.upsample2_backward(_block_backward(dskip, tape["up"], grads))
    dh2 = layers.relu_backward(dh2, tape["m2"])
    _, grads["temb2.w"], grads["temb2.b"] = layers.linear_backward(
        dh2.sum(axis=(2, 3)), emb, p["temb2.w"]
    )
    dh1 = dskip + _block_backward(dh2, tape["down"], grads)
    dh1 = layers.relu_backward(dh1, tape["m1"])
    _, grads["temb1.w"], grads["temb1.b"] = layers.linear_backward(
        dh1.sum(axis=(2, 3)), emb, p["temb1.w"]
    )
    dx = _block_backward(dh1, tape["in"], grads)
    return grads, dx


# ---------------------------------------------------------------------------
# Discriminator: three stride-2 convs and an unpadded conv head producing a score map
# ---------------------------------------------------------------------------


def _discriminator_forward(p: dict[str, NDArray], x: NDArray) -> tuple[NDArray, dict]:
    tape: dict[str, Any] = {}
    h, tape["conv1"] = _block(x, p, "conv1", stride=2, act=_LEAKY)
    h, tape["conv2"] = _block(h, p, "conv2", stride=2, act=_LEAKY)
    h, tape["conv3"] = _block(h, p, "conv3", stride=2, act=_LEAKY)
    out, tape["head"] = _block(h, p, "head", pad=0)
    return out, tape


def _discriminator_backward(tape: dict, dy: NDArray) -> tuple[dict, NDArray]:
    grads: dict[str, NDArray] = {}
    dh = dy
    for name in ("head", "conv3", "conv2", "conv1"):
        dh = _block_backward(dh, tape[name], grads)
    return grads, dh


def discriminator_output_side(side: int) -> int:
    """Score-map side length for a square input of ``side`` pixels."""
    for _ in range(3):
        side = (side - 1) // 2 + 1
    return side - 2


def _check_input(net: NetworkParams, x: NDArray) -> None:
    arch = net.arch
    if x.ndim != 4 or x.shape[0] == 0 or x.shape[1] != arch.image_channels:
        raise InvalidShapeError(
            f"{arch.kind} expects (N, {arch.image_channels}, H, W), got {x.shape}"
        )
    h, w = x.shape[2:]
    match arch.kind:
        case NetworkKind.ENHANCER if h % 4 or w % 4:
            raise InvalidShapeError(f"enhancer needs H, W divisible by 4, got {h}x{w}")
        case NetworkKind.DENOISER if h % 2 or w % 2:
            raise InvalidShapeError(f"denoiser needs even H, W, got {h}x{w}")
        case NetworkKind.DISCRIMINATOR if min(discriminator_output_side(h), discriminator_output_side(w)) < 1:
            raise InvalidShapeError(f"discriminator input {h}x{w} is too small")
        case _ if min(h, w) < 2:
            raise InvalidShapeError(f"input {h}x{w} is too small for reflection padding")


def _timesteps(t: int | NDArray | None, n: int) -> NDArray:
    if t is None:
        raise MissingTimestepError("the denoiser needs a timestep")
    arr = np.atleast_1d(np.asarray(t, dtype=np.int64))
    if arr.size == 1:
        arr = np.repeat(arr, n)
    if arr.shape != (n,):
        raise InvalidShapeError(f"expected {n} timesteps, got shape {arr.shape}")
    return arr


def forward(
    net: NetworkParams,
    x: ImageTensor,
    t: int | NDArray | None = None,
) -> tuple[ImageTensor, GradTape]:
    """Run ``net`` on a (C, H, W) image or an (N, C, H, W) batch.

    The input is cast to the parameter dtype. ``t`` is required by the
    denoiser and is either one timestep for the whole batch or one per sample.

    Raises:
        InvalidShapeError: If the input does not fit the descriptor.
        MissingTimestepError: If the denoiser is called without ``t``.
    """
    squeeze = x.ndim == 3
    batch = np.asarray(x, dtype=net.dtype)
    if squeeze:
        batch = batch[None]
    _check_input(net, batch)
    p = net.tensors

    match net.kind:
        case NetworkKind.ENHANCER:
            y, caches = _enhancer_forward(p, batch, net.arch.residual_blocks)
        case NetworkKind.DENOISER:
            y, caches = _denoiser_forward(p, batch, _timesteps(t, batch.shape[0]), net.arch.time_dim)
        case NetworkKind.DISCRIMINATOR:
            y, caches = _discriminator_forward(p, batch)

    tape = GradTape(net.kind, net.uid, y.shape, squeeze, caches)
    return (y[0] if squeeze else y), tape


def backward(
    net: NetworkParams, tape: GradTape, grad_out: ImageTensor
) -> tuple[dict[str, NDArray], ImageTensor]:
    """Exact gradients of the scalar whose output-gradient is ``grad_out``.

    Returns:
        Gradients keyed like ``net.tensors`` and the gradient w.r.t. the input,
        shaped like the input given to :func:`forward`.

    Raises:
        StaleTapeError: If ``tape`` was recorded on different parameters.
    """
    if tape.kind != net.kind or tape.params_uid != net.uid:
        raise StaleTapeError(f"tape recorded for {tape.kind}#{tape.params_uid}, got {net.kind}#{net.uid}")
    dy = np.asarray(grad_out, dtype=net.dtype)
    if tape.squeeze:
        dy = dy[None]
    if dy.shape != tape.output_shape:
        raise InvalidShapeError(f"grad_out shape {dy.shape} != output shape {tape.output_shape}")

    match net.kind:
        case NetworkKind.ENHANCER:
            grads, dx = _enhancer_backward(tape.caches, dy, net.arch.residual_blocks)
        case NetworkKind.DENOISER:
            grads, dx = _denoiser_backward(net.tensors, tape.caches, dy)
        case NetworkKind.DISCRIMINATOR:
            grads, dx = _discriminator_backward(tape.caches, dy)

    ordered = {name: grads[name] for name in net.tensors}
    return ordered, (dx[0] if tape.squeeze else dx)
