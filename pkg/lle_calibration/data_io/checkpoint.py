"""Checkpoint container: named float32 tensors behind a magic, a version and a CRC32.

Layout (little-endian)::

    b"DFLL" | u32 version | u32 section count
    per section: u16 name length | name (utf-8) | u8 ndim | u32 dims... | f32 payload
    u32 CRC32 of every preceding byte
"""

import struct
import zlib
from pathlib import Path

import numpy as np
from loguru import logger
from numpy.typing import NDArray

from ..constants import CHECKPOINT_MAGIC, CHECKPOINT_VERSION, LogMessage, NetworkKind
from ..core import LleCalibrationError
from ..metrics.niqe import NiqeModel
from ..nnet import ArchDescriptor, NetworkParams

_ARCH_PREFIX = "arch."
_NIQE_MEAN = "niqe.mean"
_NIQE_COV = "niqe.cov"
_NIQE_META = "niqe.meta"


class CheckpointError(LleCalibrationError):
    """Unreadable or mismatched checkpoint."""


def encode_sections(sections: dict[str, NDArray]) -> bytes:
    parts = [CHECKPOINT_MAGIC, struct.pack("<II", CHECKPOINT_VERSION, len(sections))]
    for name, tensor in sections.items():
        encoded = name.encode("utf-8")
        arr = np.asarray(tensor, dtype="<f4")
        parts.append(struct.pack("<H", len(encoded)) + encoded)
        parts.append(struct.pack(f"<B{arr.ndim}I", arr.ndim, *arr.shape))
        parts.append(arr.tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def decode_sections(data: bytes) -> dict[str, NDArray]:
    """Parse and CRC-check a checkpoint.

    Raises:
        CheckpointError: On bad magic, version, CRC or truncation.
    """
    if len(data) < 16 or data[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"bad magic {data[:4]!r}")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise CheckpointError("CRC mismatch: checkpoint is corrupted")
    version, count = struct.unpack_from("<II", body, 4)
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")

    pos = 12
    sections: dict[str, NDArray] = {}
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", body, pos)
            name = body[pos + 2 : pos + 2 + name_len].decode("utf-8")
            pos += 2 + name_len
            (ndim,) = struct.unpack_from("<B", body, pos)
            shape = struct.unpack_from(f"<{ndim}I", body, pos + 1)
            pos += 1 + 4 * ndim
            size = int(np.prod(shape, dtype=np.int64))
            if pos + 4 * size > len(body):
                raise CheckpointError(f"section {name!r} is truncated")
            sections[name] = np.frombuffer(body, dtype="<f4", count=size, offset=pos).reshape(shape).astype(np.float32)
            pos += 4 * size
    except (struct.error, UnicodeDecodeError) as e:
        raise CheckpointError(f"malformed section table: {e}") from e
    if pos != len(body):
        raise CheckpointError(f"{len(body) - pos} trailing bytes after the last section")
    return sections


def _arch_section(arch: ArchDescriptor) -> tuple[str, NDArray]:
    values = [arch.image_channels, arch.channels, arch.residual_blocks, arch.time_dim]
    return f"{_ARCH_PREFIX}{arch.kind}", np.asarray(values, dtype=np.float32)


def _network_from_sections(sections: dict[str, NDArray]) -> NetworkParams:
    arch_keys = [k for k in sections if k.startswith(_ARCH_PREFIX)]
    if len(arch_keys) != 1:
        raise CheckpointError("network checkpoint must hold exactly one arch section")
    kind = arch_keys[0].removeprefix(_ARCH_PREFIX)
    image_channels, channels, blocks, time_dim = (int(v) for v in sections[arch_keys[0]])
    try:
        arch = ArchDescriptor(
            kind=NetworkKind(kind),
            image_channels=image_channels,
            channels=channels,
            residual_blocks=blocks,
            time_dim=time_dim,
        )
        tensors = {k: v for k, v in sections.items() if k != arch_keys[0]}
        return NetworkParams(arch, tensors)
    except ValueError as e:
        raise CheckpointError(f"checkpoint does not describe a valid {kind}: {e}") from e


def save_checkpoint(obj: NetworkParams | NiqeModel, path: str | Path) -> None:
    """Serialize network parameters or a NIQE model."""
    if isinstance(obj, NiqeModel):
        sections = {
            _NIQE_MEAN: obj.mean,
            _NIQE_COV: obj.cov,
            _NIQE_META: np.asarray([obj.patch_size, obj.sharpness_fraction, obj.ridge]),
        }
    else:
        name, values = _arch_section(obj.arch)
        sections = {name: values, **obj.tensors}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_sections(sections))
    logger.success(LogMessage.SAVED_CHECKPOINT.format(path, len(sections)))


def load_checkpoint(path: str | Path) -> NetworkParams | NiqeModel:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    sections = decode_sections(data)
    if _NIQE_MEAN in sections:
        patch, fraction, ridge = (float(v) for v in sections[_NIQE_META])
        return NiqeModel(
            mean=sections[_NIQE_MEAN].astype(np.float64),
            cov=sections[_NIQE_COV].astype(np.float64),
            patch_size=int(patch),
            sharpness_fraction=fraction,
            ridge=ridge,
        )
    return _network_from_sections(sections)


def load_network(path: str | Path, expected: ArchDescriptor | None = None) -> NetworkParams:
    """Load network parameters, optionally requiring a specific descriptor.

    Raises:
        CheckpointError: If the file holds no network, or shapes differ from ``expected``.
    """
    loaded = load_checkpoint(path)
    if not isinstance(loaded, NetworkParams):
        raise CheckpointError(f"{path} holds a NIQE model, not network parameters")
    if expected is not None and loaded.arch != expected:
        raise CheckpointError(
            f"{path}: shape mismatch, checkpoint is {loaded.arch.kind} "
            f"{loaded.arch.model_dump()} but {expected.kind} {expected.model_dump()} was expected"
        )
    return loaded


def load_niqe_model(path: str | Path) -> NiqeModel:
    loaded = load_checkpoint(path)
    if not isinstance(loaded, NiqeModel):
        raise CheckpointError(f"{path} holds network parameters, not a NIQE model")
    return loaded
