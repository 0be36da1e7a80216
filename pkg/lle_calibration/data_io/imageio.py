"""Binary PPM (P6) / PGM (P5) codec, with PNG through the optional ``pypng`` extra."""

from pathlib import Path

import numpy as np

from ..constants import IMAGE_SUFFIXES
from ..core import ImageTensor, LleCalibrationError, as_image

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_WHITESPACE = b" \t\n\r\v\f"
_MAGIC_CHANNELS = {b"P5": 1, b"P6": 3}


class ImageFormatError(LleCalibrationError, ValueError):
    """Malformed or truncated image file.

    Attributes:
        offset: Byte offset at which parsing failed.
    """

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class UnsupportedDepthError(ImageFormatError):
    """Sample depth above 8 bits."""


def _next_token(data: bytes, pos: int) -> tuple[bytes, int]:
    """Read one header token, skipping whitespace and ``#`` comments."""
    while pos < len(data):
        if data[pos : pos + 1] == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
        elif data[pos] in _WHITESPACE:
            pos += 1
        else:
            break
    start = pos
    while pos < len(data) and data[pos] not in _WHITESPACE and data[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise ImageFormatError("unexpected end of header", start)
    return data[start:pos], pos


def _header_int(data: bytes, pos: int, what: str) -> tuple[int, int]:
    token, end = _next_token(data, pos)
    if not token.isdigit():
        raise ImageFormatError(f"{what} is not a decimal integer: {token!r}", end - len(token))
    value = int(token)
    if value <= 0:
        raise ImageFormatError(f"{what} must be positive, got {value}", end - len(token))
    return value, end


def decode_pnm(data: bytes) -> ImageTensor:
    """Decode P5/P6 bytes into a (C, H, W) float32 image in [0, 1].

    Raises:
        ImageFormatError: Bad magic, malformed header, truncated payload or a
            sample above maxval.
        UnsupportedDepthError: If maxval exceeds 255.
    """
    magic = data[:2]
    if magic not in _MAGIC_CHANNELS:
        raise ImageFormatError(f"unsupported magic {magic!r}; expected P5 or P6", 0)
    channels = _MAGIC_CHANNELS[magic]
    width, pos = _header_int(data, 2, "width")
    height, pos = _header_int(data, pos, "height")
    maxval, pos = _header_int(data, pos, "maxval")
    if maxval > 255:
        raise UnsupportedDepthError(f"maxval {maxval} needs 16-bit samples", pos)
    if pos >= len(data) or data[pos] not in _WHITESPACE:
        raise ImageFormatError("missing whitespace after maxval", pos)
    pos += 1

    expected = width * height * channels
    payload = data[pos : pos + expected]
    if len(payload) < expected:
        raise ImageFormatError(
            f"truncated payload: {len(payload)} of {expected} bytes", pos + len(payload)
        )
    samples = np.frombuffer(payload, dtype=np.uint8)
    over = np.flatnonzero(samples > maxval)
    if over.size:
        first = int(over[0])
        raise ImageFormatError(f"sample {samples[first]} exceeds maxval {maxval}", pos + first)
    pixels = samples.reshape(height, width, channels)
    return (pixels.transpose(2, 0, 1).astype(np.float32) / np.float32(maxval))


def quantize(img: ImageTensor) -> np.ndarray:
    """Map [0, 1] to 8-bit with round-half-up, channel-last."""
    scaled = np.floor(np.clip(img, 0.0, 1.0).astype(np.float64) * 255.0 + 0.5)
    return scaled.astype(np.uint8).transpose(1, 2, 0)


def encode_pnm(img: ImageTensor) -> bytes:
    img = as_image(img)
    channels, height, width = img.shape
    magic = b"P6" if channels == 3 else b"P5"
    header = magic + f"\n{width} {height}\n255\n".encode("ascii")
    return header + quantize(img).tobytes()


def _load_png(path: Path) -> ImageTensor:
    try:
        import png
    except ImportError as e:
        raise ImageFormatError(f"{path}: PNG support needs the 'png' extra (pypng)") from e
    width, height, rows, info = png.Reader(filename=str(path)).asDirect()
    if info["bitdepth"] > 8:
        raise UnsupportedDepthError(f"{path}: {info['bitdepth']}-bit PNG")
    planes = info["planes"]
    pixels = np.vstack([np.asarray(row, dtype=np.uint8) for row in rows]).reshape(height, width, planes)
    if info.get("alpha"):
        pixels = pixels[..., :-1]
    return pixels.transpose(2, 0, 1).astype(np.float32) / np.float32(255.0)


def _save_png(img: ImageTensor, path: Path) -> None:
    try:
        import png
    except ImportError as e:
        raise ImageFormatError(f"{path}: PNG support needs the 'png' extra (pypng)") from e
    img = as_image(img)
    channels, height, width = img.shape
    rows = quantize(img).reshape(height, width * channels)
    writer = png.Writer(width, height, greyscale=channels == 1, bitdepth=8)
    with path.open("wb") as f:
        writer.write(f, rows.tolist())


def load_image(path: str | Path) -> ImageTensor:
    """Load a PPM/PGM (or PNG) file as a (C, H, W) float32 image in [0, 1]."""
    path = Path(path)
    data = path.read_bytes()
    if data.startswith(PNG_SIGNATURE):
        return _load_png(path)
    return decode_pnm(data)


def save_image(img: ImageTensor, path: str | Path) -> None:
    """Write ``img`` as 8-bit P6/P5, or PNG when the suffix is ``.png``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix.lower() == ".png":
        _save_png(img, path)
    else:
        path.write_bytes(encode_pnm(img))


def list_images(directory: str | Path) -> list[Path]:
    """Image files directly inside ``directory``, sorted by name."""
    return sorted(
        p for p in Path(directory).iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    )
