"""Procedural clean scenes, low-light degradation and the on-disk dataset layout."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.ndimage import gaussian_filter

from ..constants import (
    CLEAN_MAX_RMS,
    CLEAN_VALUE_HIGH,
    CLEAN_VALUE_LOW,
    DatasetDir,
    LogMessage,
)
from ..config import DataConfig
from ..core import ImageTensor, InvalidParameterError, LleCalibrationError, SeededRng, clamp01
from .imageio import list_images, load_image, save_image

# child-stream indices of the dataset writer
_STREAM_NORMAL, _STREAM_LOW, _STREAM_TEST, _STREAM_OOD, _STREAM_PRISTINE = range(5)


class DatasetError(LleCalibrationError):
    """Missing or empty dataset directory, or unpaired reference names."""


class DegradationSpec(BaseModel):
    """Parameters of ``low = s * clean**gamma_d + noise``.

    In-domain degradations are noise free; the noise terms only appear in
    out-of-domain data.
    """

    model_config = ConfigDict(frozen=True)

    exposure: float = Field(gt=0.0, le=1.0, description="Exposure scale s")
    darkening: float = Field(ge=1.0, description="Darkening exponent gamma_d")
    noise: float = Field(default=0.0, ge=0.0, description="Gaussian read-noise std")
    gain: float = Field(default=0.0, ge=0.0, description="Signal-dependent shot-noise gain")
    in_domain: bool = True

    @model_validator(mode="after")
    def _in_domain_is_noise_free(self) -> "DegradationSpec":
        if self.in_domain and (self.noise > 0.0 or self.gain > 0.0):
            raise ValueError("an in-domain degradation cannot add noise")
        return self


def _limit_rms(img: np.ndarray) -> np.ndarray:
    """Pull values toward the floor until the mean square is at most CLEAN_MAX_RMS**2."""
    target = CLEAN_MAX_RMS**2
    if float(np.mean(img * img)) <= target:
        return img
    low = CLEAN_VALUE_LOW
    d = img - low
    m1, m2 = float(d.mean()), float(np.mean(d * d))
    k = (-low * m1 + np.sqrt((low * m1) ** 2 - m2 * (low * low - target))) / m2
    return low + k * d


def _clean_scene(size: int, channels: int, rng: SeededRng) -> ImageTensor:
    """Colour gradient, a few soft-edged shapes and band-limited texture."""
    yy, xx = np.mgrid[0:size, 0:size] / (size - 1)
    angle = rng.uniform(0.0, 2.0 * np.pi)
    ramp = np.cos(angle) * xx + np.sin(angle) * yy
    ramp = (ramp - ramp.min()) / max(np.ptp(ramp), 1e-9)
    start, end = rng.uniform(0.0, 0.6, channels), rng.uniform(0.0, 0.6, channels)
    img = start[:, None, None] + (end - start)[:, None, None] * ramp[None]

    for _ in range(int(rng.integers(2, 6))):
        colour = rng.uniform(0.0, 1.0, channels)[:, None, None]
        cy, cx = rng.uniform(0.0, 1.0, 2)
        ry, rx = rng.uniform(0.08, 0.3, 2)
        if rng.uniform() < 0.5:
            mask = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
        else:
            mask = (np.abs(yy - cy) <= ry) & (np.abs(xx - cx) <= rx)
        mask = gaussian_filter(mask.astype(np.float64), 0.7)
        img = img * (1.0 - mask) + colour * mask

    texture = gaussian_filter(rng.normal((channels, size, size), dtype=np.float64), (0, 1.5, 1.5))
    img = img + rng.uniform(0.03, 0.1) * texture / max(texture.std(), 1e-9)

    img = CLEAN_VALUE_LOW + (CLEAN_VALUE_HIGH - CLEAN_VALUE_LOW) * np.clip(img, 0.0, 1.0)
    return _limit_rms(img).astype(np.float32)


def gen_clean_corpus(n: int, size: int, rng: SeededRng, *, channels: int = 3) -> list[ImageTensor]:
    """``n`` procedural clean images; image i depends only on ``rng`` and i."""
    if n < 1:
        raise InvalidParameterError(f"corpus size must be >= 1, got {n}")
    if size < 8:
        raise InvalidParameterError(f"image size must be >= 8, got {size}")
    return [_clean_scene(size, channels, rng.child(i)) for i in range(n)]


def synth_degrade(clean: ImageTensor, spec: DegradationSpec, rng: SeededRng) -> ImageTensor:
    """Darken, then add read and shot noise; the result is clamped to [0, 1]."""
    base = spec.exposure * np.power(np.asarray(clean, dtype=np.float64), spec.darkening)
    low = base
    if spec.noise > 0.0:
        low = low + spec.noise * rng.normal(clean.shape, dtype=np.float64)
    if spec.gain > 0.0:
        low = low + spec.gain * np.sqrt(base) * rng.normal(clean.shape, dtype=np.float64)
    return clamp01(low).astype(clean.dtype)


def sample_degradation(rng: SeededRng, data_cfg: DataConfig, *, in_domain: bool) -> DegradationSpec:
    """Draw a degradation from the configured in-domain or out-of-domain ranges."""
    darkening = rng.uniform(data_cfg.darkening_low, data_cfg.darkening_high)
    if in_domain:
        return DegradationSpec(
            exposure=rng.uniform(data_cfg.exposure_low, data_cfg.exposure_high),
            darkening=darkening,
        )
    return DegradationSpec(
        exposure=rng.uniform(data_cfg.ood_exposure_low, data_cfg.ood_exposure_high),
        darkening=darkening,
        noise=rng.uniform(data_cfg.noise_low, data_cfg.noise_high),
        gain=rng.uniform(data_cfg.gain_low, data_cfg.gain_high),
        in_domain=False,
    )


@dataclass(frozen=True)
class DatasetLayout:
    """Directory contract of a dataset root.

    ``trainA`` (low) and ``trainB`` (normal) are unpaired; ``test`` and
    ``test_ood`` hold ``low``/``ref`` folders paired by file name.
    """

    root: Path

    def path(self, part: DatasetDir) -> Path:
        return self.root / part.value


def _suffix(channels: int) -> str:
    return ".ppm" if channels == 3 else ".pgm"


def _write_set(directory: Path, images: list[ImageTensor]) -> None:
    for i, img in enumerate(images):
        save_image(img, directory / f"{i:04d}{_suffix(img.shape[0])}")
    logger.success(LogMessage.SAVED_IMAGES.format(len(images), directory))


def write_dataset(root: str | Path, data_cfg: DataConfig, rng: SeededRng, *, channels: int = 3) -> DatasetLayout:
    """Generate every folder of the dataset layout under ``root``."""
    layout = DatasetLayout(Path(root))
    size = data_cfg.size

    def degrade_all(clean: list[ImageTensor], stream: SeededRng, in_domain: bool) -> list[ImageTensor]:
        out = []
        for i, img in enumerate(clean):
            child = stream.child(i)
            out.append(synth_degrade(img, sample_degradation(child, data_cfg, in_domain=in_domain), child))
        return out

    normal = gen_clean_corpus(data_cfg.n_train, size, rng.child(_STREAM_NORMAL), channels=channels)
    _write_set(layout.path(DatasetDir.TRAIN_NORMAL), normal)

    low_stream = rng.child(_STREAM_LOW)
    low_clean = gen_clean_corpus(data_cfg.n_train, size, low_stream.child(0), channels=channels)
    _write_set(layout.path(DatasetDir.TRAIN_LOW), degrade_all(low_clean, low_stream.child(1), True))

    for stream_id, low_dir, ref_dir, in_domain in (
        (_STREAM_TEST, DatasetDir.TEST_LOW, DatasetDir.TEST_REF, True),
        (_STREAM_OOD, DatasetDir.OOD_LOW, DatasetDir.OOD_REF, False),
    ):
        stream = rng.child(stream_id)
        refs = gen_clean_corpus(data_cfg.n_test, size, stream.child(0), channels=channels)
        _write_set(layout.path(ref_dir), refs)
        _write_set(layout.path(low_dir), degrade_all(refs, stream.child(1), in_domain))

    pristine = gen_clean_corpus(data_cfg.n_pristine, size, rng.child(_STREAM_PRISTINE), channels=channels)
    _write_set(layout.path(DatasetDir.PRISTINE), pristine)
    return layout


def load_images(directory: str | Path) -> list[tuple[str, ImageTensor]]:
    """All images of a folder as ``(file name, image)``, sorted by name.

    Raises:
        DatasetError: If the folder is missing or holds no images.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise DatasetError(f"dataset folder {directory} does not exist")
    paths = list_images(directory)
    if not paths:
        raise DatasetError(f"dataset folder {directory} holds no images")
    logger.info(LogMessage.LOADED_DATASET.format(len(paths), directory))
    return [(p.name, load_image(p)) for p in paths]


def load_pairs(
    low_dir: str | Path, ref_dir: str | Path
) -> list[tuple[str, ImageTensor, ImageTensor]]:
    """Low/reference pairs matched by file name.

    Raises:
        DatasetError: If either folder is empty or the name sets differ.
    """
    low = load_images(low_dir)
    ref = dict(load_images(ref_dir))
    names = [name for name, _ in low]
    if sorted(names) != sorted(ref):
        missing = sorted(set(names) ^ set(ref))
        raise DatasetError(f"unpaired file names between {low_dir} and {ref_dir}: {missing[:5]}")
    return [(name, img, ref[name]) for name, img in low]
