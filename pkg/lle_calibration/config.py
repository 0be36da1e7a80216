"""Typed run configuration and the plain-text ``key = value`` config format.

A config file holds one assignment per line, ``#`` starts a comment, and keys
are dotted ``section.field`` names (``ddc.gamma = 2.0``). Values resolve in the
order defaults < file < ``DIFFLLE_SEED`` (seed only) < ``--set`` < ``--seed``.
"""

import os
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import constants as c
from .constants import AdversarialLoss, CurveMode, NetworkKind, WindowEnd
from .core import LleCalibrationError
from .nnet import AdamState, ArchDescriptor


class ConfigError(LleCalibrationError, ValueError):
    """Unknown key, malformed line, or a value of the wrong type or range.

    Attributes:
        key: Offending dotted key, if known.
        line: 1-based line number in the config file, if the value came from one.
    """

    def __init__(self, message: str, *, key: str | None = None, line: int | None = None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.key = key
        self.line = line


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ScheduleConfig(_Section):
    num_steps: int = Field(default=c.DEFAULT_NUM_STEPS, ge=1)
    beta_start: float = Field(default=c.DEFAULT_BETA_START, gt=0.0, lt=1.0)
    beta_end: float = Field(default=c.DEFAULT_BETA_END, gt=0.0, lt=1.0)
    ddim_steps: int = Field(default=c.DEFAULT_DDIM_STEPS, ge=1)
    window_end: WindowEnd = WindowEnd.CLEAN

    @model_validator(mode="after")
    def _check_ranges(self) -> "ScheduleConfig":
        if self.beta_start > self.beta_end:
            raise ValueError("beta_start must not exceed beta_end")
        if self.ddim_steps > self.num_steps:
            raise ValueError("ddim_steps must not exceed num_steps")
        return self


class CalibrationConfig(_Section):
    """Lightness curve and diffusion round-trip applied before enhancement."""

    gamma: float = Field(default=c.DEFAULT_GAMMA, gt=0.0)
    curve_mode: CurveMode = CurveMode.BRIGHTEN
    omega: int = Field(default=c.DEFAULT_OMEGA, ge=1)
    eta: float = Field(default=c.DEFAULT_ETA, ge=0.0, le=1.0)


class ArchConfig(_Section):
    image_channels: int = Field(default=c.DEFAULT_IMAGE_CHANNELS, ge=1, le=3)
    enhancer_channels: int = Field(default=c.DEFAULT_ENHANCER_CHANNELS, ge=1)
    enhancer_blocks: int = Field(default=c.DEFAULT_ENHANCER_BLOCKS, ge=0)
    denoiser_channels: int = Field(default=c.DEFAULT_DENOISER_CHANNELS, ge=1)
    time_dim: int = Field(default=c.DEFAULT_TIME_DIM, ge=2)
    disc_channels: int = Field(default=c.DEFAULT_DISC_CHANNELS, ge=1)

    def descriptor(self, kind: NetworkKind) -> ArchDescriptor:
        match kind:
            case NetworkKind.ENHANCER:
                extra = {"channels": self.enhancer_channels, "residual_blocks": self.enhancer_blocks}
            case NetworkKind.DENOISER:
                extra = {"channels": self.denoiser_channels, "time_dim": self.time_dim}
            case NetworkKind.DISCRIMINATOR:
                extra = {"channels": self.disc_channels}
        return ArchDescriptor(kind=kind, image_channels=self.image_channels, **extra)


class _OptimizerSection(_Section):
    epochs: int = Field(ge=0)
    batch_size: int = Field(ge=1)
    patch_size: int = Field(ge=4)
    beta1: float = Field(default=c.DEFAULT_ADAM_BETA1, ge=0.0, lt=1.0)
    beta2: float = Field(default=c.DEFAULT_ADAM_BETA2, ge=0.0, lt=1.0)
    adam_eps: float = Field(default=c.DEFAULT_ADAM_EPS, gt=0.0)

    def adam_state(self) -> AdamState:
        return AdamState(beta1=self.beta1, beta2=self.beta2, eps=self.adam_eps)


class TrainConfig(_OptimizerSection):
    """Cycle-consistent adversarial pretraining of the enhancer."""

    epochs: int = Field(default=c.DEFAULT_UEM_EPOCHS, ge=0)
    batch_size: int = Field(default=c.DEFAULT_UEM_BATCH, ge=1)
    patch_size: int = Field(default=c.DEFAULT_PATCH_SIZE, ge=32, multiple_of=4)
    lr: float = Field(default=c.DEFAULT_UEM_LR, ge=0.0)
    lambda_cyc: float = Field(default=c.DEFAULT_LAMBDA_CYC, ge=0.0)
    decay_fraction: float = Field(default=c.DEFAULT_DECAY_FRACTION, gt=0.0, le=1.0)
    adversarial: AdversarialLoss = AdversarialLoss.LSGAN


class DistillConfig(_OptimizerSection):
    """Fine-tuning on calibrated pseudo-references."""

    epochs: int = Field(default=c.DEFAULT_DISTILL_EPOCHS, ge=0)
    batch_size: int = Field(default=c.DEFAULT_DISTILL_BATCH, ge=1)
    patch_size: int = Field(default=c.DEFAULT_PATCH_SIZE, ge=4, multiple_of=4)
    lr_max: float = Field(default=c.DEFAULT_DISTILL_LR_MAX, ge=0.0)
    lr_min: float = Field(default=c.DEFAULT_DISTILL_LR_MIN, ge=0.0)
    patience: int = Field(default=c.DEFAULT_PATIENCE, ge=1)
    min_delta: float = Field(default=0.0, ge=0.0)

    @model_validator(mode="after")
    def _check_lr(self) -> "DistillConfig":
        if self.lr_min > self.lr_max:
            raise ValueError("lr_min must not exceed lr_max")
        return self


class DenoiserConfig(_OptimizerSection):
    epochs: int = Field(default=c.DEFAULT_DENOISER_EPOCHS, ge=0)
    batch_size: int = Field(default=c.DEFAULT_DENOISER_BATCH, ge=1)
    patch_size: int = Field(default=c.DEFAULT_DENOISER_PATCH, ge=4, multiple_of=2)
    lr: float = Field(default=c.DEFAULT_DENOISER_LR, ge=0.0)


class DataConfig(_Section):
    """Synthetic corpus sizes and degradation ranges."""

    n_train: int = Field(default=c.DEFAULT_N_TRAIN, ge=1)
    n_test: int = Field(default=c.DEFAULT_N_TEST, ge=1)
    n_pristine: int = Field(default=c.DEFAULT_N_PRISTINE, ge=1)
    size: int = Field(default=c.DEFAULT_IMAGE_SIZE, ge=32, multiple_of=4)
    exposure_low: float = Field(default=c.IN_DOMAIN_EXPOSURE[0], gt=0.0, le=1.0)
    exposure_high: float = Field(default=c.IN_DOMAIN_EXPOSURE[1], gt=0.0, le=1.0)
    darkening_low: float = Field(default=c.IN_DOMAIN_DARKENING[0], ge=1.0)
    darkening_high: float = Field(default=c.IN_DOMAIN_DARKENING[1], ge=1.0)
    ood_exposure_low: float = Field(default=c.OOD_EXPOSURE[0], gt=0.0, le=1.0)
    ood_exposure_high: float = Field(default=c.OOD_EXPOSURE[1], gt=0.0, le=1.0)
    noise_low: float = Field(default=c.OOD_NOISE[0], ge=0.0)
    noise_high: float = Field(default=c.OOD_NOISE[1], ge=0.0)
    gain_low: float = Field(default=c.OOD_GAIN[0], ge=0.0)
    gain_high: float = Field(default=c.OOD_GAIN[1], ge=0.0)

    @model_validator(mode="after")
    def _check_ranges(self) -> "DataConfig":
        for name in ("exposure", "darkening", "ood_exposure", "noise", "gain"):
            if getattr(self, f"{name}_low") > getattr(self, f"{name}_high"):
                raise ValueError(f"{name}_low must not exceed {name}_high")
        return self


class MetricsConfig(_Section):
    niqe_patch: int = Field(default=c.NIQE_PATCH, ge=4, multiple_of=2)
    sharpness_fraction: float = Field(default=c.NIQE_SHARPNESS_FRACTION, ge=0.0, le=1.0)
    ridge: float = Field(default=c.NIQE_RIDGE, gt=0.0)
    min_patches: int = Field(default=c.NIQE_MIN_PATCHES, ge=2)


class AppConfig(_Section):
    """Every tunable of a run, grouped by section."""

    seed: int = Field(default=c.DEFAULT_SEED, ge=0, lt=2**64)
    jobs: int = Field(default=1, ge=1)
    schedule: ScheduleConfig = ScheduleConfig()
    ddc: CalibrationConfig = CalibrationConfig()
    arch: ArchConfig = ArchConfig()
    uem: TrainConfig = TrainConfig()
    distill: DistillConfig = DistillConfig()
    denoiser: DenoiserConfig = DenoiserConfig()
    data: DataConfig = DataConfig()
    metrics: MetricsConfig = MetricsConfig()


def valid_keys() -> list[str]:
    """Every dotted key accepted in a config file or by ``--set``."""
    keys = []
    for name, info in AppConfig.model_fields.items():
        section = info.annotation
        if isinstance(section, type) and issubclass(section, BaseModel):
            keys.extend(f"{name}.{field}" for field in section.model_fields)
        else:
            keys.append(name)
    return keys


def _assign(raw: dict[str, Any], key: str, value: str, *, line: int | None) -> None:
    if key not in valid_keys():
        raise ConfigError(
            f"unknown key {key!r}; valid keys: {', '.join(valid_keys())}", key=key, line=line
        )
    section, _, field = key.partition(".")
    if field:
        raw.setdefault(section, {})[field] = value
    else:
        raw[section] = value


def _split_assignment(text: str, *, line: int | None) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    key, value = key.strip(), value.strip()
    if not sep or not key or not value:
        raise ConfigError(f"expected `key = value`, got {text.strip()!r}", line=line)
    return key, value


def parse_config_text(text: str) -> tuple[dict[str, Any], dict[str, int]]:
    """Raw nested values and the line each key was last set on."""
    raw: dict[str, Any] = {}
    lines: dict[str, int] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        key, value = _split_assignment(content, line=number)
        _assign(raw, key, value, line=number)
        lines[key] = number
    return raw, lines


def parse_config(
    path: str | Path | None = None,
    *,
    overrides: Sequence[str] = (),
    seed: int | None = None,
    env: Mapping[str, str] | None = None,
) -> AppConfig:
    """Resolve an :class:`AppConfig` from defaults, a file, the environment and overrides.

    Args:
        path: Optional config file.
        overrides: ``KEY=VALUE`` strings, applied after the file.
        seed: Explicit seed, applied last.
        env: Environment to read ``DIFFLLE_SEED`` from (defaults to ``os.environ``).

    Raises:
        ConfigError: On unknown keys, malformed lines, or invalid values.
    """
    env = os.environ if env is None else env
    raw: dict[str, Any] = {}
    lines: dict[str, int] = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        raw, lines = parse_config_text(text)

    if env.get(c.SEED_ENV_VAR):
        raw["seed"] = env[c.SEED_ENV_VAR]
        lines.pop("seed", None)
    for item in overrides:
        key, value = _split_assignment(item, line=None)
        _assign(raw, key, value, line=None)
        lines.pop(key, None)
    if seed is not None:
        raw["seed"] = seed
        lines.pop("seed", None)

    try:
        return AppConfig.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(part) for part in first["loc"])
        raise ConfigError(f"{key}: {first['msg']}", key=key, line=lines.get(key)) from e


def format_config(cfg: AppConfig) -> str:
    """Render ``cfg`` in the text format accepted by :func:`parse_config`."""
    out = []
    for key in valid_keys():
        section, _, field = key.partition(".")
        value = getattr(getattr(cfg, section), field) if field else getattr(cfg, section)
        out.append(f"{key} = {value}")
    return "\n".join(out) + "\n"
