"""Data models for metric reports and training histories."""

from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .constants import AGGREGATE_ROW, MetricKey
from .core import InvalidParameterError

_METRIC_COLUMNS: tuple[MetricKey, ...] = (
    MetricKey.PSNR,
    MetricKey.SSIM,
    MetricKey.NIQE,
    MetricKey.LOE,
    MetricKey.CDS,
)


@dataclass
class ImageMetrics:
    """Scores of one image (or one ablation setting).

    Attributes:
        name: Image file name or row label.
        psnr: Peak signal-to-noise ratio against the reference, in dB.
        ssim: Structural similarity against the reference.
        niqe: No-reference naturalness distance; lower is better.
        loe: Lightness-order error against the low-light input.
        cds: Cross discriminator score in (0, 1).
    """

    name: str
    psnr: float | None = None
    ssim: float | None = None
    niqe: float | None = None
    loe: float | None = None
    cds: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class MetricReport:
    """Per-row metrics plus their arithmetic means.

    Only columns that at least one row carries are reported.

    Attributes:
        rows: One entry per image or setting, in input order.
        key_column: Header of the label column.
        include_mean: Whether tables end with an aggregate ``mean`` row.
    """

    rows: list[ImageMetrics]
    key_column: str = MetricKey.IMAGE
    include_mean: bool = True

    @property
    def columns(self) -> list[MetricKey]:
        return [c for c in _METRIC_COLUMNS if any(getattr(r, c) is not None for r in self.rows)]

    def mean(self, *, metric: MetricKey) -> float:
        """Arithmetic mean of ``metric`` over the rows that carry it.

        Raises:
            InvalidParameterError: If no row carries the metric.
        """
        values = [getattr(r, metric) for r in self.rows if getattr(r, metric) is not None]
        if not values:
            raise InvalidParameterError(f"no row reports {metric}")
        return float(np.mean(values))

    def aggregate(self) -> ImageMetrics:
        return ImageMetrics(AGGREGATE_ROW, **{c.value: self.mean(metric=c) for c in self.columns})

    def to_rows(self) -> list[dict[str, Any]]:
        """Flat table rows, aggregate last when ``include_mean`` is set."""
        rows = [*self.rows, self.aggregate()] if self.include_mean and self.rows else list(self.rows)
        columns = self.columns
        return [
            {self.key_column: r.name, **{c.value: getattr(r, c) for c in columns}}
            for r in rows
        ]


@dataclass
class TrainingHistory:
    """Epoch-mean losses of one training run.

    Attributes:
        name: Run label used in log lines and file names.
        records: One ``{"epoch": ..., <loss>: ...}`` dict per finished epoch.
        stopped_early: Whether the run ended before its epoch budget.
    """

    name: str
    records: list[dict[str, float]] = field(default_factory=list)
    stopped_early: bool = False

    def record(self, *, epoch: int, **losses: float) -> None:
        self.records.append({"epoch": epoch, **{k: float(v) for k, v in losses.items()}})

    def losses(self, *, key: str) -> list[float]:
        return [r[key] for r in self.records]

    def __len__(self) -> int:
        return len(self.records)
