"""Storage for enhanced images, metric tables and training histories."""

import io
from collections.abc import Sequence
from pathlib import Path

import polars as pl
from loguru import logger
from rich.console import Console
from rich.table import Table

from .constants import LogMessage
from .core import ImageTensor
from .data_io import save_image
from .models import MetricReport, TrainingHistory

TABLE_WIDTH = 120
FLOAT_DIGITS = 4


class ResultStorage:
    """Writes run artifacts under an output directory."""

    def save_images(self, *, images: Sequence[tuple[str, ImageTensor]], directory: Path | str) -> list[Path]:
        """Write images under their original file names.

        Args:
            images: ``(file name, image)`` pairs in output order.
            directory: Destination folder; created when missing.

        Returns:
            The written paths, in input order.
        """
        directory = Path(directory)
        paths = []
        for name, img in images:
            path = directory / name
            save_image(img, path)
            paths.append(path)
        logger.success(LogMessage.SAVED_IMAGES.format(len(paths), directory))
        return paths

    def report_frame(self, *, report: MetricReport) -> pl.DataFrame:
        return pl.DataFrame(report.to_rows())

    def render_report(self, *, report: MetricReport, title: str | None = None) -> str:
        """Human-aligned plain-text rendering of a metric table."""
        frame = self.report_frame(report=report)
        table = Table(title=title)
        for column in frame.columns:
            table.add_column(column, justify="left" if column == report.key_column else "right")
        for row in frame.iter_rows():
            table.add_row(*(_format_cell(v) for v in row))
        console = Console(file=io.StringIO(), width=TABLE_WIDTH, color_system=None, record=True)
        console.print(table)
        return console.export_text()

    def save_report(
        self,
        *,
        report: MetricReport,
        filepath: Path | str,
        title: str | None = None,
    ) -> str:
        """Save a metric table as CSV plus an aligned ``.txt`` twin.

        Args:
            report: Rows to save; an aggregate ``mean`` row is appended when the
                report asks for one.
            filepath: CSV path; the text table goes next to it with a ``.txt`` suffix.
            title: Optional caption of the text table.

        Returns:
            The rendered text table.
        """
        filepath = Path(filepath)
        filepath.parent.mkdir(parents=True, exist_ok=True)
        frame = self.report_frame(report=report)
        frame.write_csv(filepath)
        text = self.render_report(report=report, title=title)
        filepath.with_suffix(".txt").write_text(text)
        logger.success(LogMessage.SAVED_TABLE.format(len(frame), filepath))
        return text

    def save_history(self, *, history: TrainingHistory, filepath: Path | str) -> None:
        if not history.records:
            logger.warning(f"{history.name}: no finished epochs, history not written")
            return
        filepath = Path(filepath)
        filepath.parent.mkdir(parents=True, exist_ok=True)
        pl.DataFrame(history.records).write_csv(filepath)
        logger.success(f"Saved {history.name} history ({len(history)} epochs) to {filepath}")


def _format_cell(value: object) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.{FLOAT_DIGITS}f}"
    return str(value)
