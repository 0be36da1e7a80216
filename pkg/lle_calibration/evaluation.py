"""Batch enhancement, metric evaluation and the ablations."""

import asyncio
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import TypeVar

from loguru import logger

from .config import CalibrationConfig, DistillConfig
from .constants import WindowEnd
from .core import ImageTensor, SeededRng
from .diffusion import NoisePredictor
from .metrics import EmptyFeaturesError, NiqeModel, discriminator_score, loe, niqe_score, psnr, ssim
from .models import ImageMetrics, MetricReport
from .nnet import NetworkParams
from .pipeline import Enhancer, as_enhancer, enhance_out_of_domain, ftd_finetune
from .schedule import NoiseSchedule

T = TypeVar("T")
R = TypeVar("R")

NamedImage = tuple[str, ImageTensor]


async def _gather_limited(items: Sequence[T], fn: Callable[[int, T], R], jobs: int) -> list[R]:
    semaphore = asyncio.Semaphore(jobs)

    async def run(index: int, item: T) -> R:
        async with semaphore:
            return await asyncio.to_thread(fn, index, item)

    return await asyncio.gather(*(run(i, item) for i, item in enumerate(items)))


def map_images(items: Sequence[T], fn: Callable[[int, T], R], *, jobs: int = 1) -> list[R]:
    """Apply ``fn(index, item)`` to every item with at most ``jobs`` in flight.

    Results come back in input order whatever ``jobs`` is.
    """
    if jobs <= 1:
        return [fn(i, item) for i, item in enumerate(items)]
    return asyncio.run(_gather_limited(items, fn, jobs))


@dataclass(frozen=True)
class Calibrator:
    """Everything the out-of-domain path needs besides the enhancer."""

    cfg: CalibrationConfig
    predictor: NoisePredictor
    sched: NoiseSchedule
    end: WindowEnd = WindowEnd.CLEAN

    def with_omega(self, omega: int) -> "Calibrator":
        return Calibrator(self.cfg.model_copy(update={"omega": omega}), self.predictor, self.sched, self.end)


def enhance_images(
    images: Sequence[NamedImage],
    enhancer: NetworkParams | Enhancer,
    *,
    calibrator: Calibrator | None = None,
    rng: SeededRng,
    jobs: int = 1,
) -> list[NamedImage]:
    """Enhance a named image set, calibrating first when a calibrator is given.

    Image i uses the random stream ``rng.child(i)``.
    """
    model = as_enhancer(enhancer)

    def one(index: int, item: NamedImage) -> NamedImage:
        name, y = item
        if calibrator is None:
            return name, model.enhance(y)
        out = enhance_out_of_domain(
            y, model, calibrator.cfg, calibrator.predictor, calibrator.sched, rng.child(index), end=calibrator.end
        )
        return name, out

    return map_images(images, one, jobs=jobs)


def score_image(
    name: str,
    enhanced: ImageTensor,
    *,
    reference: ImageTensor | None = None,
    original: ImageTensor | None = None,
    niqe_model: NiqeModel | None = None,
    discriminator: NetworkParams | None = None,
) -> ImageMetrics:
    """Every metric the given inputs allow for one image."""
    row = ImageMetrics(name)
    if reference is not None:
        row.psnr = psnr(enhanced, reference)
        row.ssim = ssim(enhanced, reference)
    if original is not None:
        row.loe = loe(enhanced, original)
    if niqe_model is not None:
        try:
            row.niqe = niqe_score(enhanced, niqe_model)
        except EmptyFeaturesError:
            logger.warning(f"{name}: no textured patch, NIQE skipped")
    if discriminator is not None:
        row.cds = discriminator_score(enhanced, discriminator)
    return row


def evaluate_images(
    enhanced: Sequence[NamedImage],
    *,
    references: dict[str, ImageTensor] | None = None,
    originals: dict[str, ImageTensor] | None = None,
    niqe_model: NiqeModel | None = None,
    discriminator: NetworkParams | None = None,
    jobs: int = 1,
) -> MetricReport:
    """Per-image metric table of an enhanced set.

    Full-reference columns need ``references`` and LOE needs the ``originals``,
    both keyed by file name.
    """

    def one(_: int, item: NamedImage) -> ImageMetrics:
        name, img = item
        return score_image(
            name,
            img,
            reference=None if references is None else references[name],
            original=None if originals is None else originals[name],
            niqe_model=niqe_model,
            discriminator=discriminator,
        )

    report = MetricReport(map_images(enhanced, one, jobs=jobs))
    _log_summary(report, "evaluation")
    return report


def _log_summary(report: MetricReport, label: str) -> None:
    means = ", ".join(f"{c} = {report.mean(metric=c):.4f}" for c in report.columns)
    logger.info(f"{label}: {len(report.rows)} rows; {means}")


def _set_scores(
    label: str,
    enhanced: Sequence[NamedImage],
    pairs: Sequence[tuple[str, ImageTensor, ImageTensor]],
    niqe_model: NiqeModel | None,
    jobs: int,
) -> ImageMetrics:
    by_name = {name: (low, ref) for name, low, ref in pairs}
    report = evaluate_images(
        enhanced,
        references={n: ref for n, (_, ref) in by_name.items()},
        originals={n: low for n, (low, _) in by_name.items()},
        niqe_model=niqe_model,
        jobs=jobs,
    )
    return ImageMetrics(label, **{c.value: report.mean(metric=c) for c in report.columns})


def ablate_omega(
    pairs: Sequence[tuple[str, ImageTensor, ImageTensor]],
    enhancer: NetworkParams | Enhancer,
    calibrator: Calibrator,
    omegas: Sequence[int],
    *,
    rng: SeededRng,
    jobs: int = 1,
) -> MetricReport:
    """Set-mean PSNR/SSIM of the calibrated pipeline for every round-trip depth.

    Depth 0 is the uncalibrated baseline: the enhancer on the raw input.
    """
    lows = [(name, low) for name, low, _ in pairs]
    rows = []
    for omega in omegas:
        calib = None if omega == 0 else calibrator.with_omega(omega)
        enhanced = enhance_images(lows, enhancer, calibrator=calib, rng=rng, jobs=jobs)
        row = _set_scores(str(omega), enhanced, pairs, None, jobs)
        rows.append(ImageMetrics(row.name, psnr=row.psnr, ssim=row.ssim))
        logger.info(f"omega = {omega}: psnr = {row.psnr:.4f}, ssim = {row.ssim:.4f}")
    return MetricReport(rows, key_column="omega", include_mean=False)


def ablate_distill_omega(
    pairs: Sequence[tuple[str, ImageTensor, ImageTensor]],
    uem: NetworkParams,
    train_lows: Sequence[ImageTensor],
    distill_cfg: DistillConfig,
    calibrator: Calibrator,
    omegas: Sequence[int],
    *,
    rng: SeededRng,
    jobs: int = 1,
) -> MetricReport:
    """Set-mean PSNR/SSIM of the enhancer distilled at every pseudo-reference depth.

    Every depth restarts distillation from ``uem`` on ``train_lows`` with the
    same ``rng``, so only the depth differs between rows. The distilled
    enhancer runs without calibration. Depth 0 is ``uem`` itself.
    """
    lows = [(name, low) for name, low, _ in pairs]
    rows = []
    for omega in omegas:
        net = uem
        if omega:
            calib = calibrator.with_omega(omega)
            net = ftd_finetune(
                uem, train_lows, distill_cfg, calib.cfg, calib.predictor, calib.sched, rng, end=calib.end
            ).params
        row = _set_scores(str(omega), enhance_images(lows, net, rng=rng, jobs=jobs), pairs, None, jobs)
        rows.append(ImageMetrics(row.name, psnr=row.psnr, ssim=row.ssim))
        logger.info(f"distill omega = {omega}: psnr = {row.psnr:.4f}, ssim = {row.ssim:.4f}")
    return MetricReport(rows, key_column="omega", include_mean=False)


@dataclass
class SettingsAblation:
    """In-domain and out-of-domain tables of the settings ablation."""

    in_domain: MetricReport
    out_of_domain: MetricReport


def ablate_settings(
    in_domain_pairs: Sequence[tuple[str, ImageTensor, ImageTensor]],
    ood_pairs: Sequence[tuple[str, ImageTensor, ImageTensor]],
    uem: NetworkParams | Enhancer,
    distilled: NetworkParams | Enhancer,
    calibrator: Calibrator,
    *,
    rng: SeededRng,
    niqe_model: NiqeModel | None = None,
    jobs: int = 1,
) -> SettingsAblation:
    """Compare the pretrained enhancer (#1), the distilled one (#2) and #2 with calibration.

    In-domain data needs no calibration, so its table only has #1 and #2.
    """
    settings = {"#1 uem": uem, "#2 uem+ftd": distilled}
    tables = {}
    for domain, pairs in (("in-domain", in_domain_pairs), ("out-of-domain", ood_pairs)):
        lows = [(name, low) for name, low, _ in pairs]
        rows = [
            _set_scores(label, enhance_images(lows, net, rng=rng, jobs=jobs), pairs, niqe_model, jobs)
            for label, net in settings.items()
        ]
        if domain == "out-of-domain":
            enhanced = enhance_images(lows, distilled, calibrator=calibrator, rng=rng, jobs=jobs)
            rows.append(_set_scores("full uem+ftd+ddc", enhanced, pairs, niqe_model, jobs))
        tables[domain] = MetricReport(rows, key_column="setting", include_mean=False)
        logger.info(f"settings ablation ({domain}): {', '.join(f'{r.name} psnr = {r.psnr:.4f}' for r in rows)}")
    return SettingsAblation(tables["in-domain"], tables["out-of-domain"])
