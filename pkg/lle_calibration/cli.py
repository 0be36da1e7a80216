"""CLI interface for diffusion-guided low-light calibration and enhancement."""

import sys
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path

import typer
from loguru import logger

from .config import AppConfig, ConfigError, parse_config
from .constants import (
    DEFAULT_OMEGAS,
    AblationStage,
    EXIT_CODE_ERROR,
    EXIT_CODE_USAGE,
    CheckpointFile,
    CliHelp,
    DatasetDir,
    LogMessage,
    NetworkKind,
    ReportFile,
)
from .core import ImageTensor, seeded_rng
from .data_io import (
    DatasetLayout,
    load_images,
    load_network,
    load_niqe_model,
    load_pairs,
    save_checkpoint,
    write_dataset,
)
from .evaluation import (
    Calibrator,
    ablate_distill_omega,
    ablate_omega,
    ablate_settings,
    enhance_images,
    evaluate_images,
)
from .metrics import cds as cross_discriminator_score
from .metrics import discriminator_score, fit_niqe_model
from .models import ImageMetrics, MetricReport
from .nnet import NetworkParams
from .pipeline import (
    CurveEnhancer,
    Enhancer,
    NetworkPredictor,
    build_schedule,
    ftd_finetune,
    train_denoiser,
    train_uem,
)
from .storage import ResultStorage

app = typer.Typer(help=CliHelp.APP, no_args_is_help=True)


def _configure(
    config: Path | None, seed: int | None, overrides: list[str] | None, verbose: bool
) -> AppConfig:
    logger.remove()
    logger.add(sys.stderr, level="DEBUG" if verbose else "INFO")
    return parse_config(config, overrides=overrides or (), seed=seed)


@contextmanager
def _exit_codes() -> Iterator[None]:
    """Map configuration errors to the usage exit code and anything else to 1."""
    try:
        yield
    except typer.Exit:
        raise
    except ConfigError as e:
        logger.error(LogMessage.ERROR_OCCURRED.format(e))
        raise typer.Exit(code=EXIT_CODE_USAGE)
    except Exception as e:
        logger.exception(LogMessage.ERROR_OCCURRED.format(e))
        raise typer.Exit(code=EXIT_CODE_ERROR)


def _calibrator(cfg: AppConfig, denoiser: Path) -> Calibrator:
    return Calibrator(
        cfg=cfg.ddc,
        predictor=NetworkPredictor(load_network(denoiser)),
        sched=build_schedule(cfg.schedule, eta=cfg.ddc.eta),
        end=cfg.schedule.window_end,
    )


def _arrays(directory: Path) -> list[ImageTensor]:
    return [img for _, img in load_images(directory)]


def _parse_omegas(text: str) -> list[int]:
    try:
        omegas = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise typer.BadParameter(f"expected comma-separated integers, got {text!r}") from e
    if not omegas or any(o < 0 for o in omegas):
        raise typer.BadParameter(f"depths must be non-negative integers, got {text!r}")
    return omegas


ConfigOption = typer.Option(None, "--config", "-c", help=CliHelp.CONFIG)
SeedOption = typer.Option(None, "--seed", min=0, max=2**64 - 1, help=CliHelp.SEED)
SetOption = typer.Option(None, "--set", help=CliHelp.SET)
VerboseOption = typer.Option(False, "--verbose", "-v", help=CliHelp.VERBOSE)
JobsOption = typer.Option(None, "--jobs", "-j", min=1, help=CliHelp.JOBS)


@app.command("gen-data", help=CliHelp.GEN_DATA)
def gen_data(
    out: Path = typer.Option(..., "--out", "-o", help=CliHelp.OUT),
    config: Path | None = ConfigOption,
    seed: int | None = SeedOption,
    set_: list[str] | None = SetOption,
    verbose: bool = VerboseOption,
) -> None:
    with _exit_codes():
        cfg = _configure(config, seed, set_, verbose)
        write_dataset(out, cfg.data, seeded_rng(cfg.seed), channels=cfg.arch.image_channels)


@app.command("train-denoiser", help=CliHelp.TRAIN_DENOISER)
def train_denoiser_command(
    data: Path = typer.Option(..., "--data", "-d", help=CliHelp.DATA),
    out: Path = typer.Option(..., "--out", "-o", help=CliHelp.RUN),
    config: Path | None = ConfigOption,
    seed: int | None = SeedOption,
    set_: list[str] | None = SetOption,
    verbose: bool = VerboseOption,
) -> None:
    with _exit_codes():
        cfg = _configure(config, seed, set_, verbose)
        sched = build_schedule(cfg.schedule)
        net, history = train_denoiser(
            _arrays(data), sched, cfg.denoiser, cfg.arch.descriptor(NetworkKind.DENOISER), seeded_rng(cfg.seed)
        )
        save_checkpoint(net, out / CheckpointFile.DENOISER)
        ResultStorage().save_history(history=history, filepath=out / ReportFile.DENOISER_HISTORY)


@app.command("train-uem", help=CliHelp.TRAIN_UEM)
def train_uem_command(
    data: Path = typer.Option(..., "--data", "-d", help=CliHelp.DATA),
    out: Path = typer.Option(..., "--out", "-o", help=CliHelp.RUN),
    config: Path | None = ConfigOption,
    seed: int | None = SeedOption,
    set_: list[str] | None = SetOption,
    verbose: bool = VerboseOption,
) -> None:
    with _exit_codes():
        cfg = _configure(config, seed, set_, verbose)
        layout = DatasetLayout(data)
        models = train_uem(
            _arrays(layout.path(DatasetDir.TRAIN_LOW)),
            _arrays(layout.path(DatasetDir.TRAIN_NORMAL)),
            cfg.uem,
            cfg.arch.descriptor(NetworkKind.ENHANCER),
            cfg.arch.descriptor(NetworkKind.DISCRIMINATOR),
            seeded_rng(cfg.seed),
        )
        save_checkpoint(models.generator, out / CheckpointFile.UEM)
        save_checkpoint(models.inverse, out / CheckpointFile.UEM_INVERSE)
        save_checkpoint(models.disc_normal, out / CheckpointFile.DISC_NORMAL)
        save_checkpoint(models.disc_low, out / CheckpointFile.DISC_LOW)
        ResultStorage().save_history(history=models.history, filepath=out / ReportFile.UEM_HISTORY)


@app.command(help=CliHelp.DISTILL)
def distill(
    data: Path = typer.Option(..., "--data", "-d", help=CliHelp.DATA),
    run: Path = typer.Option(..., "--run", "-r", help=CliHelp.RUN),
    save_pseudo: Path | None = typer.Option(None, "--save-pseudo", help=CliHelp.SAVE_PSEUDO),
    config: Path | None = ConfigOption,
    seed: int | None = SeedOption,
    set_: list[str] | None = SetOption,
    verbose: bool = VerboseOption,
) -> None:
    with _exit_codes():
        cfg = _configure(config, seed, set_, verbose)
        named = load_images(DatasetLayout(data).path(DatasetDir.TRAIN_LOW))
        calibrator = _calibrator(cfg, run / CheckpointFile.DENOISER)
        result = ftd_finetune(
            load_network(run / CheckpointFile.UEM),
            [img for _, img in named],
            cfg.distill,
            calibrator.cfg,
            calibrator.predictor,
            calibrator.sched,
            seeded_rng(cfg.seed),
            end=calibrator.end,
            keep_pseudo=save_pseudo is not None,
        )
        storage = ResultStorage()
        save_checkpoint(result.params, run / CheckpointFile.DISTILLED)
        storage.save_history(history=result.history, filepath=run / ReportFile.DISTILL_HISTORY)
        if save_pseudo is not None:
            pseudo = [(named[i][0], img) for i, img in sorted(result.pseudo_refs.items())]
            storage.save_images(images=pseudo, directory=save_pseudo)


@app.command(help=CliHelp.ENHANCE)
def enhance(
    input_dir: Path = typer.Option(..., "--input", "-i", help=CliHelp.INPUT),
    out: Path = typer.Option(..., "--out", "-o", help=CliHelp.OUT),
    checkpoint: Path | None = typer.Option(None, "--checkpoint", help=CliHelp.CHECKPOINT),
    curve: bool = typer.Option(False, "--curve", help=CliHelp.CURVE),
    ddc: bool = typer.Option(False, "--ddc", help=CliHelp.DDC),
    denoiser: Path | None = typer.Option(None, "--denoiser", help=CliHelp.DENOISER),
    jobs: int | None = JobsOption,
    config: Path | None = ConfigOption,
    seed: int | None = SeedOption,
    set_: list[str] | None = SetOption,
    verbose: bool = VerboseOption,
) -> None:
    if (checkpoint is None) == (not curve):
        raise typer.BadParameter("give exactly one of --checkpoint and --curve")
    if ddc and denoiser is None:
        raise typer.BadParameter("--ddc needs --denoiser")
    with _exit_codes():
        cfg = _configure(config, seed, set_, verbose)
        enhancer: NetworkParams | Enhancer = CurveEnhancer() if curve else load_network(checkpoint)
        enhanced = enhance_images(
            load_images(input_dir),
            enhancer,
            calibrator=_calibrator(cfg, denoiser) if ddc else None,
            rng=seeded_rng(cfg.seed),
            jobs=jobs or cfg.jobs,
        )
        ResultStorage().save_images(images=enhanced, directory=out)


@app.command(help=CliHelp.EVALUATE)
def evaluate(
    input_dir: Path = typer.Option(..., "--input", "-i", help=CliHelp.INPUT),
    out: Path = typer.Option(..., "--out", "-o", help=CliHelp.OUT),
    ref: Path | None = typer.Option(None, "--ref", help=CliHelp.REF),
    low: Path | None = typer.Option(None, "--low", help=CliHelp.LOW),
    niqe_model: Path | None = typer.Option(None, "--niqe", help=CliHelp.NIQE_MODEL),
    discriminator: Path | None = typer.Option(None, "--discriminator", help=CliHelp.DISCRIMINATOR),
    jobs: int | None = JobsOption,
    config: Path | None = ConfigOption,
    seed: int | None = SeedOption,
    set_: list[str] | None = SetOption,
    verbose: bool = VerboseOption,
) -> None:
    with _exit_codes():
        cfg = _configure(config, seed, set_, verbose)
        references = None if ref is None else {name: r for name, _, r in load_pairs(input_dir, ref)}
        originals = None if low is None else {name: o for name, _, o in load_pairs(input_dir, low)}
        report = evaluate_images(
            load_images(input_dir),
            references=references,
            originals=originals,
            niqe_model=None if niqe_model is None else load_niqe_model(niqe_model),
            discriminator=None if discriminator is None else load_network(discriminator),
            jobs=jobs or cfg.jobs,
        )
        text = ResultStorage().save_report(report=report, filepath=out / ReportFile.METRICS, title=str(input_dir))
        typer.echo(text)


@app.command("niqe-fit", help=CliHelp.NIQE_FIT)
def niqe_fit(
    data: Path = typer.Option(..., "--data", "-d", help=CliHelp.DATA),
    out: Path = typer.Option(..., "--out", "-o", help=CliHelp.RUN),
    config: Path | None = ConfigOption,
    seed: int | None = SeedOption,
    set_: list[str] | None = SetOption,
    verbose: bool = VerboseOption,
) -> None:
    with _exit_codes():
        cfg = _configure(config, seed, set_, verbose)
        m = cfg.metrics
        model = fit_niqe_model(
            _arrays(data),
            patch_size=m.niqe_patch,
            sharpness_fraction=m.sharpness_fraction,
            ridge=m.ridge,
            min_patches=m.min_patches,
        )
        save_checkpoint(model, out / CheckpointFile.NIQE)


@app.command("cds", help=CliHelp.CDS)
def cds_command(
    input_dir: Path = typer.Option(..., "--input", "-i", help=CliHelp.INPUT),
    discriminator: Path = typer.Option(..., "--discriminator", help=CliHelp.DISCRIMINATOR),
    out: Path | None = typer.Option(None, "--out", "-o", help=CliHelp.OUT),
    config: Path | None = ConfigOption,
    seed: int | None = SeedOption,
    set_: list[str] | None = SetOption,
    verbose: bool = VerboseOption,
) -> None:
    with _exit_codes():
        _configure(config, seed, set_, verbose)
        disc = load_network(discriminator)
        named = load_images(input_dir)
        score = cross_discriminator_score([img for _, img in named], disc)
        if out is not None:
            report = MetricReport([ImageMetrics(name, cds=discriminator_score(img, disc)) for name, img in named])
            ResultStorage().save_report(report=report, filepath=out / ReportFile.CDS)
        typer.echo(f"cds = {score:.6f}")


def _ood_pairs(data: Path) -> list[tuple[str, ImageTensor, ImageTensor]]:
    layout = DatasetLayout(data)
    return load_pairs(layout.path(DatasetDir.OOD_LOW), layout.path(DatasetDir.OOD_REF))


@app.command("ablate-omega", help=CliHelp.ABLATE_OMEGA)
def ablate_omega_command(
    data: Path = typer.Option(..., "--data", "-d", help=CliHelp.DATA),
    run: Path = typer.Option(..., "--run", "-r", help=CliHelp.RUN),
    out: Path = typer.Option(..., "--out", "-o", help=CliHelp.OUT),
    omegas: str = typer.Option(DEFAULT_OMEGAS, "--omegas", help=CliHelp.OMEGAS),
    stage: AblationStage = typer.Option(AblationStage.DDC, "--stage", help=CliHelp.STAGE),
    checkpoint: Path | None = typer.Option(None, "--checkpoint", help=CliHelp.CHECKPOINT),
    jobs: int | None = JobsOption,
    config: Path | None = ConfigOption,
    seed: int | None = SeedOption,
    set_: list[str] | None = SetOption,
    verbose: bool = VerboseOption,
) -> None:
    depths = _parse_omegas(omegas)
    with _exit_codes():
        cfg = _configure(config, seed, set_, verbose)
        calibrator = _calibrator(cfg, run / CheckpointFile.DENOISER)
        if stage == AblationStage.FTD:
            layout = DatasetLayout(data)
            report = ablate_distill_omega(
                load_pairs(layout.path(DatasetDir.TEST_LOW), layout.path(DatasetDir.TEST_REF)),
                load_network(checkpoint or run / CheckpointFile.UEM),
                _arrays(layout.path(DatasetDir.TRAIN_LOW)),
                cfg.distill,
                calibrator,
                depths,
                rng=seeded_rng(cfg.seed),
                jobs=jobs or cfg.jobs,
            )
            name = ReportFile.DISTILL_OMEGA_ABLATION
        else:
            report = ablate_omega(
                _ood_pairs(data),
                load_network(checkpoint or run / CheckpointFile.DISTILLED),
                calibrator,
                depths,
                rng=seeded_rng(cfg.seed),
                jobs=jobs or cfg.jobs,
            )
            name = ReportFile.OMEGA_ABLATION
        typer.echo(ResultStorage().save_report(report=report, filepath=out / name, title=f"{stage} depth"))


@app.command("ablate-settings", help=CliHelp.ABLATE_SETTINGS)
def ablate_settings_command(
    data: Path = typer.Option(..., "--data", "-d", help=CliHelp.DATA),
    run: Path = typer.Option(..., "--run", "-r", help=CliHelp.RUN),
    out: Path = typer.Option(..., "--out", "-o", help=CliHelp.OUT),
    niqe_model: Path | None = typer.Option(None, "--niqe", help=CliHelp.NIQE_MODEL),
    jobs: int | None = JobsOption,
    config: Path | None = ConfigOption,
    seed: int | None = SeedOption,
    set_: list[str] | None = SetOption,
    verbose: bool = VerboseOption,
) -> None:
    with _exit_codes():
        cfg = _configure(config, seed, set_, verbose)
        layout = DatasetLayout(data)
        result = ablate_settings(
            load_pairs(layout.path(DatasetDir.TEST_LOW), layout.path(DatasetDir.TEST_REF)),
            _ood_pairs(data),
            load_network(run / CheckpointFile.UEM),
            load_network(run / CheckpointFile.DISTILLED),
            _calibrator(cfg, run / CheckpointFile.DENOISER),
            rng=seeded_rng(cfg.seed),
            niqe_model=None if niqe_model is None else load_niqe_model(niqe_model),
            jobs=jobs or cfg.jobs,
        )
        storage = ResultStorage()
        for report, name, title in (
            (result.in_domain, ReportFile.SETTINGS_IN_DOMAIN, "in-domain"),
            (result.out_of_domain, ReportFile.SETTINGS_OUT_OF_DOMAIN, "out-of-domain"),
        ):
            typer.echo(storage.save_report(report=report, filepath=out / name, title=title))
