import sys

import numpy as np
import polars as pl
import pytest
from loguru import logger
from typer.testing import CliRunner

from lle_calibration import cli
from lle_calibration.constants import CheckpointFile, DatasetDir, NetworkKind, ReportFile
from lle_calibration.core import seeded_rng
from lle_calibration.data_io import DatasetLayout, load_images, load_network, load_niqe_model, save_checkpoint, save_image
from lle_calibration.nnet import identity_enhancer, init_network
from lle_calibration.schedule import schedule_from_alphas

runner = CliRunner()

TINY = [
    "--set", "arch.enhancer_channels=2",
    "--set", "arch.enhancer_blocks=1",
    "--set", "arch.denoiser_channels=2",
    "--set", "arch.time_dim=4",
    "--set", "arch.disc_channels=2",
    "--set", "schedule.num_steps=20",
    "--set", "schedule.ddim_steps=10",
]


@pytest.fixture(autouse=True)
def restore_logger():
    yield
    logger.remove()
    logger.add(sys.stderr)


def write_images(directory, n: int, size: int, seed: int = 0) -> list[np.ndarray]:
    rng = seeded_rng(seed)
    images = []
    for i in range(n):
        img = (rng.integers(0, 256, size=(3, size, size)) / 255.0).astype(np.float32)
        save_image(img, directory / f"{i:04d}.ppm")
        images.append(img)
    return images


def test_gen_data(tmp_path):
    args = ["gen-data", "--out", str(tmp_path), "--seed", "3"]
    args += ["--set", "data.n_train=2", "--set", "data.n_test=1", "--set", "data.n_pristine=1", "--set", "data.size=32"]
    result = runner.invoke(cli.app, args)
    assert result.exit_code == 0, result.output
    layout = DatasetLayout(tmp_path)
    assert len(load_images(layout.path(DatasetDir.TRAIN_LOW))) == 2
    assert len(load_images(layout.path(DatasetDir.OOD_REF))) == 1


def test_unknown_config_key_is_a_usage_error(tmp_path):
    result = runner.invoke(cli.app, ["gen-data", "--out", str(tmp_path), "--set", "ddc.gama=2"])
    assert result.exit_code == 2


def test_config_file_errors_are_usage_errors(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("ddc.omega = -1\n")
    result = runner.invoke(cli.app, ["gen-data", "--out", str(tmp_path / "data"), "--config", str(conf)])
    assert result.exit_code == 2


def test_evaluate_identical_pairs(tmp_path):
    write_images(tmp_path / "imgs", 2, 16)
    result = runner.invoke(
        cli.app, ["evaluate", "--input", str(tmp_path / "imgs"), "--ref", str(tmp_path / "imgs"), "--out", str(tmp_path / "out")]
    )
    assert result.exit_code == 0, result.output
    frame = pl.read_csv(tmp_path / "out" / ReportFile.METRICS)
    assert frame["image"].to_list() == ["0000.ppm", "0001.ppm", "mean"]
    assert frame["psnr"].to_list() == [99.0, 99.0, 99.0]
    assert frame["ssim"].to_list() == pytest.approx([1.0, 1.0, 1.0])
    assert "99.0000" in result.output


def test_missing_input_folder_fails(tmp_path):
    result = runner.invoke(cli.app, ["evaluate", "--input", str(tmp_path / "absent"), "--out", str(tmp_path / "out")])
    assert result.exit_code == 1


def test_enhance_with_curve(tmp_path):
    write_images(tmp_path / "low", 2, 16)
    result = runner.invoke(cli.app, ["enhance", "--input", str(tmp_path / "low"), "--out", str(tmp_path / "enh"), "--curve", "-j", "2"])
    assert result.exit_code == 0, result.output
    assert [name for name, _ in load_images(tmp_path / "enh")] == ["0000.ppm", "0001.ppm"]


def test_enhance_argument_checks(tmp_path):
    write_images(tmp_path / "low", 1, 16)
    base = ["enhance", "--input", str(tmp_path / "low"), "--out", str(tmp_path / "enh")]
    assert runner.invoke(cli.app, base).exit_code == 2
    assert runner.invoke(cli.app, [*base, "--curve", "--checkpoint", str(tmp_path / "x.ckpt")]).exit_code == 2
    assert runner.invoke(cli.app, [*base, "--curve", "--ddc"]).exit_code == 2
    assert runner.invoke(cli.app, [*base, "--checkpoint", str(tmp_path / "missing.ckpt")]).exit_code == 1


def test_enhance_ddc_with_identity_schedule_and_enhancer(tmp_path, monkeypatch, enhancer_arch, denoiser_arch):
    images = write_images(tmp_path / "low", 2, 16, seed=4)
    phi = identity_enhancer(init_network(NetworkKind.ENHANCER, enhancer_arch, seeded_rng(0)))
    save_checkpoint(phi, tmp_path / "uem.ckpt")
    save_checkpoint(init_network(NetworkKind.DENOISER, denoiser_arch, seeded_rng(0)), tmp_path / "denoiser.ckpt")
    monkeypatch.setattr(cli, "build_schedule", lambda cfg, eta=0.0: schedule_from_alphas([1.0] * 10))
    result = runner.invoke(
        cli.app,
        [
            "enhance", "--input", str(tmp_path / "low"), "--out", str(tmp_path / "enh"),
            "--checkpoint", str(tmp_path / "uem.ckpt"), "--ddc", "--denoiser", str(tmp_path / "denoiser.ckpt"),
            "--set", "ddc.gamma=1",
        ],
    )
    assert result.exit_code == 0, result.output
    enhanced = [img for _, img in load_images(tmp_path / "enh")]
    assert all(np.allclose(out, img, atol=1e-6) for out, img in zip(enhanced, images))


def test_cds_of_zero_discriminator(tmp_path, disc_arch):
    write_images(tmp_path / "imgs", 2, 24)
    disc = init_network(NetworkKind.DISCRIMINATOR, disc_arch, seeded_rng(0))
    save_checkpoint(disc.with_tensors({k: np.zeros_like(v) for k, v in disc.tensors.items()}), tmp_path / "d.ckpt")
    result = runner.invoke(
        cli.app,
        ["cds", "--input", str(tmp_path / "imgs"), "--discriminator", str(tmp_path / "d.ckpt"), "--out", str(tmp_path / "out")],
    )
    assert result.exit_code == 0, result.output
    assert "cds = 0.500000" in result.output
    assert (tmp_path / "out" / ReportFile.CDS).exists()


def test_end_to_end_on_a_tiny_dataset(tmp_path):
    data, run, out = tmp_path / "data", tmp_path / "run", tmp_path / "out"
    sizes = ["--set", "data.n_train=2", "--set", "data.n_test=1", "--set", "data.n_pristine=2", "--set", "data.size=32"]
    steps = [
        ["gen-data", "--out", str(data), *sizes],
        [
            "train-denoiser", "--data", str(data / DatasetDir.PRISTINE), "--out", str(run), *TINY,
            "--set", "denoiser.epochs=1", "--set", "denoiser.patch_size=8",
        ],
        [
            "train-uem", "--data", str(data), "--out", str(run), *TINY,
            "--set", "uem.epochs=1", "--set", "uem.batch_size=2", "--set", "uem.patch_size=32",
        ],
        [
            "distill", "--data", str(data), "--run", str(run), "--save-pseudo", str(out / "pseudo"), *TINY,
            "--set", "distill.epochs=1", "--set", "distill.patch_size=32", "--set", "distill.batch_size=2",
        ],
        ["ablate-omega", "--data", str(data), "--run", str(run), "--out", str(out), "--omegas", "0,2", *TINY],
        [
            "ablate-omega", "--data", str(data), "--run", str(run), "--out", str(out), "--omegas", "0,2", "--stage", "ftd", *TINY,
            "--set", "distill.epochs=1", "--set", "distill.patch_size=32", "--set", "distill.batch_size=2",
        ],
        ["ablate-settings", "--data", str(data), "--run", str(run), "--out", str(out), *TINY],
        [
            "niqe-fit", "--data", str(data / DatasetDir.PRISTINE), "--out", str(run),
            "--set", "metrics.min_patches=2", "--set", "metrics.niqe_patch=16",
        ],
    ]
    for args in steps:
        result = runner.invoke(cli.app, args)
        assert result.exit_code == 0, f"{args[0]}: {result.output}"

    for name in CheckpointFile:
        assert (run / name).exists(), name
    assert load_network(run / CheckpointFile.DISTILLED).kind == NetworkKind.ENHANCER
    assert load_niqe_model(run / CheckpointFile.NIQE).patch_size > 0
    assert len(load_images(out / "pseudo")) == 2
    omega = pl.read_csv(out / ReportFile.OMEGA_ABLATION)
    assert omega["omega"].to_list() == [0, 2]
    distill_omega = pl.read_csv(out / ReportFile.DISTILL_OMEGA_ABLATION)
    assert distill_omega["omega"].to_list() == [0, 2]
    assert distill_omega.columns == ["omega", "psnr", "ssim"]
    settings = pl.read_csv(out / ReportFile.SETTINGS_OUT_OF_DOMAIN)
    assert settings["setting"].to_list() == ["#1 uem", "#2 uem+ftd", "full uem+ftd+ddc"]


def test_same_seed_gives_byte_identical_artifacts(tmp_path):
    sizes = ["--set", "data.n_train=1", "--set", "data.n_test=1", "--set", "data.n_pristine=1", "--set", "data.size=32"]
    for name in ("a", "b"):
        result = runner.invoke(cli.app, ["gen-data", "--out", str(tmp_path / name), "--seed", "11", *sizes])
        assert result.exit_code == 0, result.output
    first = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*.ppm"))
    assert first == sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*.ppm"))
    assert all((tmp_path / "a" / p).read_bytes() == (tmp_path / "b" / p).read_bytes() for p in first)


def test_set_overrides_the_config_file(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("data.n_train = 3\ndata.n_test = 2\ndata.n_pristine = 1\ndata.size = 32\n")
    result = runner.invoke(
        cli.app, ["gen-data", "--out", str(tmp_path / "data"), "--config", str(conf), "--set", "data.n_train=1"]
    )
    assert result.exit_code == 0, result.output
    layout = DatasetLayout(tmp_path / "data")
    assert len(load_images(layout.path(DatasetDir.TRAIN_LOW))) == 1
    assert len(load_images(layout.path(DatasetDir.TEST_LOW))) == 2
