"""Desk-scale training runs; deselected by default, run with ``pytest -m slow``."""

import numpy as np
import pytest

from lle_calibration.config import CalibrationConfig, DenoiserConfig, DistillConfig, TrainConfig
from lle_calibration.constants import NetworkKind
from lle_calibration.core import seeded_rng
from lle_calibration.data_io import gen_clean_corpus
from lle_calibration.metrics import psnr
from lle_calibration.nnet import ArchDescriptor
from lle_calibration.pipeline import NetworkPredictor, enhance_in_domain, ftd_finetune, train_denoiser, train_uem
from lle_calibration.schedule import ddim_subsequence, make_linear_schedule

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def clean():
    return gen_clean_corpus(16, 32, seeded_rng(100))


@pytest.fixture(scope="module")
def schedule():
    return ddim_subsequence(make_linear_schedule(200, 1e-4, 0.02), 20)


def test_denoiser_loss_decreases(clean, schedule):
    arch = ArchDescriptor(kind=NetworkKind.DENOISER, channels=8, time_dim=8)
    cfg = DenoiserConfig(epochs=20, batch_size=4, patch_size=16, lr=2e-3)
    _, history = train_denoiser(clean, schedule, cfg, arch, seeded_rng(1))
    losses = history.losses(key="loss")
    assert np.mean(losses[-3:]) < np.mean(losses[:3])


def test_uem_runs_its_epoch_budget_with_decaying_rate(clean):
    low = [(0.25 * img**1.5).astype(np.float32) for img in clean[:8]]
    enhancer = ArchDescriptor(kind=NetworkKind.ENHANCER, channels=4, residual_blocks=1)
    disc = ArchDescriptor(kind=NetworkKind.DISCRIMINATOR, channels=4)
    cfg = TrainConfig(epochs=12, batch_size=4, patch_size=32, lr=1e-3)
    models = train_uem(low, clean[8:], cfg, enhancer, disc, seeded_rng(2))
    assert len(models.history) == cfg.epochs
    assert np.isfinite(models.history.losses(key="loss_cyc")).all()
    rates = models.history.losses(key="lr")
    assert rates[0] == cfg.lr and rates[-1] < rates[0]


def test_distillation_on_a_trained_denoiser(clean, schedule):
    denoiser, _ = train_denoiser(
        clean,
        schedule,
        DenoiserConfig(epochs=10, batch_size=4, patch_size=16, lr=2e-3),
        ArchDescriptor(kind=NetworkKind.DENOISER, channels=8, time_dim=8),
        seeded_rng(3),
    )
    low = [(0.3 * img).astype(np.float32) for img in clean[:6]]
    enhancer = ArchDescriptor(kind=NetworkKind.ENHANCER, channels=4, residual_blocks=1)
    models = train_uem(low, clean[6:12], TrainConfig(epochs=2, batch_size=2, patch_size=32), enhancer,
                       ArchDescriptor(kind=NetworkKind.DISCRIMINATOR, channels=4), seeded_rng(4))
    cfg = DistillConfig(epochs=8, batch_size=3, patch_size=32, lr_max=1e-3, lr_min=1e-4, patience=8)
    result = ftd_finetune(
        models.generator, low, cfg, CalibrationConfig(omega=2), NetworkPredictor(denoiser), schedule, seeded_rng(5)
    )
    assert np.isfinite(result.history.losses(key="loss")).all()
    assert any(not np.array_equal(v, models.generator.tensors[k]) for k, v in result.params.tensors.items())
    out = enhance_in_domain(low[0], result.params)
    assert np.isfinite(psnr(out, clean[0]))
