import numpy as np
import pytest
from conftest import ZeroPredictor

from lle_calibration.config import CalibrationConfig, DistillConfig
from lle_calibration.constants import MetricKey, NetworkKind
from lle_calibration.core import seeded_rng
from lle_calibration.evaluation import (
    Calibrator,
    ablate_distill_omega,
    ablate_omega,
    ablate_settings,
    enhance_images,
    evaluate_images,
    map_images,
    score_image,
)
from lle_calibration.metrics import NiqeModel
from lle_calibration.nnet import init_network
from lle_calibration.pipeline import CurveEnhancer, ftd_finetune


@pytest.fixture
def pairs(corpus):
    return [(f"{i:04d}.ppm", (0.3 * img).astype(np.float32), img) for i, img in enumerate(corpus)]


@pytest.fixture
def calibrator(sched):
    return Calibrator(CalibrationConfig(omega=2), ZeroPredictor(), sched)


def test_map_images_keeps_input_order():
    items = list(range(12))
    expected = [(i, 2 * x) for i, x in enumerate(items)]
    assert map_images(items, lambda i, x: (i, 2 * x)) == expected
    assert map_images(items, lambda i, x: (i, 2 * x), jobs=4) == expected


def test_enhance_images_is_independent_of_jobs(pairs, calibrator):
    lows = [(name, low) for name, low, _ in pairs]
    serial = enhance_images(lows, CurveEnhancer(), calibrator=calibrator, rng=seeded_rng(1), jobs=1)
    parallel = enhance_images(lows, CurveEnhancer(), calibrator=calibrator, rng=seeded_rng(1), jobs=3)
    assert [name for name, _ in serial] == [name for name, _ in lows]
    assert all(a[0] == b[0] and np.array_equal(a[1], b[1]) for a, b in zip(serial, parallel))


def test_calibrator_with_omega(calibrator):
    deeper = calibrator.with_omega(5)
    assert deeper.cfg.omega == 5
    assert calibrator.cfg.omega == 2
    assert deeper.sched is calibrator.sched


def test_evaluate_identical_images(corpus):
    named = [(f"{i}", img) for i, img in enumerate(corpus)]
    report = evaluate_images(named, references=dict(named), originals=dict(named), jobs=2)
    assert report.columns == [MetricKey.PSNR, MetricKey.SSIM, MetricKey.LOE]
    assert report.mean(metric=MetricKey.PSNR) == 99.0
    assert report.mean(metric=MetricKey.SSIM) == pytest.approx(1.0)
    assert report.mean(metric=MetricKey.LOE) == 0.0


def test_score_image_skips_niqe_on_flat_images():
    rng = seeded_rng(0)
    a = rng.normal((36, 36), dtype=np.float64)
    model = NiqeModel(mean=np.zeros(36), cov=a @ a.T + np.eye(36), patch_size=16, ridge=1e-4)
    row = score_image("flat", np.full((3, 32, 32), 0.4, dtype=np.float32), niqe_model=model)
    assert row.niqe is None
    assert row.psnr is None


def test_ablate_omega_rows(pairs, calibrator):
    curve = CurveEnhancer()
    report = ablate_omega(pairs, curve, calibrator, [0, 1, 3, 5, 8], rng=seeded_rng(2))
    assert [row.name for row in report.rows] == ["0", "1", "3", "5", "8"]
    assert report.key_column == "omega"
    assert len(report.to_rows()) == 5
    lows = [(name, low) for name, low, _ in pairs]
    baseline = evaluate_images(
        enhance_images(lows, curve, rng=seeded_rng(2)),
        references={name: ref for name, _, ref in pairs},
    )
    assert report.rows[0].psnr == pytest.approx(baseline.mean(metric=MetricKey.PSNR))
    assert all(row.loe is None for row in report.rows)


def test_ablate_settings_labels(pairs, calibrator):
    result = ablate_settings(
        pairs, pairs, CurveEnhancer(0.4), CurveEnhancer(0.5), calibrator, rng=seeded_rng(3)
    )
    assert [row.name for row in result.in_domain.rows] == ["#1 uem", "#2 uem+ftd"]
    assert [row.name for row in result.out_of_domain.rows] == ["#1 uem", "#2 uem+ftd", "full uem+ftd+ddc"]
    assert result.out_of_domain.key_column == "setting"
    assert not result.in_domain.include_mean
    assert result.in_domain.rows[0].psnr != result.in_domain.rows[1].psnr


def test_ablate_distill_omega_redistils_from_the_pretrained_enhancer(pairs, calibrator, enhancer_arch):
    uem = init_network(NetworkKind.ENHANCER, enhancer_arch, seeded_rng(0))
    lows = [(name, low) for name, low, _ in pairs]
    train = [low for _, low in lows]
    refs = {name: ref for name, _, ref in pairs}
    cfg = DistillConfig(epochs=1, batch_size=2, patch_size=32, lr_max=1e-2, lr_min=1e-3)
    report = ablate_distill_omega(pairs, uem, train, cfg, calibrator, [0, 2], rng=seeded_rng(4))
    assert [row.name for row in report.rows] == ["0", "2"]
    assert report.key_column == "omega"

    def mean_psnr(net):
        return evaluate_images(enhance_images(lows, net, rng=seeded_rng(4)), references=refs).mean(metric=MetricKey.PSNR)

    distilled = ftd_finetune(uem, train, cfg, calibrator.cfg, calibrator.predictor, calibrator.sched, seeded_rng(4)).params
    assert report.rows[0].psnr == pytest.approx(mean_psnr(uem))
    assert report.rows[1].psnr == pytest.approx(mean_psnr(distilled))
    assert report.rows[0].psnr != report.rows[1].psnr
