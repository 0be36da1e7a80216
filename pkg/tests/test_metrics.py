import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from lle_calibration.config import CalibrationConfig
from lle_calibration.constants import NetworkKind
from lle_calibration.core import InvalidParameterError, InvalidShapeError, clamp01, luma, seeded_rng
from lle_calibration.data_io import gen_clean_corpus
from lle_calibration.metrics import (
    DegenerateDistributionError,
    EmptyFeaturesError,
    cds,
    discriminator_score,
    fit_aggd,
    fit_ggd,
    fit_niqe_model,
    loe,
    niqe_features,
    niqe_score,
    psnr,
    ssim,
)
from lle_calibration.metrics.lightness import lightness
from lle_calibration.nnet import init_network
from lle_calibration.pipeline import gamma_adjust


def test_psnr_cases():
    img = np.full((3, 16, 16), 0.3)
    assert psnr(img, img) == 99.0
    assert psnr(np.zeros((3, 16, 16)), np.full((3, 16, 16), 0.1)) == pytest.approx(20.0)
    assert psnr(np.zeros((3, 16, 16)), np.ones((3, 16, 16))) == pytest.approx(0.0)


def test_psnr_shape_mismatch():
    with pytest.raises(InvalidShapeError):
        psnr(np.zeros((3, 16, 16)), np.zeros((3, 16, 15)))


def test_ssim_identical_is_one(corpus):
    assert ssim(corpus[0], corpus[0]) == pytest.approx(1.0, abs=1e-12)


def test_ssim_constant_images():
    c1 = 0.01**2
    value = ssim(np.zeros((1, 16, 16)), np.ones((1, 16, 16)))
    assert value == pytest.approx(c1 / (1.0 + c1), rel=1e-4)


def test_ssim_is_symmetric_and_below_one(corpus):
    a, b = corpus[0], corpus[1]
    assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)
    assert ssim(a, b) < 1.0


def test_ssim_uses_an_11x11_gaussian_window_on_luma(corpus):
    x, y = luma(corpus[0]), luma(corpus[1])

    def blur(img):
        return gaussian_filter(img, sigma=1.5, truncate=5 / 1.5)[5:-5, 5:-5]

    mu_x, mu_y = blur(x), blur(y)
    var_x, var_y = blur(x * x) - mu_x**2, blur(y * y) - mu_y**2
    cov = blur(x * y) - mu_x * mu_y
    c1, c2 = 0.01**2, 0.03**2
    expected = np.mean((2 * mu_x * mu_y + c1) * (2 * cov + c2) / ((mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)))
    assert ssim(corpus[0], corpus[1]) == pytest.approx(expected, abs=1e-6)


def test_ssim_needs_a_full_window():
    with pytest.raises(InvalidShapeError):
        ssim(np.zeros((1, 10, 16)), np.zeros((1, 10, 16)))


def test_loe_identity_and_monotone_curve(corpus):
    orig = corpus[0].astype(np.float64)
    assert loe(orig, orig) == 0.0
    curved = gamma_adjust(orig, CalibrationConfig(gamma=1.7))
    assert loe(curved, orig) == 0.0


def test_loe_two_pixel_swap():
    original = np.array([[[1.0, 2.0]]])
    enhanced = np.array([[[2.0, 1.0]]])
    assert loe(enhanced, original) == 1.0


def test_loe_matches_brute_force():
    rng = seeded_rng(5)
    original = rng.uniform(0.0, 1.0, (3, 6, 7))
    enhanced = rng.uniform(0.0, 1.0, (3, 6, 7))
    l_orig, l_enh = lightness(original).ravel(), lightness(enhanced).ravel()
    n = l_orig.size
    total = 0
    for i in range(n):
        for j in range(n):
            total += (l_orig[i] >= l_orig[j]) != (l_enh[i] >= l_enh[j])
    assert loe(enhanced, original) == pytest.approx(total / n)


def test_loe_downsamples_large_images():
    rng = seeded_rng(6)
    original = rng.uniform(0.0, 1.0, (1, 200, 100))
    # order on the downsampled grid only
    assert loe(original, original) == 0.0
    assert loe(1.0 - original, original) > 0.0


def test_fit_ggd_gaussian_and_laplace():
    rng = seeded_rng(0)
    normal = rng.normal((100_000,), dtype=np.float64)
    laplace = rng.generator.laplace(size=100_000)
    shape, scale = fit_ggd(normal)
    assert 1.9 <= shape <= 2.1
    assert scale == pytest.approx(1.0, rel=0.02)
    assert 0.9 <= fit_ggd(laplace)[0] <= 1.1


def test_fit_ggd_scale_equivariance():
    samples = seeded_rng(1).normal((100_000,), dtype=np.float64)
    shape, scale = fit_ggd(samples)
    shape3, scale3 = fit_ggd(3.0 * samples)
    assert shape3 == pytest.approx(shape, abs=0.002)
    assert scale3 == pytest.approx(3.0 * scale)


def test_fit_aggd_symmetry_and_mirroring():
    samples = seeded_rng(2).normal((100_000,), dtype=np.float64)
    _, left, right, _ = fit_aggd(samples)
    assert left == pytest.approx(right, rel=0.05)
    skewed = np.where(samples > 0, 2.0 * samples, samples)
    _, left, right, offset = fit_aggd(skewed)
    _, m_left, m_right, m_offset = fit_aggd(-skewed)
    assert (m_left, m_right) == pytest.approx((right, left))
    assert m_offset == pytest.approx(-offset)


def test_fits_reject_degenerate_samples():
    with pytest.raises(DegenerateDistributionError):
        fit_aggd(np.full(500, 0.3))
    with pytest.raises(DegenerateDistributionError):
        fit_ggd(np.full(500, 0.3))
    with pytest.raises(DegenerateDistributionError):
        fit_ggd(np.arange(10.0))


def test_niqe_features_shape(corpus):
    feats = niqe_features(corpus[0], patch_size=16)
    assert feats.ndim == 2 and feats.shape[1] == 36
    assert 1 <= len(feats) <= 4


def test_niqe_features_errors():
    with pytest.raises(EmptyFeaturesError):
        niqe_features(np.full((3, 32, 32), 0.4), patch_size=16)
    with pytest.raises(InvalidShapeError):
        niqe_features(np.zeros((3, 8, 8)), patch_size=16)
    with pytest.raises(InvalidParameterError):
        niqe_features(np.zeros((3, 32, 32)), patch_size=5)


@pytest.fixture(scope="module")
def pristine_model():
    return fit_niqe_model(gen_clean_corpus(24, 64, seeded_rng(20)), patch_size=16, min_patches=20)


def test_niqe_prefers_clean_over_noisy(pristine_model):
    held_out = gen_clean_corpus(50, 64, seeded_rng(21))
    rng = seeded_rng(22)
    clean_scores = np.array([niqe_score(img, pristine_model) for img in held_out])
    noisy_scores = np.array(
        [niqe_score(clamp01(img + 0.1 * rng.normal(img.shape)), pristine_model) for img in held_out]
    )
    assert np.isfinite(clean_scores).all()
    assert np.mean(noisy_scores > clean_scores) >= 0.9


@pytest.mark.parametrize("shift", [-0.04, 0.04])
def test_niqe_barely_moves_under_a_mean_shift(pristine_model, shift):
    # mid-range so the shift never clips
    img = 0.1 + 0.8 * gen_clean_corpus(1, 64, seeded_rng(23))[0].astype(np.float64)
    base = niqe_score(img, pristine_model)
    assert niqe_score(img + shift, pristine_model) == pytest.approx(base, rel=0.05)


def test_niqe_model_needs_enough_patches(corpus):
    with pytest.raises(EmptyFeaturesError):
        fit_niqe_model(corpus, patch_size=16, min_patches=10_000)


def _constant_discriminator(disc_arch, bias: float):
    disc = init_network(NetworkKind.DISCRIMINATOR, disc_arch, seeded_rng(0))
    tensors = {k: np.zeros_like(v) for k, v in disc.tensors.items()}
    tensors["head.b"][...] = bias
    return disc.with_tensors(tensors)


def test_cds_of_uninformed_discriminator_is_half(disc_arch, corpus):
    disc = _constant_discriminator(disc_arch, 0.0)
    assert cds(corpus, disc) == pytest.approx(0.5)
    assert discriminator_score(corpus[0], disc) == pytest.approx(0.5)


def test_cds_is_logistic_of_mean_score(disc_arch, corpus):
    disc = _constant_discriminator(disc_arch, 1.0)
    assert cds(corpus, disc) == pytest.approx(1.0 / (1.0 + np.exp(-1.0)))


def test_cds_validation(disc_arch, enhancer_arch, corpus):
    with pytest.raises(InvalidParameterError):
        cds([], _constant_discriminator(disc_arch, 0.0))
    with pytest.raises(InvalidParameterError):
        cds(corpus, init_network(NetworkKind.ENHANCER, enhancer_arch, seeded_rng(0)))
