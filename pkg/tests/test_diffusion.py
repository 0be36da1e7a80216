import numpy as np
import pytest
from conftest import ConstantPredictor, OraclePredictor, ZeroPredictor

from lle_calibration.core import clamp01, seeded_rng
from lle_calibration.diffusion import (
    ChainExhaustedError,
    InvalidSigmaError,
    LatentState,
    NumericalSingularityError,
    ddim_step,
    forward_step,
    predict_x0,
    q_sample_closed,
    reverse_chain,
    roundtrip_calibrate,
)
from lle_calibration.schedule import make_linear_schedule, schedule_from_alphas, tail_window, with_eta


def scalar(value: float, dtype=np.float64) -> np.ndarray:
    return np.full((1, 1, 1), value, dtype=dtype)


def test_q_sample_closed_scalar():
    sched = schedule_from_alphas([0.25])
    out = q_sample_closed(scalar(0.8), 1, scalar(0.2), sched)
    assert out.item() == pytest.approx(0.5732051, abs=1e-7)


def test_q_sample_closed_limits(rng):
    x0 = rng.normal((3, 4, 4), dtype=np.float64)
    eps = rng.normal((3, 4, 4), dtype=np.float64)
    assert np.array_equal(q_sample_closed(x0, 1, eps, schedule_from_alphas([1.0])), x0)
    sched = make_linear_schedule(10, 1e-4, 0.02)
    zero = q_sample_closed(x0, 5, np.zeros_like(x0), sched)
    assert np.allclose(zero, np.sqrt(sched.alpha_bars[5]) * x0)


def test_forward_step_degenerate_alpha_is_identity(rng, degenerate_sched):
    x = rng.normal((3, 4, 4))
    out = forward_step(LatentState(x, 0), degenerate_sched, rng)
    assert out.t == 1
    assert np.array_equal(out.tensor, x)


def test_forward_step_is_deterministic(sched):
    x = np.full((3, 8, 8), 0.5, dtype=np.float32)
    a = forward_step(LatentState(x, 0), sched, seeded_rng(1))
    b = forward_step(LatentState(x, 0), sched, seeded_rng(1))
    assert np.array_equal(a.tensor, b.tensor)


def test_forward_step_at_end_of_chain(sched):
    with pytest.raises(ChainExhaustedError):
        forward_step(LatentState(np.zeros((1, 2, 2)), sched.num_steps), sched, seeded_rng(0))


def test_forward_steps_match_closed_marginal():
    # 9e4 independent trials, one per pixel
    sched = make_linear_schedule(200, 1e-4, 0.02)
    x0 = 0.8
    state = LatentState(np.full((1, 300, 300), x0), 0)
    rng = seeded_rng(11)
    for t in range(1, 51):
        state = forward_step(state, sched, rng)
        if t in (1, 10, 50):
            a_t = sched.alpha_bars[t]
            assert state.tensor.mean() == pytest.approx(np.sqrt(a_t) * x0, rel=0.02)
            assert state.tensor.var() == pytest.approx(1.0 - a_t, rel=0.02)


def test_forward_steps_match_closed_marginal_at_random_timesteps():
    sched = make_linear_schedule(200, 1e-4, 0.02)
    checks = {int(t) for t in seeded_rng(12).integers(1, 101, size=5)}
    x0 = 0.8
    state = LatentState(np.full((1, 300, 300), x0), 0)
    rng = seeded_rng(13)
    for t in range(1, max(checks) + 1):
        state = forward_step(state, sched, rng)
        if t in checks:
            a_t = sched.alpha_bars[t]
            assert state.tensor.mean() == pytest.approx(np.sqrt(a_t) * x0, rel=0.02)
            assert state.tensor.var() == pytest.approx(1.0 - a_t, rel=0.02)


def test_predict_x0_scalar():
    sched = schedule_from_alphas([0.25])
    assert predict_x0(scalar(0.5732051), 1, scalar(0.2), sched).item() == pytest.approx(0.8, abs=1e-6)


def test_predict_x0_inverts_forward_marginal(sched, rng):
    x0 = rng.uniform(0.0, 1.0, (3, 8, 8)).astype(np.float32)
    eps = rng.normal((3, 8, 8))
    x_t = q_sample_closed(x0, 30, eps, sched)
    assert np.max(np.abs(predict_x0(x_t, 30, eps, sched) - x0)) <= 1e-6
    assert np.allclose(predict_x0(x_t, 30, np.zeros_like(eps), sched), x_t / np.sqrt(sched.alpha_bars[30]))


def test_predict_x0_singular():
    sched = schedule_from_alphas([1e-13])
    with pytest.raises(NumericalSingularityError):
        predict_x0(scalar(0.1), 1, scalar(0.0), sched)


def test_ddim_step_scalar():
    sched = schedule_from_alphas([0.72, 0.5 / 0.72])
    x_t = np.sqrt(0.5) * 0.6 + np.sqrt(0.5) * 0.1
    out = ddim_step(scalar(x_t), 2, 1, ConstantPredictor(0.1), sched)
    assert out.item() == pytest.approx(np.sqrt(0.72) * 0.6 + np.sqrt(0.28) * 0.1, abs=1e-12)


def test_ddim_step_with_exact_noise_hits_marginal(sched, rng):
    x0 = rng.uniform(0.0, 1.0, (3, 4, 4))
    eps = rng.normal((3, 4, 4), dtype=np.float64)
    x_t = q_sample_closed(x0, 40, eps, sched)
    out = ddim_step(x_t, 40, 20, ConstantPredictor(eps), sched)
    assert np.allclose(out, q_sample_closed(x0, 20, eps, sched), atol=1e-12)
    assert np.allclose(ddim_step(x_t, 40, 0, ConstantPredictor(eps), sched), x0, atol=1e-12)


def test_ddim_step_sigma_validation(sched):
    x = np.zeros((1, 2, 2))
    with pytest.raises(InvalidSigmaError):
        ddim_step(x, 20, 10, ZeroPredictor(), sched, sigma=1.0)
    with pytest.raises(InvalidSigmaError):
        ddim_step(x, 20, 10, ZeroPredictor(), sched, sigma=0.01)


def test_ddim_step_eta_is_seeded(sched):
    noisy = with_eta(sched, 1.0)
    x = np.full((1, 4, 4), 0.3)
    a = ddim_step(x, 50, 40, ZeroPredictor(), noisy, seeded_rng(2))
    b = ddim_step(x, 50, 40, ZeroPredictor(), noisy, seeded_rng(2))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, ddim_step(x, 50, 40, ZeroPredictor(), sched))


@pytest.mark.parametrize("omega", [1, 3, 8])
def test_reverse_chain_oracle_recovers_input(omega, sched, rng):
    x0 = rng.uniform(0.0, 1.0, (3, 16, 16))
    window = tail_window(sched, omega)
    state = LatentState(x0, 0)
    for t in window:
        state = forward_step(state, sched, rng, target=t)
    restored = reverse_chain(state.tensor, window, OraclePredictor(x0, sched), sched)
    assert np.max(np.abs(restored - x0)) <= 1e-5


def test_reverse_chain_single_step_is_one_ddim_step(sched):
    x = np.full((1, 2, 2), 0.4)
    pred = ConstantPredictor(0.3)
    assert np.array_equal(reverse_chain(x, [30], pred, sched), ddim_step(x, 30, 0, pred, sched))


def test_reverse_chain_zero_predictor_matches_scalar_loop(sched):
    steps = [10, 20, 30, 40]
    x = 0.7
    for t, s in zip(reversed(steps), [30, 20, 10, 0]):
        x = np.sqrt(sched.alpha_bars[s]) * x / np.sqrt(sched.alpha_bars[t])
    out = reverse_chain(scalar(0.7), steps, ZeroPredictor(), sched)
    assert out.item() == pytest.approx(x, abs=1e-12)


def test_reverse_chain_visits_steps_top_down(sched):
    pred = ZeroPredictor()
    reverse_chain(scalar(0.1), [10, 20, 30], pred, sched)
    assert pred.calls == [30, 20, 10]


def test_reverse_chain_rejects_unordered_steps(sched):
    with pytest.raises(ValueError):
        reverse_chain(scalar(0.1), [20, 10], ZeroPredictor(), sched)


def test_roundtrip_omega_zero_only_clamps(sched, rng):
    x = rng.uniform(-0.5, 1.5, (3, 4, 4))
    pred = ZeroPredictor()
    assert np.array_equal(roundtrip_calibrate(x, 0, pred, sched, rng), clamp01(x))
    assert pred.calls == []


def test_roundtrip_degenerate_schedule_is_identity(degenerate_sched, rng):
    x = rng.uniform(-0.5, 1.5, (3, 8, 8)).astype(np.float32)
    out = roundtrip_calibrate(x, 5, ZeroPredictor(), degenerate_sched, rng)
    assert np.array_equal(out, clamp01(x))


def test_roundtrip_is_deterministic(sched):
    x = np.full((3, 8, 8), 0.5, dtype=np.float32)
    a = roundtrip_calibrate(x, 3, ZeroPredictor(), sched, seeded_rng(4))
    b = roundtrip_calibrate(x, 3, ZeroPredictor(), sched, seeded_rng(4))
    assert np.array_equal(a, b)
    assert a.min() >= 0.0 and a.max() <= 1.0
