import numpy as np
import pytest

from lle_calibration.constants import NetworkKind
from lle_calibration.core import SeededRng, seeded_rng
from lle_calibration.data_io import gen_clean_corpus
from lle_calibration.nnet import ArchDescriptor
from lle_calibration.schedule import NoiseSchedule, ddim_subsequence, make_linear_schedule, schedule_from_alphas


class OraclePredictor:
    """Returns exactly the noise that separates ``x_t`` from a known clean tensor."""

    def __init__(self, x0: np.ndarray, sched: NoiseSchedule):
        self.x0 = x0
        self.sched = sched

    def predict(self, x_t, t):
        a_t = self.sched.alpha_bars[t]
        return (x_t - np.sqrt(a_t) * self.x0) / np.sqrt(1.0 - a_t)


class ConstantPredictor:
    """Predicts the same noise tensor at every timestep and records the calls."""

    def __init__(self, eps):
        self.eps = eps
        self.calls: list[int] = []

    def predict(self, x_t, t):
        self.calls.append(t)
        return np.broadcast_to(np.asarray(self.eps, dtype=x_t.dtype), x_t.shape).copy()


class ZeroPredictor(ConstantPredictor):
    def __init__(self):
        super().__init__(0.0)


@pytest.fixture
def rng() -> SeededRng:
    return seeded_rng(7)


@pytest.fixture
def sched() -> NoiseSchedule:
    return ddim_subsequence(make_linear_schedule(100, 1e-4, 0.02), 10)


@pytest.fixture
def degenerate_sched() -> NoiseSchedule:
    """Every alpha is 1: forward steps add nothing and DDIM steps are identities."""
    return schedule_from_alphas([1.0] * 10)


@pytest.fixture
def enhancer_arch() -> ArchDescriptor:
    return ArchDescriptor(kind=NetworkKind.ENHANCER, channels=2, residual_blocks=1)


@pytest.fixture
def denoiser_arch() -> ArchDescriptor:
    return ArchDescriptor(kind=NetworkKind.DENOISER, channels=2, time_dim=4)


@pytest.fixture
def disc_arch() -> ArchDescriptor:
    return ArchDescriptor(kind=NetworkKind.DISCRIMINATOR, channels=2)


@pytest.fixture
def corpus() -> list[np.ndarray]:
    return gen_clean_corpus(4, 32, seeded_rng(3))
