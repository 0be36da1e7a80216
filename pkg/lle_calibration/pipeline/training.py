"""Training loops: noise predictor, cycle-consistent enhancer pretraining and distillation."""

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from loguru import logger
from numpy.typing import NDArray

from ..config import CalibrationConfig, DenoiserConfig, DistillConfig, TrainConfig
from ..constants import AdversarialLoss, LogMessage, NetworkKind, WindowEnd
from ..core import ImageTensor, InvalidParameterError, SeededRng
from ..diffusion import NoisePredictor
from ..models import TrainingHistory
from ..nnet import (
    AdamState,
    ArchDescriptor,
    NetworkParams,
    adam_step,
    adversarial_loss,
    backward,
    cosine_lr,
    denoiser_train_step,
    forward,
    init_network,
    l1_loss,
    linear_decay_lr,
)
from ..schedule import NoiseSchedule
from .calibration import ftd_pseudo_ref

# child streams of a training rng; epochs use child(epoch + 1)
_INIT_STREAM = 0


def random_crop(img: ImageTensor, size: int, rng: SeededRng) -> ImageTensor:
    """Square crop of side ``size``; images no larger than ``size`` are returned whole."""
    h, w = img.shape[-2:]
    if size >= h and size >= w:
        return img
    if size > h or size > w:
        raise InvalidParameterError(f"patch {size} does not fit a {h}x{w} image")
    top = int(rng.integers(0, h - size + 1))
    left = int(rng.integers(0, w - size + 1))
    return img[..., top : top + size, left : left + size]


def _batches(n: int, batch_size: int, rng: SeededRng) -> list[NDArray[np.int64]]:
    order = rng.permutation(n)
    return [order[i : i + batch_size] for i in range(0, n, batch_size)]


def _require_images(images: Sequence[ImageTensor], what: str) -> None:
    if len(images) == 0:
        raise InvalidParameterError(f"{what} dataset is empty")


def _log_epoch(history: TrainingHistory, epoch: int, epochs: int, key: str) -> None:
    logger.info(LogMessage.EPOCH_LOSS.format(epoch + 1, epochs, f"{history.name} {key}", history.records[-1][key]))


def train_denoiser(
    images: Sequence[ImageTensor],
    sched: NoiseSchedule,
    cfg: DenoiserConfig,
    arch: ArchDescriptor,
    rng: SeededRng,
) -> tuple[NetworkParams, TrainingHistory]:
    """Fit the noise predictor on clean images with the epsilon-regression objective.

    Returns:
        The trained parameters and the per-epoch mean loss.
    """
    _require_images(images, "clean")
    net = init_network(NetworkKind.DENOISER, arch, rng.child(_INIT_STREAM))
    state = cfg.adam_state()
    history = TrainingHistory("denoiser")

    for epoch in range(cfg.epochs):
        epoch_rng = rng.child(epoch + 1)
        crop_rng = epoch_rng.child(1)
        total, count = 0.0, 0
        for b, idx in enumerate(_batches(len(images), cfg.batch_size, epoch_rng.child(0))):
            batch = np.stack([random_crop(images[i], cfg.patch_size, crop_rng) for i in idx])
            loss, net, state = denoiser_train_step(net, state, batch, sched, epoch_rng.child(b + 2), cfg.lr)
            logger.debug(f"denoiser epoch {epoch + 1} batch {b}: loss = {loss:.6f}")
            total += loss * len(idx)
            count += len(idx)
        history.record(epoch=epoch + 1, loss=total / count)
        _log_epoch(history, epoch, cfg.epochs, "loss")
    return net, history


@dataclass
class UemModels:
    """Everything cycle-consistent pretraining produces.

    Attributes:
        generator: Low to normal enhancer; this is the UEM.
        inverse: Normal to low generator.
        disc_normal: Patch discriminator of the normal-light domain.
        disc_low: Patch discriminator of the low-light domain.
        history: Per-epoch generator, cycle and discriminator losses.
    """

    generator: NetworkParams
    inverse: NetworkParams
    disc_normal: NetworkParams
    disc_low: NetworkParams
    history: TrainingHistory = field(default_factory=lambda: TrainingHistory("uem"))


def _discriminator_grads(
    disc: NetworkParams, real: NDArray, fake: NDArray, form: AdversarialLoss
) -> tuple[float, dict[str, NDArray]]:
    real_scores, real_tape = forward(disc, real)
    fake_scores, fake_tape = forward(disc, fake)
    loss_real, d_real = adversarial_loss(real_scores, True, form)
    loss_fake, d_fake = adversarial_loss(fake_scores, False, form)
    g_real, _ = backward(disc, real_tape, 0.5 * d_real)
    g_fake, _ = backward(disc, fake_tape, 0.5 * d_fake)
    return 0.5 * (loss_real + loss_fake), {k: g_real[k] + g_fake[k] for k in g_real}


def _fool_grad(disc: NetworkParams, fake: NDArray, form: AdversarialLoss) -> tuple[float, NDArray]:
    """Generator-side adversarial loss and its gradient w.r.t. the fake images."""
    scores, tape = forward(disc, fake)
    loss, d_scores = adversarial_loss(scores, True, form)
    _, d_fake = backward(disc, tape, d_scores)
    return loss, d_fake


def train_uem(
    low_images: Sequence[ImageTensor],
    normal_images: Sequence[ImageTensor],
    cfg: TrainConfig,
    enhancer_arch: ArchDescriptor,
    disc_arch: ArchDescriptor,
    rng: SeededRng,
) -> UemModels:
    """Unpaired cycle-consistent adversarial pretraining of the enhancer.

    Both generators are updated together on adversarial plus ``lambda_cyc``
    weighted L1 cycle losses; the two discriminators are then updated on the
    same fakes. The learning rate stays constant and decays linearly to 0 over
    the last ``decay_fraction`` of the epochs.

    Raises:
        InvalidParameterError: If either dataset is empty.
    """
    _require_images(low_images, "low-light")
    _require_images(normal_images, "normal-light")
    init_rng = rng.child(_INIT_STREAM)
    models = UemModels(
        generator=init_network(NetworkKind.ENHANCER, enhancer_arch, init_rng.child(0)),
        inverse=init_network(NetworkKind.ENHANCER, enhancer_arch, init_rng.child(1)),
        disc_normal=init_network(NetworkKind.DISCRIMINATOR, disc_arch, init_rng.child(2)),
        disc_low=init_network(NetworkKind.DISCRIMINATOR, disc_arch, init_rng.child(3)),
    )
    states = {name: cfg.adam_state() for name in ("generator", "inverse", "disc_normal", "disc_low")}
    form, lam = cfg.adversarial, cfg.lambda_cyc
    n = max(len(low_images), len(normal_images))

    for epoch in range(cfg.epochs):
        lr = linear_decay_lr(cfg.lr, epoch, cfg.epochs, cfg.decay_fraction)
        epoch_rng = rng.child(epoch + 1)
        low_order, normal_order = epoch_rng.child(0).permutation(n), epoch_rng.child(1).permutation(n)
        crop_rng = epoch_rng.child(2)
        sums = {"loss_g": 0.0, "loss_cyc": 0.0, "loss_d": 0.0}
        steps = 0
        for start in range(0, n, cfg.batch_size):
            a = np.stack([
                random_crop(low_images[i % len(low_images)], cfg.patch_size, crop_rng)
                for i in low_order[start : start + cfg.batch_size]
            ])
            b = np.stack([
                random_crop(normal_images[i % len(normal_images)], cfg.patch_size, crop_rng)
                for i in normal_order[start : start + cfg.batch_size]
            ])
            gen, inv = models.generator, models.inverse

            fake_b, tape_g = forward(gen, a)
            rec_a, tape_f_rec = forward(inv, fake_b)
            fake_a, tape_f = forward(inv, b)
            rec_b, tape_g_rec = forward(gen, fake_a)

            adv_b, d_fake_b = _fool_grad(models.disc_normal, fake_b, form)
            adv_a, d_fake_a = _fool_grad(models.disc_low, fake_a, form)
            cyc_a, d_rec_a = l1_loss(rec_a, a)
            cyc_b, d_rec_b = l1_loss(rec_b, b)

            grads_f_rec, d_cyc_b = backward(inv, tape_f_rec, lam * d_rec_a)
            grads_g, _ = backward(gen, tape_g, d_fake_b + d_cyc_b)
            grads_g_rec, d_cyc_a = backward(gen, tape_g_rec, lam * d_rec_b)
            grads_f, _ = backward(inv, tape_f, d_fake_a + d_cyc_a)
            models.generator, states["generator"] = adam_step(
                gen, {k: grads_g[k] + grads_g_rec[k] for k in grads_g}, states["generator"], lr
            )
            models.inverse, states["inverse"] = adam_step(
                inv, {k: grads_f[k] + grads_f_rec[k] for k in grads_f}, states["inverse"], lr
            )

            loss_dn, grads_dn = _discriminator_grads(models.disc_normal, b, fake_b, form)
            loss_dl, grads_dl = _discriminator_grads(models.disc_low, a, fake_a, form)
            models.disc_normal, states["disc_normal"] = adam_step(models.disc_normal, grads_dn, states["disc_normal"], lr)
            models.disc_low, states["disc_low"] = adam_step(models.disc_low, grads_dl, states["disc_low"], lr)

            sums["loss_g"] += adv_a + adv_b
            sums["loss_cyc"] += lam * (cyc_a + cyc_b)
            sums["loss_d"] += loss_dn + loss_dl
            steps += 1
            logger.debug(f"uem epoch {epoch + 1} step {steps}: adv = {adv_a + adv_b:.4f}, cyc = {cyc_a + cyc_b:.4f}")

        models.history.record(epoch=epoch + 1, lr=lr, **{k: v / steps for k, v in sums.items()})
        _log_epoch(models.history, epoch, cfg.epochs, "loss_cyc")
    return models


@dataclass
class DistillResult:
    """Fine-tuned enhancer, its loss history and the last epoch's pseudo-references.

    ``pseudo_refs`` maps a dataset index to its refined target and is only
    filled when requested.
    """

    params: NetworkParams
    history: TrainingHistory
    pseudo_refs: dict[int, ImageTensor] = field(default_factory=dict)


def ftd_finetune(
    phi: NetworkParams,
    low_images: Sequence[ImageTensor],
    cfg: DistillConfig,
    calib: CalibrationConfig,
    predictor: NoisePredictor,
    sched: NoiseSchedule,
    rng: SeededRng,
    *,
    end: WindowEnd = WindowEnd.CLEAN,
    keep_pseudo: bool = False,
) -> DistillResult:
    """Distil the enhancer toward round-trip refinements of its own outputs.

    Every batch: r0 = phi(y); targets = round-trip(r0) with the denoiser frozen;
    one Adam step on mean |target - r0|. The rate follows a cosine from
    ``lr_max`` to ``lr_min``. Training stops after ``patience`` epochs without
    an improvement larger than ``min_delta``.
    """
    if phi.kind != NetworkKind.ENHANCER:
        raise InvalidParameterError(f"expected enhancer parameters, got {phi.kind}")
    _require_images(low_images, "low-light")
    state: AdamState = cfg.adam_state()
    history = TrainingHistory("distill")
    pseudo_refs: dict[int, ImageTensor] = {}
    best, stale = np.inf, 0

    for epoch in range(cfg.epochs):
        lr = cosine_lr(cfg.lr_max, cfg.lr_min, epoch, cfg.epochs)
        epoch_rng = rng.child(epoch + 1)
        crop_rng = epoch_rng.child(1)
        last_epoch = epoch == cfg.epochs - 1
        total = 0.0
        for idx in _batches(len(low_images), cfg.batch_size, epoch_rng.child(0)):
            y = np.stack([random_crop(low_images[i], cfg.patch_size, crop_rng) for i in idx])
            r0, tape = forward(phi, y)
            targets = np.stack([
                ftd_pseudo_ref(r0[k], calib, predictor, sched, epoch_rng.child(int(i) + 2), end=end)
                for k, i in enumerate(idx)
            ])
            loss, d_r0 = l1_loss(r0, targets)
            grads, _ = backward(phi, tape, d_r0)
            phi, state = adam_step(phi, grads, state, lr)
            total += loss * len(idx)
            if keep_pseudo:
                pseudo_refs.update({int(i): targets[k] for k, i in enumerate(idx)})

        mean_loss = total / len(low_images)
        history.record(epoch=epoch + 1, lr=lr, loss=mean_loss)
        _log_epoch(history, epoch, cfg.epochs, "loss")
        if best - mean_loss > cfg.min_delta:
            best, stale = mean_loss, 0
        else:
            stale += 1
        if stale >= cfg.patience and not last_epoch:
            logger.warning(LogMessage.EARLY_STOP.format(epoch + 1, cfg.patience))
            history.stopped_early = True
            break

    return DistillResult(params=phi, history=history, pseudo_refs=pseudo_refs)
