"""Constants and enumerations for low-light calibration and enhancement."""

from enum import StrEnum
from typing import Final


# Global seed
DEFAULT_SEED: Final[int] = 0
SEED_ENV_VAR: Final[str] = "DIFFLLE_SEED"

# Noise schedule (linear DDPM ramp at desk scale)
DEFAULT_NUM_STEPS: Final[int] = 200
DEFAULT_BETA_START: Final[float] = 1e-4
DEFAULT_BETA_END: Final[float] = 0.02
DEFAULT_DDIM_STEPS: Final[int] = 50
MIN_ALPHA_BAR: Final[float] = 1e-12

# Degradation calibration
DEFAULT_GAMMA: Final[float] = 1.7
DEFAULT_OMEGA: Final[int] = 3
DEFAULT_ETA: Final[float] = 0.0

# Architectures
DEFAULT_IMAGE_CHANNELS: Final[int] = 3
DEFAULT_ENHANCER_CHANNELS: Final[int] = 16
DEFAULT_ENHANCER_BLOCKS: Final[int] = 3
DEFAULT_DENOISER_CHANNELS: Final[int] = 16
DEFAULT_TIME_DIM: Final[int] = 16
DEFAULT_DISC_CHANNELS: Final[int] = 16
LEAKY_SLOPE: Final[float] = 0.2
OUTPUT_INIT_SCALE: Final[float] = 0.1
NORM_EPS: Final[float] = 1e-5

# Adam
DEFAULT_ADAM_BETA1: Final[float] = 0.5
DEFAULT_ADAM_BETA2: Final[float] = 0.999
DEFAULT_ADAM_EPS: Final[float] = 1e-8

# UEM pretraining
DEFAULT_UEM_EPOCHS: Final[int] = 20
DEFAULT_UEM_BATCH: Final[int] = 1
DEFAULT_PATCH_SIZE: Final[int] = 64
DEFAULT_UEM_LR: Final[float] = 2e-4
DEFAULT_LAMBDA_CYC: Final[float] = 10.0
DEFAULT_DECAY_FRACTION: Final[float] = 0.5

# FTD fine-tuning
DEFAULT_DISTILL_EPOCHS: Final[int] = 10
DEFAULT_DISTILL_BATCH: Final[int] = 8
DEFAULT_DISTILL_LR_MAX: Final[float] = 1e-5
DEFAULT_DISTILL_LR_MIN: Final[float] = 1e-8
DEFAULT_PATIENCE: Final[int] = 10

# Denoiser training
DEFAULT_DENOISER_EPOCHS: Final[int] = 20
DEFAULT_DENOISER_BATCH: Final[int] = 16
DEFAULT_DENOISER_PATCH: Final[int] = 32
DEFAULT_DENOISER_LR: Final[float] = 1e-3

# Synthetic data
DEFAULT_N_TRAIN: Final[int] = 500
DEFAULT_N_TEST: Final[int] = 50
DEFAULT_IMAGE_SIZE: Final[int] = 64
CLEAN_VALUE_LOW: Final[float] = 0.15
CLEAN_VALUE_HIGH: Final[float] = 0.95
CLEAN_MAX_RMS: Final[float] = 0.37
DEFAULT_N_PRISTINE: Final[int] = 100
IN_DOMAIN_EXPOSURE: Final[tuple[float, float]] = (0.15, 0.4)
IN_DOMAIN_DARKENING: Final[tuple[float, float]] = (1.5, 2.5)
OOD_EXPOSURE: Final[tuple[float, float]] = (0.08, 0.2)
OOD_NOISE: Final[tuple[float, float]] = (0.02, 0.06)
OOD_GAIN: Final[tuple[float, float]] = (0.01, 0.03)

# Metrics
PSNR_CAP_DB: Final[float] = 99.0
PSNR_MIN_MSE: Final[float] = 1e-10
SSIM_WINDOW: Final[int] = 11
SSIM_SIGMA: Final[float] = 1.5
SSIM_K1: Final[float] = 0.01
SSIM_K2: Final[float] = 0.03
LUMA_WEIGHTS: Final[tuple[float, float, float]] = (0.299, 0.587, 0.114)
LOE_TARGET_SIDE: Final[int] = 50
NIQE_PATCH: Final[int] = 32
NIQE_WINDOW: Final[int] = 7
NIQE_SHARPNESS_FRACTION: Final[float] = 0.75
NIQE_RIDGE: Final[float] = 1e-6
NIQE_MIN_PATCHES: Final[int] = 200
NIQE_FEATURES: Final[int] = 36
GGD_MIN_SAMPLES: Final[int] = 100

# Files
CHECKPOINT_MAGIC: Final[bytes] = b"DFLL"
CHECKPOINT_VERSION: Final[int] = 1
IMAGE_SUFFIXES: Final[tuple[str, ...]] = (".ppm", ".pgm", ".png")
AGGREGATE_ROW: Final[str] = "mean"
DEFAULT_OMEGAS: Final[str] = "0,1,3,5,8"

# Exit codes
EXIT_CODE_ERROR: Final[int] = 1
EXIT_CODE_USAGE: Final[int] = 2


class NetworkKind(StrEnum):
    """Network families with hand-written gradients."""

    DENOISER = "denoiser"
    ENHANCER = "enhancer"
    DISCRIMINATOR = "discriminator"


class CurveMode(StrEnum):
    """Direction of the lightness curve applied before calibration."""

    LITERAL = "literal"
    BRIGHTEN = "brighten"


class WindowEnd(StrEnum):
    """Which end of the DDIM subsequence the round-trip window is taken from."""

    CLEAN = "clean"
    NOISY = "noisy"


class AblationStage(StrEnum):
    """Which round-trip the depth ablation sweeps."""

    DDC = "ddc"
    FTD = "ftd"


class AdversarialLoss(StrEnum):
    """Adversarial objective used during UEM pretraining."""

    LSGAN = "lsgan"
    LOGISTIC = "logistic"


class DatasetDir(StrEnum):
    """Dataset layout relative to the dataset root."""

    TRAIN_LOW = "trainA"
    TRAIN_NORMAL = "trainB"
    TEST_LOW = "test/low"
    TEST_REF = "test/ref"
    OOD_LOW = "test_ood/low"
    OOD_REF = "test_ood/ref"
    PRISTINE = "pristine"


class CheckpointFile(StrEnum):
    """Default artifact names inside a run directory."""

    DENOISER = "denoiser.ckpt"
    UEM = "uem.ckpt"
    UEM_INVERSE = "uem_inverse.ckpt"
    DISC_NORMAL = "disc_normal.ckpt"
    DISC_LOW = "disc_low.ckpt"
    DISTILLED = "uem_distilled.ckpt"
    NIQE = "niqe.ckpt"


class ReportFile(StrEnum):
    """Default table and history names inside an output directory."""

    METRICS = "metrics.csv"
    CDS = "cds.csv"
    OMEGA_ABLATION = "omega_ablation.csv"
    DISTILL_OMEGA_ABLATION = "distill_omega_ablation.csv"
    SETTINGS_IN_DOMAIN = "settings_in_domain.csv"
    SETTINGS_OUT_OF_DOMAIN = "settings_out_of_domain.csv"
    DENOISER_HISTORY = "denoiser_history.csv"
    UEM_HISTORY = "uem_history.csv"
    DISTILL_HISTORY = "distill_history.csv"


class MetricKey(StrEnum):
    """Metric table column names."""

    IMAGE = "image"
    PSNR = "psnr"
    SSIM = "ssim"
    NIQE = "niqe"
    LOE = "loe"
    CDS = "cds"


class LogMessage(StrEnum):
    """Log message templates."""

    EPOCH_LOSS = "Epoch {}/{}: {} = {:.6f}"
    EARLY_STOP = "Early stop at epoch {}: no improvement for {} epochs"
    SAVED_IMAGES = "Saved {} images to {}"
    SAVED_CHECKPOINT = "Saved checkpoint {} ({} tensors)"
    SAVED_TABLE = "Saved metric table ({} rows) to {}"
    LOADED_DATASET = "Loaded {} images from {}"
    AUTO_RIDGE = "Pooled covariance is singular; ridge raised to {:.1e}"
    ERROR_OCCURRED = "Error occurred: {}"


class CliHelp(StrEnum):
    """CLI help messages."""

    APP = "Diffusion-guided calibration and distillation for low-light enhancement"
    CONFIG = "Path to a `key = value` config file."
    SEED = "Global seed (overrides config and the DIFFLLE_SEED environment variable)."
    SET = "Override a config key, e.g. --set ddc.gamma=2.0 (repeatable)."
    OUT = "Output directory."
    JOBS = "Number of images processed concurrently."
    DDC = "Calibrate inputs (gamma curve + diffusion round-trip) before enhancing."
    VERBOSE = "Log per-step detail."
    DATA = "Dataset root (trainA, trainB, test, test_ood, pristine) or an image folder."
    RUN = "Run directory holding checkpoints; created when missing."
    CHECKPOINT = "Enhancer checkpoint."
    DENOISER = "Denoiser checkpoint used by the calibration round-trip."
    INPUT = "Folder of images to enhance or score."
    REF = "Folder of reference images, paired by file name."
    LOW = "Folder of the original low-light inputs (enables LOE)."
    NIQE_MODEL = "Pristine NIQE model checkpoint (enables NIQE)."
    DISCRIMINATOR = "Discriminator checkpoint (enables CDS)."
    OMEGAS = "Comma-separated round-trip depths; 0 is the uncalibrated baseline."
    STAGE = "ddc sweeps calibration before enhancing; ftd redistils the enhancer at every depth."
    SAVE_PSEUDO = "Write the last epoch's pseudo-references to this folder."
    CURVE = "Use the classical curve enhancer instead of a checkpoint."
    GEN_DATA = "Generate the synthetic clean corpus and degraded dataset layout."
    TRAIN_DENOISER = "Train the noise predictor on clean images."
    TRAIN_UEM = "Pretrain the unsupervised enhancer with cycle-consistent adversarial training."
    DISTILL = "Fine-tune the enhancer on diffusion-refined pseudo-references."
    ENHANCE = "Enhance every image in a directory."
    EVALUATE = "Score enhanced images against references (PSNR/SSIM/NIQE/LOE)."
    NIQE_FIT = "Fit the pristine NIQE model on a directory of clean images."
    CDS = "Cross discriminator score of an image set under a trained discriminator."
    ABLATE_OMEGA = "Sweep the calibration or distillation round-trip depth and report PSNR/SSIM per depth."
    ABLATE_SETTINGS = "Compare UEM, UEM+FTD and UEM+FTD+DDC on in/out-of-domain data."
