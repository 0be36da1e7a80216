"""Image files, synthetic datasets and checkpoints."""

from .checkpoint import (
    CheckpointError,
    load_checkpoint,
    load_network,
    load_niqe_model,
    save_checkpoint,
)
from .corpus import (
    DatasetError,
    DatasetLayout,
    DegradationSpec,
    gen_clean_corpus,
    load_images,
    load_pairs,
    sample_degradation,
    synth_degrade,
    write_dataset,
)
from .imageio import ImageFormatError, UnsupportedDepthError, list_images, load_image, save_image

__all__ = [
    "CheckpointError",
    "DatasetError",
    "DatasetLayout",
    "DegradationSpec",
    "ImageFormatError",
    "UnsupportedDepthError",
    "gen_clean_corpus",
    "list_images",
    "load_checkpoint",
    "load_image",
    "load_images",
    "load_network",
    "load_niqe_model",
    "load_pairs",
    "sample_degradation",
    "save_checkpoint",
    "save_image",
    "synth_degrade",
    "write_dataset",
]
