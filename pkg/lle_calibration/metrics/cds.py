"""Cross discriminator score: how much a patch discriminator believes a set is in its domain."""

from collections.abc import Sequence

import numpy as np
from scipy.special import expit

from ..constants import NetworkKind
from ..core import ImageTensor, InvalidParameterError
from ..nnet import NetworkParams, forward


def discriminator_score(img: ImageTensor, discriminator: NetworkParams) -> float:
    """Logistic of the mean raw score map for one image."""
    scores, _ = forward(discriminator, img)
    return float(expit(np.mean(scores, dtype=np.float64)))


def cds(images: Sequence[ImageTensor], discriminator: NetworkParams) -> float:
    """Set mean of :func:`discriminator_score`; higher is closer to the domain.

    Raises:
        InvalidParameterError: If ``images`` is empty or the net is no discriminator.
    """
    if discriminator.kind != NetworkKind.DISCRIMINATOR:
        raise InvalidParameterError(f"CDS needs a discriminator, got {discriminator.kind}")
    if len(images) == 0:
        raise InvalidParameterError("CDS of an empty image set is undefined")
    return float(np.mean([discriminator_score(img, discriminator) for img in images]))
