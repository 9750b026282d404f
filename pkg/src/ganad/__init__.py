"""Unsupervised anomaly detection with a GAN-augmented autoencoder.

A GAN and an autoencoder are trained jointly on normal data; the
autoencoder's decoder shares its weights with the GAN generator. At
inference time an image is scored by a weighted sum of a critic-feature
loss, a pixel residual loss, and a latent re-encoding loss.
"""

from ganad.archspec import ArchitectureConfig, ModelBundle, build_models
from ganad.scoring import ScoreWeights, ScoreBreakdown, anomaly_score
from ganad.data import SplitSpec, LabeledImage, make_synthetic

__all__ = [
    "ArchitectureConfig",
    "ModelBundle",
    "build_models",
    "ScoreWeights",
    "ScoreBreakdown",
    "anomaly_score",
    "SplitSpec",
    "LabeledImage",
    "make_synthetic",
]

__version__ = "0.1.0"
