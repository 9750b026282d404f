"""Training losses: relativistic standard GAN, standard GAN, and AE reconstruction.

All losses reduce by the batch mean and are computed in softplus form,
which is mathematically identical to -log(sigmoid(.)) but stable for large
score differences.
"""

import torch
import torch.nn.functional as F

from ganad.errors import ConfigError, ShapeError

GAN_LOSS_KINDS = ("rsgan", "sgan")


def _check_scores(real_scores, fake_scores):
    real_scores = torch.as_tensor(real_scores, dtype=torch.float32) if not torch.is_tensor(real_scores) else real_scores
    fake_scores = torch.as_tensor(fake_scores, dtype=torch.float32) if not torch.is_tensor(fake_scores) else fake_scores
    if real_scores.numel() == 0 or fake_scores.numel() == 0:
        raise ConfigError("score batches must be non-empty")
    if real_scores.shape != fake_scores.shape:
        raise ShapeError(tuple(real_scores.shape), tuple(fake_scores.shape), what="score batch")
    return real_scores, fake_scores


def rsgan_critic_loss(real_scores, fake_scores):
    """mean(-log sigmoid(C(x_r) - C(x_f))) == mean(softplus(-(r - f)))."""
    r, f = _check_scores(real_scores, fake_scores)
    return F.softplus(-(r - f)).mean()


def rsgan_generator_loss(real_scores, fake_scores):
    """mean(-log sigmoid(C(x_f) - C(x_r))); the exact mirror of the critic loss."""
    r, f = _check_scores(real_scores, fake_scores)
    return F.softplus(-(f - r)).mean()


def sgan_losses(real_scores, fake_scores):
    """Standard GAN pair: critic BCE on real-vs-fake, non-saturating generator."""
    r, f = _check_scores(real_scores, fake_scores)
    critic = F.softplus(-r).mean() + F.softplus(f).mean()
    generator = F.softplus(-f).mean()
    return critic, generator


def gan_losses(kind, real_scores, fake_scores):
    """Dispatch on the configured GAN objective; returns (critic, generator)."""
    if kind == "rsgan":
        return (
            rsgan_critic_loss(real_scores, fake_scores),
            rsgan_generator_loss(real_scores, fake_scores),
        )
    if kind == "sgan":
        return sgan_losses(real_scores, fake_scores)
    raise ConfigError(f"unknown GAN objective {kind!r}; expected one of {GAN_LOSS_KINDS}")


def reconstruction_loss(x, x_hat):
    """Mean squared error over all elements."""
    if not torch.is_tensor(x):
        x = torch.as_tensor(x, dtype=torch.float32)
    if not torch.is_tensor(x_hat):
        x_hat = torch.as_tensor(x_hat, dtype=torch.float32)
    if x.shape != x_hat.shape:
        raise ShapeError(tuple(x.shape), tuple(x_hat.shape), what="reconstruction")
    return ((x - x_hat) ** 2).mean()
