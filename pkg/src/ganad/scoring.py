"""Inference-time anomaly scoring.

A test image x is reconstructed through the autoencoder (G(E(x))) and
compared to itself three ways: critic-feature L1 (discrimination loss),
pixel L1 (residual loss), and re-encoding L1 (latent loss). The combined
score is lambda * L_D + (1 - lambda) * L_R + beta * L_L; all three terms
are plain sums of absolute differences, so weights tuned at sum scale
apply unchanged. The iterative scorer (`anogan_score`) is the slow
optimize-z-at-inference baseline.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import torch

from ganad.errors import ConfigError, NumericsError, ShapeError

# lambda is shared across datasets; beta was tuned per dataset
_DEFAULT_LAMBDA = 0.8
_DEFAULT_BETAS = {"mnist": 0.5, "cifar10": 1.0, "svhn": 1.0, "all_medical": 1.0, "synthetic": 1.0}


@dataclass(frozen=True)
class ScoreWeights:
    lam: float = _DEFAULT_LAMBDA
    beta: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lambda must be in [0, 1], got {self.lam}")
        if self.beta < 0.0:
            raise ConfigError(f"beta must be >= 0, got {self.beta}")

    @classmethod
    def for_dataset(cls, tag: str) -> "ScoreWeights":
        if tag not in _DEFAULT_BETAS:
            raise ConfigError(f"no default score weights for dataset {tag!r}")
        return cls(lam=_DEFAULT_LAMBDA, beta=_DEFAULT_BETAS[tag])


@dataclass(frozen=True)
class ScoreBreakdown:
    discrimination: float
    residual: float
    latent: float
    total: float


def _single(x):
    if not torch.is_tensor(x):
        x = torch.as_tensor(x, dtype=torch.float32)
    if x.dim() != 3:
        raise ShapeError(("C", "H", "W"), tuple(x.shape), what="image")
    return x.float().unsqueeze(0)


def _check_finite(t, network):
    if not torch.isfinite(t).all():
        raise NumericsError(f"non-finite activations from {network}")


def _batched_components(bundle, x_batch):
    """Component losses for a batch (N, C, H, W); returns three (N,) tensors."""
    with torch.no_grad():
        z = bundle.encoder(x_batch)
        _check_finite(z, "encoder")
        recon = bundle.generator(z)
        _check_finite(recon, "generator")
        if recon.shape != x_batch.shape:
            raise ShapeError(tuple(x_batch.shape), tuple(recon.shape), what="reconstruction")
        z_recon = bundle.encoder(recon)
        _check_finite(z_recon, "encoder")
        _, feats_x = bundle.critic.forward_features(x_batch)
        _, feats_r = bundle.critic.forward_features(recon)
        _check_finite(feats_x, "critic")
        _check_finite(feats_r, "critic")
    disc = (feats_x - feats_r).abs().flatten(1).sum(dim=1)
    resid = (x_batch - recon).abs().flatten(1).sum(dim=1)
    latent = (z - z_recon).abs().flatten(1).sum(dim=1)
    return disc, resid, latent


def discrimination_loss(x, bundle) -> float:
    """Sum of |f_D(x) - f_D(G(E(x)))| over all feature components."""
    disc, _, _ = _batched_components(bundle, _single(x))
    return float(disc[0])


def residual_loss(x, bundle) -> float:
    """Sum of |x - G(E(x))| over all pixels."""
    _, resid, _ = _batched_components(bundle, _single(x))
    return float(resid[0])


def latent_loss(x, bundle) -> float:
    """Sum of |E(x) - E(G(E(x)))| over latent components."""
    _, _, latent = _batched_components(bundle, _single(x))
    return float(latent[0])


def combine(disc: float, resid: float, latent: float, w: ScoreWeights) -> float:
    return w.lam * disc + (1.0 - w.lam) * resid + w.beta * latent


def anomaly_score(x, bundle, w: ScoreWeights) -> ScoreBreakdown:
    """Combined anomaly score with its component breakdown.

    Uses a fixed number of forward passes (no per-item optimization):
    E(x), G(E(x)), E(G(E(x))) plus two critic feature passes.
    """
    disc, resid, latent = _batched_components(bundle, _single(x))
    d, r, l = float(disc[0]), float(resid[0]), float(latent[0])
    return ScoreBreakdown(discrimination=d, residual=r, latent=l, total=combine(d, r, l, w))


def score_dataset(items, bundle, w: ScoreWeights, batch_size: int = 64):
    """Score a sequence of LabeledImage items, preserving order.

    Batched internally; per-item failures are recorded (entry None) without
    aborting the run. Returns a list of (item, ScoreBreakdown | None).
    """
    results = []
    items = list(items)
    for start in range(0, len(items), batch_size):
        chunk = items[start : start + batch_size]
        pixels = torch.stack([torch.as_tensor(it.pixels, dtype=torch.float32) for it in chunk])
        try:
            disc, resid, latent = _batched_components(bundle, pixels)
        except Exception:
            # fall back to one-at-a-time so a single bad item cannot sink the chunk
            for it in chunk:
                try:
                    results.append((it, anomaly_score(it.pixels, bundle, w)))
                except Exception:
                    results.append((it, None))
            continue
        for i, it in enumerate(chunk):
            d, r, l = float(disc[i]), float(resid[i]), float(latent[i])
            results.append((it, ScoreBreakdown(d, r, l, combine(d, r, l, w))))
    return results


def dump_scores_csv(path, scored):
    """Write (item, breakdown) pairs as CSV: item_id, label, components, total."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["item_id", "label", "discrimination", "residual", "latent", "total"])
        for item, bd in scored:
            if bd is None:
                writer.writerow([item.item_id, item.anomaly_label, "", "", "", ""])
            else:
                writer.writerow(
                    [item.item_id, item.anomaly_label, bd.discrimination, bd.residual, bd.latent, bd.total]
                )


def anogan_score(
    x,
    generator,
    critic,
    iterations: int = 500,
    step_size: float = 1e-2,
    w: ScoreWeights = ScoreWeights(),
    seed: int = 0,
) -> float:
    """Iterative baseline: optimize z to reconstruct x, score the best fit.

    Minimizes lambda * L_D + (1 - lambda) * L_R over z with Adam (networks
    frozen), starting from a seeded standard-Gaussian z, and returns the
    best objective value seen. The latent term does not apply here (there
    is no encoder in this baseline).
    """
    if iterations < 1:
        raise ConfigError(f"iterations must be >= 1, got {iterations}")
    x = _single(x)
    frozen = [p for p in list(generator.parameters()) + list(critic.parameters()) if p.requires_grad]
    for p in frozen:
        p.requires_grad_(False)
    try:
        g = torch.Generator().manual_seed(seed)
        z = torch.randn(1, generator.latent_dim, generator=g, requires_grad=True)
        opt = torch.optim.Adam([z], lr=step_size, betas=(0.5, 0.999))
        with torch.no_grad():
            _, feats_x = critic.forward_features(x)
        best = float("inf")
        for i in range(iterations):
            opt.zero_grad()
            recon = generator(z)
            _, feats_r = critic.forward_features(recon)
            disc = (feats_x - feats_r).abs().sum()
            resid = (x - recon).abs().sum()
            loss = w.lam * disc + (1.0 - w.lam) * resid
            if not torch.isfinite(loss):
                raise NumericsError(f"non-finite objective at iteration {i}")
            best = min(best, loss.detach().item())
            loss.backward()
            opt.step()
        return best
    finally:
        for p in frozen:
            p.requires_grad_(True)
