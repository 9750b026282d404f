"""Joint GAN + autoencoder training on normal data.

Each batch performs three updates in order: critic, generator, then the
autoencoder (encoder + decoder view of the generator). All randomness is
driven by the config seed, so a (seed, config, split) triple determines
the resulting checkpoint bit pattern on a given machine.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict, replace
from pathlib import Path

import torch

from ganad.archspec import ArchitectureConfig, ModelBundle, build_models
from ganad.checkpoint import save_checkpoint
from ganad.errors import ConfigError, NumericsError
from ganad.objectives import GAN_LOSS_KINDS, gan_losses, reconstruction_loss


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 85
    batch_size: int = 64
    lr_gan: float = 1e-4
    lr_ae: float = 1e-4
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    weight_decay: float = 0.0  # > 0 switches to decoupled (AdamW-style) decay
    gan_objective: str = "rsgan"
    seed: int = 0
    checkpoint_every: int = 0  # 0 disables periodic checkpoints

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr_gan < 0 or self.lr_ae < 0:
            raise ConfigError("learning rates must be >= 0")
        if self.gan_objective not in GAN_LOSS_KINDS:
            raise ConfigError(f"gan_objective must be one of {GAN_LOSS_KINDS}")

    @classmethod
    def for_dataset(cls, tag: str, **overrides) -> "TrainConfig":
        base = {"epochs": 1000, "batch_size": 16} if tag == "all_medical" else {"epochs": 85, "batch_size": 64}
        base.update(overrides)
        return cls(**base)


@dataclass(frozen=True)
class StepMetrics:
    critic_loss: float
    generator_loss: float
    ae_loss: float
    epoch: int
    step: int


class Optimizers:
    """Per-network optimizers plus the training RNG and step bookkeeping."""

    def __init__(self, bundle: ModelBundle, config: TrainConfig):
        betas = (config.adam_beta1, config.adam_beta2)
        cls = torch.optim.AdamW if config.weight_decay > 0 else torch.optim.Adam
        kwargs = {"betas": betas}
        if config.weight_decay > 0:
            kwargs["weight_decay"] = config.weight_decay
        self.critic = cls(bundle.critic.parameters(), lr=config.lr_gan, **kwargs)
        self.generator = cls(bundle.generator.parameters(), lr=config.lr_gan, **kwargs)
        self.autoencoder = cls(
            list(bundle.encoder.parameters()) + list(bundle.decoder_view.parameters()),
            lr=config.lr_ae,
            **kwargs,
        )
        self.rng = torch.Generator().manual_seed(config.seed)
        self.epoch = 0
        self.step = 0


def _require_finite(value: torch.Tensor, term: str, step: int):
    if not torch.isfinite(value):
        raise NumericsError(f"non-finite {term} at step {step}")


def training_step(batch: torch.Tensor, bundle: ModelBundle, optimizers: Optimizers, config: TrainConfig) -> StepMetrics:
    """One critic update, one generator update, one autoencoder update."""
    bundle.train_mode()
    n = batch.shape[0]
    latent_dim = bundle.config.latent_dim
    step = optimizers.step

    # critic: real batch vs generated batch
    optimizers.critic.zero_grad()
    z = torch.randn(n, latent_dim, generator=optimizers.rng)
    with torch.no_grad():
        fake = bundle.generator(z)
    real_scores = bundle.critic(batch)
    fake_scores = bundle.critic(fake)
    critic_loss, _ = gan_losses(config.gan_objective, real_scores, fake_scores)
    _require_finite(critic_loss, "critic loss", step)
    critic_loss.backward()
    optimizers.critic.step()

    # generator: push fresh samples past the (fixed) critic
    optimizers.generator.zero_grad()
    z = torch.randn(n, latent_dim, generator=optimizers.rng)
    fake = bundle.generator(z)
    with torch.no_grad():
        real_scores = bundle.critic(batch)
    fake_scores = bundle.critic(fake)
    _, gen_loss = gan_losses(config.gan_objective, real_scores, fake_scores)
    _require_finite(gen_loss, "generator loss", step)
    gen_loss.backward()
    optimizers.generator.step()

    # autoencoder: reconstruction through encoder and the shared decoder
    optimizers.autoencoder.zero_grad()
    recon = bundle.decoder_view(bundle.encoder(batch))
    ae_loss = reconstruction_loss(batch, recon)
    _require_finite(ae_loss, "autoencoder loss", step)
    ae_loss.backward()
    optimizers.autoencoder.step()

    optimizers.step += 1
    return StepMetrics(
        critic_loss=critic_loss.detach().item(),
        generator_loss=gen_loss.detach().item(),
        ae_loss=ae_loss.detach().item(),
        epoch=optimizers.epoch,
        step=step,
    )


@dataclass
class TrainResult:
    checkpoint_dir: Path  # final-epoch checkpoint
    best_checkpoint_dir: Path  # lowest validation reconstruction loss
    bundle: ModelBundle
    config: TrainConfig
    epoch_metrics: list = field(default_factory=list)
    items_seen: int = 0


def _stack_pixels(items) -> torch.Tensor:
    return torch.stack([torch.as_tensor(it.pixels, dtype=torch.float32) for it in items])


def _validation_recon_loss(bundle: ModelBundle, val: torch.Tensor, batch_size: int) -> float:
    if val.shape[0] == 0:
        return float("nan")
    bundle.eval_mode()
    total, n = 0.0, 0
    with torch.no_grad():
        for start in range(0, val.shape[0], batch_size):
            chunk = val[start : start + batch_size]
            recon = bundle.decoder_view(bundle.encoder(chunk))
            total += float(((chunk - recon) ** 2).mean()) * chunk.shape[0]
            n += chunk.shape[0]
    return total / n


def train(splits, arch: ArchitectureConfig, config: TrainConfig, out_dir) -> TrainResult:
    """Train on the normal split, checkpointing and logging per-epoch metrics.

    Writes `metrics.ndjson` (one JSON record per step), a split manifest,
    the final checkpoint under `final/`, and the lowest-validation-loss
    checkpoint under `best/`.
    """
    if not splits.train:
        raise ConfigError("training split is empty")
    if any(it.anomaly_label != 0 for it in splits.train):
        raise ConfigError("training split contains anomalous items")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    splits.save_manifest(out_dir / "split_manifest.json")
    (out_dir / "train_config.json").write_text(json.dumps(asdict(config), indent=2))

    torch.manual_seed(config.seed)  # dropout masks draw from the global RNG
    bundle = build_models(arch, config.seed)
    optimizers = Optimizers(bundle, config)
    train_x = _stack_pixels(splits.train)
    val_x = _stack_pixels(splits.validation) if splits.validation else torch.zeros((0, *arch.image_shape))
    n = train_x.shape[0]

    result = TrainResult(
        checkpoint_dir=out_dir / "final",
        best_checkpoint_dir=out_dir / "best",
        bundle=bundle,
        config=config,
    )
    best_val = float("inf")
    log_path = out_dir / "metrics.ndjson"
    with open(log_path, "w") as log:
        for epoch in range(config.epochs):
            optimizers.epoch = epoch
            order = torch.randperm(n, generator=optimizers.rng)
            epoch_sums = [0.0, 0.0, 0.0]
            n_steps = 0
            for start in range(0, n, config.batch_size):
                batch = train_x[order[start : start + config.batch_size]]
                t0 = time.perf_counter()
                metrics = training_step(batch, bundle, optimizers, config)
                wall_ms = (time.perf_counter() - t0) * 1000.0
                result.items_seen += batch.shape[0]
                record = asdict(metrics)
                record["wall_ms"] = wall_ms
                log.write(json.dumps(record) + "\n")
                epoch_sums[0] += metrics.critic_loss
                epoch_sums[1] += metrics.generator_loss
                epoch_sums[2] += metrics.ae_loss
                n_steps += 1
            val_loss = _validation_recon_loss(bundle, val_x, config.batch_size)
            result.epoch_metrics.append(
                {
                    "epoch": epoch,
                    "critic_loss": epoch_sums[0] / n_steps,
                    "generator_loss": epoch_sums[1] / n_steps,
                    "ae_loss": epoch_sums[2] / n_steps,
                    "val_recon_loss": val_loss,
                }
            )
            if val_loss == val_loss and val_loss < best_val:  # NaN-safe
                best_val = val_loss
                save_checkpoint(bundle, result.best_checkpoint_dir, epoch, extra={"val_recon_loss": val_loss})
            if config.checkpoint_every and (epoch + 1) % config.checkpoint_every == 0:
                save_checkpoint(bundle, out_dir / f"epoch_{epoch + 1}", epoch)
    save_checkpoint(bundle, result.checkpoint_dir, config.epochs - 1)
    if not (result.best_checkpoint_dir / "metadata.json").is_file():
        # no validation items: the final checkpoint doubles as "best"
        save_checkpoint(bundle, result.best_checkpoint_dir, config.epochs - 1)
    (out_dir / "run_manifest.json").write_text(
        json.dumps(
            {
                "final_checkpoint": str(result.checkpoint_dir),
                "best_checkpoint": str(result.best_checkpoint_dir),
                "best_val_recon_loss": None if best_val == float("inf") else best_val,
                "items_seen": result.items_seen,
                "seed": config.seed,
            },
            indent=2,
        )
    )
    return result


def run_seeds(splits, arch: ArchitectureConfig, config: TrainConfig, seeds, out_root):
    """One independent training per seed; failures don't abort the others.

    Returns a list of (seed, TrainResult | None, error_message | None).
    """
    if not seeds:
        raise ConfigError("need at least one seed")
    out_root = Path(out_root)
    results = []
    for seed in seeds:
        cfg = replace(config, seed=seed)
        try:
            res = train(splits, arch, cfg, out_root / f"seed_{seed}")
            results.append((seed, res, None))
        except Exception as exc:  # noqa: BLE001 - report per-seed failures
            results.append((seed, None, f"{type(exc).__name__}: {exc}"))
    return results
