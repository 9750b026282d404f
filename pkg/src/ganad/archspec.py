"""Network definitions: generator/decoder, critic, and encoder.

The generator doubles as the autoencoder's decoder -- `ModelBundle.decoder_view`
is literally the generator module, so the two always share parameter storage.
The critic carries spectral normalization on every weight matrix and exposes a
feature tap (the flattened activations entering its final linear layer).
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field, asdict

import torch
import torch.nn as nn
import torch.nn.functional as F
from torch.nn.utils import parametrize

from ganad.errors import ConfigError, ShapeError

DATASET_TAGS = ("mnist", "cifar10", "svhn", "all_medical", "synthetic")

# Layer counts per dataset: (conv, tconv, linear) for the generator,
# (conv, linear) for critic and encoder.
_LAYER_COUNTS = {
    "mnist": {"gen": (0, 3, 2), "critic": (3, 2), "encoder": (3, 1)},
    "cifar10": {"gen": (0, 4, 0), "critic": (3, 1), "encoder": (4, 0)},
    "svhn": {"gen": (0, 4, 0), "critic": (3, 1), "encoder": (4, 0)},
    "all_medical": {"gen": (1, 8, 0), "critic": (6, 1), "encoder": (6, 1)},
    "synthetic": {"gen": (0, 2, 1), "critic": (2, 1), "encoder": (2, 1)},
}

_LATENT_DIMS = {"mnist": 100, "cifar10": 100, "svhn": 200, "all_medical": 200, "synthetic": 32}
_IMAGE_SHAPES = {
    "mnist": (1, 28, 28),
    "cifar10": (3, 32, 32),
    "svhn": (3, 32, 32),
    "all_medical": (3, 220, 220),
    "synthetic": (1, 28, 28),
}

# Hidden widths, one entry per parameterized hidden layer in forward order.
# The ALL widths are pinned so the three networks land exactly on the
# published parameter counts (generator 2,450,307 / critic 5,159,170 /
# encoder 8,716,888).
_DEFAULT_WIDTHS = {
    "mnist": {"gen": (1024, 128, 64, 32), "critic": (64, 128, 256, 128), "encoder": (64, 128, 256)},
    "cifar10": {"gen": (256, 128, 64), "critic": (64, 128, 256), "encoder": (64, 128, 256)},
    "svhn": {"gen": (256, 128, 64), "critic": (64, 128, 256), "encoder": (64, 128, 256)},
    "all_medical": {
        "gen": (320, 256, 96, 96, 96, 64, 64, 16),
        "critic": (80, 96, 192, 192, 337, 576),
        "encoder": (128, 192, 224, 256, 416, 592),
    },
    "synthetic": {"gen": (64, 32), "critic": (16, 32), "encoder": (16, 32)},
}


@dataclass(frozen=True)
class ChannelWidths:
    generator: tuple
    critic: tuple
    encoder: tuple

    def __post_init__(self):
        object.__setattr__(self, "generator", tuple(int(w) for w in self.generator))
        object.__setattr__(self, "critic", tuple(int(w) for w in self.critic))
        object.__setattr__(self, "encoder", tuple(int(w) for w in self.encoder))


@dataclass(frozen=True)
class ArchitectureConfig:
    dataset_tag: str
    image_shape: tuple
    latent_dim: int
    gen_layers: tuple  # (num_conv, num_transposed_conv, num_linear)
    critic_layers: tuple  # (num_conv, num_linear)
    encoder_layers: tuple  # (num_conv, num_linear)
    channel_widths: ChannelWidths
    dropout_rate: float = 0.2
    leaky_slope: float = 0.2
    gen_output_activation: str = "tanh"  # inputs are scaled to [-1, 1]

    @classmethod
    def for_dataset(cls, tag: str, latent_dim: int | None = None) -> "ArchitectureConfig":
        if tag not in DATASET_TAGS:
            raise ConfigError(f"unknown dataset tag {tag!r}; expected one of {DATASET_TAGS}")
        counts = _LAYER_COUNTS[tag]
        widths = _DEFAULT_WIDTHS[tag]
        return cls(
            dataset_tag=tag,
            image_shape=_IMAGE_SHAPES[tag],
            latent_dim=latent_dim if latent_dim is not None else _LATENT_DIMS[tag],
            gen_layers=counts["gen"],
            critic_layers=counts["critic"],
            encoder_layers=counts["encoder"],
            channel_widths=ChannelWidths(widths["gen"], widths["critic"], widths["encoder"]),
        )

    def validate(self):
        if self.dataset_tag not in DATASET_TAGS:
            raise ConfigError(f"unknown dataset tag {self.dataset_tag!r}")
        if self.latent_dim <= 0:
            raise ConfigError(f"latent_dim must be positive, got {self.latent_dim}")
        if len(self.image_shape) != 3 or any(d <= 0 for d in self.image_shape):
            raise ConfigError(f"image_shape must be 3 positive ints, got {self.image_shape}")
        if any(n < 0 for n in (*self.gen_layers, *self.critic_layers, *self.encoder_layers)):
            raise ConfigError("layer counts must be non-negative")
        if not 0 <= self.dropout_rate < 1:
            raise ConfigError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.leaky_slope <= 0:
            raise ConfigError(f"leaky_slope must be > 0, got {self.leaky_slope}")
        counts = _LAYER_COUNTS[self.dataset_tag]
        for name, have in (("gen", self.gen_layers), ("critic", self.critic_layers), ("encoder", self.encoder_layers)):
            if tuple(have) != counts[name]:
                raise ConfigError(
                    f"{name} layer counts for {self.dataset_tag} must be {counts[name]}, got {tuple(have)}"
                )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["image_shape"] = list(self.image_shape)
        d["gen_layers"] = list(self.gen_layers)
        d["critic_layers"] = list(self.critic_layers)
        d["encoder_layers"] = list(self.encoder_layers)
        d["channel_widths"] = {
            "generator": list(self.channel_widths.generator),
            "critic": list(self.channel_widths.critic),
            "encoder": list(self.channel_widths.encoder),
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ArchitectureConfig":
        d = dict(d)
        cw = d.pop("channel_widths")
        return cls(
            dataset_tag=d["dataset_tag"],
            image_shape=tuple(d["image_shape"]),
            latent_dim=int(d["latent_dim"]),
            gen_layers=tuple(d["gen_layers"]),
            critic_layers=tuple(d["critic_layers"]),
            encoder_layers=tuple(d["encoder_layers"]),
            channel_widths=ChannelWidths(cw["generator"], cw["critic"], cw["encoder"]),
            dropout_rate=float(d.get("dropout_rate", 0.2)),
            leaky_slope=float(d.get("leaky_slope", 0.2)),
            gen_output_activation=d.get("gen_output_activation", "tanh"),
        )


class _SpectralNorm(nn.Module):
    """Divide a weight by its largest singular value.

    Power iteration runs to convergence (persisted vectors, capped step
    count) on every training-mode access, so the effective weight's top
    singular value stays within tight tolerance of 1 even while the
    underlying weight moves. Eval-mode accesses reuse the stored vectors.
    """

    def __init__(self, weight: torch.Tensor, tol: float = 1e-7, max_iters: int = 64):
        super().__init__()
        self.tol = tol
        self.max_iters = max_iters
        mat = weight.detach().flatten(1)
        self.register_buffer("_u", F.normalize(torch.randn(mat.shape[0]), dim=0))
        self.register_buffer("_v", F.normalize(torch.randn(mat.shape[1]), dim=0))

    def forward(self, weight: torch.Tensor) -> torch.Tensor:
        mat = weight.flatten(1)
        if self.training:
            with torch.no_grad():
                u, v = self._u, self._v
                for _ in range(self.max_iters):
                    v_new = F.normalize(mat.t() @ u, dim=0)
                    u_new = F.normalize(mat @ v_new, dim=0)
                    done = (u_new - u).norm() < self.tol
                    u, v = u_new, v_new
                    if done:
                        break
                self._u.copy_(u)
                self._v.copy_(v)
        # clone so later in-place buffer updates don't invalidate this graph
        u, v = self._u.clone(), self._v.clone()
        sigma = torch.dot(u, mat @ v)
        return weight / sigma


def _spectral_norm(module: nn.Module) -> nn.Module:
    parametrize.register_parametrization(module, "weight", _SpectralNorm(module.weight))
    return module


def _conv_out(size, k, s, p):
    return (size + 2 * p - k) // s + 1


def _tconv_out(size, k, s, p):
    return (size - 1) * s - 2 * p + k


class Generator(nn.Module):
    """Maps latent vectors to images; also serves as the autoencoder decoder."""

    def __init__(self, config: ArchitectureConfig):
        super().__init__()
        self.latent_dim = config.latent_dim
        self.image_shape = tuple(config.image_shape)
        tag = config.dataset_tag
        widths = config.channel_widths.generator
        out_ch = config.image_shape[0]
        layers = []
        if tag in ("mnist", "synthetic"):
            # linear head lifting z to a (c, 7, 7) map, then transposed convs
            if tag == "mnist":
                w_lin, w_map = widths[0], widths[1]
                layers += [nn.Linear(config.latent_dim, w_lin), nn.BatchNorm1d(w_lin), nn.ReLU(inplace=True)]
                layers += [nn.Linear(w_lin, w_map * 7 * 7)]
                tconvs = [(w_map, widths[2], 4, 2, 1), (widths[2], widths[3], 4, 2, 1), (widths[3], out_ch, 3, 1, 1)]
            else:
                w_map = widths[0]
                layers += [nn.Linear(config.latent_dim, w_map * 7 * 7)]
                tconvs = [(w_map, widths[1], 4, 2, 1), (widths[1], out_ch, 4, 2, 1)]
            layers += [nn.Unflatten(1, (w_map, 7, 7)), nn.BatchNorm2d(w_map), nn.ReLU(inplace=True)]
            for i, (ci, co, k, s, p) in enumerate(tconvs):
                layers.append(nn.ConvTranspose2d(ci, co, k, s, p))
                if i < len(tconvs) - 1:
                    layers += [nn.BatchNorm2d(co), nn.ReLU(inplace=True)]
            self._from_latent_map = False
        elif tag in ("cifar10", "svhn"):
            tconvs = [
                (config.latent_dim, widths[0], 4, 1, 0),
                (widths[0], widths[1], 4, 2, 1),
                (widths[1], widths[2], 4, 2, 1),
                (widths[2], out_ch, 4, 2, 1),
            ]
            for i, (ci, co, k, s, p) in enumerate(tconvs):
                layers.append(nn.ConvTranspose2d(ci, co, k, s, p))
                if i < len(tconvs) - 1:
                    layers += [nn.BatchNorm2d(co), nn.ReLU(inplace=True)]
            self._from_latent_map = True
        elif tag == "all_medical":
            # 1x1 -> 3 -> 6 -> 13 -> 27 -> 55 -> 110 -> 220 -> 220, then a conv head
            ksp = [(3, 1, 0), (4, 2, 1), (3, 2, 0), (3, 2, 0), (3, 2, 0), (4, 2, 1), (4, 2, 1), (3, 1, 1)]
            cs = [config.latent_dim, *widths]
            for i, (k, s, p) in enumerate(ksp):
                layers += [
                    nn.ConvTranspose2d(cs[i], cs[i + 1], k, s, p),
                    nn.BatchNorm2d(cs[i + 1]),
                    nn.ReLU(inplace=True),
                ]
            layers.append(nn.Conv2d(cs[-1], out_ch, 3, 1, 1))
            self._from_latent_map = True
        else:
            raise ConfigError(f"no generator plan for dataset tag {tag!r}")
        if config.gen_output_activation == "tanh":
            layers.append(nn.Tanh())
        elif config.gen_output_activation != "none":
            raise ConfigError(f"unknown generator output activation {config.gen_output_activation!r}")
        self.body = nn.Sequential(*layers)

    def forward(self, z):
        if z.dim() != 2 or z.shape[1] != self.latent_dim:
            raise ShapeError(("N", self.latent_dim), tuple(z.shape), what="latent")
        if self._from_latent_map:
            z = z.view(z.shape[0], self.latent_dim, 1, 1)
        return self.body(z)


class _ConvLadder(nn.Module):
    """Shared conv trunk for critic and encoder: Conv -> LeakyReLU -> Dropout."""

    def __init__(self, config, widths, ksp, spectral=False):
        super().__init__()
        in_ch = config.image_shape[0]
        size = config.image_shape[1]
        layers = []
        cs = [in_ch, *widths]
        for i, (k, s, p) in enumerate(ksp):
            conv = nn.Conv2d(cs[i], cs[i + 1], k, s, p)
            if spectral:
                conv = _spectral_norm(conv)
            layers += [conv, nn.LeakyReLU(config.leaky_slope, inplace=True), nn.Dropout(config.dropout_rate)]
            size = _conv_out(size, k, s, p)
        self.body = nn.Sequential(*layers)
        self.out_channels = cs[-1]
        self.out_size = size

    def forward(self, x):
        return self.body(x)


# conv (kernel, stride, padding) ladders per dataset; chosen so the stack
# lands exactly on the flattened width the head expects
_LADDERS = {
    "mnist": [(4, 2, 1), (4, 2, 1), (3, 2, 1)],
    "cifar10": [(4, 2, 1), (4, 2, 1), (4, 2, 1)],
    "svhn": [(4, 2, 1), (4, 2, 1), (4, 2, 1)],
    "all_medical": [(4, 2, 1)] * 6,
    "synthetic": [(4, 2, 1), (4, 2, 1)],
}


class Critic(nn.Module):
    """Scores images; every weight matrix is spectral-normalized.

    `forward_features` additionally returns the flattened activations that
    enter the final linear layer (the feature tap used by the
    discrimination loss).
    """

    def __init__(self, config: ArchitectureConfig):
        super().__init__()
        self.image_shape = tuple(config.image_shape)
        tag = config.dataset_tag
        widths = config.channel_widths.critic
        n_conv, n_lin = config.critic_layers
        ladder = _LADDERS[tag]
        self.trunk = _ConvLadder(config, widths[:n_conv], ladder, spectral=True)
        flat = self.trunk.out_channels * self.trunk.out_size ** 2
        head = []
        dims = [flat, *widths[n_conv:], 1]
        assert len(dims) == n_lin + 1
        for i in range(n_lin):
            head.append(_spectral_norm(nn.Linear(dims[i], dims[i + 1])))
            if i < n_lin - 1:
                head += [nn.LeakyReLU(config.leaky_slope, inplace=True), nn.Dropout(config.dropout_rate)]
        self.head = nn.Sequential(*head)
        # everything up to (not including) the final linear layer
        self.pre_final = nn.Sequential(*head[:-1])
        self.final = head[-1]
        self.feature_dim = dims[-2]

    def forward_features(self, x):
        if x.dim() != 4 or tuple(x.shape[1:]) != self.image_shape:
            raise ShapeError(("N", *self.image_shape), tuple(x.shape), what="critic input")
        h = self.trunk(x)
        h = h.flatten(1)
        feats = self.pre_final(h)
        score = self.final(feats).squeeze(1)
        return score, feats

    def forward(self, x):
        return self.forward_features(x)[0]


class Encoder(nn.Module):
    """Maps images to latent vectors (LeakyReLU activations, dropout)."""

    def __init__(self, config: ArchitectureConfig):
        super().__init__()
        self.image_shape = tuple(config.image_shape)
        self.latent_dim = config.latent_dim
        tag = config.dataset_tag
        widths = config.channel_widths.encoder
        n_conv, n_lin = config.encoder_layers
        ladder = _LADDERS[tag]
        if n_lin == 0:
            # all-conv encoder: the last conv collapses the map to 1x1 with
            # latent_dim output channels
            self.trunk = _ConvLadder(config, widths[: n_conv - 1], ladder, spectral=False)
            self.final_conv = nn.Conv2d(self.trunk.out_channels, config.latent_dim, self.trunk.out_size, 1, 0)
            self.head = None
        else:
            self.trunk = _ConvLadder(config, widths[:n_conv], ladder, spectral=False)
            flat = self.trunk.out_channels * self.trunk.out_size ** 2
            dims = [flat, *widths[n_conv:], config.latent_dim]
            assert len(dims) == n_lin + 1
            head = []
            for i in range(n_lin):
                head.append(nn.Linear(dims[i], dims[i + 1]))
                if i < n_lin - 1:
                    head += [nn.LeakyReLU(config.leaky_slope, inplace=True), nn.Dropout(config.dropout_rate)]
            self.head = nn.Sequential(*head)
            self.final_conv = None

    def forward(self, x):
        if x.dim() != 4 or tuple(x.shape[1:]) != self.image_shape:
            raise ShapeError(("N", *self.image_shape), tuple(x.shape), what="encoder input")
        h = self.trunk(x)
        if self.final_conv is not None:
            return self.final_conv(h).flatten(1)
        return self.head(h.flatten(1))


@dataclass
class ModelBundle:
    """The three networks plus the decoder-as-generator alias."""

    generator: Generator
    critic: Critic
    encoder: Encoder
    config: ArchitectureConfig
    seed: int

    @property
    def decoder_view(self) -> Generator:
        # Same module object: the decoder IS the generator, so parameter
        # storage is shared by construction.
        return self.generator

    def modules_by_name(self) -> dict:
        return {"generator": self.generator, "critic": self.critic, "encoder": self.encoder}

    def train_mode(self):
        for m in self.modules_by_name().values():
            m.train()
        return self

    def eval_mode(self):
        for m in self.modules_by_name().values():
            m.eval()
        return self

    def parameter_counts(self) -> dict:
        return {name: count_parameters(m) for name, m in self.modules_by_name().items()}


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


def _init_weights(module: nn.Module):
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
            m.weight.data.normal_(0.0, 0.02)
            if m.bias is not None:
                m.bias.data.zero_()
        elif isinstance(m, (nn.BatchNorm1d, nn.BatchNorm2d)):
            m.weight.data.normal_(1.0, 0.02)
            m.bias.data.zero_()


def build_models(config: ArchitectureConfig, seed: int) -> ModelBundle:
    """Construct the three networks with deterministic initialization.

    Identical (config, seed) pairs yield bit-identical initial parameters.
    Raises ConfigError when the generator stack cannot reach the configured
    image shape (reporting the achievable shape).
    """
    config.validate()
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        generator = Generator(config)
        _init_weights(generator)
        critic = Critic(config)  # spectral_norm initializes its power-iteration vectors here
        _init_weights(critic)
        encoder = Encoder(config)
        _init_weights(encoder)
    with torch.no_grad():
        generator.eval()
        out = generator(torch.zeros(2, config.latent_dim))
        achieved = tuple(out.shape[1:])
        if achieved != tuple(config.image_shape):
            raise ConfigError(
                f"generator stack for {config.dataset_tag!r} produces shape {achieved}, "
                f"but image_shape is {tuple(config.image_shape)}"
            )
    return ModelBundle(generator=generator, critic=critic, encoder=encoder, config=config, seed=seed)


def _as_batch(x, shape, what):
    if not torch.is_tensor(x):
        x = torch.as_tensor(x, dtype=torch.float32)
    if x.dim() != 4 or tuple(x.shape[1:]) != tuple(shape):
        raise ShapeError(("N", *shape), tuple(x.shape), what=what)
    return x.float()


def encode(bundle: ModelBundle, x) -> torch.Tensor:
    """Encode an image batch (N, C, H, W) -> (N, latent_dim)."""
    x = _as_batch(x, bundle.config.image_shape, "encoder input")
    with torch.no_grad():
        return bundle.encoder(x)


def generate(bundle: ModelBundle, z) -> torch.Tensor:
    """Decode a latent batch (N, latent_dim) -> (N, C, H, W)."""
    if not torch.is_tensor(z):
        z = torch.as_tensor(z, dtype=torch.float32)
    if z.dim() != 2 or z.shape[1] != bundle.config.latent_dim:
        raise ShapeError(("N", bundle.config.latent_dim), tuple(z.shape), what="latent")
    with torch.no_grad():
        return bundle.generator(z.float())


def critic_features(bundle: ModelBundle, x):
    """Return (scores (N,), features (N, feature_dim)) from the critic tap."""
    x = _as_batch(x, bundle.config.image_shape, "critic input")
    with torch.no_grad():
        return bundle.critic.forward_features(x)
