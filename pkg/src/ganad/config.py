"""Experiment configuration: TOML schema, validation, and wiring helpers.

A config file fully determines an experiment: dataset construction,
architecture, training hyperparameters, score weights, and seeds. Unknown
keys are rejected so typos fail loudly before any work starts.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ganad import data
from ganad.archspec import ArchitectureConfig
from ganad.errors import ConfigError
from ganad.scoring import ScoreWeights
from ganad.training import TrainConfig

SCHEMA_VERSION = 1

_TOP_KEYS = {"schema_version", "experiment", "dataset", "arch", "train", "score"}
_EXPERIMENT_KEYS = {"name", "output_dir", "seeds"}
_DATASET_KEYS = {"source", "strategy", "pivot_class", "root", "download", "n_normal", "n_anomalous", "seed", "max_train_items"}
_ARCH_KEYS = {"latent_dim", "dropout_rate", "leaky_slope"}
_TRAIN_KEYS = {"epochs", "batch_size", "lr_gan", "lr_ae", "adam_beta1", "adam_beta2", "weight_decay", "gan_objective", "checkpoint_every"}
_SCORE_KEYS = {"lambda", "beta"}

_SOURCES = ("synthetic", "mnist", "cifar10", "svhn", "folder")


def _reject_unknown(section: dict, allowed: set, where: str):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in [{where}]: {sorted(unknown)}")


@dataclass
class ExperimentConfig:
    name: str
    output_dir: Path
    seeds: list
    dataset: dict
    arch_overrides: dict = field(default_factory=dict)
    train_overrides: dict = field(default_factory=dict)
    score: ScoreWeights = field(default_factory=ScoreWeights)
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_toml(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        _reject_unknown(doc, _TOP_KEYS, "top level")
        if doc.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {doc.get('schema_version')}")
        exp = doc.get("experiment", {})
        _reject_unknown(exp, _EXPERIMENT_KEYS, "experiment")
        ds = doc.get("dataset", {})
        _reject_unknown(ds, _DATASET_KEYS, "dataset")
        arch = doc.get("arch", {})
        _reject_unknown(arch, _ARCH_KEYS, "arch")
        train = doc.get("train", {})
        _reject_unknown(train, _TRAIN_KEYS, "train")
        score = doc.get("score", {})
        _reject_unknown(score, _SCORE_KEYS, "score")

        source = ds.get("source")
        if source not in _SOURCES:
            raise ConfigError(f"dataset.source must be one of {_SOURCES}, got {source!r}")
        seeds = exp.get("seeds", [0])
        if not isinstance(seeds, list) or not seeds:
            raise ConfigError("experiment.seeds must be a non-empty list of integers")

        tag = "all_medical" if source == "folder" else source
        default_beta = ScoreWeights.for_dataset(tag).beta
        weights = ScoreWeights(lam=float(score.get("lambda", 0.8)), beta=float(score.get("beta", default_beta)))

        return cls(
            name=exp.get("name", "experiment"),
            output_dir=Path(exp.get("output_dir", "runs/experiment")),
            seeds=[int(s) for s in seeds],
            dataset=ds,
            arch_overrides=arch,
            train_overrides=train,
            score=weights,
            raw=doc,
        )

    @property
    def dataset_tag(self) -> str:
        return "all_medical" if self.dataset["source"] == "folder" else self.dataset["source"]

    def arch_config(self) -> ArchitectureConfig:
        cfg = ArchitectureConfig.for_dataset(self.dataset_tag, latent_dim=self.arch_overrides.get("latent_dim"))
        if "dropout_rate" in self.arch_overrides or "leaky_slope" in self.arch_overrides:
            from dataclasses import replace

            cfg = replace(
                cfg,
                dropout_rate=float(self.arch_overrides.get("dropout_rate", cfg.dropout_rate)),
                leaky_slope=float(self.arch_overrides.get("leaky_slope", cfg.leaky_slope)),
            )
        return cfg

    def train_config(self) -> TrainConfig:
        return TrainConfig.for_dataset(self.dataset_tag, **self.train_overrides)

    def build_splits(self) -> data.SplitSpec:
        ds = self.dataset
        source = ds["source"]
        split_seed = int(ds.get("seed", 0))
        if source == "synthetic":
            spec = data.make_synthetic(
                n_normal=int(ds.get("n_normal", 1000)),
                n_anomalous=int(ds.get("n_anomalous", 200)),
                seed=split_seed,
            )
        elif source == "folder":
            if "root" not in ds:
                raise ConfigError("dataset.root is required for folder sources")
            spec = data.load_folder_binary(ds["root"], seed=split_seed, image_size=220)
        else:
            if "root" not in ds:
                raise ConfigError(f"dataset.root is required for {source}")
            src = data.load_torchvision_source(source, ds["root"], download=bool(ds.get("download", False)))
            strategy = ds.get("strategy")
            pivot = ds.get("pivot_class")
            if strategy == "one_vs_nine":
                spec = data.make_one_vs_nine(src, int(pivot), split_seed)
            elif strategy == "nine_vs_one":
                spec = data.make_nine_vs_one(src, int(pivot), split_seed)
            else:
                raise ConfigError(
                    f"dataset.strategy must be one_vs_nine or nine_vs_one for {source}, got {strategy!r}"
                )
        max_train = int(ds.get("max_train_items", 0))
        if max_train > 0 and len(spec.train) > max_train:
            spec.train = spec.train[:max_train]
            spec.metadata["max_train_items"] = max_train
        return spec

    def config_hash(self) -> str:
        canonical = json.dumps(self.raw, sort_keys=True, default=str)
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]
