"""Dataset protocols: one-class relabelings, folder loading, and synthetic data.

Natural 10-class sources are turned into anomaly-detection datasets two
ways: "1 vs 9" (one class anomalous, nine normal) and "9 vs 1" (one class
normal, nine anomalous). Training always sees normal items only; the test
pool mixes both labels. Pixels are scaled to [-1, 1] to match the tanh
generator output.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ganad.errors import ConfigError

log = logging.getLogger(__name__)

STRATEGIES = ("one_vs_nine", "nine_vs_one", "folder_binary", "synthetic")

VALIDATION_FRACTION = 0.05  # carve-out from normal training items


@dataclass(frozen=True)
class LabeledImage:
    item_id: str
    pixels: np.ndarray  # float32 (C, H, W) in [-1, 1]
    class_id: int
    anomaly_label: int  # 0 normal, 1 anomalous


@dataclass
class SplitSpec:
    strategy: str
    pivot_class: int | None
    seed: int
    train: list = field(default_factory=list)
    validation: list = field(default_factory=list)
    test: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def validate(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if any(it.anomaly_label != 0 for it in self.train):
            raise ConfigError("training split must contain only normal items")
        labels = {it.anomaly_label for it in self.test}
        if labels != {0, 1}:
            raise ConfigError(f"test split must contain both labels, found {sorted(labels)}")
        ids = [it.item_id for split in (self.train, self.validation, self.test) for it in split]
        if len(ids) != len(set(ids)):
            raise ConfigError("train/validation/test must be pairwise disjoint by item id")
        return self

    def manifest(self) -> dict:
        return {
            "strategy": self.strategy,
            "pivot_class": self.pivot_class,
            "seed": self.seed,
            "metadata": self.metadata,
            "train_ids": [it.item_id for it in self.train],
            "validation_ids": [it.item_id for it in self.validation],
            "test_ids": [it.item_id for it in self.test],
        }

    def save_manifest(self, path):
        Path(path).write_text(json.dumps(self.manifest(), indent=2))


def scale_pixels(raw: np.ndarray) -> np.ndarray:
    """Map uint8 [0, 255] (or float in [0, 1]) pixels to float32 [-1, 1]."""
    arr = np.asarray(raw)
    if arr.dtype == np.uint8:
        return (arr.astype(np.float32) / 255.0) * 2.0 - 1.0
    arr = arr.astype(np.float32)
    if arr.min() < -1.0 - 1e-6 or arr.max() > 1.0 + 1e-6:
        raise ConfigError("float pixels must already be in [-1, 1] or be uint8")
    return arr


def unscale_pixels(pixels: np.ndarray) -> np.ndarray:
    """Inverse of scale_pixels back to uint8 (lossless within 1/255)."""
    return np.clip(np.round((pixels + 1.0) / 2.0 * 255.0), 0, 255).astype(np.uint8)


@dataclass
class ArraySource:
    """A 10-class image source with canonical train/test partitions.

    Images are (N, C, H, W) uint8; class ids are integers in [0, 9].
    """

    name: str
    train_images: np.ndarray
    train_classes: np.ndarray
    test_images: np.ndarray
    test_classes: np.ndarray

    def n_classes(self) -> int:
        return int(max(self.train_classes.max(), self.test_classes.max())) + 1


def _items(source_name, partition, images, classes, anomaly_fn):
    out = []
    for i in range(len(images)):
        cid = int(classes[i])
        out.append(
            LabeledImage(
                item_id=f"{source_name}/{partition}/{i}",
                pixels=scale_pixels(images[i]),
                class_id=cid,
                anomaly_label=int(anomaly_fn(cid)),
            )
        )
    return out


def _carve_validation(train_items, seed):
    rng = np.random.RandomState(seed)
    idx = rng.permutation(len(train_items))
    n_val = max(1, int(round(VALIDATION_FRACTION * len(train_items))))
    val_idx = set(idx[:n_val].tolist())
    train = [it for i, it in enumerate(train_items) if i not in val_idx]
    val = [it for i, it in enumerate(train_items) if i in val_idx]
    return train, val


def _class_split(source: ArraySource, strategy, pivot, seed, anomaly_fn) -> SplitSpec:
    if not 0 <= pivot <= 9:
        raise ConfigError(f"pivot class must be in [0, 9], got {pivot}")
    normal_train = _items(
        source.name, "train", source.train_images, source.train_classes, anomaly_fn
    )
    normal_train = [it for it in normal_train if it.anomaly_label == 0]
    train, val = _carve_validation(normal_train, seed)
    test = _items(source.name, "test", source.test_images, source.test_classes, anomaly_fn)
    spec = SplitSpec(
        strategy=strategy,
        pivot_class=pivot,
        seed=seed,
        train=train,
        validation=val,
        test=test,
        metadata={"source": source.name, "validation_fraction": VALIDATION_FRACTION},
    )
    return spec.validate()


def make_one_vs_nine(source: ArraySource, anomalous_class: int, seed: int) -> SplitSpec:
    """One class is anomalous; the remaining nine form the normal class."""
    return _class_split(
        source, "one_vs_nine", anomalous_class, seed, lambda c: c == anomalous_class
    )


def make_nine_vs_one(source: ArraySource, normal_class: int, seed: int) -> SplitSpec:
    """One class is normal; the remaining nine form the anomalous class."""
    return _class_split(
        source, "nine_vs_one", normal_class, seed, lambda c: c != normal_class
    )


def load_folder_binary(root, seed: int, image_size=None) -> SplitSpec:
    """Load a `normal/` + `anomalous/` folder dataset.

    100 normal images train, 20 validate, and everything else (normal
    remainder plus all anomalous images) is the test pool. Requires at
    least 120 normal images. Unreadable files are skipped with a warning
    and counted in the manifest metadata.
    """
    from PIL import Image

    root = Path(root)
    skipped = 0

    def load_dir(sub, label):
        nonlocal skipped
        items = []
        folder = root / sub
        if not folder.is_dir():
            raise ConfigError(f"missing folder {folder}")
        for p in sorted(folder.iterdir()):
            if p.suffix.lower() not in (".png", ".jpg", ".jpeg"):
                continue
            try:
                img = Image.open(p).convert("RGB")
            except Exception as exc:
                log.warning("skipping unreadable image %s: %s", p, exc)
                skipped += 1
                continue
            if image_size is not None:
                img = img.resize((image_size, image_size), Image.BILINEAR)
            arr = np.asarray(img, dtype=np.uint8).transpose(2, 0, 1)
            items.append(
                LabeledImage(
                    item_id=f"{sub}/{p.name}", pixels=scale_pixels(arr), class_id=label, anomaly_label=label
                )
            )
        return items

    normal = load_dir("normal", 0)
    anomalous = load_dir("anomalous", 1)
    if len(normal) < 120:
        raise ConfigError(
            f"need at least 120 readable normal images (100 train + 20 validation), found {len(normal)}"
        )
    rng = np.random.RandomState(seed)
    order = rng.permutation(len(normal))
    train = [normal[i] for i in order[:100]]
    val = [normal[i] for i in order[100:120]]
    test = [normal[i] for i in order[120:]] + anomalous
    spec = SplitSpec(
        strategy="folder_binary",
        pivot_class=None,
        seed=seed,
        train=train,
        validation=val,
        test=test,
        metadata={"root": str(root), "skipped_unreadable": skipped},
    )
    return spec.validate()


def _blob(rng, center, sigma, size=28):
    yy, xx = np.mgrid[0:size, 0:size]
    cy, cx = center
    img = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * sigma**2))
    img = img + rng.normal(0.0, 0.02, size=img.shape)
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def make_synthetic(n_normal: int, n_anomalous: int, seed: int) -> SplitSpec:
    """Desk-scale 28x28 dataset: centered blobs are normal, corner blobs anomalous.

    Normal items split 80/10/10 into train/validation/test; anomalous items
    go to the test pool only. Fully determined by the seed.
    """
    if n_normal < 120:
        raise ConfigError(f"n_normal must be >= 120, got {n_normal}")
    rng = np.random.RandomState(seed)

    def normal_item(i):
        cy, cx = 14 + rng.uniform(-2, 2), 14 + rng.uniform(-2, 2)
        sigma = rng.uniform(2.5, 3.5)
        px = _blob(rng, (cy, cx), sigma) * 2.0 - 1.0
        return LabeledImage(f"synthetic/normal/{i}", px[None, :, :], class_id=0, anomaly_label=0)

    def anomalous_item(i):
        corner_y = rng.choice([4.0, 24.0])
        corner_x = rng.choice([4.0, 24.0])
        cy, cx = corner_y + rng.uniform(-1, 1), corner_x + rng.uniform(-1, 1)
        sigma = rng.uniform(2.5, 3.5)
        px = _blob(rng, (cy, cx), sigma) * 2.0 - 1.0
        return LabeledImage(f"synthetic/anomalous/{i}", px[None, :, :], class_id=1, anomaly_label=1)

    normal = [normal_item(i) for i in range(n_normal)]
    anomalous = [anomalous_item(i) for i in range(n_anomalous)]
    n_train = int(round(0.8 * n_normal))
    n_val = int(round(0.1 * n_normal))
    spec = SplitSpec(
        strategy="synthetic",
        pivot_class=None,
        seed=seed,
        train=normal[:n_train],
        validation=normal[n_train : n_train + n_val],
        test=normal[n_train + n_val :] + anomalous,
        metadata={"n_normal": n_normal, "n_anomalous": n_anomalous},
    )
    return spec.validate()


def save_synthetic_folder(spec: SplitSpec, root):
    """Materialize a synthetic SplitSpec as normal/ + anomalous/ PNG folders."""
    from PIL import Image

    root = Path(root)
    for sub in ("normal", "anomalous"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    for it in spec.train + spec.validation + spec.test:
        sub = "anomalous" if it.anomaly_label else "normal"
        arr = unscale_pixels(it.pixels)[0]
        name = it.item_id.replace("/", "_") + ".png"
        Image.fromarray(arr, mode="L").save(root / sub / name)


def load_torchvision_source(name: str, root, download: bool = False) -> ArraySource:
    """Load MNIST/CIFAR10/SVHN through torchvision as an ArraySource.

    Raises ConfigError when the data is not present and cannot be fetched.
    """
    try:
        from torchvision import datasets
    except ImportError as exc:
        raise ConfigError("torchvision is required for natural-image datasets") from exc

    try:
        if name == "mnist":
            tr = datasets.MNIST(root, train=True, download=download)
            te = datasets.MNIST(root, train=False, download=download)
            tr_x = tr.data.numpy()[:, None, :, :]
            te_x = te.data.numpy()[:, None, :, :]
            tr_y, te_y = tr.targets.numpy(), te.targets.numpy()
        elif name == "cifar10":
            tr = datasets.CIFAR10(root, train=True, download=download)
            te = datasets.CIFAR10(root, train=False, download=download)
            tr_x = tr.data.transpose(0, 3, 1, 2)
            te_x = te.data.transpose(0, 3, 1, 2)
            tr_y, te_y = np.asarray(tr.targets), np.asarray(te.targets)
        elif name == "svhn":
            tr = datasets.SVHN(root, split="train", download=download)
            te = datasets.SVHN(root, split="test", download=download)
            tr_x, te_x = tr.data, te.data
            tr_y, te_y = tr.labels, te.labels
        else:
            raise ConfigError(f"unknown torchvision source {name!r}")
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"could not load dataset {name!r} from {root}: {exc}") from exc
    return ArraySource(name, tr_x.astype(np.uint8), tr_y, te_x.astype(np.uint8), te_y)
