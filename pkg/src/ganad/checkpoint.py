"""Checkpoint persistence.

A checkpoint is a directory holding one raw parameter archive per network
(`generator.bin`, `critic.bin`, `encoder.bin`) plus `metadata.json` with
the architecture config, seed, epoch, and a library-agnostic tensor
manifest (name, shape, dtype, byte offset into the archive). Save/load
round-trips are bit-exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

from ganad.archspec import ArchitectureConfig, ModelBundle, build_models
from ganad.errors import CheckpointError

METADATA_FILE = "metadata.json"
_DTYPES = {
    "float32": np.float32,
    "float64": np.float64,
    "int64": np.int64,
    "int32": np.int32,
    "uint8": np.uint8,
    "bool": np.bool_,
}


def _dump_state(module: torch.nn.Module, path: Path):
    manifest = []
    offset = 0
    with open(path, "wb") as fh:
        for name, tensor in module.state_dict().items():
            arr = tensor.detach().contiguous().cpu().numpy()
            data = arr.tobytes()
            manifest.append(
                {
                    "name": name,
                    "shape": list(arr.shape),
                    "dtype": str(arr.dtype),
                    "offset": offset,
                    "nbytes": len(data),
                }
            )
            fh.write(data)
            offset += len(data)
    return manifest


def _load_state(module: torch.nn.Module, path: Path, manifest):
    blob = path.read_bytes()
    state = {}
    for entry in manifest:
        dtype = _DTYPES.get(entry["dtype"])
        if dtype is None:
            raise CheckpointError(f"unsupported tensor dtype {entry['dtype']!r} in {path.name}")
        start, n = entry["offset"], entry["nbytes"]
        arr = np.frombuffer(blob[start : start + n], dtype=dtype).reshape(entry["shape"]).copy()
        state[entry["name"]] = torch.from_numpy(arr)
    module.load_state_dict(state)


def save_checkpoint(bundle: ModelBundle, directory, epoch: int, extra: dict | None = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    tensors = {}
    for name, module in bundle.modules_by_name().items():
        tensors[name] = _dump_state(module, directory / f"{name}.bin")
    metadata = {
        "format_version": 1,
        "arch_config": bundle.config.to_dict(),
        "seed": bundle.seed,
        "epoch": epoch,
        "extra": extra or {},
        "tensors": tensors,
    }
    (directory / METADATA_FILE).write_text(json.dumps(metadata, indent=2))
    return directory


def load_metadata(directory) -> dict:
    path = Path(directory) / METADATA_FILE
    if not path.is_file():
        raise CheckpointError(f"no {METADATA_FILE} in {directory}")
    return json.loads(path.read_text())


def load_checkpoint(directory) -> ModelBundle:
    """Rebuild a ModelBundle with parameters identical to the saved one."""
    directory = Path(directory)
    metadata = load_metadata(directory)
    config = ArchitectureConfig.from_dict(metadata["arch_config"])
    bundle = build_models(config, metadata["seed"])
    for name, module in bundle.modules_by_name().items():
        bin_path = directory / f"{name}.bin"
        if not bin_path.is_file():
            raise CheckpointError(f"missing archive {bin_path}")
        _load_state(module, bin_path, metadata["tensors"][name])
    return bundle
