"""Versioned flat-file checkpoints: JSON manifest + named float64 records.

Layout: 8-byte magic, u32 manifest length, manifest JSON (vocabulary, slot
types, columns, hyperparameters, vocabulary hash), u32 record count, then per
record: u32 name length, name utf-8, u32 ndim, u32 dims..., u64 byte length,
raw little-endian float64 payload. Round-trips are bit-exact.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .corpus import Vocabulary
from .model import DialogueModel, ModelConfig

MAGIC = b"KBDLGCK1"
FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    """Unreadable, corrupt or incompatible checkpoint file."""


def save(path, model: DialogueModel, train_config: dict | None = None) -> None:
    vocab = model.vocab
    manifest = {
        "format_version": FORMAT_VERSION,
        "vocab_hash": vocab.digest(),
        "vocab": vocab.tokens,
        "slot_types": vocab.slot_types,
        "hyper": {
            "dim": model.config.dim,
            "columns": list(model.config.columns),
            "no_copy": model.config.no_copy,
            "init_scale": model.config.init_scale,
        },
        "train_config": train_config or {},
    }
    blob = json.dumps(manifest).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<I", len(model.params)))
        for name, node in model.params.items():
            payload = np.ascontiguousarray(node.value, dtype="<f8").tobytes()
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", node.value.ndim))
            for dim in node.value.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(struct.pack("<Q", len(payload)))
            fh.write(payload)


def _read(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return data


def load(path) -> tuple[DialogueModel, dict]:
    """Returns (model, manifest). Verifies magic, version and vocabulary hash."""
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    with open(path, "rb") as fh:
        if _read(fh, len(MAGIC), "magic") != MAGIC:
            raise CheckpointError(f"{path} is not a checkpoint (bad magic)")
        (manifest_len,) = struct.unpack("<I", _read(fh, 4, "manifest length"))
        manifest = json.loads(_read(fh, manifest_len, "manifest").decode("utf-8"))
        if manifest.get("format_version") != FORMAT_VERSION:
            raise CheckpointError(
                f"unsupported checkpoint version {manifest.get('format_version')}")
        vocab = Vocabulary(tokens=list(manifest["vocab"]),
                           slot_types=list(manifest["slot_types"]))
        if vocab.digest() != manifest["vocab_hash"]:
            raise CheckpointError("vocabulary hash mismatch: checkpoint is corrupt")
        (n_records,) = struct.unpack("<I", _read(fh, 4, "record count"))
        params: dict[str, ad.Node] = {}
        for _ in range(n_records):
            (name_len,) = struct.unpack("<I", _read(fh, 4, "name length"))
            name = _read(fh, name_len, "name").decode("utf-8")
            (ndim,) = struct.unpack("<I", _read(fh, 4, "ndim"))
            shape = tuple(struct.unpack("<I", _read(fh, 4, "dim"))[0] for _ in range(ndim))
            (nbytes,) = struct.unpack("<Q", _read(fh, 8, "payload length"))
            payload = _read(fh, nbytes, f"payload of {name}")
            value = np.frombuffer(payload, dtype="<f8").reshape(shape).copy()
            params[name] = ad.param(value, name=name)
    hyper = manifest["hyper"]
    config = ModelConfig(dim=int(hyper["dim"]), columns=tuple(hyper["columns"]),
                         no_copy=bool(hyper["no_copy"]),
                         init_scale=float(hyper.get("init_scale", 0.08)))
    return DialogueModel(vocab, config, params=params), manifest
