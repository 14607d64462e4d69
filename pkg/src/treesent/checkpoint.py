"""Checkpoints: a JSON manifest plus a flat little-endian float64 blob.

``save_checkpoint(base, ...)`` writes ``base.json`` and ``base.bin``. The
blob holds every tensor raveled in the declared ``named_tensors`` order;
loading validates the manifest shapes against the rebuilt model and the
blob length against the manifest.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import TrainingConfig
from .embeddings import UNK_TOKEN, Vocabulary
from .model import ModelParams, init_model

__all__ = ["CheckpointError", "Checkpoint", "save_checkpoint", "load_checkpoint"]

SCHEMA = "treesent/checkpoint-v1"


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    params: ModelParams
    config: TrainingConfig
    vocab: Vocabulary
    epoch: int
    dev_accuracy: float


def _paths(base) -> tuple[Path, Path]:
    base = Path(base)
    return base.with_name(base.name + ".json"), base.with_name(base.name + ".bin")


def save_checkpoint(base, params: ModelParams, config: TrainingConfig,
                    vocab: Vocabulary, epoch: int, dev_accuracy: float
                    ) -> tuple[Path, Path]:
    manifest_path, blob_path = _paths(base)
    manifest = {
        "schema": SCHEMA,
        "config": config.to_dict(),
        "vocab": vocab.tokens,
        "vocab_sha256": vocab.sha256(),
        "seed": config.seed,
        "epoch": epoch,
        "dev_accuracy": dev_accuracy,
        "tensors": [[name, list(arr.shape)] for name, arr in params.named_tensors()],
    }
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    manifest_path.write_text(
        json.dumps(manifest, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8")
    with open(blob_path, "wb") as handle:
        for _, arr in params.named_tensors():
            handle.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return manifest_path, blob_path


def load_checkpoint(base) -> Checkpoint:
    manifest_path, blob_path = _paths(base)
    if not manifest_path.exists():
        raise CheckpointError(f"missing checkpoint manifest {manifest_path}")
    if not blob_path.exists():
        raise CheckpointError(f"missing checkpoint blob {blob_path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"unreadable manifest {manifest_path}: {exc}") from None
    if manifest.get("schema") != SCHEMA:
        raise CheckpointError(f"unsupported checkpoint schema {manifest.get('schema')!r}")

    config = TrainingConfig.from_dict(manifest["config"])
    tokens = manifest["vocab"]
    if not tokens or tokens[0] != UNK_TOKEN:
        raise CheckpointError("vocabulary must start with the UNK token")
    vocab = Vocabulary(tokens[1:])
    if vocab.sha256() != manifest["vocab_sha256"]:
        raise CheckpointError("vocabulary hash mismatch")

    rng = np.random.default_rng(0)
    params = init_model(
        config, np.zeros((len(vocab), config.word_dim)), rng)

    declared = manifest["tensors"]
    rebuilt = [(name, list(arr.shape)) for name, arr in params.named_tensors()]
    if [name for name, _ in declared] != [name for name, _ in rebuilt]:
        raise CheckpointError(
            "tensor name mismatch between manifest and rebuilt model")
    for (name, want), (_, have) in zip(declared, rebuilt):
        if want != have:
            raise CheckpointError(
                f"shape mismatch for {name}: manifest {want}, model {have}")

    blob = blob_path.read_bytes()
    expected = sum(int(np.prod(shape)) for _, shape in declared)
    values = np.frombuffer(blob, dtype="<f8")
    if values.shape[0] != expected:
        raise CheckpointError(
            f"shape mismatch: blob holds {values.shape[0]} float64 values, "
            f"manifest declares {expected}")
    offset = 0
    for name, arr in params.named_tensors():
        size = arr.size
        arr[...] = values[offset:offset + size].reshape(arr.shape)
        offset += size
    return Checkpoint(params=params, config=config, vocab=vocab,
                      epoch=manifest["epoch"],
                      dev_accuracy=manifest["dev_accuracy"])
