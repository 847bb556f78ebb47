"""
Checkpoint - Save and restore model parameters, config and vocabularies.

Directory layout:
    manifest.json       [{name, shape, offset}] in parameter order; offsets in bytes
    params.bin          little-endian float32 values, concatenated in manifest order
    config.json         {"model": ModelConfig fields, "training": training settings}
    code_vocab.json
    summary_vocab.json
"""

from __future__ import annotations

import json
import logging
import os
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List

import numpy as np

from .corpus import Vocabs, atomic_write_text
from .errors import CheckpointError, ConfigError, SchemaError
from .tensor import Tensor
from .tree_transformer import ModelConfig, ModelParams, parameter_shapes
from .vocab import Vocab

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"
PARAMS_FILE = "params.bin"
CONFIG_FILE = "config.json"
CODE_VOCAB_FILE = "code_vocab.json"
SUMMARY_VOCAB_FILE = "summary_vocab.json"

STORAGE_DTYPE = np.dtype("<f4")


@dataclass
class Checkpoint:
    params: ModelParams
    config: ModelConfig
    vocabs: Vocabs
    training: Dict[str, Any] = field(default_factory=dict)


def _manifest(params: ModelParams) -> List[Dict[str, Any]]:
    entries = []
    offset = 0
    for name, tensor in params.items():
        entries.append({"name": name, "shape": list(tensor.shape), "offset": offset})
        offset += int(np.prod(tensor.shape, dtype=np.int64)) * STORAGE_DTYPE.itemsize
    return entries


def save_checkpoint(directory: Path, params: ModelParams, config: ModelConfig, vocabs: Vocabs,
                    training: Dict[str, Any] = None) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    blob = b"".join(np.ascontiguousarray(tensor.data, dtype=STORAGE_DTYPE).tobytes()
                    for tensor in params.tensors())
    temp_blob = directory / f".{PARAMS_FILE}.tmp"
    temp_blob.write_bytes(blob)
    os.replace(temp_blob, directory / PARAMS_FILE)
    atomic_write_text(directory / MANIFEST_FILE, json.dumps(_manifest(params), indent=1) + "\n")
    atomic_write_text(directory / CONFIG_FILE,
                      json.dumps({"model": config.to_dict(), "training": training or {}}, indent=2) + "\n")
    atomic_write_text(directory / CODE_VOCAB_FILE, vocabs.code.to_json())
    atomic_write_text(directory / SUMMARY_VOCAB_FILE, vocabs.summary.to_json())
    logger.info("Saved checkpoint with %d parameters to %s", params.count(), directory)


def _read_json(path: Path) -> Any:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise CheckpointError(f"missing checkpoint file {path.name}") from e
    except json.JSONDecodeError as e:
        raise CheckpointError(f"{path.name} is not valid JSON: {e.msg}") from e


def load_checkpoint(directory: Path) -> Checkpoint:
    directory = Path(directory)
    if not directory.is_dir():
        raise CheckpointError(f"checkpoint directory {directory} does not exist")
    stored = _read_json(directory / CONFIG_FILE)
    try:
        config = ModelConfig.from_dict(stored["model"])
        config.validate()
    except (KeyError, TypeError, ConfigError) as e:
        raise CheckpointError(f"invalid model config in {CONFIG_FILE}: {e}") from e

    manifest = _read_json(directory / MANIFEST_FILE)
    expected = parameter_shapes(config)
    names = [entry.get("name") for entry in manifest] if isinstance(manifest, list) else None
    if names != list(expected):
        raise CheckpointError("manifest does not list the parameters this config defines")
    try:
        blob = (directory / PARAMS_FILE).read_bytes()
    except FileNotFoundError as e:
        raise CheckpointError(f"missing checkpoint file {PARAMS_FILE}") from e

    tensors: "OrderedDict[str, Tensor]" = OrderedDict()
    for entry in manifest:
        name, shape, offset = entry["name"], tuple(entry["shape"]), entry["offset"]
        if shape != expected[name]:
            raise CheckpointError(f"{name}: stored shape {shape} != expected {expected[name]}")
        count = int(np.prod(shape, dtype=np.int64))
        end = offset + count * STORAGE_DTYPE.itemsize
        if offset < 0 or end > len(blob):
            raise CheckpointError(f"{name}: byte range {offset}..{end} is outside {PARAMS_FILE}")
        values = np.frombuffer(blob, dtype=STORAGE_DTYPE, count=count, offset=offset)
        tensors[name] = Tensor(values.astype(np.float64).reshape(shape), requires_grad=True, name=name)

    try:
        vocabs = Vocabs(Vocab.load(directory / CODE_VOCAB_FILE), Vocab.load(directory / SUMMARY_VOCAB_FILE))
    except FileNotFoundError as e:
        raise CheckpointError(f"missing vocabulary file {Path(e.filename).name}") from e
    except SchemaError as e:
        raise CheckpointError(str(e)) from e
    if len(vocabs.code) != config.code_vocab_size or len(vocabs.summary) != config.summary_vocab_size:
        raise CheckpointError("vocabulary sizes do not match the model config")
    logger.info("Loaded checkpoint from %s", directory)
    return Checkpoint(ModelParams(tensors), config, vocabs, stored.get("training", {}))
