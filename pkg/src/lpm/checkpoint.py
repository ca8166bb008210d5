"""JSON checkpoints shared by both model kinds.

Envelope: ``{"format_version": 1, "model": kind, "config": {...}, "params": {...}}``.
Floats are written with Python's shortest round-trip repr, so reloading
reproduces every parameter bit for bit.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping

import numpy as np

from .attention import AttentionModel
from .phasor import PhasorModel

FORMAT_VERSION = 1
MODEL_KINDS = {"phasor": PhasorModel, "attention": AttentionModel}


class CheckpointError(ValueError):
    pass


def to_document(model, params: Mapping[str, np.ndarray]) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "model": model.kind,
        "config": model.config_dict(),
        "params": model.params_to_json(params),
    }


def from_document(doc: Mapping):
    if doc.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format {doc.get('format_version')!r}")
    kind = doc.get("model", "phasor")
    if kind not in MODEL_KINDS:
        raise CheckpointError(f"unknown model kind {kind!r}")
    try:
        model = MODEL_KINDS[kind].from_config_dict(doc["config"])
        params = model.params_from_json(doc["params"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"malformed checkpoint: {exc}") from exc
    return model, params


def save(path, model, params: Mapping[str, np.ndarray]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_document(model, params), indent=2) + "\n")
    return path


def load(path):
    """Return ``(model, params)`` from a checkpoint file."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: not valid JSON ({exc})") from exc
    return from_document(doc)


def count_floats(params: Mapping[str, np.ndarray]) -> int:
    return int(sum(np.size(v) for v in params.values()))
