"""Binary model checkpoints.

Layout (little-endian): magic ``TQSTMDL1``, a u32 byte count, a UTF-8 JSON
config record (model config, seed, parameter shapes, free-form metadata),
then every parameter buffer in declaration order as f64.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError
from .models import Model, ModelConfig, build_model

MAGIC = b"TQSTMDL1"


def checkpoint_bytes(model: Model) -> bytes:
    record = {
        "config": model.config.to_dict(),
        "seed": model.seed,
        "n_params": model.n_params(),
        "shapes": [list(p.shape) for p in model.params()],
        "meta": model.meta,
    }
    header = json.dumps(record, sort_keys=True).encode()
    body = b"".join(np.ascontiguousarray(p.value, dtype="<f8").tobytes() for p in model.params())
    return MAGIC + struct.pack("<I", len(header)) + header + body


def save_checkpoint(model: Model, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(checkpoint_bytes(model))
    return path


def read_header(path: str | Path) -> dict:
    raw = Path(path).read_bytes()
    return _parse(raw)[0]


def _parse(raw: bytes) -> tuple[dict, bytes]:
    if raw[:8] != MAGIC:
        raise FormatError("not a model checkpoint (bad magic)")
    (size,) = struct.unpack("<I", raw[8:12])
    try:
        record = json.loads(raw[12 : 12 + size].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"corrupt checkpoint header: {exc}") from None
    return record, raw[12 + size :]


def load_checkpoint(path: str | Path) -> Model:
    record, body = _parse(Path(path).read_bytes())
    cfg = ModelConfig.from_dict(record["config"])
    model = build_model(cfg, seed=int(record["seed"]))
    params = model.params()
    if [list(p.shape) for p in params] != record["shapes"]:
        raise FormatError("checkpoint shapes do not match the rebuilt architecture")
    flat = np.frombuffer(body, dtype="<f8")
    if flat.size != sum(p.size for p in params):
        raise FormatError("checkpoint parameter payload has the wrong size")
    offset = 0
    for p in params:
        p.value[...] = flat[offset : offset + p.size].reshape(p.shape)
        offset += p.size
    model.meta = record.get("meta", {})
    return model.eval()
