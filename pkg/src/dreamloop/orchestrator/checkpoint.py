"""Versioned binary checkpoints.

Layout: magic ``TWM1``, format version, the canonical config text, then a
sequence of named float32 little-endian blobs. Blob names are namespaced:

  param.<module>.<name>   trained parameters (modules: obs, dyn, actor, critic)
  adam.step.<module>      optimizer step counter (scalar)
  adam.m.<module>.<name>  first-moment buffer
  adam.v.<module>.<name>  second-moment buffer
  state.<key>             run counters and environment facts (scalars)

Parameter blobs precede optimizer blobs, which precede state scalars.
Partial loading (for inference, which needs only the image encoder and the
actor) just skips the names it does not ask for.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..numerics import ParameterSet, UsageError
from .config import TrainConfig, parse_text

MAGIC = b"TWM1"
VERSION = 1


def _write_blob(f, name: str, arr: np.ndarray) -> None:
    encoded = name.encode("utf-8")
    if len(encoded) > 0xFFFF:
        raise UsageError(f"blob name too long: {name!r}")
    data = np.ascontiguousarray(arr, dtype="<f4")
    f.write(struct.pack("<H", len(encoded)))
    f.write(encoded)
    f.write(struct.pack("<B", data.ndim))
    for dim in data.shape:
        f.write(struct.pack("<I", dim))
    f.write(data.tobytes())


def _read_exact(f, n: int) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise ValueError("truncated checkpoint file")
    return buf


def _read_blob(f) -> tuple[str, np.ndarray]:
    (name_len,) = struct.unpack("<H", _read_exact(f, 2))
    name = _read_exact(f, name_len).decode("utf-8")
    (ndim,) = struct.unpack("<B", _read_exact(f, 1))
    shape = tuple(struct.unpack("<I", _read_exact(f, 4))[0] for _ in range(ndim))
    count = int(np.prod(shape, dtype=np.int64)) if shape else 1
    data = np.frombuffer(_read_exact(f, 4 * count), dtype="<f4").reshape(shape)
    return name, data.astype(np.float32)


@dataclass
class Checkpoint:
    config_text: str
    blobs: dict[str, np.ndarray]

    def config(self) -> TrainConfig:
        return parse_text(self.config_text)

    def scalar(self, key: str) -> float:
        return float(np.asarray(self.blobs[f"state.{key}"]).reshape(()))

    def opt_step(self, set_name: str) -> int:
        key = f"adam.step.{set_name}"
        if key not in self.blobs:
            raise UsageError(f"checkpoint is missing blob '{key}'")
        return int(round(float(np.asarray(self.blobs[key]).reshape(()))))

    def names(self, prefix: str = "") -> list[str]:
        return [n for n in self.blobs if n.startswith(prefix)]


def save_checkpoint(path: str, config_text: str,
                    param_sets: dict[str, ParameterSet],
                    state: dict[str, float] | None = None) -> None:
    blobs: list[tuple[str, np.ndarray]] = []
    for set_name, params in param_sets.items():
        for name, tensor in params.items():
            blobs.append((f"param.{set_name}.{name}", tensor.data))
    for set_name, params in param_sets.items():
        blobs.append((f"adam.step.{set_name}", np.asarray(float(params.step_count))))
        for name in params.names():
            blobs.append((f"adam.m.{set_name}.{name}", params.m[name]))
            blobs.append((f"adam.v.{set_name}.{name}", params.v[name]))
    for key, value in (state or {}).items():
        blobs.append((f"state.{key}", np.asarray(float(value))))

    encoded_cfg = config_text.encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<Q", len(encoded_cfg)))
        f.write(encoded_cfg)
        f.write(struct.pack("<I", len(blobs)))
        for name, arr in blobs:
            _write_blob(f, name, arr)


def load_checkpoint(path: str) -> Checkpoint:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise ValueError(f"bad checkpoint magic {magic!r}, expected {MAGIC!r}")
        (version,) = struct.unpack("<I", _read_exact(f, 4))
        if version != VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        (cfg_len,) = struct.unpack("<Q", _read_exact(f, 8))
        config_text = _read_exact(f, cfg_len).decode("utf-8")
        (n_blobs,) = struct.unpack("<I", _read_exact(f, 4))
        blobs = {}
        for _ in range(n_blobs):
            name, arr = _read_blob(f)
            if name in blobs:
                raise ValueError(f"duplicate blob '{name}' in checkpoint")
            blobs[name] = arr
    return Checkpoint(config_text=config_text, blobs=blobs)


def restore_parameter_set(ck: Checkpoint, set_name: str, params: ParameterSet,
                          optimizer_state: bool = True) -> None:
    """Copy every parameter of `params` (and optionally its Adam buffers)
    out of the checkpoint; missing or misshapen blobs raise."""
    for name in params.names():
        key = f"param.{set_name}.{name}"
        if key not in ck.blobs:
            raise UsageError(f"checkpoint is missing blob '{key}'")
        params.load_array(name, ck.blobs[key])
    if not optimizer_state:
        return
    params.step_count = ck.opt_step(set_name)
    for name in params.names():
        for buf, prefix in ((params.m, "adam.m"), (params.v, "adam.v")):
            key = f"{prefix}.{set_name}.{name}"
            if key not in ck.blobs:
                raise UsageError(f"checkpoint is missing blob '{key}'")
            arr = ck.blobs[key]
            if arr.shape != buf[name].shape:
                raise UsageError(f"shape mismatch restoring '{key}'")
            buf[name][...] = arr
