"""Model checkpoints: the CLDM binary container.

Layout (all integers little-endian):

    magic   4 bytes  b"CLDM"
    version u16      1
    flags   u16      0 (reserved)
    hlen    u32      byte length of the JSON header
    header  hlen bytes, UTF-8 JSON:
        {"config": {training-config fields},
         "arrays": [{"name": ..., "shape": [...]}, ...]}
    blocks  one per header entry, in order: float64 little-endian C-order

Stored arrays are the trainable parameters only (MLP layers, assignment
head, target map); the noise schedule is rebuilt from the config, and
optimizer state is deliberately not persisted — a checkpoint captures a
model, not a training session.  The JSON is serialized canonically (sorted
keys, no whitespace) so saving the same model twice is byte-identical.
"""

from __future__ import annotations

import dataclasses
import json
import struct

import numpy as np

from .denoiser import DenoiserParams
from .errors import DataFormatError
from .heads import HeadParams
from .trainer import Model, TrainConfig, build_sqrt_schedule

_MAGIC = b"CLDM"
_VERSION = 1
_PREFIX = struct.Struct("<4sHHI")
_TUPLE_FIELDS = {"hidden_sizes", "noise_var_range"}


def _array_items(model: Model):
    """(name, array) pairs in storage order."""
    items = []
    for i, (w, b) in enumerate(zip(model.denoiser.weights,
                                   model.denoiser.biases)):
        items.append((f"weights.{i}", w))
        items.append((f"biases.{i}", b))
    items.append(("assignment", model.heads.assignment))
    items.append(("targets", model.heads.targets))
    return items


def save_model(path, model: Model) -> None:
    """Write a CLDM checkpoint; overwrites any existing file."""
    items = _array_items(model)
    header = {
        "config": dataclasses.asdict(model.config),
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in items],
    }
    blob = json.dumps(header, sort_keys=True,
                      separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(_MAGIC, _VERSION, 0, len(blob)))
        fh.write(blob)
        for _, arr in items:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_model(path) -> Model:
    """Read a CLDM checkpoint back into a model.

    The schedule is rebuilt from the stored config; array shapes are
    validated against both the header and the config's architecture.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _PREFIX.size:
        raise DataFormatError("checkpoint too short for its header")
    magic, version, flags, hlen = _PREFIX.unpack_from(raw, 0)
    if magic != _MAGIC:
        raise DataFormatError(f"bad magic {magic!r}, expected {_MAGIC!r}")
    if version != _VERSION:
        raise DataFormatError(f"unsupported checkpoint version {version}")
    if flags != 0:
        raise DataFormatError(f"unsupported flags {flags:#x}")
    body = _PREFIX.size + hlen
    if len(raw) < body:
        raise DataFormatError("checkpoint truncated inside JSON header")
    try:
        header = json.loads(raw[_PREFIX.size:body].decode("utf-8"))
        config_dict = dict(header["config"])
        entries = list(header["arrays"])
    except (ValueError, KeyError, TypeError) as exc:
        raise DataFormatError(f"malformed checkpoint header: {exc}") from exc

    for key in _TUPLE_FIELDS:
        if key in config_dict and isinstance(config_dict[key], list):
            config_dict[key] = tuple(config_dict[key])
    known = {f.name for f in dataclasses.fields(TrainConfig)}
    unknown = set(config_dict) - known
    if unknown:
        raise DataFormatError(f"unknown config fields: {sorted(unknown)}")
    try:
        config = TrainConfig(**config_dict)
    except (TypeError, ValueError) as exc:
        raise DataFormatError(f"invalid stored config: {exc}") from exc

    arrays = {}
    offset = body
    for entry in entries:
        try:
            name = entry["name"]
            shape = tuple(int(s) for s in entry["shape"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(f"malformed array entry: {entry!r}") from exc
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = count * 8
        if offset + nbytes > len(raw):
            raise DataFormatError(f"checkpoint truncated in block {name!r}")
        arrays[name] = np.frombuffer(
            raw, dtype="<f8", count=count, offset=offset
        ).reshape(shape).astype(np.float64)
        offset += nbytes
    if offset != len(raw):
        raise DataFormatError(
            f"{len(raw) - offset} trailing bytes after final block"
        )

    n_layers = len(config.hidden_sizes) + 1
    expected = {f"weights.{i}" for i in range(n_layers)}
    expected |= {f"biases.{i}" for i in range(n_layers)}
    expected |= {"assignment", "targets"}
    if set(arrays) != expected:
        raise DataFormatError(
            f"checkpoint arrays {sorted(arrays)} do not match the stored "
            f"architecture (expected {sorted(expected)})"
        )

    try:
        denoiser = DenoiserParams(
            embed_dim=config.embed_dim,
            feature_dim=config.feature_dim,
            time_dim=config.time_dim,
            horizon=config.horizon,
            weights=[arrays[f"weights.{i}"] for i in range(n_layers)],
            biases=[arrays[f"biases.{i}"] for i in range(n_layers)],
        )
        heads = HeadParams(assignment=arrays["assignment"],
                           targets=arrays["targets"])
    except Exception as exc:
        raise DataFormatError(f"stored arrays are inconsistent: {exc}") from exc
    if heads.n_clusters != config.n_clusters or heads.embed_dim != config.embed_dim:
        raise DataFormatError("head shapes do not match the stored config")
    schedule = build_sqrt_schedule(config.horizon, config.schedule_shift,
                                   config.schedule_floor)
    return Model(config=config, schedule=schedule, denoiser=denoiser,
                 heads=heads)
