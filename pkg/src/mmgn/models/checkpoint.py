"""Versioned binary checkpoint container.

Layout (all integers little-endian)::

    bytes 0..7    magic  b"MMGNCKPT"
    u32           format version (currently 1)
    u32           header length H in bytes
    H bytes       UTF-8 JSON header
    payload       arrays back to back, float64 little-endian, C order

The header holds ``model`` (kind, dims or arch, filter_kind, config) and an
``arrays`` list of ``{"name", "shape"}`` entries in payload order. Array
names are prefixed ``param/``, ``buffer/`` or ``latent/`` (``latent/codes``,
``latent/time_stamps``).
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict

import numpy as np

from ..atomic import atomic_write_bytes
from .baselines import BaselineModel
from .latent import LatentTable
from .mmgn import MmgnDims, MmgnModel

MAGIC = b"MMGNCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _model_header(model) -> tuple[dict, list[tuple[str, np.ndarray]]]:
    if isinstance(model, MmgnModel):
        head = dict(kind="mmgn", dims=asdict(model.dims), filter_kind=model.filter_kind,
                    config=model.config)
        arrays = [(f"param/{k}", v) for k, v in model.params.items()]
    elif isinstance(model, BaselineModel):
        head = dict(kind="baseline", arch=model.arch, d_in=model.d_in, config=model.config)
        arrays = [(f"param/{k}", v) for k, v in model.params.items()]
        arrays += [(f"buffer/{k}", v) for k, v in model.buffers.items()]
    else:
        raise TypeError(f"cannot checkpoint {type(model).__name__}")
    return head, arrays


def save_checkpoint(path, model, latents: LatentTable | None = None, extra: dict | None = None):
    head, arrays = _model_header(model)
    if latents is not None:
        arrays += [("latent/codes", latents.codes), ("latent/time_stamps", latents.time_stamps)]
    header = dict(model=head, extra=extra or {},
                  arrays=[dict(name=n, shape=list(np.shape(a))) for n, a in arrays])
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<II", VERSION, len(hbytes)), hbytes]
    parts += [np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in arrays]
    atomic_write_bytes(path, b"".join(parts))


def load_checkpoint(path):
    """Return ``(model, latents_or_None, extra)``."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16 or blob[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    version, hlen = struct.unpack_from("<II", blob, 8)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    if len(blob) < 16 + hlen:
        raise CheckpointError(f"{path}: truncated header")
    header = json.loads(blob[16:16 + hlen].decode("utf-8"))
    offset = 16 + hlen
    arrays = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        nbytes = 8 * int(np.prod(shape, dtype=np.int64))
        if offset + nbytes > len(blob):
            raise CheckpointError(f"{path}: truncated payload at {entry['name']}")
        arrays[entry["name"]] = np.frombuffer(blob, "<f8", int(np.prod(shape)), offset) \
            .reshape(shape).astype(np.float64)
        offset += nbytes
    if offset != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - offset} trailing bytes")

    params = {k[6:]: v for k, v in arrays.items() if k.startswith("param/")}
    buffers = {k[7:]: v for k, v in arrays.items() if k.startswith("buffer/")}
    head = header["model"]
    if head["kind"] == "mmgn":
        model = MmgnModel(MmgnDims(**head["dims"]), params, head["filter_kind"], head["config"])
    elif head["kind"] == "baseline":
        model = BaselineModel(head["arch"], head["d_in"], params, buffers, head["config"])
    else:
        raise CheckpointError(f"{path}: unknown model kind {head['kind']!r}")
    latents = None
    if "latent/codes" in arrays:
        latents = LatentTable(arrays["latent/codes"], arrays["latent/time_stamps"])
    return model, latents, header.get("extra", {})
