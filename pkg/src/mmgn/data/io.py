"""FGRD field files and observation CSVs.

FGRD layout (little-endian)::

    8 bytes   magic b"FGRD\\x00\\x00\\x00\\x01" (last byte is the format version)
    3 x u32   n_t, n_h, n_w
    4 x f64   x_min, x_max, y_min, y_max
    n_t f64   time stamps
    f32       n_t * n_h * n_w values in [t][h][w] order

Values are held as float64 in memory and stored as float32, so a
write/read roundtrip is exact for any float32-representable cube.
"""

from __future__ import annotations

import csv
import io
import struct
from collections import OrderedDict

import numpy as np

from ..atomic import atomic_write_bytes
from .fields import GridField, ObservationSet

FGRD_MAGIC = b"FGRD\x00\x00\x00\x01"
_HEADER = struct.Struct("<8s3I4d")
OBS_HEADER = ["t_index", "x", "y", "value"]


class FieldFormatError(ValueError):
    pass


def encode_field(field: GridField) -> bytes:
    n_t, n_h, n_w = field.shape
    head = _HEADER.pack(FGRD_MAGIC, n_t, n_h, n_w, *field.coord_range)
    return b"".join([head, field.time_stamps.astype("<f8").tobytes(),
                     np.ascontiguousarray(field.values, dtype="<f4").tobytes()])


def decode_field(blob: bytes) -> GridField:
    if len(blob) < 8 or blob[:4] != FGRD_MAGIC[:4]:
        raise FieldFormatError("not an FGRD file (bad magic)")
    if blob[:8] != FGRD_MAGIC:
        raise FieldFormatError(f"unsupported FGRD version {blob[7]}")
    if len(blob) < _HEADER.size:
        raise FieldFormatError("truncated FGRD header")
    _, n_t, n_h, n_w, *crange = _HEADER.unpack_from(blob, 0)
    n_vals = n_t * n_h * n_w
    expected = _HEADER.size + 8 * n_t + 4 * n_vals
    if len(blob) != expected:
        raise FieldFormatError(f"FGRD size mismatch: expected {expected} bytes, found {len(blob)}")
    stamps = np.frombuffer(blob, "<f8", n_t, _HEADER.size).astype(np.float64)
    vals = np.frombuffer(blob, "<f4", n_vals, _HEADER.size + 8 * n_t)
    return GridField(vals.astype(np.float64).reshape(n_t, n_h, n_w), tuple(crange), stamps)


def write_field(field: GridField, path):
    atomic_write_bytes(path, encode_field(field))


def read_field(path) -> GridField:
    with open(path, "rb") as fh:
        return decode_field(fh.read())


def format_observations(observations: list[ObservationSet]) -> str:
    buf = io.StringIO()
    buf.write(",".join(OBS_HEADER) + "\n")
    for obs in observations:
        for (x, y), v in zip(obs.coords, obs.values):
            buf.write(f"{obs.time_index},{x:.17g},{y:.17g},{v:.17g}\n")
    return buf.getvalue()


def write_observations(observations: list[ObservationSet], path):
    atomic_write_bytes(path, format_observations(observations).encode("ascii"))


def read_observations(path) -> list[ObservationSet]:
    """Observation sets in order of first appearance of each ``t_index``."""
    groups: OrderedDict[int, list[tuple[float, float, float]]] = OrderedDict()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != OBS_HEADER:
            raise FieldFormatError(f"observation CSV header must be {','.join(OBS_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise FieldFormatError(f"line {lineno}: expected 4 columns, got {len(row)}")
            try:
                groups.setdefault(int(row[0]), []).append(
                    (float(row[1]), float(row[2]), float(row[3])))
            except ValueError as exc:
                raise FieldFormatError(f"line {lineno}: {exc}") from None
    out = []
    for t, rows in groups.items():
        arr = np.array(rows, dtype=np.float64)
        out.append(ObservationSet(t, arr[:, :2], arr[:, 2]))
    return out
