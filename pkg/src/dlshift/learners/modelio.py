"""Versioned binary model files.

Layout (all integers little-endian)::

    b"DLSM" | u16 version | u8 kind tag | u32 header length | header (UTF-8 JSON)
    | raw array bytes, in header order | u32 CRC-32 of everything before it

Arrays are stored as little-endian float64 (``<f8``) or int64 (``<i8``).
"""
from __future__ import annotations

import json
import struct
import zlib

import numpy as np

from ..errors import FormatError
from .base import FeatureLayout, Kind
from .model import LearnerModel

MAGIC = b"DLSM"
VERSION = 1
KIND_TAGS = {Kind.LR: 1, Kind.ANN: 2, Kind.RF: 3, Kind.GB: 4, Kind.RNN: 5}
TAG_KINDS = {v: k for k, v in KIND_TAGS.items()}
_PREFIX = struct.Struct("<4sHBI")


def serialize(model: LearnerModel) -> bytes:
    arrays = []
    blobs = []
    for name in sorted(model.params):
        arr = np.asarray(model.params[name])
        dtype = "<i8" if np.issubdtype(arr.dtype, np.integer) else "<f8"
        arr = np.ascontiguousarray(arr, dtype=dtype)
        arrays.append([name, dtype, list(arr.shape)])
        blobs.append(arr.tobytes())
    header = json.dumps(
        {
            "hyperparameters": model.hyperparameters,
            "layout": model.layout.to_dict(),
            "meta": model.meta,
            "arrays": arrays,
        },
        sort_keys=True,
    ).encode("utf-8")
    body = _PREFIX.pack(MAGIC, VERSION, KIND_TAGS[model.kind], len(header)) + header + b"".join(blobs)
    return body + struct.pack("<I", zlib.crc32(body))


def deserialize(data: bytes) -> LearnerModel:
    if len(data) < _PREFIX.size + 4:
        raise FormatError("model file truncated")
    magic, version, tag, hlen = _PREFIX.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError("not a model file (bad magic bytes)")
    if version != VERSION:
        raise FormatError(f"unsupported model format version {version} (expected {VERSION})")
    if tag not in TAG_KINDS:
        raise FormatError(f"unknown kind tag {tag}")
    (crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) != crc:
        raise FormatError("checksum mismatch; model file is corrupted")
    start = _PREFIX.size
    try:
        header = json.loads(data[start : start + hlen].decode("utf-8"))
        offset = start + hlen
        params = {}
        for name, dtype, shape in header["arrays"]:
            count = int(np.prod(shape)) if shape else 1
            nbytes = count * 8
            params[name] = np.frombuffer(data, dtype=dtype, count=count, offset=offset).reshape(shape).copy()
            offset += nbytes
        if offset != len(data) - 4:
            raise FormatError("trailing bytes after parameter arrays")
        layout = FeatureLayout.from_dict(header["layout"])
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"malformed model header: {exc}") from None
    return LearnerModel(TAG_KINDS[tag], params, header["hyperparameters"], layout, header["meta"])


def save(model: LearnerModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize(model))


def load(path) -> LearnerModel:
    with open(path, "rb") as fh:
        return deserialize(fh.read())
