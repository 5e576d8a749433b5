"""Single-file tensor container: one JSON header line, then a raw blob of
little-endian float32 values.

The header carries arbitrary metadata plus a tensor directory of
{name, shape, offset} entries; offsets are byte positions into the blob.
Language-neutral and mmap-friendly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import InvalidDataError

MAGIC = "osclab-tensors"
_ITEMSIZE = 4


def write_tensors(path, meta: dict, tensors: dict[str, np.ndarray]) -> None:
    directory = []
    offset = 0
    blobs = []
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype="<f4")
        directory.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(arr.tobytes())
        offset += arr.size * _ITEMSIZE
    header = {"magic": MAGIC, "version": 1, "meta": meta, "tensors": directory}
    with Path(path).open("wb") as fh:
        fh.write(json.dumps(header).encode("utf-8"))
        fh.write(b"\n")
        for blob in blobs:
            fh.write(blob)


def read_tensors(path) -> tuple[dict, dict[str, np.ndarray]]:
    with Path(path).open("rb") as fh:
        header_line = fh.readline()
        blob = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InvalidDataError(f"{path}: not a tensor file: {exc}") from exc
    if header.get("magic") != MAGIC:
        raise InvalidDataError(f"{path}: bad magic {header.get('magic')!r}")
    tensors = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + count * _ITEMSIZE
        if end > len(blob):
            raise InvalidDataError(f"{path}: tensor {entry['name']} overruns the blob")
        tensors[entry["name"]] = np.frombuffer(blob[start:end], dtype="<f4").reshape(shape).copy()
    return header["meta"], tensors
