"""Parameter snapshot container.

Layout, all little-endian:

    NFETCCKPT 1\n          magic + format version
    <meta_len>\n           ASCII byte length of the JSON block
    <meta JSON>            run metadata plus ordered parameter descriptors
    <tensor bytes>         float64 C-order arrays, concatenated in meta order

The writer is fully deterministic, so identical runs produce byte-identical
files; the loader rejects truncation, trailing bytes, and non-finite values.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .autodiff import ParamSet

MAGIC = b"NFETCCKPT 1\n"


class CheckpointError(ValueError):
    pass


def save(path: str, meta: dict, params: ParamSet) -> None:
    if "params" in meta:
        raise CheckpointError("meta key 'params' is reserved")
    doc = dict(meta)
    doc["params"] = [
        {"name": n, "trainable": params.is_trainable(n), "shape": list(t.data.shape)}
        for n, t in params.items()
    ]
    blob = json.dumps(doc).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(str(len(blob)).encode("ascii") + b"\n")
        f.write(blob)
        for _, t in params.items():
            f.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())


def load(path: str) -> tuple[dict, ParamSet]:
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(MAGIC):
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    rest = data[len(MAGIC):]
    nl = rest.find(b"\n")
    if nl < 0:
        raise CheckpointError(f"{path}: truncated before meta length")
    try:
        meta_len = int(rest[:nl])
    except ValueError:
        raise CheckpointError(f"{path}: malformed meta length") from None
    body = rest[nl + 1:]
    if len(body) < meta_len:
        raise CheckpointError(f"{path}: truncated meta block")
    try:
        meta = json.loads(body[:meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: corrupt meta block: {e}") from None
    entries = meta.get("params")
    if not isinstance(entries, list):
        raise CheckpointError(f"{path}: meta lacks the parameter list")
    params = ParamSet()
    offset = meta_len
    for e in entries:
        shape = tuple(e["shape"])
        nbytes = 8 * math.prod(shape)
        chunk = body[offset:offset + nbytes]
        if len(chunk) < nbytes:
            raise CheckpointError(f"{path}: truncated tensor {e['name']!r}")
        arr = np.frombuffer(chunk, dtype="<f8").reshape(shape).copy()
        if not np.all(np.isfinite(arr)):
            raise CheckpointError(f"{path}: non-finite values in {e['name']!r}")
        params.add(e["name"], arr, trainable=bool(e["trainable"]))
        offset += nbytes
    if offset != len(body):
        raise CheckpointError(f"{path}: {len(body) - offset} trailing bytes")
    return meta, params
