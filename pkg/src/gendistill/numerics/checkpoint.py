"""Parameter checkpoints: one JSON header line, then raw little-endian float64.

Header: {"format": "gendistill-ckpt/1", "names": [...], "shapes": [[...], ...],
"step": int, "meta": {...}}. The payload is every tensor in header order,
C-contiguous, concatenated.
"""
import json

import numpy as np

MAGIC = "gendistill-ckpt/1"


def save_checkpoint(path, params, meta=None):
    names = list(params)
    header = {
        "format": MAGIC,
        "names": names,
        "shapes": [list(params[n].value.shape) for n in names],
        "step": max((params[n].step for n in names), default=0),
        "meta": meta or {},
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for n in names:
            fh.write(np.ascontiguousarray(params[n].value, dtype="<f8").tobytes())


def read_checkpoint(path):
    """Return (header, {name: array})."""
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        if header.get("format") != MAGIC:
            raise ValueError(f"{path}: not a gendistill checkpoint")
        payload = fh.read()
    values = {}
    offset = 0
    for name, shape in zip(header["names"], header["shapes"]):
        count = int(np.prod(shape)) if shape else 1
        nbytes = 8 * count
        if offset + nbytes > len(payload):
            raise ValueError(f"{path}: truncated payload at {name!r}")
        values[name] = np.frombuffer(payload, dtype="<f8", count=count, offset=offset) \
            .astype(np.float64).reshape(shape)
        offset += nbytes
    if offset != len(payload):
        raise ValueError(f"{path}: {len(payload) - offset} trailing bytes")
    return header, values


def load_checkpoint(path, params):
    header, values = read_checkpoint(path)
    params.load_state_dict(values)
    for p in params._params.values():
        p.step = header["step"]
    return header
