"""
Parameter checkpoints: a little-endian uint32 header length, a JSON header
(kind, shapes, keep_prob, hops, seed) and the float64 arrays back to back.
"""

import json
import struct
from pathlib import Path
from typing import Union

import numpy as np

from fairforge.models.gcn import PARAM_NAMES, ModelParams


MAGIC = b"FFCK"


def params_to_bytes(params: ModelParams) -> bytes:
    arrays = params.arrays()
    header = {
        "kind": params.kind.value,
        "keep_prob": params.keep_prob,
        "hops": params.hops,
        "seed": params.seed,
        "dtype": "<f8",
        "shapes": {name: list(arr.shape) for name, arr in arrays.items()},
    }
    encoded = json.dumps(header, sort_keys=True).encode("utf-8")
    blob = b"".join(np.ascontiguousarray(arr, dtype="<f8").tobytes() for arr in arrays.values())
    return MAGIC + struct.pack("<I", len(encoded)) + encoded + blob


def params_from_bytes(data: bytes) -> ModelParams:
    if data[:4] != MAGIC:
        raise ValueError("not a parameter checkpoint")
    (length,) = struct.unpack("<I", data[4:8])
    header = json.loads(data[8:8 + length].decode("utf-8"))
    offset = 8 + length
    arrays = {}
    shapes = header["shapes"]
    # blob order is PARAM_NAMES order, not header key order
    for name in (n for n in PARAM_NAMES if n in shapes):
        shape = shapes[name]
        count = int(np.prod(shape))
        arrays[name] = np.frombuffer(data, dtype="<f8", count=count, offset=offset) \
            .reshape(shape).astype(np.float64)
        offset += 8 * count
    if offset != len(data):
        raise ValueError(f"checkpoint has {len(data) - offset} trailing bytes")
    return ModelParams(kind=header["kind"], keep_prob=header["keep_prob"],
                       hops=header["hops"], seed=header["seed"], **arrays)


def save_params(params: ModelParams, path: Union[str, Path]):
    Path(path).write_bytes(params_to_bytes(params))


def load_params(path: Union[str, Path]) -> ModelParams:
    return params_from_bytes(Path(path).read_bytes())
