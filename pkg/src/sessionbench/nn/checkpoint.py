"""Versioned plain-text checkpoints: shape headers plus hex tensor dumps.

Hex encoding of the raw little-endian float64 bytes round-trips exactly.
"""

from __future__ import annotations

import numpy as np

from ..errors import ParseError

_MAGIC = "sessionbench-ckpt v1"


def save_tensors(path, meta: dict[str, str], tensors: dict[str, np.ndarray]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_MAGIC + "\n")
        for key in sorted(meta):
            fh.write(f"meta {key} {meta[key]}\n")
        for name in sorted(tensors):
            arr = np.ascontiguousarray(tensors[name], dtype="<f8")
            dims = " ".join(str(d) for d in arr.shape)
            fh.write(f"tensor {name} float64 {dims}\n")
            fh.write(arr.tobytes().hex() + "\n")


def load_tensors(path) -> tuple[dict[str, str], dict[str, np.ndarray]]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _MAGIC:
        raise ParseError(1, "not a sessionbench checkpoint")
    meta: dict[str, str] = {}
    tensors: dict[str, np.ndarray] = {}
    i = 1
    while i < len(lines):
        line = lines[i]
        if not line:
            i += 1
            continue
        if line.startswith("meta "):
            _, key, value = line.split(" ", 2)
            meta[key] = value
            i += 1
        elif line.startswith("tensor "):
            parts = line.split(" ")
            name, dtype = parts[1], parts[2]
            if dtype != "float64":
                raise ParseError(i + 1, f"unsupported dtype {dtype!r}")
            shape = tuple(int(d) for d in parts[3:])
            if i + 1 >= len(lines):
                raise ParseError(i + 1, f"tensor {name!r} missing its data line")
            data = bytes.fromhex(lines[i + 1])
            arr = np.frombuffer(data, dtype="<f8").reshape(shape).copy()
            tensors[name] = arr
            i += 2
        else:
            raise ParseError(i + 1, f"unexpected line {line!r}")
    return meta, tensors
