"""Versioned binary checkpoints of policy parameters.

Layout (all integers little-endian)::

    magic    8 bytes  b"BDSYNCKP"
    version  u32
    hlen     u32      length of the JSON header
    header   hlen bytes UTF-8 JSON: {"config": NetConfig dict, "dtype": "float32"|"float64",
                                     "tensors": [name, ...]}
    then, per tensor in header order:
    nlen u16, name (UTF-8), ndim u8, dims u32 * ndim, data (little-endian, row-major)
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
import torch

from ..policy.net import NetConfig, PolicyNet

MAGIC = b"BDSYNCKP"
VERSION = 1
_DTYPES = {"float32": (torch.float32, "<f4"), "float64": (torch.float64, "<f8")}


class CheckpointError(ValueError):
    pass


def save_checkpoint(net: PolicyNet, path) -> None:
    state = net.state_dict()
    dtype = next(iter(state.values())).dtype
    dname = {torch.float32: "float32", torch.float64: "float64"}[dtype]
    header = json.dumps(
        {"config": net.config.to_dict(), "dtype": dname, "tensors": list(state)}, sort_keys=True
    ).encode()
    parts = [MAGIC, struct.pack("<II", VERSION, len(header)), header]
    for name, t in state.items():
        arr = t.detach().cpu().numpy().astype(_DTYPES[dname][1], copy=False)
        raw = name.encode()
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr).tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path, net: PolicyNet | None = None) -> PolicyNet:
    """Load parameters; if ``net`` is given its configuration must match the file's."""
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    version, hlen = struct.unpack_from("<II", data, 8)
    if version != VERSION:
        raise CheckpointError(f"{path}: checkpoint version {version}, this build reads {VERSION}")
    off = 16
    header = json.loads(data[off : off + hlen])
    off += hlen
    config = NetConfig.from_dict(header["config"])
    tdtype, npdtype = _DTYPES[header["dtype"]]
    if net is None:
        net = PolicyNet(config, dtype=tdtype)
    elif net.config != config:
        raise CheckpointError(f"{path}: checkpoint config {config} does not match network config {net.config}")
    state = {}
    for _ in header["tensors"]:
        (nlen,) = struct.unpack_from("<H", data, off)
        off += 2
        name = data[off : off + nlen].decode()
        off += nlen
        (ndim,) = struct.unpack_from("<B", data, off)
        off += 1
        shape = struct.unpack_from(f"<{ndim}I", data, off)
        off += 4 * ndim
        count = int(np.prod(shape, dtype=np.int64))
        arr = np.frombuffer(data, dtype=npdtype, count=count, offset=off).reshape(shape)
        off += count * arr.itemsize
        state[name] = torch.from_numpy(arr.copy()).to(tdtype)
    own = net.state_dict()
    if set(own) != set(state):
        raise CheckpointError(f"{path}: tensor names differ from the network's")
    for name, t in state.items():
        if tuple(own[name].shape) != tuple(t.shape):
            raise CheckpointError(f"{path}: tensor {name!r} has shape {tuple(t.shape)}, expected {tuple(own[name].shape)}")
    net.load_state_dict(state)
    net.invalidate()
    return net
