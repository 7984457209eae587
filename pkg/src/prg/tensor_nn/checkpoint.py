"""Self-describing binary checkpoints.

Layout: 8 magic bytes, uint32 version, uint64 header length, UTF-8 JSON header
(metadata, layer lists, tensor names and shapes), then the little-endian
float64 payload of every tensor in header order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .layers import LayerSpec, Network

MAGIC = b"PRGCKPT\x00"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save(path, networks: dict[str, Network], meta: dict | None = None,
         arrays: dict[str, np.ndarray] | None = None) -> None:
    tensors: list[tuple[str, np.ndarray]] = []
    for net_name in sorted(networks):
        net = networks[net_name]
        for pname, t in net.named_parameters(f"{net_name}.").items():
            tensors.append((pname, t.data))
    for name, arr in sorted((arrays or {}).items()):
        tensors.append((name, np.asarray(arr, dtype=np.float64)))

    header = {
        "meta": meta or {},
        "networks": {k: [s.to_dict() for s in net.specs] for k, net in networks.items()},
        "tensors": [{"name": n, "shape": list(a.shape)} for n, a in tensors],
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", VERSION, len(hbytes)))
        fh.write(hbytes)
        for _, a in tensors:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load(path) -> tuple[dict[str, Network], dict, dict[str, np.ndarray]]:
    """Return (networks, meta, extra arrays not owned by any network)."""
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    version, hlen = struct.unpack("<IQ", raw[8:20])
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(raw[20:20 + hlen].decode("utf-8"))
    offset = 20 + hlen
    values: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        n = int(np.prod(shape)) if shape else 1
        buf = raw[offset:offset + 8 * n]
        if len(buf) != 8 * n:
            raise CheckpointError(f"{path}: truncated payload at {entry['name']!r}")
        values[entry["name"]] = np.frombuffer(buf, dtype="<f8").reshape(shape).astype(np.float64)
        offset += 8 * n

    networks = {}
    for net_name, specs in header["networks"].items():
        net = Network([LayerSpec.from_dict(s) for s in specs])
        for pname, t in net.named_parameters(f"{net_name}.").items():
            t.data = values.pop(pname)
        networks[net_name] = net
    return networks, header["meta"], values
