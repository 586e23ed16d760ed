"""Portable binary policy checkpoints.

Layout (little-endian)::

    8 bytes   magic b"HLBPPOCK"
    u32       format version (1)
    u32       number of networks (2: policy mean, value)
    per network:
        u32   output kind (0 linear, 1 tanh_half)
        u32   number of layer sizes k, then k x u32 sizes
    f64       exploration std (normalized action units)
    per network, per layer: W (in x out) then b, row-major f64
    normalizer: u32 dim, f64 count, f64 clip, mean (dim f64), m2 (dim f64)
"""

from __future__ import annotations

import struct

import numpy as np

from .algo import Policy
from .net import MLP
from .normalizer import Normalizer

MAGIC = b"HLBPPOCK"
VERSION = 1
_KINDS = ("linear", "tanh_half")


class CheckpointError(ValueError):
    pass


def to_bytes(policy: Policy) -> bytes:
    out = [MAGIC, struct.pack("<II", VERSION, 2)]
    for net in (policy.pi, policy.v):
        out.append(struct.pack("<II", _KINDS.index(net.out), len(net.sizes)))
        out.append(struct.pack(f"<{len(net.sizes)}I", *net.sizes))
    out.append(struct.pack("<d", policy.sigma))
    for net in (policy.pi, policy.v):
        for p in net.params:
            out.append(np.ascontiguousarray(p, dtype="<f8").tobytes())
    nm = policy.norm
    out.append(struct.pack("<Idd", len(nm.mean), nm.count, nm.clip))
    out.append(np.ascontiguousarray(nm.mean, dtype="<f8").tobytes())
    out.append(np.ascontiguousarray(nm.m2, dtype="<f8").tobytes())
    return b"".join(out)


def from_bytes(data: bytes) -> Policy:
    try:
        return _parse(data)
    except (struct.error, ValueError, IndexError) as e:
        if isinstance(e, CheckpointError):
            raise
        raise CheckpointError(f"truncated or corrupt checkpoint: {e}") from None


def _parse(data: bytes) -> Policy:
    if data[:8] != MAGIC:
        raise CheckpointError("not a policy checkpoint (bad magic)")
    pos = 8
    version, n_nets = struct.unpack_from("<II", data, pos)
    pos += 8
    if version != VERSION or n_nets != 2:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    specs = []
    for _ in range(n_nets):
        kind, k = struct.unpack_from("<II", data, pos)
        pos += 8
        sizes = struct.unpack_from(f"<{k}I", data, pos)
        pos += 4 * k
        specs.append((_KINDS[kind], sizes))
    (sigma,) = struct.unpack_from("<d", data, pos)
    pos += 8
    nets = []
    for kind, sizes in specs:
        net = MLP(sizes, out=kind)
        for i, p in enumerate(net.params):
            a = np.frombuffer(data, dtype="<f8", count=p.size, offset=pos).reshape(p.shape)
            net.params[i] = a.astype(float)
            pos += 8 * p.size
        nets.append(net)
    dim, count, clip = struct.unpack_from("<Idd", data, pos)
    pos += struct.calcsize("<Idd")
    norm = Normalizer(dim, clip)
    norm.count = count
    norm.mean = np.frombuffer(data, "<f8", dim, pos).astype(float)
    pos += 8 * dim
    norm.m2 = np.frombuffer(data, "<f8", dim, pos).astype(float)
    pos += 8 * dim
    if pos != len(data):
        raise CheckpointError("trailing bytes in checkpoint")
    return Policy(nets[0], nets[1], norm, sigma)


def save_checkpoint(path, policy: Policy):
    with open(path, "wb") as fh:
        fh.write(to_bytes(policy))


def load_checkpoint(path) -> Policy:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
