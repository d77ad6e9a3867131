"""Binary checkpoints for a PolicyBundle.

Layout (little-endian)::

    b"E2T3" | u16 version | u32 header length | JSON header |
    float32 parameters (six networks, then Adam m and v per optimizer) | u32 CRC32

The CRC covers every byte before it.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from navguard.nn.network import Network, NetworkSpec
from navguard.nn.optim import Adam, AdamConfig
from navguard.nn.policy import FeatureSpec, PolicyBundle

MAGIC = b"E2T3"
VERSION = 1
_PREFIX = struct.Struct("<4sHI")


class CheckpointError(ValueError):
    pass


class BadMagic(CheckpointError):
    pass


class VersionMismatch(CheckpointError):
    pass


class TruncatedFile(CheckpointError):
    pass


class ChecksumMismatch(CheckpointError):
    pass


def _arrays(bundle: PolicyBundle) -> list[np.ndarray]:
    out = [p for net in bundle.networks for p in net.params]
    for opt in bundle.optimizers:
        out += opt.m + opt.v
    return out


def to_bytes(bundle: PolicyBundle, extra: dict | None = None) -> bytes:
    header = {
        "actor": bundle.actor.spec.to_dict(),
        "critic": bundle.critic1.spec.to_dict(),
        "features": {k: getattr(bundle.features, k) for k in bundle.features.__dataclass_fields__},
        "adam": {k: getattr(bundle.adam, k) for k in bundle.adam.__dataclass_fields__},
        "adam_steps": [opt.t for opt in bundle.optimizers],
        "extra": extra or {},
    }
    arrays = _arrays(bundle)
    header["n_floats"] = int(sum(a.size for a in arrays))
    hbytes = json.dumps(header, sort_keys=True).encode()
    body = b"".join(np.ascontiguousarray(a, dtype="<f4").tobytes() for a in arrays)
    blob = _PREFIX.pack(MAGIC, VERSION, len(hbytes)) + hbytes + body
    return blob + struct.pack("<I", zlib.crc32(blob) & 0xFFFFFFFF)


def save_checkpoint(bundle: PolicyBundle, path, extra: dict | None = None) -> None:
    Path(path).write_bytes(to_bytes(bundle, extra))


def from_bytes(data: bytes) -> tuple[PolicyBundle, dict]:
    if len(data) < _PREFIX.size:
        raise TruncatedFile("file shorter than the checkpoint prefix")
    magic, version, hlen = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise BadMagic(f"not a checkpoint (magic {magic!r})")
    if version != VERSION:
        raise VersionMismatch(f"checkpoint version {version}, this build reads {VERSION}")
    start = _PREFIX.size
    if len(data) < start + hlen:
        raise TruncatedFile("header cut short")
    try:
        header = json.loads(data[start:start + hlen])
    except ValueError as exc:
        raise ChecksumMismatch(f"unreadable header: {exc}") from None
    n = int(header["n_floats"])
    end = start + hlen + 4 * n
    if len(data) < end + 4:
        raise TruncatedFile(f"expected {end + 4} bytes, found {len(data)}")
    (crc,) = struct.unpack_from("<I", data, end)
    if zlib.crc32(data[:end]) & 0xFFFFFFFF != crc:
        raise ChecksumMismatch("CRC32 mismatch")
    flat = np.frombuffer(data, dtype="<f4", count=n, offset=start + hlen)

    a_spec = NetworkSpec.from_dict(header["actor"])
    c_spec = NetworkSpec.from_dict(header["critic"])
    adam = AdamConfig(**header["adam"])
    nets = [Network(a_spec), Network(c_spec), Network(c_spec),
            Network(a_spec), Network(c_spec), Network(c_spec)]
    opts = [Adam(nets[i].params, adam) for i in range(3)]
    for opt, t in zip(opts, header["adam_steps"]):
        opt.t = int(t)
    bundle = PolicyBundle(*nets, *opts, features=FeatureSpec(**header["features"]), adam=adam)
    pos = 0
    for dst in _arrays(bundle):
        dst[...] = flat[pos:pos + dst.size].reshape(dst.shape)
        pos += dst.size
    return bundle, header.get("extra", {})


def load_checkpoint(path) -> PolicyBundle:
    return from_bytes(Path(path).read_bytes())[0]
