"""Parameter containers, seeded RNG derivation, and deterministic
parameter (de)serialization.

The byte format is an explicit little packer (no zip timestamps, no
pickle) so identical parameters always produce identical bytes — the
save/load and fixed-seed reproducibility guarantees rest on this.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

from ..errors import IntegrityError


class Param:
    """A named trainable tensor with its gradient accumulator."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = value
        self.grad = np.zeros_like(value)

    def zero_grad(self) -> None:
        self.grad[...] = 0


def derive_rng(seed: int, *tags: str) -> np.random.Generator:
    """Independent, reproducible RNG stream for (seed, tags)."""
    ints = [seed & 0xFFFFFFFF]
    for t in tags:
        h = hashlib.sha256(t.encode()).digest()
        ints.append(int.from_bytes(h[:4], "little"))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(ints)))


_MAGIC = b"UIDP1\n"


def params_to_bytes(params: list[Param]) -> bytes:
    out = [_MAGIC, struct.pack("<I", len(params))]
    for p in params:
        name = p.name.encode()
        arr = np.ascontiguousarray(p.value)
        dt = arr.dtype.str.encode()  # e.g. b"<f4"
        out.append(struct.pack("<I", len(name)))
        out.append(name)
        out.append(struct.pack("<I", len(dt)))
        out.append(dt)
        out.append(struct.pack("<I", arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}q", *arr.shape))
        raw = arr.tobytes()
        out.append(struct.pack("<Q", len(raw)))
        out.append(raw)
    return b"".join(out)


def params_from_bytes(blob: bytes) -> list[Param]:
    if not blob.startswith(_MAGIC):
        raise IntegrityError("bad parameter blob magic")
    off = len(_MAGIC)

    def take(n: int) -> bytes:
        nonlocal off
        chunk = blob[off : off + n]
        if len(chunk) != n:
            raise IntegrityError("truncated parameter blob")
        off += n
        return chunk

    (count,) = struct.unpack("<I", take(4))
    params: list[Param] = []
    for _ in range(count):
        (nlen,) = struct.unpack("<I", take(4))
        name = take(nlen).decode()
        (dlen,) = struct.unpack("<I", take(4))
        dt = np.dtype(take(dlen).decode())
        (ndim,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{ndim}q", take(8 * ndim))
        (rawlen,) = struct.unpack("<Q", take(8))
        arr = np.frombuffer(take(rawlen), dtype=dt).reshape(shape).copy()
        params.append(Param(name, arr))
    if off != len(blob):
        raise IntegrityError("trailing bytes in parameter blob")
    return params


def params_digest(params: list[Param]) -> str:
    return hashlib.sha256(params_to_bytes(params)).hexdigest()
