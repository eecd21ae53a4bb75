"""Keyed, counter-based randomness and canonical byte encodings.

Every random draw in the library flows through :func:`keyed_generator`, a
Philox (counter-based) generator keyed by blake2b over
``(seed, operation name, canonicalized input bytes)``. There is no global
random state anywhere, so repeat calls with identical inputs are
bit-identical.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np


def canonical_bytes(*parts) -> bytes:
    """Encode heterogeneous values into a stable byte string.

    Arrays are normalized to contiguous float64 with their shape prefixed,
    so logically equal inputs of different strides or dtypes map to the
    same bytes.
    """
    chunks: list[bytes] = []
    for part in parts:
        if isinstance(part, np.ndarray):
            arr = np.ascontiguousarray(part, dtype=np.float64)
            chunks.append(b"A" + repr(arr.shape).encode("ascii") + arr.tobytes())
        elif isinstance(part, (bytes, bytearray)):
            chunks.append(b"B" + bytes(part))
        elif isinstance(part, str):
            chunks.append(b"S" + part.encode("utf-8"))
        elif isinstance(part, (bool, np.bool_)):
            chunks.append(b"L" + bytes([int(part)]))
        elif isinstance(part, (int, np.integer)):
            chunks.append(b"I" + int(part).to_bytes(16, "little", signed=True))
        elif isinstance(part, (float, np.floating)):
            chunks.append(b"F" + struct.pack("<d", float(part)))
        elif isinstance(part, (tuple, list)):
            chunks.append(b"T(" + canonical_bytes(*part) + b")")
        elif part is None:
            chunks.append(b"N")
        else:
            raise TypeError(f"cannot canonicalize {type(part).__name__}")
    return b"|".join(chunks)


def keyed_generator(seed: int, operation: str, payload: bytes = b"") -> np.random.Generator:
    """Counter-based generator keyed by (seed, operation, payload)."""
    h = hashlib.blake2b(digest_size=16)
    h.update(int(seed).to_bytes(16, "little", signed=True))
    h.update(operation.encode("utf-8"))
    h.update(b"\x00")
    h.update(payload)
    key = int.from_bytes(h.digest(), "little")
    return np.random.Generator(np.random.Philox(key=key))


def derive_seed(seed: int, *parts) -> int:
    """Deterministic sub-seed for a named stream (e.g. one per element)."""
    h = hashlib.blake2b(digest_size=8)
    h.update(int(seed).to_bytes(16, "little", signed=True))
    h.update(canonical_bytes(*parts))
    return int.from_bytes(h.digest(), "little")


def checksum(arr: np.ndarray) -> str:
    """sha256 hex digest of an array's canonical bytes."""
    return hashlib.sha256(canonical_bytes(arr)).hexdigest()
