"""Deterministic named randomness streams.

Every random choice in the package is drawn from a numpy Generator that is
derived from a single 64-bit seed plus a path of string/int labels
(module name, instance id, party id, trial index, ...).  Distinct label
paths give independent streams; the same (seed, labels) pair gives the
same stream on every platform, which is what makes reports reproducible
byte for byte.
"""

from __future__ import annotations

import hashlib

import numpy as np

_DOMAIN = b"veilshare.rng.v1"


def stream_key(seed: int, *labels) -> bytes:
    """Hash (seed, labels) into a 32-byte stream key."""
    h = hashlib.blake2b(digest_size=32)
    h.update(_DOMAIN)
    h.update(int(seed).to_bytes(8, "little", signed=False))
    for lab in labels:
        part = str(lab).encode("utf-8")
        h.update(len(part).to_bytes(4, "little"))
        h.update(part)
    return h.digest()


def named_stream(seed: int, *labels) -> np.random.Generator:
    """Return a Generator for the stream named by ``labels`` under ``seed``."""
    key = stream_key(seed, *labels)
    return np.random.default_rng(int.from_bytes(key[:16], "little"))
