"""Canonical, self-describing serialization.

Documents are JSON objects {"schema": <kind>, "version": 1, "payload": ...}
rendered with sorted keys and no whitespace, so a fixed input always
produces the same bytes.  Integers are arbitrary precision (JSON numbers
are decimal strings); floats are refused outright to keep byte output
platform independent.  Matrices carry explicit shape and a declared
bit width that is enforced on load.
"""

from __future__ import annotations

import json

import numpy as np

VERSION = 1

KNOWN_SCHEMAS = {
    "set-system",
    "intersection-report",
    "token-instance",
    "share-bundle",
    "reconstruction",
    "verdict-map",
    "sim-report",
    "empty-report",
}


class SerializationError(ValueError):
    pass


def _reject_floats(obj, path="$"):
    if isinstance(obj, float):
        raise SerializationError(f"float at {path} would break byte determinism")
    if isinstance(obj, dict):
        for k, v in obj.items():
            if not isinstance(k, str):
                raise SerializationError(f"non-string key at {path}")
            _reject_floats(v, f"{path}.{k}")
    elif isinstance(obj, (list, tuple)):
        if all(type(v) is int for v in obj):     # flat integer arrays: done
            return
        for i, v in enumerate(obj):
            _reject_floats(v, f"{path}[{i}]")


def serialize(kind: str, payload) -> bytes:
    if kind not in KNOWN_SCHEMAS:
        raise SerializationError(f"unknown schema kind {kind!r}")
    doc = {"schema": kind, "version": VERSION, "payload": payload}
    _reject_floats(payload)
    return json.dumps(doc, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=True).encode() + b"\n"


def deserialize(data: bytes, expect_kind: str | None = None):
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SerializationError(f"malformed document: {exc}") from exc
    if not isinstance(doc, dict) or set(doc) != {"schema", "version", "payload"}:
        raise SerializationError("document must carry schema, version and payload")
    if doc["version"] != VERSION:
        raise SerializationError(f"unsupported version {doc['version']!r}")
    if doc["schema"] not in KNOWN_SCHEMAS:
        raise SerializationError(f"unknown schema kind {doc['schema']!r}")
    if expect_kind is not None and doc["schema"] != expect_kind:
        raise SerializationError(
            f"expected schema {expect_kind!r}, found {doc['schema']!r}")
    return doc["payload"]


def matrix_doc(mat, width: int = 64) -> dict:
    arr = np.asarray(mat)
    flat = [int(v) for v in arr.reshape(-1)]
    limit = 1 << (width - 1)
    if any(not -limit <= v < limit for v in flat):
        raise SerializationError(f"matrix entry exceeds declared width {width}")
    return {"rows": int(arr.shape[0]), "cols": int(arr.shape[1]),
            "width": width, "data": flat}


def doc_matrix(doc: dict) -> np.ndarray:
    try:
        rows, cols, width, data = doc["rows"], doc["cols"], doc["width"], doc["data"]
    except (KeyError, TypeError) as exc:
        raise SerializationError("matrix document is missing fields") from exc
    if rows * cols != len(data):
        raise SerializationError("matrix length does not match its shape")
    limit = 1 << (width - 1)
    if any(not isinstance(v, int) or not -limit <= v < limit for v in data):
        raise SerializationError("matrix entry exceeds declared width")
    return np.array(data, dtype=np.int64).reshape(rows, cols)


def set_system_doc(system) -> dict:
    return {
        "m": system.modulus.m,
        "universe_size": system.universe_size,
        "sets": [[int(i) for i in np.flatnonzero(row)] for row in system.sets],
        "labels": [lab if isinstance(lab, str) else repr(lab)
                   for lab in system.labels] if system.labels else [],
    }


def doc_set_system(payload: dict):
    from .numt import Modulus
    from .setsys import SetSystem

    try:
        h = int(payload["universe_size"])
        rows = payload["sets"]
        m = int(payload["m"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SerializationError("set-system document is missing fields") from exc
    sets = np.zeros((len(rows), h), dtype=bool)
    for i, row in enumerate(rows):
        idx = np.asarray(row, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= h):
            raise SerializationError("set element outside the declared universe")
        sets[i, idx] = True
    return SetSystem(Modulus.of(m), h, sets, labels=list(payload.get("labels", [])))


def equalize_lengths(docs: list[dict], kind: str) -> list[bytes]:
    """Serialize sibling documents padded to one common byte length.

    Each document must carry a string "pad" field at the top of its
    payload; spaces are appended inside it until all siblings match.
    """
    marker = b'"pad":""'
    blobs = []
    for doc in docs:
        doc["pad"] = ""
        blob = serialize(kind, doc)
        if blob.count(marker) != 1:
            raise SerializationError("payload must carry exactly one empty pad field")
        blobs.append(blob)
    target = max(len(b) for b in blobs)
    out = []
    for doc, blob in zip(docs, blobs):
        fill = " " * (target - len(blob))
        doc["pad"] = fill
        padded = blob.replace(marker, b'"pad":"' + fill.encode() + b'"', 1)
        if len(padded) != target:
            raise SerializationError("padding failed to equalize byte lengths")
        out.append(padded)
    return out
