"""Covering-vector families: set algebra through inner products.

Each member set of a set system maps to its characteristic vector in
Z_m^h.  For characteristic vectors the plain inner product counts the
intersection, so pairwise products mod m land in a bounded residue set S
and vanish exactly on the self products (set sizes being 0 mod m).
A k-multilinear form extends this to k-fold intersections, and
inclusion-exclusion expresses intersections with unions without ever
touching the underlying sets.

A family may carry a companion family over a larger modulus m' (m | m')
on the same padded universe.  Inner products are additive in their
second argument over the integers, so knowing a difference vector
v_delta = v' - v lets a holder of u "hop": <u,v> + <u,v_delta> = <u,v'>.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .numt import Modulus
from .setsys import SetSystem


@dataclass(frozen=True)
class CoveringVector:
    entries: np.ndarray          # length-h int64, values in [0, m)
    source: int                  # index of the represented set

    def __post_init__(self):
        object.__setattr__(self, "entries", np.asarray(self.entries, dtype=np.int64))


class VectorFamily:
    """Covering vectors for one set system, stored as an (N, h) matrix."""

    def __init__(self, matrix: np.ndarray, modulus: Modulus,
                 companion: Optional["VectorFamily"] = None):
        self.matrix = np.asarray(matrix, dtype=np.int64)
        self.modulus = modulus
        self.companion = companion

    def __len__(self) -> int:
        return self.matrix.shape[0]

    @property
    def width(self) -> int:
        return self.matrix.shape[1]

    def vector(self, i: int) -> CoveringVector:
        return CoveringVector(self.matrix[i], i)

    def inner_products(self) -> np.ndarray:
        """All pairwise inner products over the integers, (N, N)."""
        return self.matrix @ self.matrix.T

    def residue_set(self) -> set[int]:
        """Distinct nonzero residues of off-diagonal products mod m."""
        prod = self.inner_products() % self.modulus.m
        off = prod[~np.eye(len(self), dtype=bool)]
        return set(int(v) for v in np.unique(off)) - {0}

    def delta(self, i: int) -> np.ndarray:
        """Difference vector v'_i - v_i into the companion family."""
        if self.companion is None:
            raise ValueError("no companion family attached")
        return self.companion.matrix[i] - self.matrix[i]


def to_covering_family(system: SetSystem) -> VectorFamily:
    """One characteristic vector per member set, entries in {0,1} as residues."""
    return VectorFamily(system.sets.astype(np.int64), system.modulus)


def attach_companion(family: VectorFamily, other: VectorFamily) -> VectorFamily:
    """Pair two families index by index on a shared zero-padded universe.

    Both families are padded on the right to the wider width; the
    companion's modulus must be a proper multiple of the base modulus.
    """
    if len(family) != len(other):
        raise ValueError("companion families must have the same member count")
    if other.modulus.m % family.modulus.m != 0:
        raise ValueError("companion modulus must be a multiple of the base modulus")
    width = max(family.width, other.width)

    def pad(mat):
        if mat.shape[1] == width:
            return mat
        out = np.zeros((mat.shape[0], width), dtype=np.int64)
        out[:, : mat.shape[1]] = mat
        return out

    comp = VectorFamily(pad(other.matrix), other.modulus)
    return VectorFamily(pad(family.matrix), family.modulus, companion=comp)


def multilinear_form(vs: list) -> int:
    """Exact integer sum_i v_1[i] * ... * v_k[i]; counts k-fold intersections."""
    arrays = [np.asarray(getattr(v, "entries", v), dtype=np.int64) for v in vs]
    if not arrays:
        raise ValueError("need at least one vector")
    width = arrays[0].shape[0]
    if any(a.shape != (width,) for a in arrays):
        raise ValueError("vectors must share one length")
    acc = arrays[0].copy()
    for a in arrays[1:]:
        acc *= a
    return int(acc.sum())


def union_size_via_F(x: int, y: int, z: int) -> int:
    """|H n (H1 u H2)| from x = |H n H1|, y = |H n H2|, z = |H n H1 n H2|."""
    return x + y - z


def iterated_union_form(v, ws: list) -> int:
    """|H n (W_1 u ... u W_w)| by inclusion-exclusion over multilinear forms."""
    if not ws:
        raise ValueError("need at least one union argument")
    total = 0
    for size in range(1, len(ws) + 1):
        sign = 1 if size % 2 == 1 else -1
        for combo in itertools.combinations(ws, size):
            total += sign * multilinear_form([v, *combo])
    return total


def hop(u, v, v_delta) -> int:
    """<u, v> + <u, v_delta> = <u, v'> over the integers."""
    ua = np.asarray(getattr(u, "entries", u), dtype=np.int64)
    va = np.asarray(getattr(v, "entries", v), dtype=np.int64)
    da = np.asarray(v_delta, dtype=np.int64)
    if not ua.shape == va.shape == da.shape:
        raise ValueError("vectors must share one length")
    return int(ua @ va) + int(ua @ da)
