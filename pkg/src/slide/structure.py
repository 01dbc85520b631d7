"""Binary structure matrices: canonical form, equivalence, counting.

A structure is a d x r binary matrix whose column j records which views
carry nonzero loadings for component j. Two structures are treated as the
same model when they agree up to column permutation and padding with zero
columns; the canonical form drops zero columns and fixes one column order:
patterns sorted by number of participating views (descending), then as
binary words with view 1 most significant (descending). The globally shared
pattern therefore comes first and single-view patterns last.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, TooLarge

Pattern = tuple[int, ...]

ENUMERATION_GUARD = 10**6


def pattern_key(b: Pattern):
    """Sort key implementing the canonical pattern order."""
    return (-sum(b), tuple(-x for x in b))


@dataclass(frozen=True)
class PatternSet:
    """All 2^d - 1 distinct nonzero view patterns, canonically ordered."""

    d: int
    patterns: tuple[Pattern, ...]

    @classmethod
    def of(cls, d: int) -> "PatternSet":
        if d < 1:
            raise DimensionMismatch("need d >= 1")
        pats = [b for b in itertools.product((0, 1), repeat=d) if any(b)]
        pats.sort(key=pattern_key)
        return cls(d=d, patterns=tuple(pats))


@dataclass(frozen=True)
class StructureMatrix:
    """Canonical block-sparsity pattern: no zero columns, fixed column order."""

    d: int
    columns: tuple[Pattern, ...]

    def __post_init__(self):
        for b in self.columns:
            if len(b) != self.d or any(x not in (0, 1) for x in b):
                raise DimensionMismatch(f"bad pattern {b} for d={self.d}")
            if not any(b):
                raise DimensionMismatch("canonical structure has no zero columns")
        if list(self.columns) != sorted(self.columns, key=pattern_key):
            raise DimensionMismatch("columns not in canonical order")

    @property
    def r(self) -> int:
        return len(self.columns)

    @property
    def rank_by_pattern(self) -> dict[Pattern, int]:
        return dict(Counter(self.columns))

    def view_rank(self, i: int) -> int:
        """Number of components with nonzero loadings in view i."""
        return sum(b[i] for b in self.columns)

    def to_array(self) -> np.ndarray:
        if self.r == 0:
            return np.zeros((self.d, 0), dtype=int)
        return np.array(self.columns, dtype=int).T

    def encode(self) -> str:
        """Comma-joined column tokens, e.g. "111,110,100"; empty string for r=0."""
        return ",".join("".join(str(x) for x in b) for b in self.columns)

    @classmethod
    def from_string(cls, text: str, d: int | None = None) -> "StructureMatrix":
        text = text.strip()
        if not text:
            if d is None:
                raise DimensionMismatch("cannot infer d from an empty encoding")
            return cls(d=d, columns=())
        cols = []
        for tok in text.split(","):
            tok = tok.strip()
            if not set(tok) <= {"0", "1"}:
                raise DimensionMismatch(f"bad structure token {tok!r}")
            cols.append(tuple(int(c) for c in tok))
        dd = len(cols[0])
        if any(len(b) != dd for b in cols) or (d is not None and d != dd):
            raise DimensionMismatch("inconsistent pattern lengths")
        s, _ = canonicalize(np.array(cols, dtype=int).T)
        return s

    @classmethod
    def from_patterns(cls, d: int, rank_by_pattern: dict[Pattern, int]) -> "StructureMatrix":
        cols = []
        for b, k in rank_by_pattern.items():
            cols.extend([tuple(b)] * k)
        cols.sort(key=pattern_key)
        return cls(d=d, columns=tuple(cols))


def canonicalize(raw: np.ndarray) -> tuple[StructureMatrix, list[int]]:
    """Canonical form of a 0/1 matrix plus the surviving-column permutation.

    The returned index list maps each canonical column to its position in the
    input, so callers can reorder matching score/loading columns. Zero columns
    are dropped; equal patterns keep their input order (stable sort).
    """
    raw = np.asarray(raw)
    if raw.ndim != 2:
        raise DimensionMismatch("structure must be a matrix")
    if not np.isin(raw, (0, 1)).all():
        raise DimensionMismatch("structure entries must be 0 or 1")
    d = raw.shape[0]
    kept = [(tuple(int(x) for x in raw[:, j]), j) for j in range(raw.shape[1])]
    kept = [(b, j) for b, j in kept if any(b)]
    kept.sort(key=lambda bj: pattern_key(bj[0]))
    cols = tuple(b for b, _ in kept)
    perm = [j for _, j in kept]
    return StructureMatrix(d=d, columns=cols), perm


def equivalent(s1: StructureMatrix, s2: StructureMatrix) -> bool:
    """True iff the two canonical structures describe the same model."""
    if s1.d != s2.d:
        raise DimensionMismatch(f"view counts differ: {s1.d} vs {s2.d}")
    return s1.columns == s2.columns


def count_structures(d: int, r: int) -> int:
    """Number of distinct structures with at most r components on d views.

    Each structure is a multiset of nonzero patterns, so the count is the
    number of nonnegative integer solutions of r_1 + ... + r_{2^d - 1} <= r,
    which is C(r + 2^d - 1, 2^d - 1). Exact integer arithmetic throughout.
    """
    if d < 1 or r < 0:
        raise DimensionMismatch("need d >= 1 and r >= 0")
    k = 2**d - 1
    return math.comb(r + k, k)


def enumerate_structures(d: int, r: int) -> list[StructureMatrix]:
    """All canonical structures with at most r components, pairwise distinct."""
    total = count_structures(d, r)
    if total > ENUMERATION_GUARD:
        raise TooLarge(f"{total} structures exceed the {ENUMERATION_GUARD} guard")
    patterns = PatternSet.of(d).patterns
    out = []
    for k in range(r + 1):
        for combo in itertools.combinations_with_replacement(patterns, k):
            cols = tuple(sorted(combo, key=pattern_key))
            out.append(StructureMatrix(d=d, columns=cols))
    return out
