"""Ingestion and standardization of matched multi-view matrices.

Each view is column-centered and divided by its Frobenius norm (one scalar
per view), and the removed means/scales are retained so raw data can be
reconstructed exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, ZeroView

COLSUM_TOL = 1e-10  # per-row-count tolerance on centered column sums
FNORM_TOL = 1e-12


@dataclass(frozen=True)
class RawViews:
    """d matched matrices on the same n samples, before standardization."""

    views: tuple[np.ndarray, ...]
    view_names: tuple[str, ...]

    def __post_init__(self):
        if len(self.views) == 0:
            raise DimensionMismatch("need at least one view")
        if len(self.view_names) != len(self.views):
            raise DimensionMismatch("one name per view required")
        n = self.views[0].shape[0]
        for name, v in zip(self.view_names, self.views):
            if v.ndim != 2:
                raise DimensionMismatch(f"view {name} is not a matrix")
            if v.shape[0] != n:
                raise DimensionMismatch(
                    f"view {name} has {v.shape[0]} rows, expected {n}"
                )
            if v.shape[1] < 1:
                raise DimensionMismatch(f"view {name} has no columns")
        if n < 2:
            raise DimensionMismatch("need at least two samples")

    @classmethod
    def from_arrays(cls, views, view_names=None) -> "RawViews":
        views = tuple(np.asarray(v, dtype=float) for v in views)
        if view_names is None:
            view_names = tuple(f"view{i + 1}" for i in range(len(views)))
        return cls(views=views, view_names=tuple(view_names))

    @property
    def d(self) -> int:
        return len(self.views)

    @property
    def n(self) -> int:
        return self.views[0].shape[0]

    @property
    def p(self) -> tuple[int, ...]:
        return tuple(v.shape[1] for v in self.views)


@dataclass(frozen=True)
class MultiViewData:
    """Centered, unit-Frobenius views plus the metadata to invert that."""

    views: tuple[np.ndarray, ...]
    column_means: tuple[np.ndarray, ...]
    frobenius_scales: tuple[float, ...]
    view_names: tuple[str, ...]

    def __post_init__(self):
        n = self.views[0].shape[0]
        for name, v in zip(self.view_names, self.views):
            if np.max(np.abs(v.sum(axis=0))) > COLSUM_TOL * n:
                raise DimensionMismatch(f"view {name} is not column-centered")
            if abs(np.linalg.norm(v) - 1.0) > FNORM_TOL:
                raise DimensionMismatch(f"view {name} does not have unit norm")

    @property
    def d(self) -> int:
        return len(self.views)

    @property
    def n(self) -> int:
        return self.views[0].shape[0]

    @property
    def p(self) -> tuple[int, ...]:
        return tuple(v.shape[1] for v in self.views)

    @property
    def p_total(self) -> int:
        return sum(self.p)

    def column_blocks(self) -> list[slice]:
        """Concatenated-column slice of each view, in view order."""
        out, off = [], 0
        for pi in self.p:
            out.append(slice(off, off + pi))
            off += pi
        return out

    def unscale(self) -> list[np.ndarray]:
        """Reconstruct the raw views (inverse of center_and_scale)."""
        return [
            v * s + m[None, :]
            for v, s, m in zip(self.views, self.frobenius_scales, self.column_means)
        ]


def center_and_scale(raw: RawViews) -> MultiViewData:
    """Column-center each view and scale it to unit Frobenius norm.

    Raises ZeroView for a view whose centered matrix is identically zero
    (every column constant); silently dropping it would desynchronize the
    per-view structure downstream.
    """
    views, means, scales = [], [], []
    for name, x in zip(raw.view_names, raw.views):
        m = x.mean(axis=0)
        centered = x - m[None, :]
        # second centering pass: keeps column sums at machine precision even
        # when the centered values are tiny relative to the raw ones
        resid = centered.mean(axis=0)
        centered -= resid[None, :]
        m = m + resid
        s = float(np.linalg.norm(centered))
        if s == 0.0:
            raise ZeroView(f"view {name} is constant in every column")
        views.append(centered / s)
        means.append(m)
        scales.append(s)
    return MultiViewData(
        views=tuple(views),
        column_means=tuple(means),
        frobenius_scales=tuple(scales),
        view_names=raw.view_names,
    )


def concatenate(data: MultiViewData) -> np.ndarray:
    """Column-concatenate the standardized views into one n x p matrix."""
    return np.hstack(data.views)


def _looks_like_header(row: list[str]) -> bool:
    for tok in row:
        tok = tok.strip()
        if not tok:
            continue
        try:
            float(tok)
        except ValueError:
            return True
    return False


def read_view_csv(path) -> np.ndarray:
    """Read one numeric view from CSV.

    A first row containing any non-numeric token is treated as a header and
    skipped. No row-index column is expected.
    """
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if any(t.strip() for t in row)]
    if not rows:
        raise DimensionMismatch(f"{path}: empty file")
    if _looks_like_header(rows[0]):
        rows = rows[1:]
    if not rows:
        raise DimensionMismatch(f"{path}: header but no data rows")
    width = len(rows[0])
    data = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DimensionMismatch(f"{path}: row {i + 1} has {len(row)} fields, expected {width}")
        data[i] = [float(t) for t in row]
    return data


def load_views(paths, view_names=None) -> RawViews:
    """Read one CSV per view and assemble a RawViews."""
    views = [read_view_csv(p) for p in paths]
    if view_names is None:
        view_names = [_stem(p) for p in paths]
    return RawViews.from_arrays(views, view_names)


def _stem(path) -> str:
    name = str(path).replace("\\", "/").rsplit("/", 1)[-1]
    return name.rsplit(".", 1)[0] if "." in name else name
