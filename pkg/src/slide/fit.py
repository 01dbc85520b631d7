"""Fitting the decomposition for a fixed block-sparsity structure.

Minimizes ||X - U V^T||_F^2 over orthonormal-column scores U and loadings V
constrained to the structure's zero pattern, by alternating exact updates:
free loading blocks get X_i^T U, and U is re-aligned by orthogonal
Procrustes on X V. After convergence the columns belonging to each view
pattern are rotated so the loadings are orthogonal with descending norms,
which pins down the decomposition without changing the fit.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonFinite
from .linalg import aligned_orthonormal, fix_signs, leading_left_vectors
from .preprocess import MultiViewData, concatenate
from .structure import StructureMatrix, canonicalize

IDENTIFIABILITY_TOL = 1e-10


@dataclass
class SlideModel:
    """Fitted decomposition: orthonormal scores, block-sparse loadings."""

    structure: StructureMatrix
    U: np.ndarray
    V: np.ndarray
    view_p: tuple[int, ...]
    residual_trace: list[float]
    iterations: int
    converged: bool

    @property
    def r(self) -> int:
        return self.structure.r

    @property
    def column_norms(self) -> np.ndarray:
        return np.linalg.norm(self.V, axis=0)

    def column_blocks(self) -> list[slice]:
        out, off = [], 0
        for pi in self.view_p:
            out.append(slice(off, off + pi))
            off += pi
        return out

    def signal(self) -> np.ndarray:
        """Fitted low-rank part of the concatenated (standardized) data."""
        if self.r == 0:
            return np.zeros((self.U.shape[0], sum(self.view_p)))
        return self.U @ self.V.T

    def signal_per_view(self) -> list[np.ndarray]:
        z = self.signal()
        return [z[:, sl] for sl in self.column_blocks()]

    def to_json(self) -> str:
        doc = {
            "structure": self.structure.encode(),
            "d": self.structure.d,
            "n": int(self.U.shape[0]),
            "r": self.r,
            "view_p": list(self.view_p),
            "U": self.U.ravel().tolist(),
            "V": self.V.ravel().tolist(),
            "residual_trace": self.residual_trace,
            "iterations": self.iterations,
            "converged": self.converged,
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "SlideModel":
        doc = json.loads(text)
        d, n, r = doc["d"], doc["n"], doc["r"]
        p = sum(doc["view_p"])
        return cls(
            structure=StructureMatrix.from_string(doc["structure"], d=d),
            U=np.array(doc["U"], dtype=float).reshape(n, r),
            V=np.array(doc["V"], dtype=float).reshape(p, r),
            view_p=tuple(doc["view_p"]),
            residual_trace=list(doc["residual_trace"]),
            iterations=int(doc["iterations"]),
            converged=bool(doc["converged"]),
        )


@dataclass(frozen=True)
class VarianceReport:
    """Squared-Frobenius share of each view captured by the fitted signal."""

    view_names: tuple[str, ...]
    view_ranks: tuple[int, ...]
    view_fractions: tuple[float, ...]
    total_rank: int
    total_fraction: float


def _sparsity_mask(s: StructureMatrix, view_p, n_rows_p: int) -> np.ndarray:
    mask = np.zeros((n_rows_p, s.r), dtype=bool)
    off = 0
    for i, pi in enumerate(view_p):
        for j, b in enumerate(s.columns):
            if b[i]:
                mask[off : off + pi, j] = True
        off += pi
    return mask


def fit_with_structure(
    data: MultiViewData,
    s: StructureMatrix,
    u0: np.ndarray | None = None,
    eps: float = 1e-6,
    max_iter: int = 1000,
) -> SlideModel:
    """Alternating fit of the decomposition with the given structure.

    Stops when the squared Frobenius change of the fitted signal between
    sweeps drops below eps. The per-sweep residual is non-increasing. An
    empty structure returns the zero model. Fitted columns that collapse to
    exactly zero are dropped (with a warning) before orthogonalization.
    """
    if s.d != data.d:
        raise DimensionMismatch(f"structure has {s.d} views, data has {data.d}")
    x = concatenate(data)
    n, p = x.shape
    r = s.r
    if r > min(n, p):
        raise DimensionMismatch(f"structure rank {r} exceeds min(n, p) = {min(n, p)}")
    if r == 0:
        return SlideModel(
            structure=s,
            U=np.zeros((n, 0)),
            V=np.zeros((p, 0)),
            view_p=data.p,
            residual_trace=[float(np.sum(x**2))],
            iterations=0,
            converged=True,
        )
    if u0 is None:
        u0 = leading_left_vectors(x, r)
    u = np.array(u0[:, :r], dtype=float)
    mask = _sparsity_mask(s, data.p, p)

    v = (x.T @ u) * mask
    z_prev = u @ v.T
    trace = [float(np.sum((x - z_prev) ** 2))]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        v = (x.T @ u) * mask
        u = aligned_orthonormal(x @ v, u)
        z = u @ v.T
        resid = float(np.sum((x - z) ** 2))
        if not np.isfinite(resid):
            raise NonFinite(f"residual became non-finite at sweep {it}")
        trace.append(resid)
        change = float(np.sum((z - z_prev) ** 2))
        z_prev = z
        if change < eps:
            converged = True
            break

    u, v, s = _drop_dead_columns(u, v, s)
    u, v = orthogonalize_blocks(u, v, s, data.p)
    model = SlideModel(
        structure=s,
        U=u,
        V=v,
        view_p=data.p,
        residual_trace=trace,
        iterations=it,
        converged=converged,
    )
    _warn_if_unidentifiable(model)
    return model


def _drop_dead_columns(u, v, s):
    norms = np.linalg.norm(v, axis=0)
    alive = norms > 0.0
    if alive.all():
        return u, v, s
    warnings.warn(
        f"{int((~alive).sum())} fitted column(s) collapsed to zero and were dropped"
    )
    raw = s.to_array()[:, alive]
    s_new, perm = canonicalize(raw)
    idx = np.flatnonzero(alive)[perm]
    return u[:, idx], v[:, idx], s_new


def orthogonalize_blocks(
    u: np.ndarray, v: np.ndarray, s: StructureMatrix, view_p
) -> tuple[np.ndarray, np.ndarray]:
    """Rotate the columns of each view pattern so U V^T is unchanged but the
    pattern's loading columns are orthogonal with descending norms.

    For pattern columns J with scores A = U[:, J] and loadings B = V[:, J]
    restricted to the pattern's views, the SVD B = Q L P^T gives
    A B^T = (A P) L Q^T, so U[:, J] <- A P and the restricted loadings
    become Q L. Rows of V outside the pattern's views are exactly zero and
    stay untouched.
    """
    u = u.copy()
    v = v.copy()
    offsets = np.concatenate([[0], np.cumsum(view_p)])
    seen: dict = {}
    for j, b in enumerate(s.columns):
        seen.setdefault(b, []).append(j)
    for b, cols in seen.items():
        rows = np.concatenate(
            [np.arange(offsets[i], offsets[i + 1]) for i in range(s.d) if b[i]]
        )
        a = u[:, cols]
        bl = v[np.ix_(rows, cols)]
        m = len(cols)
        if bl.shape[0] >= m:
            q, sv, pt = np.linalg.svd(bl, full_matrices=False)  # pt is m x m
            new_u = a @ pt.T
            new_v = q * sv[None, :]
        else:
            # fewer in-pattern loading rows than columns: pad dead directions
            q, sv, pt = np.linalg.svd(bl, full_matrices=True)
            new_u = a @ pt.T
            new_v = np.zeros((bl.shape[0], m))
            new_v[:, : sv.size] = q[:, : sv.size] * sv[None, :]
        fix_signs(new_u, new_v.T)
        u[:, cols] = new_u
        v[np.ix_(rows, cols)] = new_v
    return u, v


def _warn_if_unidentifiable(model: SlideModel) -> None:
    """Warn when some pattern's per-view loadings are numerically dependent."""
    blocks = model.column_blocks()
    for b, cols in _pattern_groups(model.structure).items():
        if len(cols) < 2:
            continue
        for i, sl in enumerate(blocks):
            if not b[i]:
                continue
            sub = model.V[sl][:, cols]
            sv = np.linalg.svd(sub, compute_uv=False)
            if sv[-1] <= IDENTIFIABILITY_TOL:
                warnings.warn(
                    f"pattern {''.join(map(str, b))}: loadings in view {i + 1} "
                    "are numerically dependent; decomposition may not be unique"
                )


def _pattern_groups(s: StructureMatrix) -> dict:
    groups: dict = {}
    for j, b in enumerate(s.columns):
        groups.setdefault(b, []).append(j)
    return groups


def variance_explained(model: SlideModel, data: MultiViewData) -> VarianceReport:
    """Per-view and overall squared-Frobenius fractions captured by the fit."""
    fracs, ranks = [], []
    for i, (z_i, x_i) in enumerate(zip(model.signal_per_view(), data.views)):
        denom = float(np.sum(x_i**2))
        fracs.append(float(np.sum(z_i**2)) / denom)
        ranks.append(model.structure.view_rank(i))
    total = float(np.sum(model.signal() ** 2)) / float(
        sum(np.sum(x_i**2) for x_i in data.views)
    )
    return VarianceReport(
        view_names=data.view_names,
        view_ranks=tuple(ranks),
        view_fractions=tuple(fracs),
        total_rank=model.r,
        total_fraction=total,
    )
