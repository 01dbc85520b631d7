"""Penalized matrix factorization over a tuning grid.

Minimizes 0.5 * sum_i ||X_i - U V_i^T||_F^2 + lambda * sum_{ij} ||V_ij||_2
subject to U^T U = I by alternating two closed-form updates: a group
soft-threshold on each per-view loading column, and an orthogonal Procrustes
alignment of the scores. The supports of the solutions along an ascending
lambda grid yield the candidate structure sequence.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import BadGrid, NonFinite, RankDeficient, SlideError
from .linalg import aligned_orthonormal, leading_left_vectors, svd_signed
from .preprocess import MultiViewData, concatenate
from .structure import StructureMatrix, canonicalize, equivalent

RANK_TOL = 1e-12  # relative singular-value cutoff in the score update


@dataclass
class PmfSolution:
    """One factorization at a fixed penalty level."""

    U: np.ndarray
    V: np.ndarray
    lam: float
    objective_trace: list[float]
    iterations: int
    converged: bool


@dataclass(frozen=True)
class LambdaGrid:
    values: np.ndarray
    lambda_max: float


@dataclass
class CandidateSet:
    """Distinct structures in order of the ascending penalty that produced them."""

    structures: list[StructureMatrix]
    generating_lambda: list[list[float]]

    def __len__(self) -> int:
        return len(self.structures)

    def __iter__(self):
        return iter(self.structures)


def lambda_max(data: MultiViewData) -> float:
    """Largest per-view spectral norm; at or above it every loading is zeroed."""
    return max(float(np.linalg.svd(v, compute_uv=False)[0]) for v in data.views)


def make_grid(data: MultiViewData, length: int = 50, min_lambda: float = 0.01) -> LambdaGrid:
    """Logarithmically spaced penalties from min_lambda up to lambda_max."""
    if length < 2:
        raise BadGrid("grid needs at least two points")
    lmax = lambda_max(data)
    if min_lambda <= 0 or min_lambda >= lmax:
        raise BadGrid(f"min_lambda {min_lambda} must lie in (0, {lmax})")
    values = np.geomspace(min_lambda, lmax, num=length)
    values[-1] = lmax
    return LambdaGrid(values=values, lambda_max=lmax)


def group_soft_threshold(g: np.ndarray, lam: float) -> np.ndarray:
    """max(0, 1 - lam/||g||_2) * g, exactly zero when ||g||_2 <= lam."""
    nrm = float(np.linalg.norm(g))
    if nrm <= lam:
        return np.zeros_like(g)
    return (1.0 - lam / nrm) * g


def procrustes_align(m: np.ndarray) -> np.ndarray:
    """Orthonormal-column U maximizing trace(U^T m), via the thin SVD of m.

    Raises RankDeficient when some singular value falls below
    1e-12 * sigma_max, so the caller can decide how to fill dead directions.
    """
    u, s, vt = svd_signed(m)
    if s[0] <= 0.0 or s[-1] < RANK_TOL * s[0]:
        raise RankDeficient("matrix has (numerically) dependent columns")
    return u @ vt


def _threshold_blocks(g: np.ndarray, lam: float, blocks) -> np.ndarray:
    """Column-blockwise group soft-threshold of g = X^T U."""
    v = np.empty_like(g)
    for sl in blocks:
        gi = g[sl]
        norms = np.linalg.norm(gi, axis=0)
        scale = np.maximum(0.0, 1.0 - lam / np.where(norms > 0.0, norms, 1.0))
        scale[norms <= lam] = 0.0
        v[sl] = gi * scale
    return v


def _penalty(v: np.ndarray, blocks) -> float:
    return sum(float(np.linalg.norm(v[sl], axis=0).sum()) for sl in blocks)


def _objective_from_parts(half_xsq: float, u: np.ndarray, xv: np.ndarray, v: np.ndarray, lam: float, blocks) -> float:
    # 0.5||X - UV^T||^2 = 0.5||X||^2 - tr(U^T XV) + 0.5||V||^2 for U^T U = I
    return half_xsq - float(np.sum(u * xv)) + 0.5 * float(np.sum(v**2)) + lam * _penalty(v, blocks)


def solve_pmf(
    data: MultiViewData,
    lam: float,
    u0: np.ndarray | None = None,
    eps: float = 1e-6,
    max_iter: int = 1000,
    r: int | None = None,
) -> PmfSolution:
    """Alternating minimization at a fixed penalty.

    The score width defaults to min(n, p); u0 defaults to the leading left
    singular vectors of the concatenated data, which is the exact solution at
    lam = 0. Stops when the objective decreases by less than eps over one
    full sweep. The recorded objective trace is non-increasing.
    """
    x = concatenate(data)
    n, p = x.shape
    if u0 is None:
        r = min(n, p) if r is None else r
        u0 = leading_left_vectors(x, r)
    u = np.array(u0, dtype=float)
    r = u.shape[1]
    blocks = data.column_blocks()

    half_xsq = 0.5 * float(np.sum(x**2))
    v = x.T @ u
    trace = [_objective_from_parts(half_xsq, u, x @ v, v, lam, blocks)]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        v = _threshold_blocks(x.T @ u, lam, blocks)
        xv = x @ v
        u = aligned_orthonormal(xv, u, RANK_TOL)
        f = _objective_from_parts(half_xsq, u, xv, v, lam, blocks)
        if not np.isfinite(f):
            raise NonFinite(f"objective became non-finite at sweep {it}")
        trace.append(f)
        if trace[-2] - trace[-1] < eps:
            converged = True
            break
    return PmfSolution(
        U=u, V=v, lam=float(lam), objective_trace=trace, iterations=it, converged=converged
    )


def support_structure(solution: PmfSolution, data: MultiViewData) -> StructureMatrix:
    """Canonical structure read off the exact zero pattern of the loadings."""
    blocks = data.column_blocks()
    raw = np.zeros((data.d, solution.V.shape[1]), dtype=int)
    for i, sl in enumerate(blocks):
        raw[i] = (np.linalg.norm(solution.V[sl], axis=0) > 0.0).astype(int)
    s, _ = canonicalize(raw)
    return s


def _random_orthonormal(n: int, r: int, rng: np.random.Generator) -> np.ndarray:
    m = rng.standard_normal((n, r))
    q, _ = np.linalg.qr(m)
    return q


def extract_candidates(
    data: MultiViewData,
    grid: LambdaGrid,
    eps: float = 1e-6,
    max_iter: int = 1000,
    restarts: int = 1,
    seed: int | None = None,
) -> CandidateSet:
    """Deduplicated structure sequence along the ascending penalty grid.

    Each penalty is solved from the shared default start (plus optional seeded
    random restarts whose supports are unioned in); structures repeat along
    the grid, so only the first appearance is kept. A penalty whose solve
    fails is skipped with a warning.
    """
    x = concatenate(data)
    r = min(x.shape)
    u0 = leading_left_vectors(x, r)
    rng = np.random.default_rng(seed)

    structures: list[StructureMatrix] = []
    lams: list[list[float]] = []
    for lam in grid.values:
        starts = [u0] + [
            _random_orthonormal(x.shape[0], r, rng) for _ in range(restarts - 1)
        ]
        found: list[StructureMatrix] = []
        for start in starts:
            try:
                sol = solve_pmf(data, float(lam), u0=start, eps=eps, max_iter=max_iter)
            except SlideError as exc:
                warnings.warn(f"penalty {lam:.6g} skipped: {exc}")
                continue
            found.append(support_structure(sol, data))
        for s in found:
            hit = next((k for k, t in enumerate(structures) if equivalent(s, t)), None)
            if hit is None:
                structures.append(s)
                lams.append([float(lam)])
            elif float(lam) not in lams[hit]:
                lams[hit].append(float(lam))
    return CandidateSet(structures=structures, generating_lambda=lams)
