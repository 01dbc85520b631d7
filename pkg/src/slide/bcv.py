"""Structure selection by bi-cross-validation over row/column holdouts.

Rows are split into k_r folds shared by all views; columns are split into
k_c folds independently within each view. Holding out one (row fold, column
fold) pair leaves four blocks per view: the held-out corner X11, its row
companions X12 (held-out rows, held-in columns), its column companions X21,
and the held-in core X22. Each candidate structure is fitted on the
re-standardized core, the fit is mapped back to the raw scale with an extra
intercept column that carries the removed column means, and the corner is
predicted from its companions through that model. The candidate with the
smallest total scaled prediction error over all k_r * k_c holdouts wins.

Selection operates on raw (unstandardized) views and re-standardizes each
core internally, so no information from held-out cells leaks into the fit.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from .errors import TooFewColumns, TooFewSamples
from .fit import fit_with_structure
from .linalg import leading_left_vectors
from .preprocess import MultiViewData, RawViews, center_and_scale, concatenate
from .structure import StructureMatrix

GRAM_RCOND = 1e-10


@dataclass(frozen=True)
class FoldPlan:
    """Shared row folds and per-view column folds, all sorted index arrays."""

    row_folds: tuple[np.ndarray, ...]
    column_folds: tuple[tuple[np.ndarray, ...], ...]  # [view][fold]
    seed: int

    @property
    def k_r(self) -> int:
        return len(self.row_folds)

    @property
    def k_c(self) -> int:
        return len(self.column_folds[0])


@dataclass
class BcvReport:
    """Per-candidate, per-holdout prediction errors and the selected index."""

    structures: list[StructureMatrix]
    fold_errors: np.ndarray  # (m, k_r, k_c)
    total_errors: np.ndarray  # (m,)
    selected: int
    plan: FoldPlan
    flags: list[str]

    @property
    def selected_structure(self) -> StructureMatrix:
        return self.structures[self.selected]

    def to_json(self) -> str:
        doc = {
            "structures": [s.encode() for s in self.structures],
            "d": self.structures[0].d if self.structures else 0,
            "fold_errors": self.fold_errors.tolist(),
            "total_errors": self.total_errors.tolist(),
            "selected": self.selected,
            "seed": self.plan.seed,
            "row_folds": [f.tolist() for f in self.plan.row_folds],
            "column_folds": [
                [f.tolist() for f in per_view] for per_view in self.plan.column_folds
            ],
            "flags": self.flags,
        }
        return json.dumps(doc)


def _balanced_partition(idx: np.ndarray, k: int) -> list[np.ndarray]:
    # np.array_split puts the larger pieces first; sizes differ by at most 1
    return [np.sort(part) for part in np.array_split(idx, k)]


def make_folds(n: int, p, k_r: int, k_c: int, seed: int) -> FoldPlan:
    """Uniformly random balanced folds, deterministic for a given seed."""
    if k_r < 2 or k_c < 2:
        raise TooFewSamples("need at least two folds in each direction")
    if n < 2 * k_r:
        raise TooFewSamples(f"n={n} too small for k_r={k_r} row folds")
    for i, pi in enumerate(p):
        if pi < k_c:
            raise TooFewColumns(f"view {i + 1} has {pi} columns, fewer than k_c={k_c}")
    rng = np.random.default_rng(seed)
    rows = rng.permutation(n)
    row_folds = tuple(_balanced_partition(rows, k_r))
    column_folds = tuple(
        tuple(_balanced_partition(rng.permutation(pi), k_c)) for pi in p
    )
    return FoldPlan(row_folds=row_folds, column_folds=column_folds, seed=int(seed))


class _Holdout:
    """Raw blocks and the standardized core for one (row, column) holdout.

    Built once per holdout and reused by every candidate; the leading left
    singular vectors of the core are cached as the shared fit start.
    """

    def __init__(self, raw: RawViews, plan: FoldPlan, row_fold: int, col_fold: int):
        rows1 = plan.row_folds[row_fold]
        mask = np.ones(raw.n, dtype=bool)
        mask[rows1] = False
        rows2 = np.flatnonzero(mask)
        self.n1, self.nr = len(rows1), len(rows2)
        self.x11, x21, x12, x22 = [], [], [], []
        for i, x in enumerate(raw.views):
            cols1 = plan.column_folds[i][col_fold]
            cmask = np.ones(x.shape[1], dtype=bool)
            cmask[cols1] = False
            cols2 = np.flatnonzero(cmask)
            self.x11.append(x[np.ix_(rows1, cols1)])
            x21.append(x[np.ix_(rows2, cols1)])
            x12.append(x[np.ix_(rows1, cols2)])
            x22.append(x[np.ix_(rows2, cols2)])
        self.x21 = x21
        self.x12 = np.hstack(x12)
        self.x22_raw = np.hstack(x22)
        self.core: MultiViewData = center_and_scale(
            RawViews.from_arrays(x22, raw.view_names)
        )
        self.r_max = min(self.nr, self.core.p_total)
        self.u0 = leading_left_vectors(concatenate(self.core), self.r_max)
        # intercept column pair reproducing the removed column means
        self.u_hat0 = np.full((self.nr, 1), self.nr**-0.5)
        self.v_hat0 = (self.x22_raw.T @ np.ones((self.nr, 1))) * self.nr**-0.5


def _holdout_error(
    hold: _Holdout,
    s: StructureMatrix,
    eps: float,
    max_iter: int,
    gram_correction: bool = False,
) -> tuple[float, list[str]]:
    flags: list[str] = []
    if s.r > hold.r_max:
        s = StructureMatrix(d=s.d, columns=s.columns[: hold.r_max])
        flags.append(f"structure truncated to r={hold.r_max}")
    model = fit_with_structure(
        hold.core, s, u0=hold.u0[:, : s.r], eps=eps, max_iter=max_iter
    )
    # back-scale the loadings and append the intercept pair
    scales = np.repeat(hold.core.frobenius_scales, hold.core.p)
    v_prime = model.V * scales[:, None]
    u_hat = np.hstack([hold.u_hat0, model.U])
    v_hat = np.hstack([hold.v_hat0, v_prime])

    gram_inv = np.linalg.pinv(v_hat.T @ v_hat, rcond=GRAM_RCOND)
    coef = hold.x12 @ v_hat @ gram_inv  # row scores of the held-out rows
    if gram_correction:
        coef = coef @ np.linalg.pinv(u_hat.T @ u_hat, rcond=GRAM_RCOND)
    total = 0.0
    for i, x11 in enumerate(hold.x11):
        centered = x11 - x11.mean(axis=0, keepdims=True)
        denom = float(np.sum(centered**2))
        if denom == 0.0:
            warnings.warn(f"view {i + 1}: held-out corner is constant, term skipped")
            flags.append(f"view {i + 1}: zero denominator, term skipped")
            continue
        pred = coef @ (u_hat.T @ hold.x21[i])
        total += float(np.sum((x11 - pred) ** 2)) / denom
    return total, flags


def bcv_error_one_holdout(
    raw: RawViews,
    plan: FoldPlan,
    holdout: tuple[int, int],
    s: StructureMatrix,
    eps: float = 1e-6,
    max_iter: int = 1000,
) -> float:
    """Scaled prediction error for one candidate on one holdout."""
    hold = _Holdout(raw, plan, *holdout)
    err, _ = _holdout_error(hold, s, eps, max_iter)
    return err


def select_structure(
    raw: RawViews,
    candidates,
    k_r: int = 3,
    k_c: int = 3,
    seed: int = 0,
    eps: float = 1e-6,
    max_iter: int = 1000,
    gram_correction: bool = False,
    workers: int = 1,
) -> BcvReport:
    """Pick the candidate with the smallest total error over all holdouts.

    One fold plan is shared by every candidate so the totals are comparable.
    Ties go to the structure with fewer components, then fewer nonzero
    entries. A candidate that fails on any holdout gets infinite total error.
    """
    structures = list(candidates)
    if not structures:
        raise TooFewSamples("candidate set is empty")
    plan = make_folds(raw.n, raw.p, k_r, k_c, seed)
    holdouts = [
        _Holdout(raw, plan, a, b) for a in range(k_r) for b in range(k_c)
    ]
    flags: list[str] = []

    def one_cell(ci: int, hi: int):
        try:
            err, cell_flags = _holdout_error(
                holdouts[hi], structures[ci], eps, max_iter, gram_correction
            )
            return ci, hi, err, cell_flags
        except Exception as exc:  # noqa: BLE001 - candidate failure is recorded
            return ci, hi, np.inf, [f"holdout failed: {exc}"]

    cells = [(ci, hi) for ci in range(len(structures)) for hi in range(len(holdouts))]
    results = Parallel(n_jobs=workers, prefer="threads")(
        delayed(one_cell)(ci, hi) for ci, hi in cells
    )
    fold_errors = np.zeros((len(structures), k_r, k_c))
    for ci, hi, err, cell_flags in sorted(results, key=lambda t: (t[0], t[1])):
        fold_errors[ci, hi // k_c, hi % k_c] = err
        for f in cell_flags:
            flags.append(f"candidate {ci}, holdout {hi}: {f}")

    totals = fold_errors.reshape(len(structures), -1).sum(axis=1)
    order = sorted(
        range(len(structures)),
        key=lambda i: (
            totals[i],
            structures[i].r,
            sum(sum(b) for b in structures[i].columns),
            i,
        ),
    )
    return BcvReport(
        structures=structures,
        fold_errors=fold_errors,
        total_errors=totals,
        selected=order[0],
        plan=plan,
        flags=flags,
    )
