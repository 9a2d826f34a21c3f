"""Covariance-summability diagnostics and the quantitative covariance bounds.

Partial sums ``S_i(n) = sum_{j < n} |cov(X_i, X_j)|`` are computed exactly
from covariance matrices. Growth is classified by least squares against
``a + b g(n)`` for ``g`` in ``{log n, sqrt n}`` plus a boundedness test on the
last doubling of ``n``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from negdep.errors import (
    EmptyCoordinateSet,
    IndexOutOfRange,
    InconsistentDimension,
    InconsistentNesting,
    NotToeplitz,
    OverlappingRanges,
    PositiveOffDiagonal,
)
from negdep.kernels import event_pair_extrema
from negdep.model import FAILS, HOLDS, BernoulliLaw, Verdict, covariance_matrix, joint_table

BOUND_TOLERANCE = 1e-10
OFFDIAG_TOLERANCE = 1e-12
NESTING_TOLERANCE = 1e-12
TOEPLITZ_TOLERANCE = 1e-12
FIT_POINTS = 60
OTHER_R2 = 0.95
TIE_R2 = 1e-3
# relative increase over the last doubling below which a profile counts as bounded
BOUNDED_GROWTH = 0.03

GROWTH_ORDER = ("bounded", "logarithmic", "sqrt")


@dataclass(frozen=True)
class CovProfile:
    """Partial absolute covariance sums of one row, with a growth fit."""

    index: int
    ns: np.ndarray
    partial_sums: np.ndarray
    growth_class: str
    fit_exponent: float
    fit_r2: float
    model_r2: dict
    last_doubling_increment: float
    nested: bool

    def to_json(self) -> dict:
        return {
            "index": self.index + 1,
            "nested": self.nested,
            "ns": self.ns.tolist(),
            "partial_sums": self.partial_sums.tolist(),
            "growth_class": self.growth_class,
            "fit_exponent": self.fit_exponent,
            "fit_r2": self.fit_r2,
            "model_r2": self.model_r2,
            "last_doubling_increment": self.last_doubling_increment,
        }


def geometric_grid(lo: int, hi: int, points: int = FIT_POINTS) -> np.ndarray:
    lo, hi = max(1, int(lo)), int(hi)
    if hi <= lo:
        return np.array([hi], dtype=np.int64)
    return np.unique(np.round(np.geomspace(lo, hi, points)).astype(np.int64))


def _affine_r2(g: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    X = np.column_stack([np.ones_like(g), g])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / tot if tot > 0 else 1.0
    return float(coef[0]), float(coef[1]), r2


def classify_growth(ns, values) -> tuple[str, float, float, dict]:
    """Return ``(growth_class, r2, fit_exponent, model_r2)`` for a profile.

    A profile is bounded when the fitted log-slope predicts less than a 3%
    relative increase over one doubling of ``n``. Otherwise the better of the
    log and sqrt fits wins, ties (within 1e-3 in r2) going to the slower
    model, and a best r2 below 0.95 gives ``"other"``.
    """
    n = np.asarray(ns, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    keep = n >= 1
    n, y = n[keep], y[keep]
    if n.size < 3:
        raise ValueError("need at least three profile points to classify growth")
    _, b_log, r2_log = _affine_r2(np.log(n), y)
    _, _, r2_sqrt = _affine_r2(np.sqrt(n), y)
    tail = y[n >= np.sqrt(n[0] * n[-1])]
    scale = abs(float(tail.mean())) if tail.size else abs(float(y.mean()))
    rel = b_log * math.log(2) / scale if scale > 0 else 0.0
    tot = float(((y - y.mean()) ** 2).sum())
    r2_const = 1.0 - tot / float((y**2).sum()) if np.any(y) else 1.0
    pos = y > 0
    exponent = float(np.polyfit(np.log(n[pos]), np.log(y[pos]), 1)[0]) if pos.sum() >= 2 else 0.0
    model_r2 = {"bounded": r2_const, "logarithmic": r2_log, "sqrt": r2_sqrt}
    if rel < BOUNDED_GROWTH:
        return "bounded", r2_const, exponent, model_r2
    cls, best = ("logarithmic", r2_log) if r2_log >= r2_sqrt - TIE_R2 else ("sqrt", r2_sqrt)
    if best < OTHER_R2:
        return "other", best, exponent, model_r2
    return cls, best, exponent, model_r2


def row_sum_profile(
    cov_sequence,
    i: int,
    n_max: int,
    nested: bool = True,
    ns: Sequence[int] | None = None,
) -> CovProfile:
    """Partial sums ``S_i(n)`` of row ``i`` (0-based) up to ``n_max``.

    ``cov_sequence`` is either one covariance matrix (its leading blocks are the
    truncations) or a callable ``n -> matrix``. With ``nested=True`` the
    callable must return consistent leading blocks, which is spot-checked on
    the fitting grid; every ``n`` from ``i + 1`` to ``n_max`` is reported.
    With ``nested=False`` the callable describes a family whose matrices are
    unrelated across ``n``; each grid value is ``sum_j |C_n[i, j]|`` over the
    whole of ``C_n``.
    """
    i, n_max = int(i), int(n_max)
    if i < 0:
        raise IndexOutOfRange(f"row index {i} is negative")
    if nested:
        if callable(cov_sequence):
            full = np.asarray(cov_sequence(n_max), dtype=np.float64)
            for m in geometric_grid(1, n_max - 1, 8):
                part = np.asarray(cov_sequence(int(m)), dtype=np.float64)
                if part.shape != (m, m) or np.abs(part - full[:m, :m]).max() > NESTING_TOLERANCE:
                    raise InconsistentNesting(f"matrix for n={m} is not the leading block of n={n_max}")
        else:
            full = np.asarray(cov_sequence, dtype=np.float64)
        if full.ndim != 2 or full.shape[0] != full.shape[1] or full.shape[0] < n_max:
            raise InconsistentDimension(f"need a square matrix of size >= {n_max}")
        if i >= n_max:
            raise IndexOutOfRange(f"row {i} outside the first {n_max} coordinates")
        sums = np.cumsum(np.abs(full[i, :n_max]))
        grid = np.arange(i + 1, n_max + 1) if ns is None else np.asarray(ns, dtype=np.int64)
        if grid.min() < i + 1 or grid.max() > n_max:
            raise IndexOutOfRange("profile sizes must lie in [i+1, n_max]")
        values = sums[grid - 1]
        fit_n = geometric_grid(max(i + 1, 1), n_max)
        fit_y = sums[fit_n - 1]
    else:
        if not callable(cov_sequence):
            raise TypeError("family mode needs a callable n -> covariance matrix")
        grid = geometric_grid(1, n_max) if ns is None else np.asarray(ns, dtype=np.int64)
        rows = []
        for m in grid:
            C = np.asarray(cov_sequence(int(m)), dtype=np.float64)
            if i >= C.shape[0]:
                raise IndexOutOfRange(f"row {i} outside the matrix for n={m}")
            rows.append(float(np.abs(C[i]).sum()))
        values = np.array(rows)
        fit_n, fit_y = grid, values
    growth, r2, exponent, model_r2 = classify_growth(fit_n, fit_y)
    half = int(np.searchsorted(grid, grid[-1] // 2, side="right")) - 1
    increment = float(values[-1] - values[max(half, 0)])
    return CovProfile(i, np.asarray(grid), np.asarray(values), growth, exponent, r2, model_r2, increment, nested)


def _as_cov(cov) -> np.ndarray:
    C = np.asarray(cov, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] != C.shape[1] or C.shape[0] == 0:
        raise InconsistentDimension("covariance must be a nonempty square matrix")
    return C


def _require_nonpositive(C: np.ndarray):
    off = C[~np.eye(C.shape[0], dtype=bool)]
    if off.size and off.max() > OFFDIAG_TOLERANCE:
        k = int(np.argmax(np.where(np.eye(C.shape[0], dtype=bool), -np.inf, C)))
        i, j = divmod(k, C.shape[0])
        raise PositiveOffDiagonal(f"cov[{i + 1},{j + 1}] = {C[i, j]!r} > 0; the bound assumes nonpositive off-diagonals")


def check_pairwise_sum_bound(cov, tolerance: float = BOUND_TOLERANCE) -> Verdict:
    """``sum_{i,j} |cov_ij| <= n / 2`` for a negatively correlated Bernoulli vector."""
    C = _as_cov(cov)
    _require_nonpositive(C)
    n = C.shape[0]
    total = float(np.abs(C).sum())
    bound = n / 2
    if total > bound + tolerance:
        return Verdict(FAILS, witness={"total": total, "bound": bound}, budget_spent={"entries": n * n})
    return Verdict(HOLDS, budget_spent={"entries": n * n}, notes=(f"total={total!r} bound={bound!r}",))


def _row_check(C: np.ndarray, bound: float, tolerance: float) -> Verdict:
    rows = np.abs(C).sum(axis=1)
    bad = np.flatnonzero(rows > bound + tolerance)
    spent = {"rows_checked": int(C.shape[0])}
    if bad.size:
        i = int(bad[0])
        return Verdict(FAILS, witness={"index": i + 1, "row_sum": float(rows[i]), "bound": bound}, budget_spent=spent)
    return Verdict(HOLDS, budget_spent=spent, notes=(f"max_row_sum={float(rows.max())!r} bound={bound!r}",))


def check_row_sum_bound(cov, tolerance: float = BOUND_TOLERANCE) -> Verdict:
    """Every row satisfies ``sum_j |cov_ij| <= 1/4 + (3/4) sqrt(n)``."""
    C = _as_cov(cov)
    _require_nonpositive(C)
    return _row_check(C, 0.25 + 0.75 * math.sqrt(C.shape[0]), tolerance)


def stationary_row_bound_check(cov, tolerance: float = BOUND_TOLERANCE) -> Verdict:
    """Rows of a stationary negatively correlated covariance sum to at most 1/2."""
    C = _as_cov(cov)
    n = C.shape[0]
    scale = max(1.0, float(np.abs(C).max()))
    for k in range(n):
        d = np.diagonal(C, k)
        if d.size and np.ptp(d) > TOEPLITZ_TOLERANCE * scale:
            raise NotToeplitz(f"diagonal {k} is not constant")
    if np.abs(C - C.T).max() > TOEPLITZ_TOLERANCE * scale:
        raise NotToeplitz("covariance is not symmetric")
    _require_nonpositive(C)
    return _row_check(C, 0.5, tolerance)


def _coords(A, n: int) -> list[int]:
    A = [int(a) for a in A]
    if not A:
        raise EmptyCoordinateSet("coordinate set is empty")
    for a in A:
        if not 0 <= a < n:
            raise IndexOutOfRange(f"coordinate {a} outside range(0, {n})")
    if len(set(A)) != len(A):
        raise InconsistentDimension(f"repeated coordinate in {A}")
    return A


def size_covariance(law: BernoulliLaw, A: Sequence[int], B: Sequence[int]) -> float:
    """``|cov(|X ∩ A|, |X ∩ B|)|`` for disjoint blocks."""
    A, B = _coords(A, law.n), _coords(B, law.n)
    if set(A) & set(B):
        raise OverlappingRanges(f"blocks {A} and {B} overlap")
    C = covariance_matrix(law)
    return abs(float(C[np.ix_(A, B)].sum()))


def decorrelation_bound(law: BernoulliLaw, A: Sequence[int], N: int) -> float:
    """``|cov(sum_{i in A} X_i, sum_{j >= N} X_j)|`` (0-based ``N``).

    Under negative association this bounds ``|cov(1_E, 1_F)|`` for every event
    ``E`` of ``X_A`` and ``F`` of the tail block ``X_N, ..., X_{n-1}``.
    """
    n = law.n
    A = _coords(A, n)
    N = int(N)
    if not 0 <= N <= n:
        raise IndexOutOfRange(f"cut {N} outside [0, {n}]")
    if max(A) >= N:
        raise OverlappingRanges(f"A={A} meets the tail starting at {N}")
    if N == n:
        return 0.0
    return size_covariance(law, A, range(N, n))


REDUCED_MAX_ATOMS = 16


def max_event_covariance(law: BernoulliLaw, A: Sequence[int], B: Sequence[int], method: str = "reduced") -> float:
    """``max |cov(1_E, 1_F)|`` over events ``E`` of ``X_A`` and ``F`` of ``X_B``.

    ``"exhaustive"`` visits every event pair through the kernel. ``"reduced"``
    enumerates events on the side with fewer atoms and picks the best partner
    event in closed form (all atoms with positive, or all with negative, weight).
    """
    A, B = _coords(A, law.n), _coords(B, law.n)
    if set(A) & set(B):
        raise OverlappingRanges(f"blocks {A} and {B} overlap")
    J = joint_table(law, A, B)
    D = J - np.outer(J.sum(axis=1), J.sum(axis=0))
    if method == "exhaustive":
        hi, lo = event_pair_extrema(D)
        return max(abs(hi), abs(lo))
    if method != "reduced":
        raise ValueError(f"unknown method {method!r}")
    if D.shape[0] > D.shape[1]:
        D = D.T
    r = D.shape[0]
    if r > REDUCED_MAX_ATOMS:
        raise InconsistentDimension("both blocks too large for event enumeration")
    best = 0.0
    for start in range(0, 1 << r, 4096):
        masks = np.arange(start, min(start + 4096, 1 << r), dtype=np.int64)
        W = ((masks[:, None] >> np.arange(r)) & 1).astype(np.float64) @ D
        best = max(best, float(np.clip(W, 0, None).sum(axis=1).max()), float(-np.clip(W, None, 0).sum(axis=1).min()))
    return best
