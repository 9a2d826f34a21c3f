"""Exact negative-association and negative-correlation certification.

Reduction used by :func:`check_na_exact`: a bounded increasing ``f`` on a cube
is ``min f + sum_t c_t 1{f >= t}`` with ``c_t >= 0`` and each ``{f >= t}`` an
up-set (layer-cake). Covariance is bilinear, so ``cov(f, g) <= 0`` for all such
``f, g`` iff ``cov(1_F, 1_G) <= 0`` for all up-set pairs ``F, G``. A function of
``X_B`` with ``B`` disjoint from ``A`` is a function of the complement of ``A``,
so only complementary splits need checking.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

from negdep.errors import DimensionTooLarge
from negdep.flows import max_weight_upset
from negdep.model import (
    FAILS,
    HOLDS,
    BernoulliLaw,
    Verdict,
    covariance_matrix,
    joint_table,
    pattern_key,
)

NA_MAX_N = 8
UPSET_MAX_K = 4
NA_TOLERANCE = 1e-10
NC_TOLERANCE = 1e-12


@lru_cache(maxsize=None)
def _upsets(k: int) -> tuple[int, ...]:
    if k == 0:
        return (0, 1)
    lower = _upsets(k - 1)
    shift = 1 << (k - 1)
    out = [u0 | (u1 << shift) for u0 in lower for u1 in lower if u0 & ~u1 == 0]
    return tuple(sorted(out))


def enumerate_upsets(k: int) -> list[int]:
    """All up-sets of ``{0,1}^k`` as bitmasks over pattern indices.

    Bit ``p`` of a mask is set iff pattern ``p`` belongs to the up-set. The list
    is sorted and includes the empty set (0) and the full cube.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > UPSET_MAX_K:
        raise DimensionTooLarge(f"up-set enumeration limited to k <= {UPSET_MAX_K}")
    return list(_upsets(k))


@lru_cache(maxsize=None)
def _upset_matrix(k: int) -> np.ndarray:
    masks = np.array(_upsets(k), dtype=np.int64)
    M = ((masks[:, None] >> np.arange(1 << k)) & 1).astype(np.float64)
    M.setflags(write=False)
    return M


def upset_keys(mask: int, k: int) -> list[str]:
    return [pattern_key(p, k) for p in range(1 << k) if (mask >> p) & 1]


@dataclass(frozen=True)
class NAWitness:
    """Disjoint blocks with up-sets whose indicators are positively correlated."""

    setA: tuple[int, ...]
    setB: tuple[int, ...]
    upsetF: int
    upsetG: int
    covariance: float

    def to_json(self) -> dict:
        return {
            "setA": [i + 1 for i in self.setA],
            "setB": [i + 1 for i in self.setB],
            "upsetF": upset_keys(self.upsetF, len(self.setA)),
            "upsetG": upset_keys(self.upsetG, len(self.setB)),
            "covariance": self.covariance,
        }


def _membership(mask: int, k: int) -> np.ndarray:
    return np.array([(mask >> p) & 1 for p in range(1 << k)], dtype=bool)


def witness_covariance(law: BernoulliLaw, w: NAWitness) -> float:
    """Recompute ``cov(1_F(X_A), 1_G(X_B))`` by a direct sum over the support."""
    s = law.support
    a = np.zeros_like(s)
    b = np.zeros_like(s)
    for t, c in enumerate(w.setA):
        a |= ((s >> c) & 1) << t
    for t, c in enumerate(w.setB):
        b |= ((s >> c) & 1) << t
    inF = _membership(w.upsetF, len(w.setA))[a]
    inG = _membership(w.upsetG, len(w.setB))[b]
    pw = law.weights
    return float(pw[inF & inG].sum() - pw[inF].sum() * pw[inG].sum())


def check_negative_correlation(law: BernoulliLaw, tolerance: float = NC_TOLERANCE) -> Verdict:
    """Pairwise check ``cov(X_i, X_j) <= tolerance`` for all ``i != j``."""
    C = covariance_matrix(law)
    n = law.n
    for i in range(n):
        for j in range(i + 1, n):
            if C[i, j] > tolerance:
                return Verdict(
                    FAILS,
                    witness={"pair": [i + 1, j + 1], "covariance": float(C[i, j])},
                    budget_spent={"pairs_checked": i * n - i * (i + 1) // 2 + (j - i)},
                )
    off = C[~np.eye(n, dtype=bool)]
    top = float(off.max()) if off.size else 0.0
    return Verdict(HOLDS, budget_spent={"pairs_checked": n * (n - 1) // 2}, notes=(f"max_offdiag_cov={top!r}",))


def _splits(n: int):
    """Complementary splits ``(A, B)`` with ``|A| <= |B|``; ties keep ``0 in A``."""
    everything = range(n)
    for s in range(1, n // 2 + 1):
        for A in combinations(everything, s):
            if 2 * s == n and 0 not in A:
                continue
            B = tuple(i for i in everything if i not in A)
            yield A, B


def check_na_exact(law: BernoulliLaw, tolerance: float = NA_TOLERANCE) -> Verdict:
    """Decide negative association of ``law`` exactly (``n <= 8``).

    For each complementary split the smaller side's up-sets are enumerated
    (at most 168 of them). If the larger side has at most four coordinates all
    up-set pairs are covered by one matrix product; otherwise the worst ``G``
    for each ``F`` is found as a maximum-weight closure. The first violation in
    split / ``F`` / ``G`` order is returned, so the witness is deterministic.
    """
    n = law.n
    if n > NA_MAX_N:
        raise DimensionTooLarge(f"check_na_exact supports n <= {NA_MAX_N}, got {n}")
    pairs = 0
    closures = 0
    splits = 0
    worst = -np.inf
    for A, B in _splits(n):
        splits += 1
        J = joint_table(law, A, B)
        D = J - np.outer(J.sum(axis=1), J.sum(axis=0))
        UA = _upset_matrix(len(A))
        masksA = _upsets(len(A))
        if len(B) <= UPSET_MAX_K:
            UB = _upset_matrix(len(B))
            C = UA @ D @ UB.T
            pairs += C.size
            worst = max(worst, float(C.max()))
            hits = np.argwhere(C > tolerance)
            if hits.size:
                f, g = hits[0]
                witness = NAWitness(A, B, masksA[f], _upsets(len(B))[g], float(C[f, g]))
                return _failed(witness, pairs, closures, splits)
        else:
            W = UA @ D
            for f, row in enumerate(W):
                closures += 1
                member, value = max_weight_upset(row, len(B))
                worst = max(worst, value)
                if value > tolerance:
                    gmask = sum(1 << int(p) for p in np.flatnonzero(member))
                    witness = NAWitness(A, B, masksA[f], gmask, value)
                    return _failed(witness, pairs, closures, splits)
    notes = ()
    if worst > 0:
        notes = (f"holds with margin: largest up-set covariance {worst!r} <= tolerance {tolerance!r}",)
    return Verdict(
        HOLDS,
        budget_spent={"pairs_checked": pairs, "closure_solves": closures, "splits": splits},
        notes=notes,
    )


def _failed(witness, pairs, closures, splits) -> Verdict:
    return Verdict(
        FAILS,
        witness=witness,
        budget_spent={"pairs_checked": pairs, "closure_solves": closures, "splits": splits},
    )
