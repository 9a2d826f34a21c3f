"""Stochastic covering between subset-valued laws, decided by max-flow.

``Y`` covers ``Z`` when some coupling puts all mass on pairs ``(A, B)`` with
``A == B`` or ``B`` equal to ``A`` minus one element. With integer capacities
this is a bipartite transportation problem; a shortfall in the maximum flow
comes with a Hall-type cut ``T`` of ``Z`` patterns whose mass exceeds the mass
of every ``Y`` pattern allowed to reach them.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from negdep.errors import DimensionMismatch, DimensionTooLarge, EmptyCoordinateSet, IndexOutOfRange
from negdep.flows import SCALE, SLACK_UNITS, to_units, transport
from negdep.model import FAILS, HOLDS, BernoulliLaw, Verdict, pattern_key

COVERING_MAX_N = 12
CONDITION_FLOOR = 1e-12
MARGINAL_TOLERANCE = 1e-10


@dataclass(frozen=True)
class CoveringCoupling:
    """Joint law of ``(Y, Z)`` as ``{(A, B): p}`` with subset-index keys."""

    n: int
    joint: dict

    def marginals(self) -> tuple[dict, dict]:
        y, z = {}, {}
        for (a, b), p in self.joint.items():
            y[a] = y.get(a, 0.0) + p
            z[b] = z.get(b, 0.0) + p
        return y, z

    def marginal_error(self, lawY: BernoulliLaw, lawZ: BernoulliLaw) -> float:
        y, z = self.marginals()
        err = 0.0
        for law, got in ((lawY, y), (lawZ, z)):
            want = dict(zip(law.support.tolist(), law.weights.tolist()))
            for k in set(want) | set(got):
                err = max(err, abs(want.get(k, 0.0) - got.get(k, 0.0)))
        return err

    def to_json(self) -> dict:
        return {
            "pairs": [
                {"Y": pattern_key(a, self.n), "Z": pattern_key(b, self.n), "p": p}
                for (a, b), p in sorted(self.joint.items())
            ]
        }


def allowed(a: int, b: int) -> bool:
    d = a ^ b
    return d == 0 or (b & ~a == 0 and d & (d - 1) == 0)


def covering_feasible(lawY: BernoulliLaw, lawZ: BernoulliLaw) -> Verdict:
    """Decide whether ``lawY`` stochastically covers ``lawZ``.

    On success the verdict's ``certificate`` is a :class:`CoveringCoupling`;
    on failure the witness lists the cut family ``T`` with its mass and the
    mass of its neighbourhood.
    """
    if lawY.n != lawZ.n:
        raise DimensionMismatch(f"laws on {lawY.n} and {lawZ.n} coordinates")
    n = lawY.n
    if n > COVERING_MAX_N:
        raise DimensionTooLarge(f"covering_feasible supports n <= {COVERING_MAX_N}")
    supply = {int(a): to_units(p) for a, p in zip(lawY.support, lawY.weights)}
    demand = {int(b): to_units(p) for b, p in zip(lawZ.support, lawZ.weights)}
    edges = []
    for a in supply:
        if a in demand:
            edges.append((a, a))
        for k in range(n):
            b = a & ~(1 << k)
            if b != a and b in demand:
                edges.append((a, b))
    value, flow, source_side = transport(supply, demand, edges)
    need = max(sum(supply.values()), sum(demand.values()))
    spent = {"edges": len(edges), "flow_units": int(value)}
    if value >= need - SLACK_UNITS:
        coupling = _coupling(n, flow)
        return Verdict(HOLDS, budget_spent=spent, certificate=coupling)
    T = sorted(b for b in demand if ("Z", b) not in source_side)
    nbrs = sorted({a for a, b in edges if b in set(T)})
    witness = {
        "cut": [pattern_key(b, n) for b in T],
        "mass_Z": sum(demand[b] for b in T) / SCALE,
        "neighbors": [pattern_key(a, n) for a in nbrs],
        "mass_Y_neighbors": sum(supply[a] for a in nbrs) / SCALE,
    }
    return Verdict(FAILS, witness=witness, budget_spent=spent)


def _coupling(n: int, flow: dict) -> CoveringCoupling:
    return CoveringCoupling(n, {k: v / SCALE for k, v in flow.items()})


def conditional_law(law: BernoulliLaw, B: Sequence[int], U: Sequence[int]) -> tuple[float, BernoulliLaw | None]:
    """``(P(X ∩ B = U), law of X off B given X ∩ B = U)``; the law is ``None``
    when the condition has probability at most 1e-12 or ``B`` is everything."""
    B = sorted(int(b) for b in B)
    rest = [c for c in range(law.n) if c not in B]
    return _restrict(law, sum(1 << b for b in B), sum(1 << int(u) for u in U), rest)


def _restrict(law: BernoulliLaw, B_mask: int, U_mask: int, rest: list[int]) -> tuple[float, BernoulliLaw | None]:
    s = law.support
    hit = (s & B_mask) == U_mask
    mass = float(law.weights[hit].sum())
    if mass <= CONDITION_FLOOR or not rest:
        return mass, None
    sub = np.zeros(int(hit.sum()), dtype=np.int64)
    for t, c in enumerate(rest):
        sub |= ((s[hit] >> c) & 1) << t
    order = np.argsort(sub, kind="stable")
    keys, inverse = np.unique(sub[order], return_inverse=True)
    w = np.zeros(keys.size)
    np.add.at(w, inverse, law.weights[hit][order])
    return mass, BernoulliLaw(len(rest), keys, w / mass)


def scp_check(law: BernoulliLaw, B: Sequence[int]) -> Verdict:
    """Stochastic covering property along the coordinates ``B`` (0-based).

    For every ``U`` and ``V = U + {v}`` inside ``B``, the law of ``X`` off ``B``
    given ``X ∩ B = U`` must cover the one given ``X ∩ B = V``. Pairs are
    visited in lexicographic order of ``(sorted U, sorted V)``; conditions of
    probability at most 1e-12 are skipped and listed in the notes.
    """
    n = law.n
    B = sorted(int(b) for b in B)
    if not B:
        raise EmptyCoordinateSet("B is empty")
    for b in B:
        if not 0 <= b < n:
            raise IndexOutOfRange(f"coordinate {b} outside range(0, {n})")
    rest = [c for c in range(n) if c not in B]
    B_mask = sum(1 << b for b in B)
    pairs = []
    for size in range(len(B)):
        for U in combinations(B, size):
            for v in B:
                if v not in U:
                    pairs.append((U, tuple(sorted(U + (v,)))))
    pairs.sort()
    stages, skipped = [], []
    first_fail = None
    for U, V in pairs:
        label = f"U={[u + 1 for u in U]} V={[v + 1 for v in V]}"
        pU, lawU = _restrict(law, B_mask, sum(1 << u for u in U), rest)
        pV, lawV = _restrict(law, B_mask, sum(1 << v for v in V), rest)
        if pU <= CONDITION_FLOOR or pV <= CONDITION_FLOOR:
            skipped.append(label)
            continue
        if not rest:
            verdict = Verdict(HOLDS, notes=("no coordinates outside B",))
        else:
            verdict = covering_feasible(lawU, lawV)
        stages.append((label, verdict))
        if verdict.status == FAILS and first_fail is None:
            first_fail = {"U": [u + 1 for u in U], "V": [v + 1 for v in V], **verdict.witness}
    spent = {"pairs_checked": len(stages), "pairs_skipped": len(skipped)}
    notes = tuple(f"skipped zero-probability condition {s}" for s in skipped)
    if first_fail is not None:
        return Verdict(FAILS, witness=first_fail, budget_spent=spent, notes=notes, stages=tuple(stages))
    return Verdict(HOLDS, budget_spent=spent, notes=notes, stages=tuple(stages))
