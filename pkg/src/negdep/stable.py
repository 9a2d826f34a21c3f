"""Real-stability (strong Rayleigh) certification for multiaffine polynomials.

Two channels:

* refutation -- a point of the open upper half-space where ``f`` vanishes,
  found either by random search or from a real point where the pairwise
  quantity ``Delta_ij = (d_i f)(d_j f) - f d_i d_j f`` is negative, then
  polished by one-coordinate Newton steps;
* acceptance -- ``Delta_ij >= 0`` on all real points (the multiaffine
  real-stability criterion), screened by multi-start minimization within a
  budget, together with the covariance conditions every strongly Rayleigh law
  satisfies. Acceptance through this channel is "certified-by-budget", not a
  proof.

``Delta_ij`` does not depend on ``z_i`` or ``z_j`` and is a quadratic form in
``(1, x_k)`` for every other ``k``. Writing ``x_k = tan(theta_k)`` and
homogenizing turns it into a bounded function of angles whose exact minimizer
in any single angle is an eigenvector of a 2x2 matrix; the search is
coordinate descent with that exact step.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from negdep.errors import DimensionTooLarge, NegativeCoefficient, WrongDimension
from negdep.model import (
    FAILS,
    HOLDS,
    INCONCLUSIVE,
    BernoulliLaw,
    MultiaffinePoly,
    Verdict,
    covariance_matrix,
    generating_polynomial,
)

BIVARIATE_TOL = 1e-12
DELTA_TOL = 1e-12  # relative to (sum |c|)^2
SR_TOL = 1e-12
WITNESS_VALUE_TOL = 1e-8  # relative to sum |c|
WITNESS_IMAG_MIN = 1e-12
NEWTON_STEP_TOL = 1e-10
NUMERIC_MAX_N = 10


@dataclass(frozen=True)
class Budget:
    starts_per_pair: int = 64
    root_samples: int = 2048
    max_sweeps: int = 60

    @classmethod
    def parse(cls, value) -> "Budget":
        if value is None or value == "default":
            return cls()
        if isinstance(value, Budget):
            return value
        return cls(starts_per_pair=int(value))


@dataclass(frozen=True)
class RootWitness:
    point: np.ndarray
    value: complex

    @property
    def imag_parts_positive(self) -> bool:
        return bool(np.all(self.point.imag > 0))

    def to_json(self) -> dict:
        return {
            "point": [[float(z.real), float(z.imag)] for z in self.point],
            "value": [float(self.value.real), float(self.value.imag)],
            "imag_parts_positive": self.imag_parts_positive,
        }


def is_valid_root(poly: MultiaffinePoly, w: RootWitness) -> bool:
    """Independent re-check of a refutation witness."""
    val = poly(w.point)
    return bool(
        np.all(w.point.imag >= WITNESS_IMAG_MIN) and abs(val) <= WITNESS_VALUE_TOL * poly.abs_sum()
    )


def _check_coeffs(poly: MultiaffinePoly):
    c = np.asarray(poly.coeffs)
    if np.iscomplexobj(c) or np.any(c < -1e-15):
        raise NegativeCoefficient("stability screens need real nonnegative coefficients")
    if not np.any(c > 0):
        raise ValueError("zero polynomial")


def check_stable_bivariate(poly: MultiaffinePoly) -> Verdict:
    """Exact test for ``c0 + c1 z1 + c2 z2 + c12 z1 z2``: stable iff ``c1 c2 >= c0 c12``."""
    if poly.n != 2:
        raise WrongDimension(f"bivariate test needs n == 2, got {poly.n}")
    _check_coeffs(poly)
    c0, c1, c2, c12 = (float(x) for x in poly.coeffs)
    gap = c1 * c2 - c0 * c12
    if gap >= -BIVARIATE_TOL:
        return Verdict(HOLDS, budget_spent={"evaluations": 1}, notes=(f"c1*c2 - c0*c12 = {gap!r}",))
    # z2 = -(c0 + c1 z1) / (c2 + c12 z1) is a Moebius map with determinant
    # c0*c12 - c1*c2 > 0, so it sends the upper half-plane into itself.
    z1 = 1j
    z2 = -(c0 + c1 * z1) / (c2 + c12 * z1)
    point = np.array([z1, z2])
    return Verdict(FAILS, witness=RootWitness(point, poly(point)), budget_spent={"evaluations": 1})


def sr_necessary_conditions(law: BernoulliLaw) -> Verdict:
    """Row-sum conditions implied by the strong Rayleigh property.

    For each ``i``: ``sum_j cov(X_i,X_j) >= 0``, ``sum_j |cov(X_i,X_j)| <= 2 var(X_i)``
    and ``sum_j |cov(X_i,X_j)| <= 1/2``.
    """
    C = covariance_matrix(law)
    worst_abs = 0.0
    for i in range(law.n):
        row = C[i]
        total = float(row.sum())
        abs_sum = float(np.abs(row).sum())
        var = float(row[i])
        worst_abs = max(worst_abs, abs_sum)
        checks = (
            ("row_sum_nonnegative", total >= -SR_TOL, total, 0.0),
            ("abs_sum_le_2var", abs_sum <= 2 * var + SR_TOL, abs_sum, 2 * var),
            ("abs_sum_le_half", abs_sum <= 0.5 + SR_TOL, abs_sum, 0.5),
        )
        broken = [{"inequality": name, "value": value, "bound": bound} for name, ok, value, bound in checks if not ok]
        if broken:
            witness = {"index": i + 1, **broken[0], "violations": broken}
            return Verdict(FAILS, witness=witness, budget_spent={"rows_checked": i + 1})
    return Verdict(HOLDS, budget_spent={"rows_checked": law.n}, notes=(f"max_abs_row_sum={worst_abs!r}",))


def _homog(coeffs: np.ndarray, C: np.ndarray, S: np.ndarray) -> np.ndarray:
    """Evaluate ``sum_S c_S prod_{k in S} sin_k prod_{k not in S} cos_k`` per row."""
    v = np.repeat(coeffs[:, None], C.shape[0], axis=1)
    for k in range(C.shape[1]):
        v = v[0::2] * C[:, k] + v[1::2] * S[:, k]
    return v[0]


def _pair_parts(poly: MultiaffinePoly, i: int, j: int):
    g, h = poly.split(i)
    A, Cc = g.split(j)
    B, D = h.split(j)
    return A.coeffs, B.coeffs, Cc.coeffs, D.coeffs


def _split_at(coeffs: np.ndarray, k: int, n: int):
    idx = np.arange(1 << n)
    has = (idx >> k) & 1 == 1
    lo = np.where(has, 0.0, coeffs)
    hi = np.zeros_like(coeffs)
    hi[idx[has] ^ (1 << k)] = coeffs[has]
    return lo, hi


def _delta_min(poly: MultiaffinePoly, i: int, j: int, starts: int, max_sweeps: int, rng):
    """Multi-start coordinate descent for the normalized ``Delta_ij`` over real points.

    Returns ``(min_value, angles, sweeps)``; ``min_value`` is divided by
    ``(sum |c|)^2``.
    """
    n = poly.n
    scale = poly.abs_sum() ** 2
    parts = _pair_parts(poly, i, j)
    others = [k for k in range(n) if k not in (i, j)]
    theta = np.zeros((starts, n))
    if others:
        theta[:, others] = rng.uniform(-np.pi / 2, np.pi / 2, size=(starts, len(others)))
    split = {k: [_split_at(p, k, n) for p in parts] for k in others}

    def value(th):
        C, S = np.cos(th), np.sin(th)
        a, b, c, d = (_homog(p, C, S) for p in parts)
        return (b * c - a * d) / scale

    current = value(theta)
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        before = current.copy()
        for k in others:
            tk = theta.copy()
            tk[:, k] = 0.0
            C, S = np.cos(tk), np.sin(tk)
            (a0, a1), (b0, b1), (c0, c1), (d0, d1) = (
                (_homog(lo, C, S), _homog(hi, C, S)) for lo, hi in split[k]
            )
            alpha = b0 * c0 - a0 * d0
            gamma = b1 * c1 - a1 * d1
            beta = b0 * c1 + b1 * c0 - a0 * d1 - a1 * d0
            # smallest eigenpair of [[alpha, beta/2], [beta/2, gamma]]
            theta[:, k] = 0.5 * np.arctan2(-beta, gamma - alpha)
            current = value(theta)
        if np.all(before - current <= 1e-15):
            break
    best = int(np.argmin(current))
    return float(current[best]), theta[best], sweeps


def _newton_polish(poly: MultiaffinePoly, z: np.ndarray, i: int):
    """Newton iterations in coordinate ``i`` with the others held fixed."""
    d = poly.derivative(i)
    for _ in range(50):
        fz = poly(z)
        dz = d(z)
        if dz == 0:
            return None
        step = fz / dz
        z = z.copy()
        z[i] -= step
        if abs(step) < NEWTON_STEP_TOL:
            break
    return z


def _root_from_point(poly: MultiaffinePoly, z: np.ndarray, i: int):
    """Solve ``f = 0`` for ``z_i`` (others fixed) and accept if in the half-space."""
    g, h = poly.split(i)
    hz = h(z)
    if hz == 0:
        return None
    z = z.copy()
    z[i] = -g(z) / hz
    z = _newton_polish(poly, z, i)
    if z is None:
        return None
    w = RootWitness(z, poly(z))
    return w if is_valid_root(poly, w) else None


def _witness_from_delta(poly: MultiaffinePoly, i: int, j: int, theta: np.ndarray):
    n = poly.n
    theta = theta.copy()
    others = [k for k in range(n) if k not in (i, j)]
    # keep tan finite; the negative region is open
    for k in others:
        c = np.cos(theta[k])
        if abs(c) < 1e-6:
            theta[k] = np.arctan2(np.sin(theta[k]), np.copysign(1e-6, c if c != 0 else 1.0))
    x = np.tan(theta)
    for eps in (1e-6, 1e-4, 1e-3, 1e-2, 1e-1, 1e-8):
        z = np.zeros(n, dtype=np.complex128)
        z[others] = x[others] + 1j * eps * (1.0 + np.abs(x[others]))
        z[j] = 1j
        w = _root_from_point(poly, z, i)
        if w is not None:
            return w
    return None


def _random_root_search(poly: MultiaffinePoly, samples: int, rng):
    n = poly.n
    if n < 2 or samples <= 0:
        return None
    re = rng.standard_normal((samples, n)) * np.exp(rng.uniform(-2, 2, size=(samples, n)))
    im = np.exp(rng.uniform(-6, 2, size=(samples, n)))
    pts = re + 1j * im
    coords = rng.integers(0, n, size=samples)
    parts = [poly.split(i) for i in range(n)]
    for i in range(n):
        rows = np.flatnonzero(coords == i)
        if rows.size == 0:
            continue
        g, h = parts[i]
        gv = g.evaluate_many(pts[rows])
        hv = h.evaluate_many(pts[rows])
        ok = hv != 0
        zi = np.where(ok, -gv / np.where(ok, hv, 1.0), 0.0)
        hits = rows[ok & (zi.imag > 1e-9)]
        for r in hits[:8]:
            w = _root_from_point(poly, pts[r], i)
            if w is not None:
                return w
    return None


def _numeric_channels(poly: MultiaffinePoly, budget: Budget, seed) -> Verdict:
    n = poly.n
    entropy = 0 if seed is None else int(seed)
    spent = {"root_samples": 0, "pairs": 0, "starts": 0, "sweeps": 0}
    rng = np.random.default_rng(np.random.SeedSequence(entropy, spawn_key=(n, n)))
    w = _random_root_search(poly, budget.root_samples, rng)
    spent["root_samples"] = budget.root_samples
    if w is not None:
        return Verdict(FAILS, witness=w, budget_spent=spent, notes=("root found by random search",))
    worst = np.inf
    negative = None
    for i in range(n):
        for j in range(i + 1, n):
            rng = np.random.default_rng(np.random.SeedSequence(entropy, spawn_key=(i, j)))
            starts = budget.starts_per_pair if n > 2 else 1
            val, theta, sweeps = _delta_min(poly, i, j, starts, budget.max_sweeps, rng)
            spent["pairs"] += 1
            spent["starts"] += starts
            spent["sweeps"] += sweeps
            worst = min(worst, val)
            if val < -DELTA_TOL:
                w = _witness_from_delta(poly, i, j, theta)
                if w is not None:
                    return Verdict(
                        FAILS,
                        witness=w,
                        budget_spent=spent,
                        notes=(f"Delta_{i + 1}{j + 1} = {val!r} < 0 at a real point; root polished from it",),
                    )
                negative = negative or (i, j, val)
    if negative is not None:
        i, j, val = negative
        return Verdict(
            INCONCLUSIVE,
            budget_spent=spent,
            notes=(f"Delta_{i + 1}{j + 1} reached {val!r} < 0 but no root witness could be polished",),
        )
    return Verdict(HOLDS, budget_spent=spent, notes=(f"min normalized Delta = {worst!r}",))


def _as_law(poly: MultiaffinePoly) -> BernoulliLaw:
    c = np.clip(np.asarray(poly.coeffs, dtype=np.float64), 0.0, None)
    return BernoulliLaw.from_dense(c / c.sum())


def check_stable_numeric(poly: MultiaffinePoly, budget: Budget | None = None, seed=0) -> Verdict:
    """Budgeted stability test for ``1 <= n <= 10``.

    ``fails`` always carries a polished :class:`RootWitness`. ``holds`` means
    both the covariance screen and the ``Delta_ij`` search passed
    (certified-by-budget); anything else is ``inconclusive``.
    """
    budget = Budget.parse(budget)
    if not 1 <= poly.n <= NUMERIC_MAX_N:
        raise DimensionTooLarge(f"numeric stability check supports 1 <= n <= {NUMERIC_MAX_N}")
    _check_coeffs(poly)
    screen = sr_necessary_conditions(_as_law(poly))
    numeric = _numeric_channels(poly, budget, seed)
    stages = (("necessary_conditions", screen), ("numeric", numeric))
    if numeric.fails:
        return Verdict(FAILS, witness=numeric.witness, budget_spent=numeric.budget_spent, stages=stages)
    if screen.holds and numeric.holds:
        return Verdict(HOLDS, budget_spent=numeric.budget_spent, notes=("certified-by-budget",), stages=stages)
    return Verdict(INCONCLUSIVE, budget_spent=numeric.budget_spent, stages=stages)


def check_strongly_rayleigh(law: BernoulliLaw, budget: Budget | None = None, seed=0) -> Verdict:
    """Screen, then exact (``n <= 2``) or numeric stability; fails dominate."""
    budget = Budget.parse(budget)
    if law.n > NUMERIC_MAX_N:
        raise DimensionTooLarge(f"strong Rayleigh check supports n <= {NUMERIC_MAX_N}")
    screen = sr_necessary_conditions(law)
    stages = [("necessary_conditions", screen)]
    if screen.fails:
        return Verdict(FAILS, witness=screen.witness, budget_spent=screen.budget_spent, stages=tuple(stages))
    poly = generating_polynomial(law)
    if law.n == 1:
        stage = Verdict(HOLDS, notes=("univariate with nonnegative coefficients",))
        stages.append(("exact", stage))
    elif law.n == 2:
        stage = check_stable_bivariate(poly)
        stages.append(("exact", stage))
    else:
        stage = _numeric_channels(poly, budget, seed)
        stages.append(("numeric", stage))
    if stage.fails:
        return Verdict(FAILS, witness=stage.witness, budget_spent=stage.budget_spent, stages=tuple(stages))
    if stage.holds:
        notes = ("certified-by-budget",) if law.n > 2 else ("exact",)
        return Verdict(HOLDS, budget_spent=stage.budget_spent, notes=notes, stages=tuple(stages))
    return Verdict(INCONCLUSIVE, budget_spent=stage.budget_spent, notes=stage.notes, stages=tuple(stages))
