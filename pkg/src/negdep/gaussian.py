"""Gaussian vectors, their threshold laws and linear-algebraic decorrelation."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.special import ndtr, owens_t

from negdep.errors import (
    AsymmetricCov,
    ClosedFormUnavailable,
    EmptyCoordinateSet,
    FactorizationFailure,
    IndexOutOfRange,
    InconsistentDimension,
    NotPSD,
    OutOfRange,
    PrecisionUnreachable,
)
from negdep.kernels import pattern_indices
from negdep.model import FAILS, HOLDS, BernoulliLaw, GaussianSpec, Verdict, key_index

SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-10  # relative to trace
SINGULAR_FLOOR = 1e-12  # relative to trace
SHARD_PAIRS = 1 << 16
DEFAULT_MAX_SAMPLES = 200_000_000
NA_COV_TOLERANCE = 1e-12


def _spectrum(cov: np.ndarray):
    w, V = np.linalg.eigh((cov + cov.T) / 2)
    return w, V


def validate_spec(spec: GaussianSpec) -> GaussianSpec:
    """Check symmetry and positive semidefiniteness; flag near-singular specs."""
    cov = spec.cov
    if np.max(np.abs(cov - cov.T), initial=0.0) > SYMMETRY_TOL:
        raise AsymmetricCov("covariance matrix is not symmetric")
    w, _ = _spectrum(cov)
    scale = max(float(np.trace(cov)), np.finfo(float).tiny)
    if w[0] < -PSD_TOL * scale:
        raise NotPSD(f"smallest eigenvalue {w[0]!r} is below -{PSD_TOL}*trace")
    return replace(spec, near_singular=bool(w[0] <= SINGULAR_FLOOR * scale))


def gaussian_na_check(spec: GaussianSpec, tolerance: float = NA_COV_TOLERANCE) -> Verdict:
    """A Gaussian vector is NA exactly when all its off-diagonal covariances are <= 0."""
    C = spec.cov
    n = spec.n
    for i in range(n):
        for j in range(i + 1, n):
            if C[i, j] > tolerance:
                return Verdict(FAILS, witness={"pair": [i + 1, j + 1], "covariance": float(C[i, j])})
    return Verdict(HOLDS, budget_spent={"pairs_checked": n * (n - 1) // 2})


def factor(cov) -> np.ndarray:
    """``L`` with ``L @ L.T == cov`` and one column per retained eigen-direction.

    Eigenvalues below ``1e-12 * trace`` are dropped, so exactly singular specs
    (the star process) are sampled through a factor of their true rank.
    """
    cov = np.asarray(cov, dtype=np.float64)
    w, V = _spectrum(cov)
    scale = max(float(np.trace(cov)), np.finfo(float).tiny)
    if w[0] < -PSD_TOL * scale:
        raise FactorizationFailure(f"indefinite covariance (eigenvalue {w[0]!r})")
    keep = w > SINGULAR_FLOOR * scale
    return V[:, keep] * np.sqrt(w[keep])


def sample(spec: GaussianSpec, count: int, seed) -> np.ndarray:
    """``count`` i.i.d. rows distributed as ``N(spec.mean, spec.cov)``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    L = factor(spec.cov)
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((int(count), L.shape[1]))
    return spec.mean + G @ L.T


def bivariate_threshold_cov(rho: float) -> float:
    """``cov(1{Y1 >= 0}, 1{Y2 >= 0})`` for a standard pair with correlation ``rho``."""
    rho = float(rho)
    if not -1.0 - 1e-12 <= rho <= 1.0 + 1e-12:
        raise OutOfRange(f"correlation {rho!r} outside [-1, 1]")
    return math.asin(min(1.0, max(-1.0, rho))) / (2 * math.pi)


def bvn_cdf(h: float, k: float, rho: float) -> float:
    """``P(Y1 <= h, Y2 <= k)`` for a standard bivariate normal (Owen's T form)."""
    if rho >= 1.0 - 1e-15:
        return float(ndtr(min(h, k)))
    if rho <= -1.0 + 1e-15:
        return float(max(0.0, ndtr(h) + ndtr(k) - 1.0))
    if h == 0.0 and k == 0.0:
        return 0.25 + math.asin(rho) / (2 * math.pi)
    r = math.sqrt((1.0 - rho) * (1.0 + rho))
    if h == 0.0:
        h, k = k, h
    # h != 0 here; k may be 0
    th = owens_t(h, (k - rho * h) / (h * r))
    if k == 0.0:
        tk = math.copysign(0.25, h)
    else:
        tk = owens_t(k, (h - rho * k) / (k * r))
    beta = 0.0 if (h * k > 0 or (h * k == 0 and h + k >= 0)) else 0.5
    val = 0.5 * ndtr(h) + 0.5 * ndtr(k) - th - tk - beta
    return float(min(1.0, max(0.0, val)))


@dataclass(frozen=True)
class _Standardized:
    sd: np.ndarray
    corr: np.ndarray
    h: np.ndarray  # standardized thresholds (a - mean) / sd
    fixed: np.ndarray  # coordinates with zero variance
    fixed_value: np.ndarray  # their deterministic indicator values


def standardize(spec: GaussianSpec) -> _Standardized:
    var = np.clip(np.diag(spec.cov), 0.0, None)
    scale = max(float(np.trace(spec.cov)), np.finfo(float).tiny)
    fixed = var <= SINGULAR_FLOOR * scale
    sd = np.where(fixed, 1.0, np.sqrt(var))
    corr = spec.cov / np.outer(sd, sd)
    corr = np.clip((corr + corr.T) / 2, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    h = np.where(fixed, 0.0, (spec.thresholds - spec.mean) / sd)
    return _Standardized(sd, corr, h, fixed, spec.mean >= spec.thresholds)


@dataclass(frozen=True)
class OrthantResult:
    probability: float
    stderr: float
    method: str
    samples: int = 0

    def to_json(self) -> dict:
        return {"probability": self.probability, "stderr": self.stderr, "method": self.method, "samples": self.samples}


def _closed_form_available(st: _Standardized) -> bool:
    free = np.flatnonzero(~st.fixed)
    if free.size <= 2:
        return True
    return free.size == 3 and bool(np.all(st.h[free] == 0.0))


def _closed_form_pattern(st: _Standardized, bits: Sequence[int]) -> float:
    for i in np.flatnonzero(st.fixed):
        if bool(bits[i]) != bool(st.fixed_value[i]):
            return 0.0
    free = np.flatnonzero(~st.fixed)
    if free.size == 0:
        return 1.0
    s = np.array([1.0 if bits[i] else -1.0 for i in free])
    u = -s * st.h[free]  # event {s_i Y_i >= s_i h_i} == {-s_i Y_i <= u_i}
    if free.size == 1:
        return float(ndtr(u[0]))
    if free.size == 2:
        rho = s[0] * s[1] * st.corr[free[0], free[1]]
        return bvn_cdf(u[0], u[1], rho)
    if free.size == 3 and np.all(u == 0.0):
        R = st.corr[np.ix_(free, free)]
        total = sum(math.asin(np.clip(s[i] * s[j] * R[i, j], -1, 1)) for i, j in ((0, 1), (0, 2), (1, 2)))
        return 0.125 + total / (4 * math.pi)
    raise ClosedFormUnavailable("closed form needs n <= 2, or n == 3 with thresholds at the mean")


def _parse_pattern(pattern, n: int) -> list[int]:
    if isinstance(pattern, str):
        if len(pattern) != n:
            raise InconsistentDimension(f"pattern {pattern!r} has length {len(pattern)}, expected {n}")
        key_index(pattern)  # validates characters
        return [1 if ch == "1" else 0 for ch in pattern]
    bits = [int(b) for b in pattern]
    if len(bits) != n:
        raise InconsistentDimension(f"pattern length {len(bits)} != {n}")
    return bits


@dataclass(frozen=True)
class _MCStats:
    counts: np.ndarray  # pattern counts over all samples
    stderr: np.ndarray
    pairs: int


def _monte_carlo(spec: GaussianSpec, precision: float, seed, max_samples: int, target: int | None) -> _MCStats:
    """Antithetic Monte Carlo over pattern counts, sharded with counter-derived seeds.

    Shards are drawn in order ``0, 1, 2, ...`` from ``SeedSequence(seed, spawn_key=(k,))``
    and the run stops after the first shard at which the tracked standard error
    (of ``target`` or of every pattern) is at most ``precision``.
    """
    if precision <= 0:
        raise ValueError("precision must be positive")
    n = spec.n
    size = 1 << n
    L = factor(spec.cov)
    entropy = 0 if seed is None else int(seed)
    counts = np.zeros(size, dtype=np.int64)
    both = np.zeros(size, dtype=np.int64)
    pairs = 0
    shard = 0
    while True:
        if 2 * (pairs + SHARD_PAIRS) > max_samples:
            raise PrecisionUnreachable(
                f"standard error {precision!r} not reached within {max_samples} samples"
            )
        rng = np.random.default_rng(np.random.SeedSequence(entropy, spawn_key=(shard,)))
        G = rng.standard_normal((SHARD_PAIRS, L.shape[1]))
        dev = G @ L.T
        ip = pattern_indices(spec.mean + dev, spec.thresholds)
        im = pattern_indices(spec.mean - dev, spec.thresholds)
        counts += np.bincount(ip, minlength=size) + np.bincount(im, minlength=size)
        both += np.bincount(ip[ip == im], minlength=size)
        pairs += SHARD_PAIRS
        shard += 1
        p = counts / (2.0 * pairs)
        # pair mean of the two indicators takes values 0, 1/2, 1
        second = (both + 0.25 * (counts - 2 * both)) / pairs
        stderr = np.sqrt(np.clip(second - p * p, 0.0, None) / pairs)
        tracked = stderr[target] if target is not None else stderr.max()
        if tracked <= precision:
            return _MCStats(counts, stderr, pairs)


def orthant_probability(
    spec: GaussianSpec,
    pattern,
    method: str = "auto",
    precision: float = 1e-3,
    seed=0,
    max_samples: int = DEFAULT_MAX_SAMPLES,
) -> OrthantResult:
    """``P(X = pattern)`` where ``X_i = 1{Z_i >= a_i}``.

    ``method`` is ``closed_form``, ``monte_carlo`` or ``auto`` (closed form when
    available). Monte Carlo stops once its standard error is ``<= precision``.
    """
    bits = _parse_pattern(pattern, spec.n)
    st = standardize(spec)
    if method == "auto":
        method = "closed_form" if _closed_form_available(st) else "monte_carlo"
    if method == "closed_form":
        if not _closed_form_available(st):
            raise ClosedFormUnavailable("closed form needs n <= 2, or n == 3 with thresholds at the mean")
        return OrthantResult(_closed_form_pattern(st, bits), 0.0, "closed_form")
    if method != "monte_carlo":
        raise ValueError(f"unknown orthant method {method!r}")
    target = sum(b << k for k, b in enumerate(bits))
    mc = _monte_carlo(spec, precision, seed, max_samples, target)
    return OrthantResult(
        float(mc.counts[target] / (2.0 * mc.pairs)), float(mc.stderr[target]), "monte_carlo", 2 * mc.pairs
    )


@dataclass(frozen=True)
class ThresholdLaw:
    """A threshold law together with how it was obtained.

    ``covariance_tolerance`` bounds the error of any covariance of indicator
    functions computed from ``law``: 1e-10 for closed forms, five standard
    errors (``5 * 0.5 / sqrt(pairs)``) for Monte Carlo.
    """

    law: BernoulliLaw
    method: str
    samples: int
    stderr: np.ndarray
    max_adjustment: float
    covariance_tolerance: float

    def to_json(self) -> dict:
        return {
            "law": self.law.to_json(),
            "method": self.method,
            "samples": self.samples,
            "max_stderr": float(self.stderr.max()),
            "max_adjustment": self.max_adjustment,
            "covariance_tolerance": self.covariance_tolerance,
        }


THRESHOLD_LAW_MAX_N = 12


def threshold_law(
    spec: GaussianSpec,
    precision: float = 1e-4,
    seed=0,
    method: str = "auto",
    max_samples: int = DEFAULT_MAX_SAMPLES,
) -> ThresholdLaw:
    """Law of ``(1{Z_i >= a_i})_i`` over all ``2**n`` patterns."""
    n = spec.n
    if n > THRESHOLD_LAW_MAX_N:
        raise InconsistentDimension(f"threshold_law supports n <= {THRESHOLD_LAW_MAX_N}")
    st = standardize(spec)
    if method == "auto":
        method = "closed_form" if _closed_form_available(st) else "monte_carlo"
    if method == "closed_form":
        if not _closed_form_available(st):
            raise ClosedFormUnavailable("closed form needs n <= 2, or n == 3 with thresholds at the mean")
        raw = np.array([_closed_form_pattern(st, [(p >> k) & 1 for k in range(n)]) for p in range(1 << n)])
        fixed = np.clip(raw, 0.0, None)
        fixed /= fixed.sum()
        law = BernoulliLaw.from_dense(fixed)
        return ThresholdLaw(law, "closed_form", 0, np.zeros(1 << n), float(np.abs(fixed - raw).max()), 1e-10)
    if method != "monte_carlo":
        raise ValueError(f"unknown method {method!r}")
    mc = _monte_carlo(spec, precision, seed, max_samples, None)
    freq = mc.counts / mc.counts.sum()
    law = BernoulliLaw.from_dense(freq)
    return ThresholdLaw(law, "monte_carlo", 2 * mc.pairs, mc.stderr, float(abs(freq.sum() - 1.0)), 2.5 / math.sqrt(mc.pairs))


def threshold_covariance(spec: GaussianSpec) -> np.ndarray:
    """Exact covariance matrix of the threshold indicators.

    Pairs thresholded at their means use ``arcsin(rho) / (2 pi)``; other pairs
    use the bivariate normal distribution function.
    """
    st = standardize(spec)
    n = spec.n
    p = np.where(st.fixed, st.fixed_value.astype(float), ndtr(-st.h))
    C = np.zeros((n, n))
    centered = (st.h == 0.0) & ~st.fixed
    both = np.outer(centered, centered)
    C[both] = np.arcsin(st.corr[both]) / (2 * np.pi)
    for i in range(n):
        for j in range(i + 1, n):
            if both[i, j] or st.fixed[i] or st.fixed[j]:
                continue
            C[i, j] = C[j, i] = bvn_cdf(-st.h[i], -st.h[j], st.corr[i, j]) - p[i] * p[j]
    np.fill_diagonal(C, p * (1 - p))
    C[st.fixed, :] = 0.0
    C[:, st.fixed] = 0.0
    return C


def _check_blocks(A, B, n):
    A = [int(i) for i in A]
    B = [int(i) for i in B]
    if not A or not B:
        raise EmptyCoordinateSet("both blocks must be nonempty")
    for i in A + B:
        if not 0 <= i < n:
            raise IndexOutOfRange(f"coordinate {i} outside range(0, {n})")
    if set(A) & set(B) or len(set(A)) != len(A) or len(set(B)) != len(B):
        raise InconsistentDimension("blocks must be disjoint and without repeats")
    return A, B


def _inv_sqrt(S: np.ndarray):
    w, V = _spectrum(S)
    scale = max(float(np.trace(S)), np.finfo(float).tiny)
    keep = w > SINGULAR_FLOOR * scale
    return V[:, keep] / np.sqrt(w[keep]), int((~keep).sum())


@dataclass(frozen=True)
class CanonicalCorrelation:
    value: float
    directionA: np.ndarray
    directionB: np.ndarray
    dropped_directions: tuple[int, int]

    def to_json(self) -> dict:
        out = {
            "max_correlation": self.value,
            "directionA": self.directionA.tolist(),
            "directionB": self.directionB.tolist(),
        }
        if any(self.dropped_directions):
            out["singular_block"] = {"dropped_directions": list(self.dropped_directions)}
        return out


def canonical_correlation(cov, blockA: Sequence[int], blockB: Sequence[int]) -> CanonicalCorrelation:
    """Top canonical correlation between two disjoint blocks of a Gaussian vector.

    Degenerate within-block directions are removed (pseudo-inverse square roots)
    and counted in ``dropped_directions``.
    """
    cov = np.asarray(cov.cov if isinstance(cov, GaussianSpec) else cov, dtype=np.float64)
    A, B = _check_blocks(blockA, blockB, cov.shape[0])
    WA, dA = _inv_sqrt(cov[np.ix_(A, A)])
    WB, dB = _inv_sqrt(cov[np.ix_(B, B)])
    if WA.shape[1] == 0 or WB.shape[1] == 0:
        return CanonicalCorrelation(0.0, np.zeros(len(A)), np.zeros(len(B)), (dA, dB))
    M = WA.T @ cov[np.ix_(A, B)] @ WB
    U, s, Vt = np.linalg.svd(M)
    return CanonicalCorrelation(float(min(1.0, s[0])), WA @ U[:, 0], WB @ Vt[0], (dA, dB))


def max_linear_correlation(spec: GaussianSpec, blockA: Sequence[int], blockB: Sequence[int]) -> float:
    return canonical_correlation(spec, blockA, blockB).value


@dataclass(frozen=True)
class TailProfile:
    gram: np.ndarray
    head_size: int
    cut_points: tuple[int, ...]
    values: np.ndarray

    def to_json(self) -> dict:
        return {"head_size": self.head_size, "cut_points": list(self.cut_points), "values": self.values.tolist()}


def _orth_basis(V: np.ndarray, tol: float) -> np.ndarray:
    if V.shape[1] == 0:
        return V
    U, s, _ = np.linalg.svd(V, full_matrices=False)
    return U[:, s > tol]


def tail_projection_profile(gram, head_size: int, cut_points: Sequence[int]) -> TailProfile:
    """Operator norm of the projection onto ``span(v_N, ..., v_m)`` restricted to
    ``span(v_1, ..., v_head)``, for each cut point ``N`` (1-based positions).

    Vectors are embedded as columns of the symmetric square root of the Gram
    matrix, so only inner products are needed.
    """
    G = np.asarray(gram, dtype=np.float64)
    m = G.shape[0]
    if G.shape != (m, m) or np.max(np.abs(G - G.T), initial=0.0) > SYMMETRY_TOL * max(1.0, np.abs(G).max()):
        raise NotPSD("Gram matrix must be square and symmetric")
    w, V = _spectrum(G)
    scale = max(float(np.trace(G)), np.finfo(float).tiny)
    if w[0] < -PSD_TOL * scale:
        raise NotPSD(f"Gram matrix has eigenvalue {w[0]!r}")
    cuts = tuple(int(c) for c in cut_points)
    if not cuts:
        raise ValueError("need at least one cut point")
    if not 1 <= head_size < min(cuts):
        raise ValueError("need 1 <= head_size < min(cut_points)")
    if max(cuts) > m:
        raise IndexOutOfRange(f"cut point {max(cuts)} beyond the {m} available vectors")
    root = (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T
    tol = math.sqrt(SINGULAR_FLOOR * scale)
    QH = _orth_basis(root[:, :head_size], tol)
    values = []
    for N in cuts:
        QT = _orth_basis(root[:, N - 1:], tol)
        if QH.shape[1] == 0 or QT.shape[1] == 0:
            values.append(0.0)
            continue
        values.append(float(min(1.0, np.linalg.svd(QT.T @ QH, compute_uv=False)[0])))
    return TailProfile(G, head_size, cuts, np.array(values))
