"""Value types shared by every checker.

Bit-pattern convention: in a pattern key such as ``"0110"``, character ``k``
(left to right) is coordinate ``k`` (0-based in the library, ``k+1`` in the
CLI and in JSON-facing docs). Internally a pattern is the integer whose bit
``k`` is that character, so ``"100"`` is index 1 and ``"001"`` is index 4.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from negdep.errors import (
    DimensionTooLarge,
    EmptyCoordinateSet,
    IndexOutOfRange,
    InconsistentDimension,
    InvalidLaw,
    NonNormalizable,
)

DENSE_MAX_N = 20
LAW_MAX_N = 24
INPUT_NORM_TOL = 1e-9
INTERNAL_NORM_TOL = 1e-12
NEGATIVE_CLAMP = 1e-15


def pattern_key(index: int, n: int) -> str:
    return "".join("1" if (index >> k) & 1 else "0" for k in range(n))


def key_index(key: str) -> int:
    idx = 0
    for k, ch in enumerate(key):
        if ch == "1":
            idx |= 1 << k
        elif ch != "0":
            raise InvalidLaw(f"pattern key {key!r} contains {ch!r}; only '0'/'1' allowed")
    return idx


def pattern_bits(indices, n: int) -> np.ndarray:
    """0/1 matrix with one row per pattern index and one column per coordinate."""
    idx = np.asarray(indices, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(np.float64)


def subset_mask(coords: Iterable[int]) -> int:
    m = 0
    for c in coords:
        m |= 1 << int(c)
    return m


class BernoulliLaw:
    """Probability law on ``{0,1}^n``, i.e. a random subset of ``range(n)``.

    Stored as a sorted support with strictly positive weights; :attr:`probs`
    gives the dense vector of length ``2**n`` for ``n <= 20``. Instances are
    immutable.
    """

    __slots__ = ("n", "support", "weights", "_dense")

    def __init__(self, n: int, support, weights):
        n = int(n)
        if n < 1:
            raise InconsistentDimension("a law needs n >= 1 coordinates")
        if n > LAW_MAX_N:
            raise DimensionTooLarge(f"n={n} exceeds the supported maximum {LAW_MAX_N}")
        support = np.asarray(support, dtype=np.int64)
        weights = np.asarray(weights, dtype=np.float64)
        order = np.argsort(support, kind="stable")
        support, weights = support[order], weights[order]
        keep = weights > 0
        support, weights = support[keep], weights[keep]
        if support.size and (support[0] < 0 or support[-1] >= (1 << n)):
            raise InconsistentDimension("pattern index outside {0,1}^n")
        if np.any(np.diff(support) == 0):
            raise InvalidLaw("duplicate pattern in support")
        support.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "_dense", None)

    def __setattr__(self, name, value):
        raise AttributeError("BernoulliLaw is immutable")

    @classmethod
    def from_dense(cls, probs, tol: float = INTERNAL_NORM_TOL) -> "BernoulliLaw":
        """Build from a dense vector produced by internal math."""
        p = np.asarray(probs, dtype=np.float64).copy()
        size = p.shape[0]
        n = size.bit_length() - 1
        if size != 1 << n or n < 1:
            raise InconsistentDimension("dense pmf length must be 2**n with n >= 1")
        p[(p < 0) & (p >= -NEGATIVE_CLAMP)] = 0.0
        if np.any(p < 0):
            raise InvalidLaw("negative probability in internal construction")
        total = p.sum()
        if abs(total - 1.0) > tol:
            raise NonNormalizable(f"probabilities sum to {total!r}")
        p /= total
        idx = np.flatnonzero(p)
        return cls(n, idx, p[idx])

    @property
    def probs(self) -> np.ndarray:
        if self._dense is None:
            if self.n > DENSE_MAX_N:
                raise DimensionTooLarge(f"dense view unavailable for n={self.n} > {DENSE_MAX_N}")
            dense = np.zeros(1 << self.n)
            dense[self.support] = self.weights
            dense.setflags(write=False)
            object.__setattr__(self, "_dense", dense)
        return self._dense

    def prob(self, key: str) -> float:
        if len(key) != self.n:
            raise InconsistentDimension(f"key {key!r} has length {len(key)}, expected {self.n}")
        pos = np.searchsorted(self.support, key_index(key))
        if pos < self.support.size and self.support[pos] == key_index(key):
            return float(self.weights[pos])
        return 0.0

    def pmf(self) -> dict[str, float]:
        return {pattern_key(int(i), self.n): float(w) for i, w in zip(self.support, self.weights)}

    def means(self) -> np.ndarray:
        return self.weights @ pattern_bits(self.support, self.n)

    def to_json(self) -> dict:
        return {"n": self.n, "pmf": self.pmf()}

    def allclose(self, other: "BernoulliLaw", atol: float = 1e-12) -> bool:
        if self.n != other.n:
            return False
        a = dict(zip(self.support.tolist(), self.weights.tolist()))
        b = dict(zip(other.support.tolist(), other.weights.tolist()))
        return all(abs(a.get(k, 0.0) - b.get(k, 0.0)) <= atol for k in set(a) | set(b))

    def __repr__(self):
        return f"BernoulliLaw(n={self.n}, support_size={self.support.size})"


def law_from_pmf(entries: Mapping[str, float], n: int | None = None) -> BernoulliLaw:
    """Validate and normalize a user-supplied pattern -> probability mapping."""
    if not entries:
        raise InvalidLaw("empty pmf")
    lengths = {len(k) for k in entries}
    if len(lengths) != 1:
        raise InconsistentDimension(f"mixed key lengths {sorted(lengths)}")
    width = lengths.pop()
    if n is not None and int(n) != width:
        raise InconsistentDimension(f"declared n={n} but keys have length {width}")
    if width > LAW_MAX_N:
        raise DimensionTooLarge(f"n={width} exceeds the supported maximum {LAW_MAX_N}")
    idx = np.fromiter((key_index(k) for k in entries), dtype=np.int64, count=len(entries))
    w = np.fromiter((float(v) for v in entries.values()), dtype=np.float64, count=len(entries))
    if np.any(~np.isfinite(w)):
        raise InvalidLaw("non-finite probability")
    if np.any(w < -NEGATIVE_CLAMP):
        raise InvalidLaw(f"negative probability {w.min()!r}")
    w = np.where(w < 0, 0.0, w)
    total = w.sum()
    if abs(total - 1.0) > INPUT_NORM_TOL:
        raise NonNormalizable(f"probabilities sum to {total!r}, not 1")
    return BernoulliLaw(width, idx, w / total)


def covariance_matrix(law: BernoulliLaw) -> np.ndarray:
    """Exact ``cov(X_i, X_j)`` matrix of the coordinates of ``law``."""
    B = pattern_bits(law.support, law.n)
    wB = law.weights[:, None] * B
    mean = wB.sum(axis=0)
    cov = B.T @ wB - np.outer(mean, mean)
    return (cov + cov.T) / 2


def _check_coords(coords: Sequence[int], n: int) -> list[int]:
    coords = [int(c) for c in coords]
    if not coords:
        raise EmptyCoordinateSet("coordinate set is empty")
    for c in coords:
        if not 0 <= c < n:
            raise IndexOutOfRange(f"coordinate {c} outside range(0, {n})")
    if len(set(coords)) != len(coords):
        raise InconsistentDimension(f"repeated coordinate in {coords}")
    return coords


def marginal(law: BernoulliLaw, coords: Sequence[int]) -> BernoulliLaw:
    """Law of ``(X_c for c in coords)``, in the given order."""
    coords = _check_coords(coords, law.n)
    new = np.zeros_like(law.support)
    for t, c in enumerate(coords):
        new |= ((law.support >> c) & 1) << t
    uniq, inv = np.unique(new, return_inverse=True)
    w = np.bincount(inv, weights=law.weights, minlength=uniq.size)
    return BernoulliLaw(len(coords), uniq, w)


def permute(law: BernoulliLaw, perm: Sequence[int]) -> BernoulliLaw:
    """Reorder coordinates: new coordinate ``t`` is old coordinate ``perm[t]``."""
    if sorted(perm) != list(range(law.n)):
        raise InconsistentDimension(f"{perm} is not a permutation of range({law.n})")
    return marginal(law, perm)


def joint_table(law: BernoulliLaw, A: Sequence[int], B: Sequence[int]) -> np.ndarray:
    """Joint pmf of the blocks ``X_A`` and ``X_B`` as a ``2**|A| x 2**|B|`` table."""
    a_idx = np.zeros_like(law.support)
    b_idx = np.zeros_like(law.support)
    for t, c in enumerate(A):
        a_idx |= ((law.support >> c) & 1) << t
    for t, c in enumerate(B):
        b_idx |= ((law.support >> c) & 1) << t
    J = np.zeros((1 << len(A), 1 << len(B)))
    np.add.at(J, (a_idx, b_idx), law.weights)
    return J


@dataclass(frozen=True, eq=False)
class MultiaffinePoly:
    """``f(z) = sum_S coeffs[S] * prod_{k in S} z_k`` with ``S`` a bitmask."""

    n: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        if c.ndim != 1 or c.shape[0] != 1 << self.n:
            raise InconsistentDimension(f"need {1 << self.n} coefficients for n={self.n}")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_mapping(cls, n: int, coeffs: Mapping[Any, float]) -> "MultiaffinePoly":
        """Keys are bitmasks, pattern strings, or iterables of coordinates."""
        arr = np.zeros(1 << n)
        for key, value in coeffs.items():
            if isinstance(key, str):
                if len(key) != n:
                    raise InconsistentDimension(f"key {key!r} length != {n}")
                arr[key_index(key)] += value
            elif isinstance(key, (int, np.integer)):
                arr[int(key)] += value
            else:
                arr[subset_mask(key)] += value
        return cls(n, arr)

    def __call__(self, z) -> complex:
        from negdep.kernels import multiaffine_eval

        return complex(multiaffine_eval(self.coeffs, np.asarray(z, dtype=np.complex128)[None, :])[0])

    def evaluate_many(self, points) -> np.ndarray:
        from negdep.kernels import multiaffine_eval

        return multiaffine_eval(self.coeffs, points)

    def split(self, i: int) -> tuple["MultiaffinePoly", "MultiaffinePoly"]:
        """``(g, h)`` with ``f = g + z_i h``; neither depends on ``z_i``."""
        bit = 1 << i
        idx = np.arange(1 << self.n)
        has = (idx & bit) != 0
        g = np.where(has, 0, self.coeffs)
        h = np.zeros_like(self.coeffs)
        h[idx[has] ^ bit] = self.coeffs[has]
        return MultiaffinePoly(self.n, g), MultiaffinePoly(self.n, h)

    def derivative(self, i: int) -> "MultiaffinePoly":
        return self.split(i)[1]

    def specialize(self, i: int, value) -> "MultiaffinePoly":
        g, h = self.split(i)
        return MultiaffinePoly(self.n, g.coeffs + value * h.coeffs)

    def abs_sum(self) -> float:
        return float(np.abs(self.coeffs).sum())

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "coeffs": {pattern_key(i, self.n): float(c) for i, c in enumerate(self.coeffs) if c != 0},
        }


def generating_polynomial(law: BernoulliLaw) -> MultiaffinePoly:
    return MultiaffinePoly(law.n, law.probs)


@dataclass(frozen=True, eq=False)
class GaussianSpec:
    """Gaussian vector ``Z`` with thresholds ``a``; ``X_i = 1{Z_i >= a_i}``."""

    mean: np.ndarray
    cov: np.ndarray
    thresholds: np.ndarray | None = None
    near_singular: bool = False

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        cov = np.asarray(self.cov, dtype=np.float64)
        n = mean.shape[0]
        if n < 1:
            raise InconsistentDimension("empty Gaussian spec")
        if cov.shape != (n, n):
            raise InconsistentDimension(f"cov shape {cov.shape} does not match mean length {n}")
        th = np.zeros(n) if self.thresholds is None else np.asarray(self.thresholds, dtype=np.float64).reshape(-1)
        if th.shape != (n,):
            raise InconsistentDimension(f"thresholds length {th.shape[0]} != {n}")
        for arr in (mean, cov, th):
            if not np.all(np.isfinite(arr)):
                raise InconsistentDimension("non-finite entry in Gaussian spec")
            arr.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "thresholds", th)

    @property
    def n(self) -> int:
        return self.mean.shape[0]

    @classmethod
    def centered(cls, cov, thresholds=None) -> "GaussianSpec":
        cov = np.asarray(cov, dtype=np.float64)
        return cls(np.zeros(cov.shape[0]), cov, thresholds)

    def to_json(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "cov": self.cov.tolist(),
            "thresholds": self.thresholds.tolist(),
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "GaussianSpec":
        try:
            cov = obj["cov"]
        except (KeyError, TypeError):
            raise InconsistentDimension("Gaussian spec JSON needs a 'cov' matrix") from None
        mean = obj.get("mean")
        if mean is None:
            mean = [0.0] * len(cov)
        return cls(mean, cov, obj.get("thresholds"))


HOLDS, FAILS, INCONCLUSIVE = "holds", "fails", "inconclusive"


def _jsonable(obj):
    if hasattr(obj, "to_json"):
        return obj.to_json()
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


@dataclass(frozen=True)
class Verdict:
    """Outcome of a checker. ``fails`` always carries a re-checkable witness."""

    status: str
    witness: Any = None
    budget_spent: dict = field(default_factory=dict)
    notes: tuple = ()
    stages: tuple = ()
    certificate: Any = None

    def __post_init__(self):
        if self.status not in (HOLDS, FAILS, INCONCLUSIVE):
            raise ValueError(f"unknown verdict status {self.status!r}")
        if self.status == FAILS and self.witness is None:
            raise ValueError("a failing verdict needs a witness")

    @property
    def holds(self) -> bool:
        return self.status == HOLDS

    @property
    def fails(self) -> bool:
        return self.status == FAILS

    def to_json(self) -> dict:
        out = {"status": self.status}
        if self.witness is not None:
            out["witness"] = _jsonable(self.witness)
        if self.certificate is not None:
            out["certificate"] = _jsonable(self.certificate)
        out["budget_spent"] = _jsonable(self.budget_spent)
        if self.notes:
            out["notes"] = list(self.notes)
        if self.stages:
            out["stages"] = [{"stage": name, **v.to_json()} for name, v in self.stages]
        return out


def to_jsonable(obj):
    return _jsonable(obj)


def load_json(source) -> Any:
    """Read JSON from a path or file object."""
    if hasattr(source, "read"):
        return json.load(source)
    with open(source, encoding="utf-8") as fh:
        return json.load(fh)


def law_from_json(obj: Mapping) -> BernoulliLaw:
    if not isinstance(obj, Mapping) or "pmf" not in obj:
        raise InvalidLaw("law JSON must be an object with a 'pmf' mapping")
    return law_from_pmf(obj["pmf"], obj.get("n"))
