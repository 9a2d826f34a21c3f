"""Named fixtures: Gaussian processes, small Bernoulli laws, spanning trees.

Entries are built lazily. Parametrized names take a size suffix, e.g.
``star-threshold-3`` or ``log-growth-50``; the bare name uses a default size.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from negdep.errors import Disconnected, DimensionTooLarge, UnknownFixture
from negdep.gaussian import threshold_law
from negdep.model import BernoulliLaw, GaussianSpec, law_from_pmf

PRODUCT_MAX_N = 12
UST_MAX_EDGES = 8


def log_growth_process(n: int) -> GaussianSpec:
    """``Y_i = Z_i - (Z_1 + ... + Z_{i-1}) / i`` for i.i.d. standard ``Z``."""
    if n < 2:
        raise ValueError("log_growth_process needs n >= 2")
    i = np.arange(1, n + 1, dtype=np.float64)
    M = np.tril(-1.0 / i[:, None] * np.ones((n, n)), k=-1) + np.eye(n)
    cov = M @ M.T
    return GaussianSpec.centered((cov + cov.T) / 2)


def log_growth_cov(n: int) -> np.ndarray:
    """Closed-form covariance of :func:`log_growth_process` (used as an oracle)."""
    i = np.arange(1, n + 1, dtype=np.float64)
    C = -1.0 / np.outer(i, i)
    np.fill_diagonal(C, 1.0 + (i - 1) / i**2)
    return C


def star_process(n: int) -> GaussianSpec:
    """Hub ``Z_0 = -(Z_1 + ... + Z_n) / sqrt(n)`` first, then ``Z_1..Z_n``."""
    if n < 1:
        raise ValueError("star_process needs n >= 1")
    M = np.vstack([np.full((1, n), -1.0 / math.sqrt(n)), np.eye(n)])
    cov = M @ M.T
    return GaussianSpec(np.zeros(n + 1), (cov + cov.T) / 2, near_singular=True)


def ma1_process(n: int) -> GaussianSpec:
    """Stationary moving average ``(W_i - W_{i+1}) / sqrt(2)``: lag-1 correlation -1/2."""
    if n < 1:
        raise ValueError("ma1_process needs n >= 1")
    cov = np.eye(n) - 0.5 * (np.eye(n, k=1) + np.eye(n, k=-1))
    return GaussianSpec.centered(cov)


def product_law(p: Sequence[float]) -> BernoulliLaw:
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    n = p.shape[0]
    if n < 1:
        raise ValueError("need at least one coordinate")
    if n > PRODUCT_MAX_N:
        raise DimensionTooLarge(f"product_law supports n <= {PRODUCT_MAX_N}")
    if np.any((p < 0) | (p > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    dense = np.ones(1)
    # bit k is coordinate k, so later coordinates are the slower axis
    for pk in p:
        dense = np.concatenate([dense * (1 - pk), dense * pk])
    return BernoulliLaw.from_dense(dense)


def _spanning_tree(edges, vertices: int, subset) -> bool:
    parent = list(range(vertices))

    def root(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for e in subset:
        a, b = root(edges[e][0]), root(edges[e][1])
        if a == b:
            return False
        parent[a] = b
    return True


def ust_law(edges: Sequence[tuple[int, int]], vertices: int | None = None) -> BernoulliLaw:
    """Uniform spanning tree of a small multigraph, as a law on edge indicators.

    Coordinate ``k`` is ``edges[k]``. Vertices are ``0..vertices-1`` (inferred
    from the edges when omitted).
    """
    edges = [(int(a), int(b)) for a, b in edges]
    if not edges:
        raise Disconnected("graph has no edges")
    if len(edges) > UST_MAX_EDGES:
        raise DimensionTooLarge(f"ust_law supports at most {UST_MAX_EDGES} edges")
    if vertices is None:
        vertices = 1 + max(max(e) for e in edges)
    trees = [
        sum(1 << e for e in subset)
        for subset in combinations(range(len(edges)), vertices - 1)
        if _spanning_tree(edges, vertices, subset)
    ]
    if not trees:
        raise Disconnected("graph has no spanning tree")
    return BernoulliLaw(len(edges), trees, np.full(len(trees), 1.0 / len(trees)))


def thresholded(spec: GaussianSpec, precision: float = 1e-4, seed=0) -> BernoulliLaw:
    return threshold_law(spec, precision=precision, seed=seed).law


GRAPHS = {
    "triangle": [(0, 1), (1, 2), (0, 2)],
    "path3": [(0, 1), (1, 2)],
    "square": [(0, 1), (1, 2), (2, 3), (3, 0)],
    "diamond": [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)],
    "k4": [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
}


@dataclass(frozen=True)
class GalleryEntry:
    """A fixture plus the verdicts the checkers are expected to return.

    ``expected_properties`` pairs a checker name with its expected status.
    ``na_tolerance`` is the tolerance appropriate for exact NA checks of the
    payload (looser for Monte Carlo laws). ``metadata`` carries notes such as
    the hub index of the star process.
    """

    name: str
    kind: str  # "gaussian_spec" | "bernoulli_law"
    payload: object
    expected_properties: tuple[tuple[str, str], ...] = ()
    na_tolerance: float = 1e-10
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = dict(self.payload.to_json())
        out["meta"] = {"gallery": self.name, "kind": self.kind, **self.metadata}
        return out


_SR_LAW = (
    ("check_negative_correlation", "holds"),
    ("check_na_exact", "holds"),
    ("sr_necessary_conditions", "holds"),
    ("check_strongly_rayleigh", "holds"),
    ("scp_check", "holds"),
)
_NA_SPEC = (("gaussian_na_check", "holds"),)


def _law_entry(name, law, expected, **meta):
    return GalleryEntry(name, "bernoulli_law", law, tuple(expected), metadata=meta)


def _spec_entry(name, spec, expected=_NA_SPEC, **meta):
    return GalleryEntry(name, "gaussian_spec", spec, tuple(expected), metadata=meta)


def _threshold_entry(name, spec, expected, **meta):
    res = threshold_law(spec, precision=1e-4, seed=0)
    meta = {"method": res.method, "samples": res.samples, **meta}
    return GalleryEntry(name, "bernoulli_law", res.law, tuple(expected), res.covariance_tolerance, meta)


_NA_THRESHOLD = (("check_negative_correlation", "holds"), ("check_na_exact", "holds"))


def _fixed(build: Callable[[], GalleryEntry], description: str):
    return (False, None, lambda n: build(), description)


def _sized(build: Callable[[int], GalleryEntry], default: int, description: str):
    return (True, default, build, description)


def _neg_triangle():
    cov = np.full((3, 3), -0.4) + 1.4 * np.eye(3)
    return GaussianSpec.centered(cov)


def _star_threshold(n):
    # the SR screen fails from n = 3 on; smaller hubs stay within the bound
    expected = list(_NA_THRESHOLD)
    if n >= 3:
        expected.append(("sr_necessary_conditions", "fails"))
    return _threshold_entry(f"star-threshold-{n}", star_process(n), expected, hub_index=0)


_REGISTRY: dict[str, tuple] = {
    "product-2": _fixed(
        lambda: _law_entry("product-2", product_law([0.5, 0.5]), _SR_LAW), "two independent fair coins"
    ),
    "product-biased": _sized(
        lambda n: _law_entry(f"product-biased-{n}", product_law(np.linspace(0.2, 0.8, n)), _SR_LAW),
        3,
        "independent coins with biases spread over [0.2, 0.8]",
    ),
    "anticorrelated-pair": _fixed(
        lambda: _law_entry("anticorrelated-pair", law_from_pmf({"10": 0.5, "01": 0.5}), _SR_LAW),
        "exactly one of two coordinates is 1",
    ),
    "correlated-pair": _fixed(
        lambda: _law_entry(
            "correlated-pair",
            law_from_pmf({"00": 0.5, "11": 0.5}),
            (("check_negative_correlation", "fails"), ("check_na_exact", "fails"), ("check_strongly_rayleigh", "fails")),
        ),
        "two perfectly correlated fair coins",
    ),
    "all-or-nothing": _fixed(
        lambda: _law_entry(
            "all-or-nothing",
            law_from_pmf({"000": 0.5, "111": 0.5}),
            (("check_na_exact", "fails"), ("scp_check", "fails")),
        ),
        "uniform on the empty set and the full set of three",
    ),
    **{
        f"ust-{g}": _fixed(
            (lambda g=g: _law_entry(f"ust-{g}", ust_law(GRAPHS[g]), _SR_LAW, edges=[[a + 1, b + 1] for a, b in GRAPHS[g]])),
            f"uniform spanning tree of the {g} graph",
        )
        for g in GRAPHS
    },
    "log-growth": _sized(lambda n: _spec_entry(f"log-growth-{n}", log_growth_process(n)), 5, "log-growth Gaussian process"),
    "star": _sized(lambda n: _spec_entry(f"star-{n}", star_process(n), hub_index=0), 3, "star Gaussian process, hub first"),
    "ma1": _sized(lambda n: _spec_entry(f"ma1-{n}", ma1_process(n)), 5, "stationary MA(1) process, lag-1 correlation -1/2"),
    "neg-triangle": _fixed(
        lambda: _spec_entry("neg-triangle", _neg_triangle()), "three standard normals with pairwise correlation -0.4"
    ),
    "rho-half-pair": _fixed(
        lambda: _spec_entry(
            "rho-half-pair",
            GaussianSpec.centered([[1.0, 0.5], [0.5, 1.0]]),
            (("gaussian_na_check", "fails"),),
        ),
        "standard bivariate normal with correlation 1/2",
    ),
    "star-threshold": _sized(_star_threshold, 3, "threshold law of the star process"),
    "log-growth-threshold": _sized(
        lambda n: _threshold_entry(f"log-growth-threshold-{n}", log_growth_process(n), _NA_THRESHOLD),
        3,
        "threshold law of the log-growth process",
    ),
    "ma1-threshold": _sized(
        lambda n: _threshold_entry(f"ma1-threshold-{n}", ma1_process(n), _NA_THRESHOLD),
        3,
        "threshold law of the MA(1) process",
    ),
    "neg-triangle-threshold": _fixed(
        lambda: _threshold_entry("neg-triangle-threshold", _neg_triangle(), _NA_THRESHOLD),
        "threshold law of the neg-triangle spec",
    ),
}

_SIZED_NAME = re.compile(r"^(?P<base>.+?)-(?P<n>\d+)$")


def list_entries() -> list[dict]:
    return [
        {"name": name, "parametrized": sized, "default_n": default, "description": text}
        for name, (sized, default, _, text) in sorted(_REGISTRY.items())
    ]


@lru_cache(maxsize=64)
def get(name: str, n: int | None = None) -> GalleryEntry:
    """Look up a fixture by name; ``n`` overrides the size of parametrized entries."""
    if name in _REGISTRY:
        sized, default, build, _ = _REGISTRY[name]
        if not sized and n is not None:
            raise UnknownFixture(f"fixture {name!r} takes no size")
        return build(default if n is None else int(n)) if sized else build(None)
    m = _SIZED_NAME.match(name)
    if m and m["base"] in _REGISTRY and _REGISTRY[m["base"]][0]:
        if n is not None and int(n) != int(m["n"]):
            raise UnknownFixture(f"size given twice for {name!r}")
        return _REGISTRY[m["base"]][2](int(m["n"]))
    raise UnknownFixture(f"unknown gallery fixture {name!r}")


def names() -> list[str]:
    return sorted(_REGISTRY)


# Gaussian families usable as profile sequences: (constructor, leading blocks nested?)
FAMILIES = {
    "log-growth": (log_growth_process, True),
    "ma1": (ma1_process, True),
    "star": (star_process, False),
}


def family(name: str):
    """``(constructor, nested)`` for a Gaussian family name, or ``None``."""
    return FAMILIES.get(name)
