"""Brute-force oracles and random generators shared by the tests."""
from itertools import combinations, product

import numpy as np

from negdep.model import BernoulliLaw


def random_law(rng, n, density=0.7):
    """Random law on {0,1}^n with a random support."""
    size = 1 << n
    keep = rng.random(size) < density
    keep[rng.integers(size)] = True
    w = rng.random(size) * keep
    return BernoulliLaw.from_dense(w / w.sum())


def random_nc_law(rng, n):
    """Rejection-sample a negatively correlated law.

    Proposal: Dirichlet(1/2) weights on the patterns whose size is k or k+1.
    """
    from negdep.na import check_negative_correlation

    while True:
        k = int(rng.integers(0, n))
        sup = [i for i in range(1 << n) if bin(i).count("1") in (k, k + 1)]
        law = BernoulliLaw(n, sup, rng.dirichlet(np.full(len(sup), 0.5)))
        if check_negative_correlation(law).holds:
            return law


def brute_cov(law):
    """Covariance matrix from the pmf dictionary, one pattern at a time."""
    n = law.n
    pmf = law.pmf()
    mean = np.zeros(n)
    second = np.zeros((n, n))
    for key, p in pmf.items():
        x = np.array([int(c) for c in key], dtype=float)
        mean += p * x
        second += p * np.outer(x, x)
    return second - np.outer(mean, mean)


def brute_upsets(k):
    """Up-sets of {0,1}^k by filtering every family of patterns (k <= 4)."""
    size = 1 << k
    out = []
    for fam in range(1 << size):
        ok = True
        for p in range(size):
            if (fam >> p) & 1:
                for b in range(k):
                    if not (fam >> (p | (1 << b))) & 1:
                        ok = False
                        break
            if not ok:
                break
        if ok:
            out.append(fam)
    return out


def monotone_functions(k, values=(0, 1, 2)):
    """All increasing functions {0,1}^k -> values, as tuples indexed by pattern."""
    size = 1 << k
    out = []
    for f in product(values, repeat=size):
        if all(f[p] <= f[p | (1 << b)] for p in range(size) for b in range(k)):
            out.append(f)
    return out


def block_values(law, coords):
    """Per-support-point index of the sub-pattern on ``coords``."""
    idx = np.zeros(law.support.size, dtype=np.int64)
    for t, c in enumerate(coords):
        idx |= ((law.support >> c) & 1) << t
    return idx


def brute_na_violation(law, tol=1e-10):
    """Largest cov(f(X_A), g(X_B)) over disjoint blocks and {0,1,2}-valued
    increasing f, g. Exponential; only for n <= 4."""
    n = law.n
    worst = -np.inf
    cache = {}
    for a_size in range(1, n):
        for A in combinations(range(n), a_size):
            rest = [c for c in range(n) if c not in A]
            for b_size in range(1, len(rest) + 1):
                for B in combinations(rest, b_size):
                    ia, ib = block_values(law, A), block_values(law, B)
                    FA = cache.setdefault(len(A), np.array(monotone_functions(len(A)), dtype=float))
                    FB = cache.setdefault(len(B), np.array(monotone_functions(len(B)), dtype=float))
                    fa = FA[:, ia]
                    gb = FB[:, ib]
                    w = law.weights
                    ef = fa @ w
                    eg = gb @ w
                    C = (fa * w) @ gb.T - np.outer(ef, eg)
                    worst = max(worst, float(C.max()))
    return worst


def brute_event_max(law, A, B):
    """max |cov(1_E, 1_F)| by listing every event pair explicitly."""
    ia, ib = block_values(law, A), block_values(law, B)
    ra, rb = 1 << len(A), 1 << len(B)
    w = law.weights
    best = 0.0
    for E in range(1 << ra):
        inE = np.array([(E >> v) & 1 for v in ia], dtype=bool)
        pE = w[inE].sum()
        for F in range(1 << rb):
            inF = np.array([(F >> v) & 1 for v in ib], dtype=bool)
            best = max(best, abs(w[inE & inF].sum() - pE * w[inF].sum()))
    return best
