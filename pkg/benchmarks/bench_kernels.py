"""Time the numba and pure-numpy flavours of each hot kernel.

    python3 benchmarks/bench_kernels.py [--repeat 5]

The numba timings exclude the first (compiling) call.
"""
import argparse
import timeit

import numpy as np

from negdep import kernels


def cases(rng):
    z = rng.normal(size=(10**6, 6))
    t = np.zeros(6)
    D = rng.normal(size=(16, 8)) * 1e-2  # 4+3 coordinate block, 65536 * 256 event pairs
    coeffs = rng.random(1 << 8)
    pts = rng.normal(size=(20000, 8)) + 1j * rng.normal(size=(20000, 8))
    return [
        ("pattern_indices", kernels.pattern_indices_numpy, kernels._pattern_indices_numba, (z, t)),
        ("event_pair_extrema", kernels.event_pair_extrema_numpy, kernels._event_pair_extrema_numba, (D,)),
        ("multiaffine_eval", kernels.multiaffine_eval_numpy, kernels._multiaffine_eval_numba, (coeffs, pts)),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':<20} {'numpy [s]':>10} {'numba [s]':>10} {'speedup':>8}")
    for name, f_np, f_nb, a in cases(rng):
        np.testing.assert_allclose(np.asarray(f_np(*a)), np.asarray(f_nb(*a)), rtol=1e-10, atol=1e-12)
        t_np = min(timeit.repeat(lambda: f_np(*a), number=1, repeat=args.repeat))
        t_nb = min(timeit.repeat(lambda: f_nb(*a), number=1, repeat=args.repeat))
        print(f"{name:<20} {t_np:>10.4f} {t_nb:>10.4f} {t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
