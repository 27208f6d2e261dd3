"""Time the numba kernels against the numpy fallback on representative inputs.

    python benchmarks/bench_kernels.py [--repeat 3]

Both backends are imported explicitly, so the QPGEN_DISABLE_NUMBA flag does
not matter here.  The first numba call (compilation / cache load) is excluded.
"""
import argparse
import time

import numpy as np

from qpgen.kernels import get_backend
from qpgen.potential import PotentialShape, TrigPolynomial
from qpgen.rng import substream_seed
from qpgen.spectrum import Tridiagonal, _bisection_setup
from qpgen.survey import Distribution, sample_coefficients


def cases():
    V = sample_coefficients(PotentialShape(2, 3), Distribution(), 1)
    X = np.random.default_rng(0).random((200_000, 2))
    jets = ("trig_jets d=2 n=3, 2e5 pts, order 2",
            lambda k: k.trig_jets(V.freqs, V.cos_coef, V.sin_coef, V.const, X, 2))

    seeds = np.array([substream_seed(0, j) for j in range(64)], dtype=np.uint64)
    rng_case = ("xoshiro_uniform 64 x 8192", lambda k: k.xoshiro_uniform(seeds, 8192))

    L = 1000
    diag = 5.0 * np.cos(2 * np.pi * np.random.default_rng(1).random(L))
    T = Tridiagonal(diag, -np.ones(L - 1))
    e2, gl, gu, piv, nit = _bisection_setup(T)
    bis = ("bisect_eigenvalues L=1000", lambda k: k.bisect_eigenvalues(T.diag, e2, gl, gu, piv, nit))

    C = TrigPolynomial.from_terms(2, 1, 0.0, cos={(1, 0): 1.0, (0, 1): 1.0})
    P = np.random.default_rng(2).random((100_000, 2))
    v, g, _ = C.jets(P, 1)
    etas = np.linspace(-2, 2, 32)
    th = np.pi * np.arange(32) / 32
    dirs = np.ascontiguousarray(np.column_stack([np.cos(th), np.sin(th)]))
    eps = np.exp(-np.arange(2.0, 11.0))
    c4 = ("cond4_hits 1e5 pts, 32x32 geometries, 9 K",
          lambda k: k.cond4_hits(v, g, etas, dirs, eps))
    return [jets, rng_case, bis, c4]


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    nb, npy = get_backend("numba"), get_backend("numpy")
    print(f"{'kernel':45s} {'numba s':>9s} {'numpy s':>9s} {'speedup':>8s}")
    for name, fn in cases():
        fn(nb)  # compile / load cache
        t_nb = best_of(lambda: fn(nb), args.repeat)
        t_np = best_of(lambda: fn(npy), args.repeat)
        print(f"{name:45s} {t_nb:9.4f} {t_np:9.4f} {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
