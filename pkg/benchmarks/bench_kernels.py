"""Benchmark the jitted kernels against their pure-numpy fallbacks.

Times the three hot loops (operator-assembly gather, Toeplitz gather,
column-energy scan) on benchmark-sized inputs.  Run:

    python benchmarks/bench_kernels.py

Set RESIDUELAB_NO_NUMBA=1 to confirm the numpy path end to end; this
script itself always times both implementations when numba is available.
"""

import time

import numpy as np

from residuelab import _kernels


def _inputs(d, K, G, seed=0):
    rng = np.random.RandomState(seed)
    axis = np.arange(-K, K + 1, dtype=np.int64)
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    freqs = np.ascontiguousarray(np.stack([g.ravel() for g in grids], axis=-1))
    N = freqs.shape[0]
    colcoef = np.ascontiguousarray(
        rng.randn(G**d, N) + 1j * rng.randn(G**d, N)
    )
    coef_flat = np.ascontiguousarray(rng.randn(G**d) + 1j * rng.randn(G**d))
    entries = np.ascontiguousarray(rng.randn(N, N) + 1j * rng.randn(N, N))
    return freqs, colcoef, coef_flat, entries


def timeit(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_case(name, d, K, G):
    freqs, colcoef, coef_flat, entries = _inputs(d, K, G)
    N = freqs.shape[0]
    print(f"\n== {name}: d={d} K={K} N={N} G={G} ==")

    cases = [
        ("gather_matrix",
         lambda: _kernels.gather_matrix_numpy(colcoef, freqs, freqs, G),
         lambda: _kernels._gather_matrix_nb(colcoef, freqs, freqs, np.int64(G))
         if _kernels.HAVE_NUMBA else None),
        ("toeplitz_gather",
         lambda: _kernels.toeplitz_gather_numpy(coef_flat, freqs, freqs, G),
         lambda: _kernels._toeplitz_gather_nb(coef_flat, freqs, freqs, np.int64(G))
         if _kernels.HAVE_NUMBA else None),
        ("column_energies",
         lambda: _kernels.column_energies_numpy(entries),
         lambda: _kernels._column_energies_nb(entries)
         if _kernels.HAVE_NUMBA else None),
    ]
    for label, np_fn, nb_fn in cases:
        t_np = timeit(np_fn)
        line = f"  {label:16s} numpy {t_np * 1e3:9.2f} ms"
        if _kernels.HAVE_NUMBA:
            nb_fn()  # warm the JIT outside the timed region
            t_nb = timeit(nb_fn)
            line += f"   numba {t_nb * 1e3:9.2f} ms   speedup x{t_np / t_nb:5.2f}"
            ref, got = np_fn(), nb_fn()
            assert np.array_equal(np.asarray(ref), np.asarray(got)), label
        print(line)


def main():
    print(f"active backend: {_kernels.BACKEND} (numba available: {_kernels.HAVE_NUMBA})")
    bench_case("benchmark operator size", d=1, K=512, G=4096)
    bench_case("2-D moderate truncation", d=2, K=24, G=192)


if __name__ == "__main__":
    main()
