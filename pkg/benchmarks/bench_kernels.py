"""Time the numpy and numba kernel backends side by side.

    python benchmarks/bench_kernels.py [--repeat 5] [--size 1000000]

Each kernel is called once on each backend before timing so numba
compilation is excluded.  Reports the best of ``--repeat`` runs.
"""
import argparse
import timeit

import numpy as np

from clipbandit._kernels import NUMBA_KERNELS, NUMPY_KERNELS


def cases(size, rng):
    frames = np.arange(size, dtype=np.int64)
    ords = rng.integers(0, 20, size)
    x = rng.random(size)
    seq = rng.random(54_000)
    pos = np.sort(rng.choice(480, 19, replace=False)).astype(np.int64)
    vals = rng.random(19)
    counts = rng.integers(4, 200, 225)
    means = rng.random(225)
    m2 = rng.random(225) * counts * 0.05
    var = m2 / counts
    n = int(counts.sum())
    return {
        f"hash_uniform  n={size}": lambda K: K.hash_uniform(0x1234, frames, ords),
        f"ar1_filter    n={size}": lambda K: K.ar1_filter(x, 0.995, 0.005, 0.5),
        "acf_lags      n=54000 lags=300": lambda K: K.acf_lags(seq, 300),
        "nearest_fill  arm=480 obs=19": lambda K: K.nearest_fill(480, pos, vals),
        "radii         M=225": lambda K: K.radii(counts, var, n),
        "optimistic_step M=225 m=16": lambda K: K.optimistic_step(counts, means, m2, n, 16),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", type=int, default=1_000_000)
    args = ap.parse_args()
    backends = [NUMPY_KERNELS] + ([NUMBA_KERNELS] if NUMBA_KERNELS is not None else [])
    rng = np.random.default_rng(0)
    print(f"{'kernel':34s}" + "".join(f"{b.name:>14s}" for b in backends) + ("       speedup" if len(backends) > 1 else ""))
    for label, fn in cases(args.size, rng).items():
        times = []
        for K in backends:
            fn(K)
            t = timeit.Timer(lambda: fn(K))
            number, _ = t.autorange()
            times.append(min(t.repeat(args.repeat, number)) / number)
        row = f"{label:34s}" + "".join(f"{t * 1e6:11.1f} us" for t in times)
        if len(times) > 1:
            row += f"{times[0] / times[1]:13.1f}x"
        print(row)
    if NUMBA_KERNELS is None:
        print("numba not installed; only the numpy backend was timed")


if __name__ == "__main__":
    main()
