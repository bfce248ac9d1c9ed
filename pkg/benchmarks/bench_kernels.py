"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from dyadic_spectra import _pykernels

try:
    from dyadic_spectra import _ckernels
except ImportError:
    _ckernels = None


def cases(rng):
    x = rng.integers(-1000, 1000, size=1 << 18).astype(np.int64)
    K = 24
    cells = rng.integers(0, 1 << K, size=500).astype(np.int64)
    w = rng.random(500)
    f = np.arange(-20000, 20001, dtype=np.int64)
    pos = rng.integers(0, 1 << 24, size=3).astype(np.int64)
    coef = np.array([1.0, -2.0, 1.0])
    return {
        "fwht 2^18 int64": lambda m: m.fwht(x),
        "dyadic_fourier 500 atoms x 40001 freqs": lambda m: m.dyadic_fourier(f, cells, w, K),
        "jump_energy 3 jumps x 2^20 terms": lambda m: m.jump_energy(1, 1 << 20, 1 << 24, pos, coef),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':42s} {'numpy [s]':>10s} {'cython [s]':>11s} {'speedup':>8s}")
    for name, fn in cases(rng).items():
        py = min(timeit.repeat(lambda: fn(_pykernels), number=1, repeat=args.repeat))
        if _ckernels is None:
            print(f"{name:42s} {py:10.4f} {'n/a':>11s} {'n/a':>8s}")
            continue
        cy = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=args.repeat))
        print(f"{name:42s} {py:10.4f} {cy:11.4f} {py / cy:7.1f}x")


if __name__ == "__main__":
    main()
