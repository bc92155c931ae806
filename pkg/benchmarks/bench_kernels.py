"""Micro-benchmark: compiled slot kernels vs the numpy fallback.

Run with: python3 benchmarks/bench_kernels.py [--slots N] [--repeat R]
"""

import argparse
import timeit

import numpy as np

from fheact.kernels import _pykern

try:
    from fheact.kernels import _fastkern
except ImportError:
    _fastkern = None


def bench(name, fn_py, fn_cy, repeat):
    t_py = min(timeit.repeat(fn_py, number=1, repeat=repeat))
    if fn_cy is None:
        print(f"{name:20s} numpy {t_py * 1e6:9.1f} us   (extension not built)")
        return
    t_cy = min(timeit.repeat(fn_cy, number=1, repeat=repeat))
    ratio = t_py / t_cy if t_cy else float("inf")
    print(
        f"{name:20s} numpy {t_py * 1e6:9.1f} us   cython {t_cy * 1e6:9.1f} us"
        f"   speedup {ratio:5.2f}x"
    )


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--slots", type=int, default=16384)
    parser.add_argument("--repeat", type=int, default=200)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    n = args.slots
    src = rng.normal(size=n)
    mask = rng.normal(size=n)
    acc = np.zeros(n)
    idx = np.arange(0, n, 3, dtype=np.int64)
    val = rng.normal(size=len(idx))
    q = rng.integers(-(2**15), 2**15, n).astype(np.int64)
    q2 = rng.integers(-(2**15), 2**15, n).astype(np.int64)

    ext = _fastkern
    print(f"slots={n} repeat={args.repeat} extension={'yes' if ext else 'no'}\n")
    bench(
        "rot_mac",
        lambda: _pykern.rot_mac(acc, src, 17, mask),
        (lambda: ext.rot_mac(acc, src, 17, mask)) if ext else None,
        args.repeat,
    )
    bench(
        "sparse_rot_mac",
        lambda: _pykern.sparse_rot_mac(acc, src, 17, idx, val),
        (lambda: ext.sparse_rot_mac(acc, src, 17, idx, val)) if ext else None,
        args.repeat,
    )
    bench(
        "quantize_saturate",
        lambda: _pykern.quantize_saturate(src, 512.0, 2**15 - 1),
        (lambda: ext.quantize_saturate(src, 512.0, 2**15 - 1)) if ext else None,
        args.repeat,
    )
    bench(
        "dequantize",
        lambda: _pykern.dequantize(q, 512.0),
        (lambda: ext.dequantize(q, 512.0)) if ext else None,
        args.repeat,
    )
    bench(
        "compare_less",
        lambda: _pykern.compare_less(q, q2),
        (lambda: ext.compare_less(q, q2)) if ext else None,
        args.repeat,
    )


if __name__ == "__main__":
    main()
