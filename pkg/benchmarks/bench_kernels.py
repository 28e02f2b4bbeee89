"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Shapes match the refute-test pipeline (dictators over 8 variables,
m = 256, 300 samples) and the frozen hybrid evaluation at m = 16.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from refutelab import _kernels
from refutelab.core import enumerate_class


def _best_of(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def _cases(rng):
    cls = enumerate_class("dictators(8)")
    table = cls.table
    points = rng.choice(np.array([-1, 1], dtype=np.int8), size=(300, 256, 8))
    labels = rng.choice(np.array([-1, 1], dtype=np.int8), size=(300, 256))
    codes = _kernels.encode_points_numpy(points)
    hybrid_codes = rng.integers(0, 2**8, size=(20_000, 16))
    hybrid_labels = rng.choice(np.array([-1, 1], dtype=np.int8), size=(20_000, 16))
    return [
        ("encode_points 300x256x8", "encode_points", (points,)),
        ("max_correlation B=300 m=256 C=16", "max_correlation", (table, codes, labels)),
        ("max_correlation B=20000 m=16 C=16", "max_correlation", (table, hybrid_codes, hybrid_labels)),
        ("agreement N=76800 C=16", "agreement", (table, codes.ravel(), labels.ravel())),
    ]


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':40s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for label, name, args_ in _cases(rng):
        fast = getattr(_kernels, f"{name}_numba")
        slow = getattr(_kernels, f"{name}_numpy")
        a, b = fast(*args_), slow(*args_)
        assert np.array_equal(np.ravel(a), np.ravel(b)), f"{name}: backends disagree"
        t_numpy = _best_of(lambda: slow(*args_), args.repeat)
        t_numba = _best_of(lambda: fast(*args_), args.repeat)
        print(f"{label:40s} {1e3 * t_numpy:10.2f} {1e3 * t_numba:10.2f} {t_numpy / t_numba:8.1f}x")


if __name__ == "__main__":
    main()
