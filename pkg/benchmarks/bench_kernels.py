"""
Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import os
import time

import numpy as np

from qsec import _kernels as K
from qsec.lincode import pack, random_linear_code
from qsec.qlinalg import random_density


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases():
    rng = np.random.default_rng(0)
    rhos = np.array([random_density(2, rng) for _ in range(4)])
    probs = np.full(4, 0.25)
    th, ph = np.linspace(0, np.pi, 181), np.linspace(0, 2 * np.pi, 361)
    gen = pack(random_linear_code(40, 20, 0).generator)
    h = random_linear_code(20, 6, 1).generator
    cols = pack(h.T).astype(np.int64)
    return {
        "qubit_grid_info 4 states, 181x361": lambda: K.qubit_grid_info(probs, rhos, th, ph),
        "min_codeword_weight [40,20]": lambda: K.min_codeword_weight(gen),
        "coset_leaders n=20 r=6": lambda: K.coset_leaders(cols, 20, 6),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not K.HAVE_NUMBA:
        print("numba is not installed; only the numpy path is timed")
    print(f"{'kernel':40s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}")
    for name, fn in cases().items():
        os.environ["QSEC_NO_NUMBA"] = "1"
        t_np = best_of(fn, args.repeat)
        if K.HAVE_NUMBA:
            os.environ["QSEC_NO_NUMBA"] = "0"
            fn()  # compile
            t_nb = best_of(fn, args.repeat)
            print(f"{name:40s} {t_np * 1e3:9.2f}ms {t_nb * 1e3:9.2f}ms {t_np / t_nb:7.1f}x")
        else:
            print(f"{name:40s} {t_np * 1e3:9.2f}ms")


if __name__ == "__main__":
    main()
