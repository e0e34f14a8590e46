"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel is called once before timing so numba compilation is excluded.
"""

import argparse
import timeit

import numpy as np

from blockgen import kernels
from blockgen._accel import NUMBA_AVAILABLE


def workloads(rng: np.random.Generator):
    sub = rng.normal(size=(20, 20))
    sub = (sub + sub.T) / 2
    a, b = rng.integers(0, 20, 120), rng.integers(0, 20, 130)
    xg, xc = rng.normal(size=(400, 3)) * 8, rng.normal(size=(1500, 3)) * 8
    rg, rc = rng.uniform(1.4, 1.9, 400), rng.uniform(1.4, 1.9, 1500)
    vals = rng.uniform(1.0, 1.8, 200_000)
    quads = [rng.normal(size=(50_000, 3)) for _ in range(4)]
    return {
        "nw_affine (120x130)": ("nw_affine", (a, b, sub, -10.0, -0.5)),
        "repulsion (400 x 1500)": ("repulsion_displacement", (xg, rg, xc, rc, 0.3)),
        "close_pairs (400 x 1500)": ("close_pairs", (xg, xc, 3.0)),
        "bin_indices (200k)": ("bin_indices", (vals, 1.1, 0.005, 120)),
        "dihedrals (50k)": ("dihedrals", tuple(quads)),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if not NUMBA_AVAILABLE:
        print("numba is not importable; nothing to compare")
        return 1
    print(f"{'kernel':<26}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}")
    for label, (name, call_args) in workloads(np.random.default_rng(args.seed)).items():
        fast, slow = getattr(kernels, name + "_numba"), getattr(kernels, name + "_numpy")
        fast(*call_args)  # compile
        t_fast = min(timeit.repeat(lambda: fast(*call_args), number=1, repeat=args.repeat))
        t_slow = min(timeit.repeat(lambda: slow(*call_args), number=1, repeat=args.repeat))
        print(f"{label:<26}{t_fast * 1e3:>10.2f}{t_slow * 1e3:>10.2f}{t_slow / t_fast:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
