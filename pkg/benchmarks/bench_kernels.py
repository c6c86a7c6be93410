"""Time the compiled loop kernels against their numpy twins.

    python benchmarks/bench_kernels.py [--repeat 5]

Both variants are imported from the package regardless of the
LSITCYTO_DISABLE_NUMBA flag; results are checked for agreement first.
"""

import argparse
import time

import numpy as np

from lsitcyto import classical, numerics
from lsitcyto._accel import HAVE_NUMBA


def best_of(fn, args, repeat):
    fn(*args)  # warm-up (triggers compilation for the loop versions)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    x = rng.random((16, 32, 48, 48)).astype(np.float32)
    img = rng.uniform(0, 255, (96, 96))
    pad3 = np.ascontiguousarray(np.pad(img, 1, mode="edge"))
    pad5 = np.ascontiguousarray(np.pad(img, 2, mode="edge"))
    sw = classical.bilateral_weights_space(5, 3.0)
    cos_t, sin_t = numerics._rotation_terms(37.0)
    fill = numerics.border_mean(img)
    return [
        ("im2col 16x32x48x48 k3", numerics._im2col_loops, numerics._im2col_numpy, (x, 3, 3)),
        ("maxpool 16x32x48x48 k3", numerics._maxpool_loops, numerics._maxpool_numpy, (x, 3)),
        ("median 96x96 k3", classical._median_loops, classical._median_numpy, (pad3, 3, 96, 96)),
        ("bilateral 96x96 k5", classical._bilateral_loops, classical._bilateral_numpy, (pad5, 5, 96, 96, sw, 1 / 18.0)),
        ("rotate 96x96 37deg", numerics._rotate_loops, numerics._rotate_numpy, (img, cos_t, sin_t, fill)),
    ]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not HAVE_NUMBA:
        print("numba unavailable or disabled: the 'numba' column runs as plain Python loops")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<26}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}")
    for name, loops, vec, a in cases(rng):
        ra, rb = loops(*a), vec(*a)
        ra, rb = (ra[0], rb[0]) if isinstance(ra, tuple) else (ra, rb)
        if not np.allclose(ra, rb, atol=1e-5):
            raise SystemExit(f"{name}: backends disagree")
        t_loop = best_of(loops, a, args.repeat)
        t_vec = best_of(vec, a, args.repeat)
        print(f"{name:<26}{t_loop * 1e3:>10.2f}{t_vec * 1e3:>10.2f}{t_vec / t_loop:>8.1f}x")


if __name__ == "__main__":
    main()
