#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy fallbacks.

Runs every kernel on identical inputs under both backends and prints a
throughput table. The dispatched default (env SCOPECAD_KERNELS) is reported
but both sides are always timed explicitly.
"""

import time

import numpy as np

from scopecad import _kernels

REPEATS = 30


def timeit(fn, *args):
    fn(*args)  # warmup / jit compile
    best = float("inf")
    for _ in range(REPEATS):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best * 1000.0


def main():
    rng = np.random.default_rng(0)
    print(f"dispatched backend: {_kernels.active_backend()}")
    print(f"{'kernel':<28}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    print("-" * 62)

    rows = []

    prev = rng.integers(0, 256, (480, 640), dtype=np.uint8)
    cur = rng.integers(0, 256, (480, 640), dtype=np.uint8)
    rows.append(("shift_abs_diff 640x480",
                 lambda f: f(prev, cur, 37, -12),
                 _kernels.shift_abs_diff_numpy, _kernels.shift_abs_diff_numba))

    src = rng.random((480, 640))
    rows.append(("bilinear_resize ->512x512",
                 lambda f: f(src, 512, 512),
                 _kernels.bilinear_resize_numpy, _kernels.bilinear_resize_numba))

    inv = np.array([[0.98, 0.02, 3.0], [-0.02, 1.01, -2.0]])
    rows.append(("affine_warp 640x480",
                 lambda f: f(src, inv, 480, 640),
                 _kernels.affine_warp_numpy, _kernels.affine_warp_numba))

    mask = (rng.random((480, 640)) < 0.4).astype(np.uint8)
    rows.append(("label_components 640x480",
                 lambda f: f(mask, 8),
                 _kernels.label_components_numpy, _kernels.label_components_numba))

    for name, call, np_fn, nb_fn in rows:
        t_np = timeit(lambda *a: call(np_fn))
        if nb_fn is None:
            print(f"{name:<28}{t_np:>12.3f}{'n/a':>12}{'n/a':>10}")
            continue
        t_nb = timeit(lambda *a: call(nb_fn))
        print(f"{name:<28}{t_np:>12.3f}{t_nb:>12.3f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
