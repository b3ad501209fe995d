"""Compare the compiled and pure-numpy rasterization kernels.

Usage: python3 benchmarks/bench_kernels.py [--repeats N]

Times both implementations on a batch of random polylines at a
CULane-sized canvas and verifies they agree pixel-for-pixel. Run with
LANENAS_NO_NUMBA=1 to confirm the fallback is the selected path.
"""

import argparse
import time

import numpy as np

from lanenas import _kernels


def make_batch(n, canvas, seed=0):
    rng = np.random.default_rng(seed)
    w, h = canvas
    batch = []
    for _ in range(n):
        k = int(rng.integers(4, 12))
        xs = rng.uniform(0, w, size=k)
        ys = np.sort(rng.uniform(0, h, size=k))
        batch.append((xs, ys))
    return batch


def time_fn(fn, batch, canvas, radius, repeats):
    w, h = canvas
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for xs, ys in batch:
            canvas_arr = np.zeros((h, w), dtype=np.bool_)
            fn(xs, ys, radius, canvas_arr)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--lanes", type=int, default=200)
    args = ap.parse_args()

    canvas = (1640, 590)
    radius = 15.0
    batch = make_batch(args.lanes, canvas)

    # warm-up triggers jit compilation when numba is enabled
    _kernels._rasterize_segments(batch[0][0], batch[0][1], radius,
                                 np.zeros((canvas[1], canvas[0]), np.bool_))

    for xs, ys in batch[:20]:
        a = np.zeros((canvas[1], canvas[0]), dtype=np.bool_)
        b = np.zeros((canvas[1], canvas[0]), dtype=np.bool_)
        _kernels._rasterize_segments(xs, ys, radius, a)
        _kernels._rasterize_segments_py(xs, ys, radius, b)
        assert np.array_equal(a, b), "kernel paths disagree"
    print("agreement check: OK (20 polylines, pixel-identical)")

    t_sel = time_fn(_kernels._rasterize_segments, batch, canvas, radius,
                    args.repeats)
    t_py = time_fn(_kernels._rasterize_segments_py, batch, canvas, radius,
                   args.repeats)

    sel_kind = "numpy (LANENAS_NO_NUMBA set)" if _kernels.NUMBA_DISABLED else "numba @njit"
    print(f"canvas {canvas[0]}x{canvas[1]}, {args.lanes} lanes, "
          f"best of {args.repeats} repeats")
    print(f"  selected kernel [{sel_kind}]: {t_sel * 1e3:8.1f} ms")
    print(f"  numpy fallback:               {t_py * 1e3:8.1f} ms")
    print(f"  speedup vs fallback: {t_py / t_sel:.2f}x")


if __name__ == "__main__":
    main()
