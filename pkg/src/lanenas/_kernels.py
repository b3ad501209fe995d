"""Hot rasterization kernels.

The numba-compiled path is the default; set LANENAS_NO_NUMBA=1 to force
the pure-numpy fallback (identical results, slower). Both paths mark a
pixel when its center lies within `radius` of any polyline segment
(clamped-projection distance, so caps and joins are round).
"""

import os

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dep, but be safe
    _HAVE_NUMBA = False

NUMBA_DISABLED = os.environ.get("LANENAS_NO_NUMBA", "") not in ("", "0")


def _rasterize_segments_py(xs, ys, radius, mask):
    h, w = mask.shape
    r2 = radius * radius
    for i in range(len(xs) - 1):
        x1, y1, x2, y2 = xs[i], ys[i], xs[i + 1], ys[i + 1]
        dx, dy = x2 - x1, y2 - y1
        l2 = dx * dx + dy * dy
        x_lo = max(int(np.floor(min(x1, x2) - radius)), 0)
        x_hi = min(int(np.ceil(max(x1, x2) + radius)), w - 1)
        y_lo = max(int(np.floor(min(y1, y2) - radius)), 0)
        y_hi = min(int(np.ceil(max(y1, y2) + radius)), h - 1)
        if x_hi < x_lo or y_hi < y_lo:
            continue
        px = np.arange(x_lo, x_hi + 1, dtype=np.float64)
        py = np.arange(y_lo, y_hi + 1, dtype=np.float64)[:, None]
        if l2 > 0.0:
            t = ((px - x1) * dx + (py - y1) * dy) / l2
            t = np.clip(t, 0.0, 1.0)
        else:
            t = np.zeros((y_hi - y_lo + 1, x_hi - x_lo + 1))
        ex = x1 + t * dx - px
        ey = y1 + t * dy - py
        hit = ex * ex + ey * ey <= r2
        mask[y_lo : y_hi + 1, x_lo : x_hi + 1] |= hit


def _rasterize_segments_loop(xs, ys, radius, mask):
    h, w = mask.shape
    r2 = radius * radius
    for i in range(len(xs) - 1):
        x1, y1, x2, y2 = xs[i], ys[i], xs[i + 1], ys[i + 1]
        dx, dy = x2 - x1, y2 - y1
        l2 = dx * dx + dy * dy
        x_lo = max(int(np.floor(min(x1, x2) - radius)), 0)
        x_hi = min(int(np.ceil(max(x1, x2) + radius)), w - 1)
        y_lo = max(int(np.floor(min(y1, y2) - radius)), 0)
        y_hi = min(int(np.ceil(max(y1, y2) + radius)), h - 1)
        for py in range(y_lo, y_hi + 1):
            for px in range(x_lo, x_hi + 1):
                if l2 > 0.0:
                    t = ((px - x1) * dx + (py - y1) * dy) / l2
                    if t < 0.0:
                        t = 0.0
                    elif t > 1.0:
                        t = 1.0
                else:
                    t = 0.0
                ex = x1 + t * dx - px
                ey = y1 + t * dy - py
                if ex * ex + ey * ey <= r2:
                    mask[py, px] = True


if _HAVE_NUMBA and not NUMBA_DISABLED:
    _rasterize_segments = njit(cache=True)(_rasterize_segments_loop)
else:
    _rasterize_segments = _rasterize_segments_py


def rasterize_polyline(xs, ys, radius, canvas):
    """Boolean mask of all pixels within `radius` of the polyline."""
    w, h = canvas
    mask = np.zeros((h, w), dtype=np.bool_)
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    if len(xs) >= 2:
        _rasterize_segments(xs, ys, float(radius), mask)
    return mask
