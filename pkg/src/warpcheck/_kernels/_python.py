"""Pure-numpy implementations of the hot kernels.

Fallback backend used when the compiled extension is unavailable (or forced
via ``WARPCHECK_BACKEND=python``).  The image kernels (``affine_sample``,
``resize_bilinear``, ``separable_blur``) evaluate the exact same IEEE-754
operation sequence as the compiled backend, so float64 results are
bit-identical across backends; the conv kernels differ only in summation
order.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def affine_sample(src, a, b, tx, ty, out_h, out_w):
    """Sample ``src`` at ``(a*u - b*v + tx, b*u + a*v + ty)`` per output pixel.

    (u, v) are output column/row indices; sampling is bilinear with
    clamp-to-edge outside the source.  ``src`` is (H, W, C) float64.
    """
    h, w = src.shape[:2]
    u = np.arange(out_w, dtype=np.float64)[None, :]
    v = np.arange(out_h, dtype=np.float64)[:, None]
    sx = a * u - b * v + tx
    sy = b * u + a * v + ty
    return _bilinear_gather(src, sx, sy, h, w)


def resize_bilinear(src, out_h, out_w):
    """Resize (H, W, C) float64 to (out_h, out_w, C), corner-aligned."""
    h, w = src.shape[:2]
    if out_w > 1:
        sx = np.arange(out_w, dtype=np.float64) * ((w - 1) / (out_w - 1))
    else:
        sx = np.full(1, (w - 1) / 2.0)
    if out_h > 1:
        sy = np.arange(out_h, dtype=np.float64) * ((h - 1) / (out_h - 1))
    else:
        sy = np.full(1, (h - 1) / 2.0)
    return _bilinear_gather(src, sx[None, :], sy[:, None], h, w)


def _bilinear_gather(src, sx, sy, h, w):
    # Nested-lerp formulation: exact for constants and integer coordinates.
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    wx = (sx - x0)[..., None]
    wy = (sy - y0)[..., None]
    x0c = np.clip(x0, 0, w - 1)
    x1c = np.clip(x0 + 1, 0, w - 1)
    y0c = np.clip(y0, 0, h - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)
    x0c, x1c, y0c, y1c = np.broadcast_arrays(x0c, x1c, y0c, y1c)
    v00 = src[y0c, x0c]
    v01 = src[y0c, x1c]
    v10 = src[y1c, x0c]
    v11 = src[y1c, x1c]
    r0 = v00 + wx * (v01 - v00)
    r1 = v10 + wx * (v11 - v10)
    return r0 + wy * (r1 - r0)


def separable_blur(img, w1d):
    """Separable convolution of (H, W, C) float64 with a symmetric 1-D kernel.

    Clamp-to-edge boundary.  Taps are accumulated as symmetric pairs around
    the center, which preserves constant images exactly and makes the result
    commute bit-wise with horizontal flips.
    """
    out = _blur_axis(img, w1d, axis=1)
    return _blur_axis(out, w1d, axis=0)


def _blur_axis(img, w1d, axis):
    k = w1d.shape[0]
    c = k // 2
    n = img.shape[axis]
    out = img.copy()
    for d in range(1, c + 1):
        lo = _shift_clamped(img, -d, n, axis)
        hi = _shift_clamped(img, d, n, axis)
        out += w1d[c + d] * ((lo - img) + (hi - img))
    return out


def _shift_clamped(img, d, n, axis):
    idx = np.clip(np.arange(n) + d, 0, n - 1)
    return np.take(img, idx, axis=axis)


def conv3x3_forward(x, w, b):
    """3x3 convolution, stride 1, zero padding 1.

    x: (N, C, H, W), w: (F, C, 3, 3), b: (F,).  Returns (N, F, H, W).
    """
    n, cin, h, wd = x.shape
    f = w.shape[0]
    cols = _im2col(x)
    out = cols @ w.reshape(f, cin * 9).T
    out += b
    return out.reshape(n, h, wd, f).transpose(0, 3, 1, 2)


def conv3x3_backward(x, w, dout):
    """Gradients of conv3x3_forward. Returns (dx, dw, db)."""
    n, cin, h, wd = x.shape
    f = w.shape[0]
    db = dout.sum(axis=(0, 2, 3))
    cols = _im2col(x)
    dflat = dout.transpose(0, 2, 3, 1).reshape(n * h * wd, f)
    dw = (dflat.T @ cols).reshape(f, cin, 3, 3)
    dxp = np.zeros((n, cin, h + 2, wd + 2), dtype=x.dtype)
    for u in range(3):
        for v in range(3):
            contrib = dout.transpose(0, 2, 3, 1) @ w[:, :, u, v]
            dxp[:, :, u:u + h, v:v + wd] += contrib.transpose(0, 3, 1, 2)
    dx = dxp[:, :, 1:h + 1, 1:wd + 1]
    return dx, dw, db


def _im2col(x):
    n, cin, h, wd = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    cols = sliding_window_view(xp, (3, 3), axis=(2, 3))
    return np.ascontiguousarray(cols.transpose(0, 2, 3, 1, 4, 5)).reshape(
        n * h * wd, cin * 9)


def maxpool2_forward(x):
    """2x2 max pool, stride 2 (trailing odd row/col dropped).

    Returns (out, idx) where idx in {0,1,2,3} encodes the argmax corner
    (row-major, first occurrence wins on ties).
    """
    n, c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    xv = x[:, :, :h2 * 2, :w2 * 2].reshape(n, c, h2, 2, w2, 2)
    cand = xv.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h2, w2, 4)
    idx = cand.argmax(axis=4).astype(np.uint8)
    out = np.take_along_axis(cand, idx[..., None].astype(np.int64),
                             axis=4)[..., 0]
    return out, idx


def maxpool2_backward(dout, idx, h, w):
    """Scatter pooled gradients back to the (N, C, h, w) input shape."""
    n, c, h2, w2 = dout.shape
    core = np.zeros((n, c, h2 * 2, w2 * 2), dtype=dout.dtype)
    dv = core.reshape(n, c, h2, 2, w2, 2)
    sub_r = (idx >> 1).astype(np.int64)
    sub_c = (idx & 1).astype(np.int64)
    ni, ci, ri, wi = np.ogrid[:n, :c, :h2, :w2]
    dv[ni, ci, ri, sub_r, wi, sub_c] = dout
    if h2 * 2 == h and w2 * 2 == w:
        return core
    dx = np.zeros((n, c, h, w), dtype=dout.dtype)
    dx[:, :, :h2 * 2, :w2 * 2] = core
    return dx
