# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot kernels.

Same contracts as ``_python``; the float64 image kernels replay the identical
IEEE-754 operation sequence (the extension is built with fp-contract off), so
both backends agree bit-for-bit on warp/resize/blur.
"""

import numpy as np

from libc.math cimport floor

ctypedef fused real:
    float
    double


cdef inline Py_ssize_t _clamp(Py_ssize_t v, Py_ssize_t hi) nogil:
    if v < 0:
        return 0
    if v > hi:
        return hi
    return v


def affine_sample(const double[:, :, ::1] src, double a, double b,
                  double tx, double ty, int out_h, int out_w):
    """Sample ``src`` at ``(a*u - b*v + tx, b*u + a*v + ty)`` per output pixel."""
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1], nc = src.shape[2]
    out_arr = np.empty((out_h, out_w, nc), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t u, v, ch, x0, y0, x0c, x1c, y0c, y1c
    cdef double sx, sy, fx, fy, wx, wy, v00, v01, v10, v11, r0, r1
    with nogil:
        for v in range(out_h):
            for u in range(out_w):
                sx = a * u - b * v + tx
                sy = b * u + a * v + ty
                fx = floor(sx)
                fy = floor(sy)
                wx = sx - fx
                wy = sy - fy
                x0 = <Py_ssize_t>fx
                y0 = <Py_ssize_t>fy
                x0c = _clamp(x0, w - 1)
                x1c = _clamp(x0 + 1, w - 1)
                y0c = _clamp(y0, h - 1)
                y1c = _clamp(y0 + 1, h - 1)
                for ch in range(nc):
                    v00 = src[y0c, x0c, ch]
                    v01 = src[y0c, x1c, ch]
                    v10 = src[y1c, x0c, ch]
                    v11 = src[y1c, x1c, ch]
                    r0 = v00 + wx * (v01 - v00)
                    r1 = v10 + wx * (v11 - v10)
                    out[v, u, ch] = r0 + wy * (r1 - r0)
    return out_arr


def resize_bilinear(const double[:, :, ::1] src, int out_h, int out_w):
    """Resize (H, W, C) float64 to (out_h, out_w, C), corner-aligned."""
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1], nc = src.shape[2]
    out_arr = np.empty((out_h, out_w, nc), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef double rx, ry
    rx = (w - 1.0) / (out_w - 1.0) if out_w > 1 else 0.0
    ry = (h - 1.0) / (out_h - 1.0) if out_h > 1 else 0.0
    cdef Py_ssize_t u, v, ch, x0, y0, x0c, x1c, y0c, y1c
    cdef double sx, sy, fx, fy, wx, wy, v00, v01, v10, v11, r0, r1
    cdef double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0
    with nogil:
        for v in range(out_h):
            sy = v * ry if out_h > 1 else cy
            fy = floor(sy)
            wy = sy - fy
            y0 = <Py_ssize_t>fy
            y0c = _clamp(y0, h - 1)
            y1c = _clamp(y0 + 1, h - 1)
            for u in range(out_w):
                sx = u * rx if out_w > 1 else cx
                fx = floor(sx)
                wx = sx - fx
                x0 = <Py_ssize_t>fx
                x0c = _clamp(x0, w - 1)
                x1c = _clamp(x0 + 1, w - 1)
                for ch in range(nc):
                    v00 = src[y0c, x0c, ch]
                    v01 = src[y0c, x1c, ch]
                    v10 = src[y1c, x0c, ch]
                    v11 = src[y1c, x1c, ch]
                    r0 = v00 + wx * (v01 - v00)
                    r1 = v10 + wx * (v11 - v10)
                    out[v, u, ch] = r0 + wy * (r1 - r0)
    return out_arr


def separable_blur(const double[:, :, ::1] img, const double[::1] w1d):
    """Separable symmetric-kernel convolution, clamp-to-edge boundary."""
    cdef Py_ssize_t h = img.shape[0], w = img.shape[1], nc = img.shape[2]
    cdef Py_ssize_t half = w1d.shape[0] // 2
    tmp_arr = np.empty((h, w, nc), dtype=np.float64)
    out_arr = np.empty((h, w, nc), dtype=np.float64)
    cdef double[:, :, ::1] tmp = tmp_arr
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t y, x, ch, d, lo, hi
    cdef double acc, center, wt
    with nogil:
        for y in range(h):
            for x in range(w):
                for ch in range(nc):
                    center = img[y, x, ch]
                    acc = center
                    for d in range(1, half + 1):
                        lo = _clamp(x - d, w - 1)
                        hi = _clamp(x + d, w - 1)
                        wt = w1d[half + d]
                        acc = acc + wt * ((img[y, lo, ch] - center)
                                          + (img[y, hi, ch] - center))
                    tmp[y, x, ch] = acc
        for y in range(h):
            for x in range(w):
                for ch in range(nc):
                    center = tmp[y, x, ch]
                    acc = center
                    for d in range(1, half + 1):
                        lo = _clamp(y - d, h - 1)
                        hi = _clamp(y + d, h - 1)
                        wt = w1d[half + d]
                        acc = acc + wt * ((tmp[lo, x, ch] - center)
                                          + (tmp[hi, x, ch] - center))
                    out[y, x, ch] = acc
    return out_arr


def conv3x3_forward(const real[:, :, :, ::1] x, const real[:, :, :, ::1] w, const real[::1] b):
    """3x3 convolution, stride 1, zero padding 1 (NCHW)."""
    cdef Py_ssize_t n = x.shape[0], cin = x.shape[1]
    cdef Py_ssize_t h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t f = w.shape[0]
    if real is float:
        dt = np.float32
    else:
        dt = np.float64
    xp_arr = np.zeros((n, cin, h + 2, wd + 2), dtype=dt)
    xp_arr[:, :, 1:h + 1, 1:wd + 1] = np.asarray(x)
    cdef real[:, :, :, ::1] xp = xp_arr
    out_arr = np.empty((n, f, h, wd), dtype=dt)
    cdef real[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t ni, fi, ci, i, j
    cdef real acc, w00, w01, w02, w10, w11, w12, w20, w21, w22
    with nogil:
        for ni in range(n):
            for fi in range(f):
                for i in range(h):
                    for j in range(wd):
                        out[ni, fi, i, j] = b[fi]
                for ci in range(cin):
                    w00 = w[fi, ci, 0, 0]; w01 = w[fi, ci, 0, 1]; w02 = w[fi, ci, 0, 2]
                    w10 = w[fi, ci, 1, 0]; w11 = w[fi, ci, 1, 1]; w12 = w[fi, ci, 1, 2]
                    w20 = w[fi, ci, 2, 0]; w21 = w[fi, ci, 2, 1]; w22 = w[fi, ci, 2, 2]
                    for i in range(h):
                        for j in range(wd):
                            acc = (w00 * xp[ni, ci, i, j]
                                   + w01 * xp[ni, ci, i, j + 1]
                                   + w02 * xp[ni, ci, i, j + 2]
                                   + w10 * xp[ni, ci, i + 1, j]
                                   + w11 * xp[ni, ci, i + 1, j + 1]
                                   + w12 * xp[ni, ci, i + 1, j + 2]
                                   + w20 * xp[ni, ci, i + 2, j]
                                   + w21 * xp[ni, ci, i + 2, j + 1]
                                   + w22 * xp[ni, ci, i + 2, j + 2])
                            out[ni, fi, i, j] = out[ni, fi, i, j] + acc
    return out_arr


def conv3x3_backward(const real[:, :, :, ::1] x, const real[:, :, :, ::1] w,
                     const real[:, :, :, ::1] dout):
    """Gradients of conv3x3_forward. Returns (dx, dw, db)."""
    cdef Py_ssize_t n = x.shape[0], cin = x.shape[1]
    cdef Py_ssize_t h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t f = w.shape[0]
    if real is float:
        dt = np.float32
    else:
        dt = np.float64
    xp_arr = np.zeros((n, cin, h + 2, wd + 2), dtype=dt)
    xp_arr[:, :, 1:h + 1, 1:wd + 1] = np.asarray(x)
    cdef real[:, :, :, ::1] xp = xp_arr
    dxp_arr = np.zeros((n, cin, h + 2, wd + 2), dtype=dt)
    dw_arr = np.zeros((f, cin, 3, 3), dtype=dt)
    db_arr = np.zeros(f, dtype=dt)
    cdef real[:, :, :, ::1] dxp = dxp_arr
    cdef real[:, :, :, ::1] dw = dw_arr
    cdef real[::1] db = db_arr
    cdef Py_ssize_t ni, fi, ci, i, j, u, v
    cdef real g
    with nogil:
        for ni in range(n):
            for fi in range(f):
                for i in range(h):
                    for j in range(wd):
                        g = dout[ni, fi, i, j]
                        db[fi] = db[fi] + g
                        for ci in range(cin):
                            for u in range(3):
                                for v in range(3):
                                    dw[fi, ci, u, v] = dw[fi, ci, u, v] + g * xp[ni, ci, i + u, j + v]
                                    dxp[ni, ci, i + u, j + v] = dxp[ni, ci, i + u, j + v] + g * w[fi, ci, u, v]
    dx = dxp_arr[:, :, 1:h + 1, 1:wd + 1].copy()
    return dx, dw_arr, db_arr


def maxpool2_forward(const real[:, :, :, ::1] x):
    """2x2 max pool, stride 2; returns (out, idx) with row-major argmax codes."""
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1]
    cdef Py_ssize_t h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t h2 = h // 2, w2 = w // 2
    if real is float:
        dt = np.float32
    else:
        dt = np.float64
    out_arr = np.empty((n, c, h2, w2), dtype=dt)
    idx_arr = np.empty((n, c, h2, w2), dtype=np.uint8)
    cdef real[:, :, :, ::1] out = out_arr
    cdef unsigned char[:, :, :, ::1] idx = idx_arr
    cdef Py_ssize_t ni, ci, i, j
    cdef real best, v
    cdef unsigned char which
    with nogil:
        for ni in range(n):
            for ci in range(c):
                for i in range(h2):
                    for j in range(w2):
                        best = x[ni, ci, 2 * i, 2 * j]
                        which = 0
                        v = x[ni, ci, 2 * i, 2 * j + 1]
                        if v > best:
                            best = v; which = 1
                        v = x[ni, ci, 2 * i + 1, 2 * j]
                        if v > best:
                            best = v; which = 2
                        v = x[ni, ci, 2 * i + 1, 2 * j + 1]
                        if v > best:
                            best = v; which = 3
                        out[ni, ci, i, j] = best
                        idx[ni, ci, i, j] = which
    return out_arr, idx_arr


def maxpool2_backward(const real[:, :, :, ::1] dout,
                      const unsigned char[:, :, :, ::1] idx,
                      Py_ssize_t h, Py_ssize_t w):
    """Scatter pooled gradients back to the (N, C, h, w) input shape."""
    cdef Py_ssize_t n = dout.shape[0], c = dout.shape[1]
    cdef Py_ssize_t h2 = dout.shape[2], w2 = dout.shape[3]
    if real is float:
        dt = np.float32
    else:
        dt = np.float64
    dx_arr = np.zeros((n, c, h, w), dtype=dt)
    cdef real[:, :, :, ::1] dx = dx_arr
    cdef Py_ssize_t ni, ci, i, j
    cdef unsigned char which
    with nogil:
        for ni in range(n):
            for ci in range(c):
                for i in range(h2):
                    for j in range(w2):
                        which = idx[ni, ci, i, j]
                        dx[ni, ci, 2 * i + (which >> 1), 2 * j + (which & 1)] = dout[ni, ci, i, j]
    return dx_arr
