# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled direct-convolution kernels (single-threaded, deterministic).

Same interface and layouts as conv_numpy.  Padding is handled by
precomputed valid output ranges per kernel tap, so the hot loops are
branch-free and run over contiguous output rows.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

NAME = "cython"

ctypedef fused floating:
    float
    double


cdef inline Py_ssize_t _lo(Py_ssize_t k, Py_ssize_t pad, Py_ssize_t stride) noexcept:
    # smallest o with o*stride + k - pad >= 0
    if k >= pad:
        return 0
    return (pad - k + stride - 1) // stride


cdef inline Py_ssize_t _hi(Py_ssize_t k, Py_ssize_t pad, Py_ssize_t stride,
                           Py_ssize_t size, Py_ssize_t out_size) noexcept:
    # one past the largest o with o*stride + k - pad <= size-1
    cdef Py_ssize_t h = (size - 1 - k + pad) // stride + 1
    if h > out_size:
        return out_size
    return h


def conv2d_forward(floating[:, :, :, ::1] x, floating[:, :, :, ::1] w,
                   floating[::1] b, int stride, int pad):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t f = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t oh = (h + 2 * pad - kh) // stride + 1
    cdef Py_ssize_t ow = (wd + 2 * pad - kw) // stride + 1

    dtype = np.float32 if floating is float else np.float64
    y_arr = np.empty((n, f, oh, ow), dtype=dtype)
    cdef floating[:, :, :, ::1] y = y_arr

    cdef Py_ssize_t i, j, oi, oj, ci, ki, kj, ih, base
    cdef Py_ssize_t oi_lo, oi_hi, oj_lo, oj_hi
    cdef floating wv
    cdef floating* yrow
    cdef floating* xrow

    for i in range(n):
        for j in range(f):
            y_arr[i, j, :, :] = b[j]
        for ci in range(c):
            for ki in range(kh):
                oi_lo = _lo(ki, pad, stride)
                oi_hi = _hi(ki, pad, stride, h, oh)
                for kj in range(kw):
                    oj_lo = _lo(kj, pad, stride)
                    oj_hi = _hi(kj, pad, stride, wd, ow)
                    base = kj - pad
                    for j in range(f):
                        wv = w[j, ci, ki, kj]
                        for oi in range(oi_lo, oi_hi):
                            ih = oi * stride + ki - pad
                            yrow = &y[i, j, oi, 0]
                            xrow = &x[i, ci, ih, 0]
                            for oj in range(oj_lo, oj_hi):
                                yrow[oj] += wv * xrow[oj * stride + base]
    return y_arr


def conv2d_backward(floating[:, :, :, ::1] x, floating[:, :, :, ::1] w,
                    floating[:, :, :, ::1] dy, int stride, int pad):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t f = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t oh = dy.shape[2], ow = dy.shape[3]

    dtype = np.float32 if floating is float else np.float64
    dx_arr = np.zeros((n, c, h, wd), dtype=dtype)
    dw_arr = np.zeros((f, c, kh, kw), dtype=dtype)
    db_arr = np.zeros(f, dtype=dtype)
    cdef floating[:, :, :, ::1] dx = dx_arr
    cdef floating[:, :, :, ::1] dw = dw_arr
    cdef floating[::1] db = db_arr

    cdef Py_ssize_t i, j, oi, oj, ci, ki, kj, ih, base
    cdef Py_ssize_t oi_lo, oi_hi, oj_lo, oj_hi
    cdef floating wv, g, acc_dw, acc_db
    cdef floating* dyrow
    cdef floating* xrow
    cdef floating* dxrow

    for i in range(n):
        for j in range(f):
            acc_db = 0
            for oi in range(oh):
                dyrow = &dy[i, j, oi, 0]
                for oj in range(ow):
                    acc_db += dyrow[oj]
            db[j] += acc_db
        for ci in range(c):
            for ki in range(kh):
                oi_lo = _lo(ki, pad, stride)
                oi_hi = _hi(ki, pad, stride, h, oh)
                for kj in range(kw):
                    oj_lo = _lo(kj, pad, stride)
                    oj_hi = _hi(kj, pad, stride, wd, ow)
                    base = kj - pad
                    for j in range(f):
                        wv = w[j, ci, ki, kj]
                        acc_dw = 0
                        for oi in range(oi_lo, oi_hi):
                            ih = oi * stride + ki - pad
                            dyrow = &dy[i, j, oi, 0]
                            xrow = &x[i, ci, ih, 0]
                            dxrow = &dx[i, ci, ih, 0]
                            for oj in range(oj_lo, oj_hi):
                                g = dyrow[oj]
                                acc_dw += g * xrow[oj * stride + base]
                                dxrow[oj * stride + base] += g * wv
                        dw[j, ci, ki, kj] += acc_dw
    return dx_arr, dw_arr, db_arr
