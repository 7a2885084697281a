"""Pure-numpy convolution kernels (im2col + BLAS matmul).

Fallback used when the compiled extension is unavailable or when
UNIFORMID_KERNEL=numpy.  Layout is NCHW for activations and FCHW for
filters, matching the compiled kernels bit-for-bit in shape (numerical
results agree to rounding; summation order differs).
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def _out_size(size: int, k: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - k) // stride + 1


def _im2col(xp: np.ndarray, kh: int, kw: int, oh: int, ow: int, stride: int) -> np.ndarray:
    n, c = xp.shape[:2]
    col = np.empty((n, oh, ow, c, kh, kw), dtype=xp.dtype)
    for ki in range(kh):
        for kj in range(kw):
            patch = xp[:, :, ki : ki + stride * oh : stride, kj : kj + stride * ow : stride]
            col[:, :, :, :, ki, kj] = patch.transpose(0, 2, 3, 1)
    return col


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int, pad: int) -> np.ndarray:
    n, c, h, wd = x.shape
    f, _, kh, kw = w.shape
    oh = _out_size(h, kh, stride, pad)
    ow = _out_size(wd, kw, stride, pad)
    xp = x
    if pad:
        xp = np.zeros((n, c, h + 2 * pad, wd + 2 * pad), dtype=x.dtype)
        xp[:, :, pad : pad + h, pad : pad + wd] = x
    col = _im2col(xp, kh, kw, oh, ow, stride)
    col_mat = col.reshape(n * oh * ow, c * kh * kw)
    w_mat = w.reshape(f, c * kh * kw)
    y_mat = col_mat @ w_mat.T + b
    return np.ascontiguousarray(y_mat.reshape(n, oh, ow, f).transpose(0, 3, 1, 2))


def conv2d_backward(
    x: np.ndarray, w: np.ndarray, dy: np.ndarray, stride: int, pad: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n, c, h, wd = x.shape
    f, _, kh, kw = w.shape
    _, _, oh, ow = dy.shape
    xp = x
    if pad:
        xp = np.zeros((n, c, h + 2 * pad, wd + 2 * pad), dtype=x.dtype)
        xp[:, :, pad : pad + h, pad : pad + wd] = x
    col_mat = _im2col(xp, kh, kw, oh, ow, stride).reshape(n * oh * ow, c * kh * kw)
    dy_mat = np.ascontiguousarray(dy.transpose(0, 2, 3, 1)).reshape(n * oh * ow, f)

    dw = (dy_mat.T @ col_mat).reshape(f, c, kh, kw)
    db = dy_mat.sum(axis=0)

    dcol = (dy_mat @ w.reshape(f, c * kh * kw)).reshape(n, oh, ow, c, kh, kw)
    dxp = np.zeros_like(xp)
    for ki in range(kh):
        for kj in range(kw):
            dxp[:, :, ki : ki + stride * oh : stride, kj : kj + stride * ow : stride] += dcol[
                :, :, :, :, ki, kj
            ].transpose(0, 3, 1, 2)
    dx = dxp[:, :, pad : pad + h, pad : pad + wd] if pad else dxp
    return np.ascontiguousarray(dx), dw, db
