"""Minimal layer zoo: Conv2d (compiled kernel or numpy fallback), Dense,
ReLU, Flatten, and a Sequential container.

Activations are NCHW.  Each layer caches what its backward pass needs;
``backward`` must follow the matching ``forward``.
"""

from __future__ import annotations

import numpy as np

from .. import nnkern
from .net import Param


class Layer:
    def params(self) -> list[Param]:
        return []

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Conv2d(Layer):
    def __init__(
        self,
        c_in: int,
        c_out: int,
        kernel: int,
        stride: int,
        pad: int,
        rng: np.random.Generator,
        name: str = "conv",
        dtype=np.float32,
    ):
        self.stride = stride
        self.pad = pad
        # He initialization for ReLU nets.
        std = np.sqrt(2.0 / (c_in * kernel * kernel))
        w = rng.normal(0.0, std, size=(c_out, c_in, kernel, kernel)).astype(dtype)
        b = np.zeros(c_out, dtype=dtype)
        self.w = Param(f"{name}.w", w)
        self.b = Param(f"{name}.b", b)
        self._x: np.ndarray | None = None

    def params(self) -> list[Param]:
        return [self.w, self.b]

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = np.ascontiguousarray(x)
        return nnkern.conv2d_forward(self._x, self.w.value, self.b.value, self.stride, self.pad)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        dx, dw, db = nnkern.conv2d_backward(
            self._x, self.w.value, np.ascontiguousarray(dy), self.stride, self.pad
        )
        self.w.grad += dw
        self.b.grad += db
        return dx


class Dense(Layer):
    def __init__(
        self,
        d_in: int,
        d_out: int,
        rng: np.random.Generator,
        name: str = "dense",
        dtype=np.float32,
        init_std: float | None = None,
    ):
        std = init_std if init_std is not None else np.sqrt(2.0 / d_in)
        w = rng.normal(0.0, std, size=(d_in, d_out)).astype(dtype)
        b = np.zeros(d_out, dtype=dtype)
        self.w = Param(f"{name}.w", w)
        self.b = Param(f"{name}.b", b)
        self._x: np.ndarray | None = None

    def params(self) -> list[Param]:
        return [self.w, self.b]

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        return x @ self.w.value + self.b.value

    def backward(self, dy: np.ndarray) -> np.ndarray:
        self.w.grad += self._x.T @ dy
        self.b.grad += dy.sum(axis=0)
        return dy @ self.w.value.T


class ReLU(Layer):
    def __init__(self):
        self._mask: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return x * self._mask

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return dy * self._mask


class Flatten(Layer):
    def __init__(self):
        self._shape: tuple | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return dy.reshape(self._shape)


class Sequential(Layer):
    def __init__(self, layers: list[Layer]):
        self.layers = layers

    def params(self) -> list[Param]:
        out: list[Param] = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, dy: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy
