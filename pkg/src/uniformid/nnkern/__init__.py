"""Convolution kernel backend, selected once at import.

Two implementations ship: compiled Cython direct convolution and a
pure-numpy im2col+BLAS fallback.  Measured on the shapes this package
trains (see benchmarks/bench_conv.py), the direct kernel wins on
shallow, high-resolution layers where im2col materialization dominates,
and BLAS wins once channel counts grow.  The default ``auto`` mode
routes by input channel count at a fixed crossover, which keeps runs
deterministic; set UNIFORMID_KERNEL=numpy|cython to force a single
implementation (``cython`` raises if the extension was not built).
"""

from __future__ import annotations

import os

from ..errors import ConfigError
from . import conv_numpy

_choice = os.environ.get("UNIFORMID_KERNEL", "auto")
if _choice not in {"auto", "cython", "numpy"}:
    raise ConfigError(f"UNIFORMID_KERNEL must be auto|cython|numpy, got {_choice!r}")

try:
    from . import _conv_cy
except ImportError:
    _conv_cy = None  # type: ignore[assignment]
    if _choice == "cython":
        raise ConfigError(
            "UNIFORMID_KERNEL=cython but the compiled extension is missing; "
            "build it with 'pip install -e .'"
        ) from None

# Measured crossover: direct convolution beats im2col+BLAS below this
# many input channels on the stride-2 3x3 shapes used here.
_CROSSOVER_CIN = 16

if _choice == "numpy" or (_choice == "auto" and _conv_cy is None):
    BACKEND = "numpy"
    conv2d_forward = conv_numpy.conv2d_forward
    conv2d_backward = conv_numpy.conv2d_backward
elif _choice == "cython":
    BACKEND = "cython"
    conv2d_forward = _conv_cy.conv2d_forward
    conv2d_backward = _conv_cy.conv2d_backward
else:
    BACKEND = "auto"

    def conv2d_forward(x, w, b, stride, pad):
        if x.shape[1] < _CROSSOVER_CIN:
            return _conv_cy.conv2d_forward(x, w, b, stride, pad)
        return conv_numpy.conv2d_forward(x, w, b, stride, pad)

    def conv2d_backward(x, w, dy, stride, pad):
        if x.shape[1] < _CROSSOVER_CIN:
            return _conv_cy.conv2d_backward(x, w, dy, stride, pad)
        return conv_numpy.conv2d_backward(x, w, dy, stride, pad)


def backend_name() -> str:
    return BACKEND


__all__ = ["BACKEND", "backend_name", "conv2d_forward", "conv2d_backward", "conv_numpy"]
