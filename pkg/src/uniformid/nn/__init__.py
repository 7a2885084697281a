from .layers import Conv2d, Dense, Flatten, ReLU, Sequential
from .losses import sigmoid, sigmoid_bce, softmax, softmax_cross_entropy
from .net import Param, derive_rng, params_digest, params_from_bytes, params_to_bytes
from .optim import Adam

__all__ = [
    "Adam",
    "Conv2d",
    "Dense",
    "Flatten",
    "Param",
    "ReLU",
    "Sequential",
    "derive_rng",
    "params_digest",
    "params_from_bytes",
    "params_to_bytes",
    "sigmoid",
    "sigmoid_bce",
    "softmax",
    "softmax_cross_entropy",
]
