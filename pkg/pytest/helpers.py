"""
Hand-set fields and finite-difference checks shared by the test modules.
"""
from typing import Callable

import numpy as np

from models.networks import DynamicsNet, GrowthNet

FD_GUARD = 1e-8


def linear_field(A, c=None) -> DynamicsNet:
    """Single affine layer ``f(x, t) = A x + c``."""
    A = np.asarray(A, dtype=np.float64)
    d = A.shape[0]
    weights = np.vstack([A.T, np.zeros((1, d))])
    bias = np.zeros(d) if c is None else np.asarray(c, dtype=np.float64)
    return DynamicsNet((weights,), (bias,))


def constant_field(c) -> DynamicsNet:
    c = np.asarray(c, dtype=np.float64)
    return linear_field(np.zeros((c.size, c.size)), c)


def zero_field(dim: int) -> DynamicsNet:
    return linear_field(np.zeros((dim, dim)))


def constant_growth(dim: int, rate: float) -> GrowthNet:
    """Growth net whose softplus head returns ``rate`` everywhere."""
    return GrowthNet((np.zeros((dim + 1, 1)),), (np.array([np.log(np.expm1(rate))]),))


def relative_error(a, b, guard: float = FD_GUARD) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), guard)


def central_difference(fn: Callable[[np.ndarray], float], x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Gradient of a scalar function by central differences, one coordinate at a time."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        step = np.zeros_like(x)
        step[i] = eps
        grad[i] = (fn(x + step) - fn(x - step)) / (2.0 * eps)
    return grad


def directional_difference(fn: Callable[[list], float], params: list, direction: list, eps: float) -> float:
    plus = [p + eps * v for p, v in zip(params, direction)]
    minus = [p - eps * v for p, v in zip(params, direction)]
    return (fn(plus) - fn(minus)) / (2.0 * eps)
