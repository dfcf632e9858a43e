from typing import Callable

import numpy as np

from autodiff.dual import Dual
from autodiff.ops import mul, reduce_sum, shape, value
from autodiff.tape import Tape, Var
from exceptions import DimensionError


def jvp(fn: Callable, x, direction) -> np.ndarray:
    """
    Directional derivative ``(df/dx) @ direction`` by dual-number propagation.

    ``direction`` may carry leading axes to push several directions through at once.
    Nothing is recorded on a tape unless ``fn`` itself closes over taped Vars.

    :param fn: function of one array argument built from :mod:`autodiff.ops`.
    :type fn: Callable
    :param x: evaluation point.
    :type x: array-like
    :param direction: tangent with the shape of ``x`` (optionally prefixed).
    :type direction: array-like
    :return: tangent of the output.
    :rtype: np.ndarray
    """
    x = np.asarray(x, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    if direction.ndim < x.ndim or direction.shape[direction.ndim - x.ndim :] != x.shape:
        raise DimensionError(f"direction shape {direction.shape} does not match x shape {x.shape}")
    prefix = direction.shape[: direction.ndim - x.ndim]
    out = fn(Dual(x, direction))
    if not isinstance(out, Dual):
        return np.zeros(prefix + tuple(np.shape(value(out))))
    if out.tangent is None:
        return np.zeros(prefix + out.shape)
    return np.array(value(out.tangent), dtype=np.float64)


def vjp(fn: Callable, x, u) -> np.ndarray:
    """Vector-Jacobian product ``u @ (df/dx)`` on a fresh tape."""
    x = np.asarray(x, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    tape = Tape()
    xv = tape.leaf(x, name="x")
    out = fn(xv)
    if shape(out) != u.shape:
        raise DimensionError(f"cotangent shape {u.shape} does not match output shape {shape(out)}")
    if not isinstance(out, Var):
        return np.zeros_like(x)
    return tape.backward(reduce_sum(mul(out, u)))[xv]


def jacobian(fn: Callable, x) -> np.ndarray:
    """Full Jacobian of a vector function, one vjp per output row."""
    x = np.asarray(x, dtype=np.float64)
    out_dim = int(np.size(fn(x)))
    rows = [vjp(fn, x, row) for row in np.eye(out_dim)]
    return np.stack(rows).reshape((out_dim,) + x.shape)
