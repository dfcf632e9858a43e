"""
Primitive operations understood by the tape.

Each primitive is a pair of numpy functions:

- ``forward(*values, **attrs) -> ndarray``
- ``vjp(g, out, values, **attrs) -> list[ndarray | None]`` giving the cotangent of every input.

Forward-mode rules live in :mod:`autodiff.ops` because they are written in terms of
the dispatching operations, which lets tangents themselves be recorded on a tape.
"""
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

from exceptions import ShapeMismatchError


@dataclass(frozen=True)
class Primitive:
    name: str
    forward: Callable[..., np.ndarray]
    vjp: Callable[..., list]


PRIMITIVES: dict[str, Primitive] = {}


def primitive(name: str):
    def register(pair: tuple[Callable, Callable]) -> tuple[Callable, Callable]:
        forward, vjp = pair
        PRIMITIVES[name] = Primitive(name, forward, vjp)
        return pair

    return register


def unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    shape = tuple(shape)
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, size in enumerate(shape) if size == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def normalize_axis(axis, ndim: int):
    if axis is None:
        return tuple(range(ndim))
    axes = axis if isinstance(axis, tuple) else (axis,)
    normalized = []
    for ax in axes:
        if not -ndim <= ax < ndim:
            raise ShapeMismatchError("reduce", (ndim,), (ax,))
        normalized.append(ax % ndim)
    return tuple(normalized)


def _check_broadcast(op: str, a: np.ndarray, b: np.ndarray) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeMismatchError(op, a.shape, b.shape) from None


def _binary(op: str, fn: Callable) -> Callable:
    def forward(a, b):
        _check_broadcast(op, a, b)
        return fn(a, b)

    return forward


primitive("add")(
    (
        _binary("add", np.add),
        lambda g, out, v: [unbroadcast(g, v[0].shape), unbroadcast(g, v[1].shape)],
    )
)

primitive("sub")(
    (
        _binary("sub", np.subtract),
        lambda g, out, v: [unbroadcast(g, v[0].shape), unbroadcast(-g, v[1].shape)],
    )
)

primitive("mul")(
    (
        _binary("mul", np.multiply),
        lambda g, out, v: [unbroadcast(g * v[1], v[0].shape), unbroadcast(g * v[0], v[1].shape)],
    )
)

primitive("div")(
    (
        _binary("div", np.divide),
        lambda g, out, v: [
            unbroadcast(g / v[1], v[0].shape),
            unbroadcast(-g * v[0] / (v[1] * v[1]), v[1].shape),
        ],
    )
)

primitive("neg")((np.negative, lambda g, out, v: [-g]))

primitive("scalar_mul")(
    (
        lambda a, *, c: a * c,
        lambda g, out, v, *, c: [g * c],
    )
)


def _matmul_forward(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.ndim == 0 or b.ndim == 0 or b.ndim > 2 or a.shape[-1] != b.shape[0]:
        raise ShapeMismatchError("matmul", a.shape, b.shape)
    return np.matmul(a, b)


def _matmul_vjp(g, out, v):
    a, b = v
    k = b.shape[0]
    if b.ndim == 1:
        ga = g[..., None] * b
        gb = (a * g[..., None]).reshape(-1, k).sum(axis=0)
        return [ga, gb]
    m = b.shape[1]
    ga = g @ b.T
    gb = a.reshape(-1, k).T @ g.reshape(-1, m)
    return [ga, gb]


primitive("matmul")((_matmul_forward, _matmul_vjp))


def _transpose_forward(a: np.ndarray) -> np.ndarray:
    if a.ndim != 2:
        raise ShapeMismatchError("transpose", a.shape, (2,))
    return a.T


primitive("transpose")((_transpose_forward, lambda g, out, v: [g.T]))

primitive("leaky_relu")(
    (
        lambda a, *, slope: np.where(a > 0, a, slope * a),
        lambda g, out, v, *, slope: [g * np.where(v[0] > 0, 1.0, slope)],
    )
)

primitive("sigmoid")((expit, lambda g, out, v: [g * out * (1.0 - out)]))

primitive("exp")((np.exp, lambda g, out, v: [g * out]))

primitive("log")((np.log, lambda g, out, v: [g / v[0]]))

primitive("softplus")(
    (
        lambda a: np.logaddexp(0.0, a),
        lambda g, out, v: [g * expit(v[0])],
    )
)

primitive("square")((np.square, lambda g, out, v: [2.0 * v[0] * g]))


def _sqrt_vjp(g, out, v):
    return [np.divide(g, 2.0 * out, out=np.zeros_like(out), where=out > 0)]


primitive("sqrt")((np.sqrt, _sqrt_vjp))


def _sum_forward(a, *, axis=None, keepdims=False):
    return np.sum(a, axis=normalize_axis(axis, a.ndim), keepdims=keepdims)


def _sum_vjp(g, out, v, *, axis=None, keepdims=False):
    a = v[0]
    axes = normalize_axis(axis, a.ndim)
    if not keepdims:
        g = np.expand_dims(g, axes)
    return [np.broadcast_to(g, a.shape).copy()]


primitive("sum")((_sum_forward, _sum_vjp))


def _mean_forward(a, *, axis=None, keepdims=False):
    return np.mean(a, axis=normalize_axis(axis, a.ndim), keepdims=keepdims)


def _mean_vjp(g, out, v, *, axis=None, keepdims=False):
    a = v[0]
    count = a.size // max(np.size(out), 1) if a.size else 1
    (grad,) = _sum_vjp(g, out, v, axis=axis, keepdims=keepdims)
    return [grad / count]


primitive("mean")((_mean_forward, _mean_vjp))


def _concat_forward(*arrays, axis=-1):
    first = arrays[0]
    for other in arrays[1:]:
        if other.ndim != first.ndim:
            raise ShapeMismatchError("concat", first.shape, other.shape)
        ax = axis % first.ndim
        if any(s1 != s2 for i, (s1, s2) in enumerate(zip(first.shape, other.shape)) if i != ax):
            raise ShapeMismatchError("concat", first.shape, other.shape)
    return np.concatenate(arrays, axis=axis)


def _concat_vjp(g, out, v, *, axis=-1):
    sizes = np.cumsum([a.shape[axis] for a in v])[:-1]
    return list(np.split(g, sizes, axis=axis))


primitive("concat")((_concat_forward, _concat_vjp))


def _getitem_vjp(g, out, v, *, index):
    grad = np.zeros_like(v[0])
    np.add.at(grad, index, g)
    return [grad]


primitive("getitem")((lambda a, *, index: np.array(a[index], dtype=np.float64), _getitem_vjp))


def _reshape_forward(a, *, shape):
    try:
        return a.reshape(shape)
    except ValueError:
        raise ShapeMismatchError("reshape", a.shape, tuple(shape)) from None


primitive("reshape")((_reshape_forward, lambda g, out, v, *, shape: [g.reshape(v[0].shape)]))


def _dot_forward(a, b):
    _check_broadcast("dot", a, b)
    if a.shape[-1:] != b.shape[-1:]:
        raise ShapeMismatchError("dot", a.shape, b.shape)
    return np.sum(a * b, axis=-1)


primitive("dot")(
    (
        _dot_forward,
        lambda g, out, v: [
            unbroadcast(g[..., None] * v[1], v[0].shape),
            unbroadcast(g[..., None] * v[0], v[1].shape),
        ],
    )
)


def _norm_vjp(g, out, v):
    scale = np.divide(g, out, out=np.zeros_like(out), where=out > 0)
    return [scale[..., None] * v[0]]


primitive("norm")((lambda a: np.sqrt(np.sum(a * a, axis=-1)), _norm_vjp))
