"""
Differentiable operations.

Every function accepts plain arrays, taped :class:`~autodiff.tape.Var` handles or
:class:`~autodiff.dual.Dual` numbers:

- only arrays: evaluated eagerly with numpy, nothing is recorded;
- any Var: recorded on that Var's tape;
- any Dual: the forward-mode rule runs, building primal and tangent with these same
  functions, so a Dual whose components are Vars yields a differentiable tangent.
"""
from typing import Callable

import numpy as np

from autodiff.dual import Dual
from autodiff.primitives import PRIMITIVES, normalize_axis
from autodiff.tape import Var
from exceptions import ShapeMismatchError

_JVP_RULES: dict[str, Callable[..., Dual]] = {}


def value(x) -> np.ndarray:
    """Numeric value of an array, Var or Dual primal."""
    if isinstance(x, Dual):
        return value(x.primal)
    if isinstance(x, Var):
        return x.value
    return np.asarray(x, dtype=np.float64)


def shape(x) -> tuple:
    if isinstance(x, (Var, Dual)):
        return x.shape
    return np.shape(x)


def _as_dual(x) -> Dual:
    if isinstance(x, Dual):
        return x
    if isinstance(x, Var):
        return Dual(x)
    return Dual(np.asarray(x, dtype=np.float64))


def _tape_of(args):
    for a in args:
        if isinstance(a, Var):
            return a.tape
    return None


def _apply(op: str, *args, **attrs):
    if any(isinstance(a, Dual) for a in args):
        return _JVP_RULES[op](*[_as_dual(a) for a in args], **attrs)
    tape = _tape_of(args)
    if tape is not None:
        return tape.record(op, list(args), **attrs)
    arrays = [np.asarray(a, dtype=np.float64) for a in args]
    return np.asarray(PRIMITIVES[op].forward(*arrays, **attrs), dtype=np.float64)


def add(a, b):
    return _apply("add", a, b)


def sub(a, b):
    return _apply("sub", a, b)


def mul(a, b):
    return _apply("mul", a, b)


def div(a, b):
    return _apply("div", a, b)


def neg(a):
    return _apply("neg", a)


def scalar_mul(a, c: float):
    return _apply("scalar_mul", a, c=float(c))


def matmul(a, b):
    return _apply("matmul", a, b)


def transpose(a):
    return _apply("transpose", a)


def leaky_relu(a, slope: float = 0.01):
    return _apply("leaky_relu", a, slope=float(slope))


def sigmoid(a):
    return _apply("sigmoid", a)


def exp(a):
    return _apply("exp", a)


def log(a):
    return _apply("log", a)


def softplus(a):
    return _apply("softplus", a)


def square(a):
    return _apply("square", a)


def sqrt(a):
    return _apply("sqrt", a)


def reduce_sum(a, axis=None, keepdims: bool = False):
    return _apply("sum", a, axis=axis, keepdims=keepdims)


def reduce_mean(a, axis=None, keepdims: bool = False):
    return _apply("mean", a, axis=axis, keepdims=keepdims)


def concat(items: list, axis: int = -1):
    return _apply("concat", *items, axis=axis)


def getitem(a, index):
    return _apply("getitem", a, index=index)


def reshape(a, new_shape: tuple):
    return _apply("reshape", a, shape=tuple(new_shape))


def dot(a, b):
    """Inner product along the last axis."""
    return _apply("dot", a, b)


def norm(a):
    """Euclidean norm along the last axis."""
    return _apply("norm", a)


def cosine_similarity(a, b):
    return div(dot(a, b), mul(norm(a), norm(b)))


# forward-mode rules


def _rule(name: str):
    def register(fn):
        _JVP_RULES[name] = fn
        return fn

    return register


def _prefix(d: Dual) -> tuple:
    if d.tangent is None:
        return ()
    tangent_shape = shape(d.tangent)
    return tuple(tangent_shape[: len(tangent_shape) - d.ndim])


def _tadd(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return add(a, b)


@_rule("add")
def _add_jvp(a: Dual, b: Dual) -> Dual:
    return Dual(add(a.primal, b.primal), _tadd(a.tangent, b.tangent))


@_rule("sub")
def _sub_jvp(a: Dual, b: Dual) -> Dual:
    tb = None if b.tangent is None else neg(b.tangent)
    return Dual(sub(a.primal, b.primal), _tadd(a.tangent, tb))


@_rule("mul")
def _mul_jvp(a: Dual, b: Dual) -> Dual:
    ta = None if a.tangent is None else mul(a.tangent, b.primal)
    tb = None if b.tangent is None else mul(a.primal, b.tangent)
    return Dual(mul(a.primal, b.primal), _tadd(ta, tb))


@_rule("div")
def _div_jvp(a: Dual, b: Dual) -> Dual:
    out = div(a.primal, b.primal)
    ta = None if a.tangent is None else div(a.tangent, b.primal)
    tb = None if b.tangent is None else neg(div(mul(out, b.tangent), b.primal))
    return Dual(out, _tadd(ta, tb))


@_rule("neg")
def _neg_jvp(a: Dual) -> Dual:
    return Dual(neg(a.primal), None if a.tangent is None else neg(a.tangent))


@_rule("scalar_mul")
def _scalar_mul_jvp(a: Dual, *, c: float) -> Dual:
    return Dual(scalar_mul(a.primal, c), None if a.tangent is None else scalar_mul(a.tangent, c))


@_rule("matmul")
def _matmul_jvp(a: Dual, b: Dual) -> Dual:
    ta = None if a.tangent is None else matmul(a.tangent, b.primal)
    tb = None
    if b.tangent is not None:
        if not _prefix(b):
            tb = matmul(a.primal, b.tangent)
        elif b.ndim == 1 and a.ndim == 2:
            tb = matmul(b.tangent, transpose(a.primal))
        else:
            raise ShapeMismatchError("matmul tangent", shape(a.primal), shape(b.tangent))
    return Dual(matmul(a.primal, b.primal), _tadd(ta, tb))


@_rule("transpose")
def _transpose_jvp(a: Dual) -> Dual:
    if _prefix(a):
        raise ShapeMismatchError("transpose tangent", a.shape, shape(a.tangent))
    return Dual(transpose(a.primal), None if a.tangent is None else transpose(a.tangent))


@_rule("leaky_relu")
def _leaky_relu_jvp(a: Dual, *, slope: float) -> Dual:
    out = leaky_relu(a.primal, slope)
    if a.tangent is None:
        return Dual(out)
    mask = np.where(value(a.primal) > 0, 1.0, slope)
    return Dual(out, mul(a.tangent, mask))


@_rule("sigmoid")
def _sigmoid_jvp(a: Dual) -> Dual:
    s = sigmoid(a.primal)
    if a.tangent is None:
        return Dual(s)
    return Dual(s, mul(a.tangent, mul(s, sub(1.0, s))))


@_rule("exp")
def _exp_jvp(a: Dual) -> Dual:
    e = exp(a.primal)
    return Dual(e, None if a.tangent is None else mul(a.tangent, e))


@_rule("log")
def _log_jvp(a: Dual) -> Dual:
    return Dual(log(a.primal), None if a.tangent is None else div(a.tangent, a.primal))


@_rule("softplus")
def _softplus_jvp(a: Dual) -> Dual:
    out = softplus(a.primal)
    return Dual(out, None if a.tangent is None else mul(a.tangent, sigmoid(a.primal)))


@_rule("square")
def _square_jvp(a: Dual) -> Dual:
    out = square(a.primal)
    return Dual(out, None if a.tangent is None else mul(a.tangent, scalar_mul(a.primal, 2.0)))


@_rule("sqrt")
def _sqrt_jvp(a: Dual) -> Dual:
    r = sqrt(a.primal)
    return Dual(r, None if a.tangent is None else div(a.tangent, scalar_mul(r, 2.0)))


def _tangent_axes(a: Dual, axis) -> tuple:
    return tuple(ax - a.ndim for ax in normalize_axis(axis, a.ndim))


@_rule("sum")
def _sum_jvp(a: Dual, *, axis=None, keepdims=False) -> Dual:
    out = reduce_sum(a.primal, axis, keepdims)
    if a.tangent is None:
        return Dual(out)
    return Dual(out, reduce_sum(a.tangent, _tangent_axes(a, axis), keepdims))


@_rule("mean")
def _mean_jvp(a: Dual, *, axis=None, keepdims=False) -> Dual:
    out = reduce_mean(a.primal, axis, keepdims)
    if a.tangent is None:
        return Dual(out)
    return Dual(out, reduce_mean(a.tangent, _tangent_axes(a, axis), keepdims))


@_rule("concat")
def _concat_jvp(*items: Dual, axis=-1) -> Dual:
    out = concat([d.primal for d in items], axis)
    carriers = [d for d in items if d.tangent is not None]
    if not carriers:
        return Dual(out)
    prefix = _prefix(carriers[0])
    tangents = [
        d.tangent if d.tangent is not None else np.zeros(prefix + d.shape)
        for d in items
    ]
    neg_axis = axis % items[0].ndim - items[0].ndim
    return Dual(out, concat(tangents, neg_axis))


@_rule("getitem")
def _getitem_jvp(a: Dual, *, index) -> Dual:
    out = getitem(a.primal, index)
    if a.tangent is None:
        return Dual(out)
    index = index if isinstance(index, tuple) else (index,)
    lead = (slice(None),) * len(_prefix(a))
    return Dual(out, getitem(a.tangent, lead + index))


@_rule("reshape")
def _reshape_jvp(a: Dual, *, shape) -> Dual:
    out = reshape(a.primal, shape)
    if a.tangent is None:
        return Dual(out)
    return Dual(out, reshape(a.tangent, _prefix(a) + tuple(shape)))


@_rule("dot")
def _dot_jvp(a: Dual, b: Dual) -> Dual:
    ta = None if a.tangent is None else dot(a.tangent, b.primal)
    tb = None if b.tangent is None else dot(a.primal, b.tangent)
    return Dual(dot(a.primal, b.primal), _tadd(ta, tb))


@_rule("norm")
def _norm_jvp(a: Dual) -> Dual:
    n = norm(a.primal)
    if a.tangent is None:
        return Dual(n)
    return Dual(n, div(dot(a.primal, a.tangent), n))


# operator overloading for Var and Dual


def _power(a, exponent):
    if exponent == 2:
        return square(a)
    if exponent == 0.5:
        return sqrt(a)
    raise ValueError(f"only powers 2 and 0.5 are differentiable, got {exponent}")


def _install_operators(cls) -> None:
    cls.__add__ = lambda self, other: add(self, other)
    cls.__radd__ = lambda self, other: add(other, self)
    cls.__sub__ = lambda self, other: sub(self, other)
    cls.__rsub__ = lambda self, other: sub(other, self)
    cls.__mul__ = lambda self, other: mul(self, other)
    cls.__rmul__ = lambda self, other: mul(other, self)
    cls.__truediv__ = lambda self, other: div(self, other)
    cls.__rtruediv__ = lambda self, other: div(other, self)
    cls.__neg__ = lambda self: neg(self)
    cls.__matmul__ = lambda self, other: matmul(self, other)
    cls.__rmatmul__ = lambda self, other: matmul(other, self)
    cls.__getitem__ = lambda self, index: getitem(self, index)
    cls.__pow__ = _power


_install_operators(Var)
_install_operators(Dual)
