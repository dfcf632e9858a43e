"""
Parameter bundles of the two fields learned by the system.

DynamicsNet:
    - Velocity field f(x, t): input d + 1 (state plus time column), hidden leaky-ReLU layers, linear output of size d.
        - Attributes:
            - weights: tuple of (fan_in, fan_out) matrices.
            - biases: tuple of fan_out vectors.
            - slope: negative slope of the hidden activations.

GrowthNet:
    - Growth field G(x, t): same wiring with a single output passed through softplus, so it maps to R+.

Both are immutable values. ``forward`` accepts numpy arrays, taped Vars or duals for ``x``
and optionally a replacement parameter list, which is how the trainer differentiates
with respect to the weights.
"""
from dataclasses import dataclass, replace

import numpy as np

from autodiff import ops
from exceptions import DimensionError, NonFiniteInputError

DYNAMICS_HIDDEN = (64, 64, 64)
GROWTH_HIDDEN = (64, 64)
LEAKY_SLOPE = 0.01


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class MLP:
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    slope: float = LEAKY_SLOPE

    def __post_init__(self) -> None:
        if len(self.weights) != len(self.biases) or not self.weights:
            raise DimensionError("weights and biases must pair up layer by layer")
        object.__setattr__(self, "weights", tuple(_frozen(w) for w in self.weights))
        object.__setattr__(self, "biases", tuple(_frozen(b) for b in self.biases))
        for w, b in zip(self.weights, self.biases):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise DimensionError(f"layer shapes {w.shape} and {b.shape} do not fit")
        for w_in, w_out in zip(self.weights, self.weights[1:]):
            if w_in.shape[1] != w_out.shape[0]:
                raise DimensionError(f"layer widths {w_in.shape} -> {w_out.shape} do not chain")

    @property
    def dim(self) -> int:
        return self.weights[0].shape[0] - 1

    @property
    def hidden(self) -> tuple[int, ...]:
        return tuple(w.shape[1] for w in self.weights[:-1])

    @property
    def n_parameters(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def parameters(self) -> list[np.ndarray]:
        """Parameters interleaved as ``[W0, b0, W1, b1, ...]``."""
        params = []
        for w, b in zip(self.weights, self.biases):
            params.extend((w, b))
        return params

    def with_parameters(self, params: list[np.ndarray]):
        if len(params) != 2 * len(self.weights):
            raise DimensionError(f"expected {2 * len(self.weights)} parameter arrays, got {len(params)}")
        for new, old in zip(params, self.parameters()):
            if np.shape(new) != old.shape:
                raise DimensionError(f"parameter shape {np.shape(new)} does not match {old.shape}")
        return replace(self, weights=tuple(params[0::2]), biases=tuple(params[1::2]))

    def _head(self, h):
        return h

    def forward(self, x, t, params: list | None = None):
        """
        Evaluate the network on one point ``(d,)`` or a batch ``(B, d)``.

        :param x: positions as array, Var or Dual.
        :param t: time, a scalar shared by the batch or one value per row.
        :type t: float | np.ndarray
        :param params: replacement for :meth:`parameters` (e.g. taped leaves).
        :type params: list | None
        :return: network output with the batch layout of ``x``.
        """
        params = self.parameters() if params is None else params
        x_shape = ops.shape(x)
        time_column = np.broadcast_to(np.asarray(t, dtype=np.float64)[..., None], tuple(x_shape[:-1]) + (1,))
        h = ops.concat([x, time_column], axis=-1)
        n_layers = len(params) // 2
        for layer in range(n_layers):
            h = ops.add(ops.matmul(h, params[2 * layer]), params[2 * layer + 1])
            if layer < n_layers - 1:
                h = ops.leaky_relu(h, self.slope)
        return self._head(h)


@dataclass(frozen=True, eq=False)
class DynamicsNet(MLP):
    pass


@dataclass(frozen=True, eq=False)
class GrowthNet(MLP):
    def _head(self, h):
        return ops.softplus(h)


def _uniform_layers(rng: np.random.Generator, sizes: list[int]) -> tuple[list, list]:
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return weights, biases


def init_dynamics(
    dim: int, seed: int, hidden: tuple[int, ...] = DYNAMICS_HIDDEN, slope: float = LEAKY_SLOPE
) -> DynamicsNet:
    """
    Fresh velocity field with fan-in uniform initialization.

    :param dim: state dimension d.
    :type dim: int
    :param seed: seed of the initialization stream.
    :type seed: int
    :return: new network mapping (d + 1) inputs to d outputs.
    :rtype: DynamicsNet
    """
    if dim < 1:
        raise DimensionError(f"dimension must be at least 1, got {dim}")
    rng = np.random.default_rng(seed)
    weights, biases = _uniform_layers(rng, [dim + 1, *hidden, dim])
    return DynamicsNet(tuple(weights), tuple(biases), slope)


def init_growth(
    dim: int, seed: int, hidden: tuple[int, ...] = GROWTH_HIDDEN, slope: float = LEAKY_SLOPE
) -> GrowthNet:
    if dim < 1:
        raise DimensionError(f"dimension must be at least 1, got {dim}")
    rng = np.random.default_rng(seed)
    weights, biases = _uniform_layers(rng, [dim + 1, *hidden, 1])
    return GrowthNet(tuple(weights), tuple(biases), slope)


def _check_inputs(net: MLP, x, t: float) -> None:
    x_value = ops.value(x)
    if x_value.ndim == 0 or x_value.shape[-1] != net.dim:
        raise DimensionError(f"network expects dimension {net.dim}, got input shape {x_value.shape}")
    if not np.all(np.isfinite(x_value)) or not np.all(np.isfinite(t)):
        raise NonFiniteInputError("network inputs must be finite")


def evaluate_f(net: DynamicsNet, x, t: float, params: list | None = None):
    """Velocity f(x, t) with input validation."""
    _check_inputs(net, x, t)
    return net.forward(x, t, params)


def evaluate_g(net: GrowthNet, x, t: float, params: list | None = None):
    """Growth rate G(x, t) > 0, squeezed to one value per point."""
    _check_inputs(net, x, t)
    out = net.forward(x, t, params)
    return ops.reshape(out, tuple(ops.shape(out)[:-1]))
