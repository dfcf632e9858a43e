"""
Reverse-mode tape.

A :class:`Tape` records every primitive applied to :class:`Var` handles in
topological order. ``backward`` walks the nodes in reverse, ``replay`` walks them
forward again from the stored leaf values.
"""
from dataclasses import dataclass, field

import numpy as np

from autodiff.primitives import PRIMITIVES
from exceptions import DimensionError, ShapeMismatchError

LEAF = "leaf"
CONSTANT = "constant"


@dataclass
class Node:
    op: str
    inputs: tuple[int, ...] = ()
    attrs: dict = field(default_factory=dict)
    name: str = ""
    requires_grad: bool = False


class Var:
    """Handle to one node of a tape."""

    __slots__ = ("_tape", "_index", "_shape")
    __array_ufunc__ = None

    def __init__(self, tape: "Tape", index: int, shape: tuple) -> None:
        self._tape = tape
        self._index = index
        self._shape = tuple(shape)

    @property
    def tape(self) -> "Tape":
        return self._tape

    @property
    def index(self) -> int:
        return self._index

    @property
    def shape(self) -> tuple:
        return self._shape

    @property
    def ndim(self) -> int:
        return len(self._shape)

    @property
    def value(self) -> np.ndarray:
        return self._tape.values[self._index]

    def __repr__(self) -> str:
        node = self._tape.nodes[self._index]
        return f"Var(#{self._index} {node.op} shape={self._shape})"


class Grad:
    """Gradients of a scalar output with respect to every leaf of a tape."""

    def __init__(self, grads: dict[int, np.ndarray]) -> None:
        self._grads = grads

    def __getitem__(self, var: Var) -> np.ndarray:
        return self._grads[var.index]

    def __contains__(self, var: Var) -> bool:
        return var.index in self._grads

    def __len__(self) -> int:
        return len(self._grads)

    def of(self, variables: list[Var]) -> list[np.ndarray]:
        return [self._grads[v.index] for v in variables]


class Tape:
    def __init__(self) -> None:
        self.nodes: list[Node] = []
        self.values: list[np.ndarray] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def _push(self, node: Node, value: np.ndarray) -> Var:
        self.nodes.append(node)
        self.values.append(value)
        return Var(self, len(self.nodes) - 1, value.shape)

    def leaf(self, value, name: str = "") -> Var:
        """Register a differentiable input (a parameter or a data point)."""
        array = np.array(value, dtype=np.float64)
        return self._push(Node(LEAF, name=name, requires_grad=True), array)

    def constant(self, value) -> Var:
        return self._push(Node(CONSTANT), np.array(value, dtype=np.float64))

    def lift(self, item) -> Var:
        if isinstance(item, Var):
            if item.tape is not self:
                raise ValueError("Var belongs to a different tape")
            return item
        return self.constant(item)

    def record(self, op: str, inputs: list, **attrs) -> Var:
        """
        Apply primitive ``op`` to ``inputs`` and append the result to the tape.

        :param op: primitive name, see :data:`autodiff.primitives.PRIMITIVES`.
        :type op: str
        :param inputs: Vars of this tape or array-likes (lifted to constants).
        :type inputs: list
        :return: handle to the new node.
        :rtype: Var
        """
        try:
            prim = PRIMITIVES[op]
        except KeyError:
            raise ValueError(f"unknown primitive '{op}'") from None
        variables = [self.lift(item) for item in inputs]
        values = [self.values[v.index] for v in variables]
        out = np.asarray(prim.forward(*values, **attrs), dtype=np.float64)
        requires_grad = any(self.nodes[v.index].requires_grad for v in variables)
        node = Node(op, tuple(v.index for v in variables), dict(attrs), requires_grad=requires_grad)
        return self._push(node, out)

    def backward(self, output: Var) -> Grad:
        """
        Gradient of a scalar ``output`` with respect to every leaf.

        Leaves the output does not depend on receive zero gradients.
        """
        if output.tape is not self:
            raise ValueError("output belongs to a different tape")
        out_value = self.values[output.index]
        if out_value.size != 1:
            raise DimensionError(f"backward needs a scalar output, got shape {out_value.shape}")

        grads: list[np.ndarray | None] = [None] * (output.index + 1)
        grads[output.index] = np.ones_like(out_value)
        for i in range(output.index, -1, -1):
            g = grads[i]
            node = self.nodes[i]
            if g is None or node.op in (LEAF, CONSTANT) or not node.requires_grad:
                continue
            inputs = [self.values[j] for j in node.inputs]
            in_grads = PRIMITIVES[node.op].vjp(g, self.values[i], inputs, **node.attrs)
            for j, gj in zip(node.inputs, in_grads):
                if gj is None or not self.nodes[j].requires_grad:
                    continue
                grads[j] = gj if grads[j] is None else grads[j] + gj
            grads[i] = None

        leaves = {}
        for i, node in enumerate(self.nodes):
            if node.op != LEAF:
                continue
            g = grads[i] if i < len(grads) else None
            leaves[i] = np.zeros_like(self.values[i]) if g is None else np.asarray(g, dtype=np.float64)
        return Grad(leaves)

    def replay(self, overrides: dict[int, np.ndarray] | None = None) -> list[np.ndarray]:
        """
        Recompute every node from the leaf and constant values.

        :param overrides: replacement values keyed by leaf index.
        :type overrides: dict[int, np.ndarray] | None
        :return: one array per node.
        :rtype: list[np.ndarray]
        """
        overrides = overrides or {}
        values: list[np.ndarray] = []
        for i, node in enumerate(self.nodes):
            if node.op in (LEAF, CONSTANT):
                value = np.asarray(overrides.get(i, self.values[i]), dtype=np.float64)
                if value.shape != self.values[i].shape:
                    raise ShapeMismatchError("replay", self.values[i].shape, value.shape)
                values.append(value)
                continue
            inputs = [values[j] for j in node.inputs]
            values.append(np.asarray(PRIMITIVES[node.op].forward(*inputs, **node.attrs), dtype=np.float64))
        return values
