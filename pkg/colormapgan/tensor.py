"""Dense float64 tensors with reverse-mode gradients.

Only the operations the discriminator, the segmenter and the losses need are
provided. Elementwise arithmetic requires equal shapes or a Python scalar; there is
no broadcasting apart from the bias add inside `functional.conv2d`.
"""

from typing import Callable, Self

import numpy as np

from .exceptions import ShapeMismatchError


class Tensor:
    """A node of the computation graph.

    `data` holds the values as a float64 `numpy.ndarray` in row-major order.
    Image tensors are laid out as (batch, channels, height, width).
    `grad` is `None` until a backward pass reaches the node.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_op")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        _parents: tuple = (),
        _backward: Callable | None = None,
        _op: str = "",
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward
        self._op = _op

    @classmethod
    def from_op(cls, data: np.ndarray, parents: tuple, backward: Callable, op: str) -> Self:
        """Wrap the result of an operation, recording how to backpropagate through it.

        `backward` receives the upstream gradient and returns one gradient (or `None`)
        per parent, in the same order as `parents`.
        """
        if not np.isfinite(data).all():
            raise FloatingPointError(f"Non-finite values produced by {op}")
        requires_grad = any(p.requires_grad for p in parents)
        if requires_grad:
            return cls(data, True, parents, backward, op)
        return cls(data, _op=op)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self._op or 'leaf'})"

    def __float__(self) -> float:
        if self.data.size != 1:
            raise TypeError(f"Only single-element tensors convert to float, shape is {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def _accumulate(self, grad: np.ndarray):
        if self.grad is None:
            self.grad = np.array(grad, dtype=np.float64, copy=True)
        else:
            self.grad += grad

    def backward(self, grad: np.ndarray | None = None):
        """Backpropagate from this node through everything it was computed from.

        Without an explicit `grad` the node must hold a single value, which is seeded
        with 1.
        """
        if grad is None:
            if self.data.size != 1:
                raise ShapeMismatchError(
                    f"backward() without a gradient needs a single-element tensor, got {self.shape}"
                )
            grad = np.ones_like(self.data)
        # Iterative topological sort, deep networks would hit the recursion limit
        topo, visited, stack = [], set(), [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        self._accumulate(grad)
        for node in reversed(topo):
            if node._backward is None or node.grad is None:
                continue
            parent_grads = node._backward(node.grad)
            for parent, parent_grad in zip(node._parents, parent_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                if not np.isfinite(parent_grad).all():
                    raise FloatingPointError(f"Non-finite gradient flowing out of {node._op}")
                parent._accumulate(parent_grad)

    # *** Arithmetic ***
    # Equal shapes or a Python scalar only

    def _check_same_shape(self, other: Self, op: str):
        if self.shape != other.shape:
            raise ShapeMismatchError(f"{op}: shapes {self.shape} and {other.shape} differ")

    def __add__(self, other) -> Self:
        if isinstance(other, Tensor):
            self._check_same_shape(other, "add")
            return Tensor.from_op(
                self.data + other.data, (self, other), lambda g: (g, g), "add"
            )
        elif isinstance(other, (int, float)):
            return Tensor.from_op(self.data + other, (self,), lambda g: (g,), "add")
        return NotImplemented

    def __radd__(self, other) -> Self:
        return self.__add__(other)

    def __neg__(self) -> Self:
        return Tensor.from_op(-self.data, (self,), lambda g: (-g,), "neg")

    def __sub__(self, other) -> Self:
        if isinstance(other, Tensor):
            self._check_same_shape(other, "sub")
            return Tensor.from_op(
                self.data - other.data, (self, other), lambda g: (g, -g), "sub"
            )
        elif isinstance(other, (int, float)):
            return Tensor.from_op(self.data - other, (self,), lambda g: (g,), "sub")
        return NotImplemented

    def __rsub__(self, other) -> Self:
        if isinstance(other, (int, float)):
            return Tensor.from_op(other - self.data, (self,), lambda g: (-g,), "rsub")
        return NotImplemented

    def __mul__(self, other) -> Self:
        if isinstance(other, Tensor):
            self._check_same_shape(other, "mul")
            a, b = self.data, other.data
            return Tensor.from_op(a * b, (self, other), lambda g: (g * b, g * a), "mul")
        elif isinstance(other, (int, float)):
            return Tensor.from_op(self.data * other, (self,), lambda g: (g * other,), "mul")
        return NotImplemented

    def __rmul__(self, other) -> Self:
        return self.__mul__(other)

    def __truediv__(self, other) -> Self:
        if isinstance(other, (int, float)):
            return self.__mul__(1.0 / other)
        return NotImplemented

    def __pow__(self, exponent) -> Self:
        if not isinstance(exponent, (int, float)):
            return NotImplemented
        x = self.data
        return Tensor.from_op(
            x**exponent, (self,), lambda g: (g * exponent * x ** (exponent - 1),), "pow"
        )

    # *** Reductions and reshaping ***

    def sum(self) -> Self:
        shape = self.shape
        return Tensor.from_op(
            np.array(self.data.sum()), (self,), lambda g: (np.full(shape, float(g)),), "sum"
        )

    def mean(self) -> Self:
        n = self.data.size
        shape = self.shape
        return Tensor.from_op(
            np.array(self.data.mean()), (self,), lambda g: (np.full(shape, float(g) / n),), "mean"
        )

    def reshape(self, *shape) -> Self:
        original = self.shape
        return Tensor.from_op(
            self.data.reshape(*shape), (self,), lambda g: (g.reshape(original),), "reshape"
        )

    def transpose(self, *axes) -> Self:
        inverse = np.argsort(axes)
        return Tensor.from_op(
            self.data.transpose(*axes), (self,), lambda g: (g.transpose(*inverse),), "transpose"
        )


class Parameter(Tensor):
    """A learnable tensor with a gradient accumulator of identical shape.

    `grad` is zero-initialised and is reset to zero by the optimizer after each step.
    """

    __slots__ = ("name",)

    def __init__(self, data, name: str = ""):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.grad = np.zeros_like(self.data)

    @property
    def value(self) -> np.ndarray:
        return self.data

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"


def constant(data) -> Tensor:
    """A leaf tensor that no gradient flows into."""
    return Tensor(data, requires_grad=False)
