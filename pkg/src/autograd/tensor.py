"""Reverse-mode automatic differentiation on float64 numpy arrays.

A ``Tensor`` wraps a float64 array. While a ``Tape`` is active, every op
whose inputs require gradients appends one node (inputs, output, backward
rule) to the tape. ``backward(loss)`` walks the tape once in reverse, which is
a valid reverse topological order because nodes are appended as they are
computed.

Example:
    >>> x = Tensor([1.0, 2.0], requires_grad=True)
    >>> with Tape():
    ...     loss = (x * x).sum()
    >>> backward(loss)
    >>> x.grad
    array([2., 4.])
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.models import ContractError

__all__ = [
    "Tensor",
    "Tape",
    "TapeNode",
    "active_tape",
    "backward",
    "as_tensor",
    "unbroadcast",
]

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


@dataclass
class TapeNode:
    """One recorded operation."""
    inputs: Tuple["Tensor", ...]
    output: "Tensor"
    backward: BackwardFn
    op: str


# Section: Tape
_TAPE_STACK: List["Tape"] = []


class Tape:
    """Ordered record of the operations of one forward pass.

    Use as a context manager; a fresh tape per forward pass keeps memory
    bounded. Nodes stay on the tape after the context exits so ``backward``
    can run afterwards.
    """

    def __init__(self) -> None:
        self.nodes: List[TapeNode] = []

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc: object) -> None:
        _TAPE_STACK.remove(self)

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, inputs: Tuple["Tensor", ...], output: "Tensor", backward_fn: BackwardFn, op: str) -> None:
        output.tape_node = len(self.nodes)
        output._tape = self
        self.nodes.append(TapeNode(inputs=inputs, output=output, backward=backward_fn, op=op))

    def reset(self) -> None:
        for node in self.nodes:
            node.output.tape_node = None
            node.output._tape = None
        self.nodes.clear()


def active_tape() -> Optional[Tape]:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


# Section: Tensor
class Tensor:
    """n-dimensional float64 array with optional gradient."""

    __array_priority__ = 100  # make ndarray <op> Tensor defer to Tensor

    def __init__(self, data: Any, requires_grad: bool = False, name: Optional[str] = None) -> None:
        self.data: np.ndarray = np.array(data, dtype=np.float64)
        self.requires_grad: bool = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self.tape_node: Optional[int] = None
        self._tape: Optional[Tape] = None

    @classmethod
    def wrap(cls, array: Any, requires_grad: bool = False) -> "Tensor":
        """Wrap a float64 array without copying it."""
        out = cls.__new__(cls)
        out.data = np.asarray(array, dtype=np.float64)
        out.requires_grad = requires_grad
        out.grad = None
        out.name = None
        out.tape_node = None
        out._tape = None
        return out

    # --- convenience ---
    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        """Copy of the values, cut from the tape."""
        return Tensor(self.data.copy(), requires_grad=False, name=self.name)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        req = ", requires_grad=True" if self.requires_grad else ""
        nm = f", name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}{req}{nm})"

    def __len__(self) -> int:
        return len(self.data)

    # --- operators (implemented in functional) ---
    def __add__(self, other: Any) -> "Tensor":
        from . import functional as F
        return F.add(self, other)

    def __radd__(self, other: Any) -> "Tensor":
        from . import functional as F
        return F.add(other, self)

    def __sub__(self, other: Any) -> "Tensor":
        from . import functional as F
        return F.sub(self, other)

    def __rsub__(self, other: Any) -> "Tensor":
        from . import functional as F
        return F.sub(other, self)

    def __mul__(self, other: Any) -> "Tensor":
        from . import functional as F
        return F.mul(self, other)

    def __rmul__(self, other: Any) -> "Tensor":
        from . import functional as F
        return F.mul(other, self)

    def __truediv__(self, other: Any) -> "Tensor":
        from . import functional as F
        return F.div(self, other)

    def __rtruediv__(self, other: Any) -> "Tensor":
        from . import functional as F
        return F.div(other, self)

    def __neg__(self) -> "Tensor":
        from . import functional as F
        return F.neg(self)

    def __matmul__(self, other: Any) -> "Tensor":
        from . import functional as F
        return F.matmul(self, other)

    def __pow__(self, exponent: float) -> "Tensor":
        from . import functional as F
        return F.power(self, exponent)

    def __getitem__(self, index: Any) -> "Tensor":
        from . import functional as F
        return F.getitem(self, index)

    def sum(self, axis: Any = None, keepdims: bool = False) -> "Tensor":
        from . import functional as F
        return F.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: Any = None, keepdims: bool = False) -> "Tensor":
        from . import functional as F
        return F.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape: Any) -> "Tensor":
        from . import functional as F
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return F.reshape(self, shape)

    def transpose(self, *axes: int) -> "Tensor":
        from . import functional as F
        return F.transpose(self, axes or None)

    def backward(self) -> None:
        backward(self)


def as_tensor(value: Any) -> Tensor:
    """Wrap constants; tensors pass through unchanged."""
    return value if isinstance(value, Tensor) else Tensor(value)


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# Section: Backward Pass
def backward(loss: Tensor) -> None:
    """Populate ``.grad`` of every requires_grad ancestor of a scalar loss.

    Gradients accumulate across calls until ``zero_grad``.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    tape = loss._tape
    if tape is None or loss.tape_node is None:
        raise ContractError("loss was not computed on a tape (wrap the forward pass in 'with Tape()')")

    pending: Dict[int, Tuple[Tensor, np.ndarray]] = {id(loss): (loss, np.ones_like(loss.data))}
    for node in reversed(tape.nodes[: loss.tape_node + 1]):
        entry = pending.pop(id(node.output), None)
        if entry is None:
            continue
        out, g = entry
        _accumulate_grad(out, g)
        input_grads = node.backward(g)
        for tensor, grad in zip(node.inputs, input_grads):
            if grad is None or not tensor.requires_grad:
                continue
            grad = unbroadcast(np.asarray(grad, dtype=np.float64), tensor.shape)
            key = id(tensor)
            if key in pending:
                pending[key] = (tensor, pending[key][1] + grad)
            else:
                pending[key] = (tensor, grad)

    # Leaves: tensors never produced by a node on this tape
    for tensor, grad in pending.values():
        _accumulate_grad(tensor, grad)


def _accumulate_grad(tensor: Tensor, grad: np.ndarray) -> None:
    if not tensor.requires_grad:
        return
    tensor.grad = grad.copy() if tensor.grad is None else tensor.grad + grad
