"""Dense array with reverse-mode gradient tracking.

Each :class:`Tensor` produced by an operation records its parents and a
closure mapping the upstream gradient to one gradient per parent.  Nodes
receive a monotonically increasing id at construction, so the backward
pass can visit the reachable subgraph in exact reverse construction
order without a separate tape object.
"""

from __future__ import annotations

import contextlib
import itertools
from collections.abc import Callable, Iterable, Sequence

import numpy as np

from ..errors import ContractError, DimensionError, NonFiniteError

_ids = itertools.count()
_debug = False

BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


def set_debug(enabled: bool) -> None:
    """Toggle finiteness checks on every operation output."""
    global _debug
    _debug = bool(enabled)


@contextlib.contextmanager
def debug_mode():
    previous = _debug
    set_debug(True)
    try:
        yield
    finally:
        set_debug(previous)


class Tensor:
    __slots__ = ("backward_fn", "data", "grad", "id", "op", "parents", "requires_grad")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        *,
        dtype=None,
        parents: tuple[Tensor, ...] = (),
        backward_fn: BackwardFn | None = None,
        op: str = "leaf",
    ):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        if _debug and not np.all(np.isfinite(arr)):
            raise NonFiniteError(f"non-finite values produced by '{op}'")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.parents = parents
        self.backward_fn = backward_fn
        self.op = op
        self.id = next(_ids)

    # -- basic properties -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return not self.parents

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op!r}, requires_grad={self.requires_grad})"

    # -- operator sugar; implementations live in ops ------------------------
    def __add__(self, other):
        from . import ops

        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops

        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops

        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops

        return ops.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from . import ops

        return ops.mul(self, -1.0)

    def __truediv__(self, other):
        from . import ops

        if isinstance(other, Tensor):
            raise TypeError("division by a Tensor is not supported")
        return ops.mul(self, 1.0 / other)

    def __matmul__(self, other):
        from . import ops

        return ops.matmul(self, other)

    def __pow__(self, exponent):
        from . import ops

        return ops.power(self, exponent)

    def reshape(self, *shape):
        from . import ops

        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def transpose(self, *axes):
        from . import ops

        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return ops.transpose(self, axes or None)

    def sum(self, axis=None, keepdims: bool = False):
        from . import ops

        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        from . import ops

        return ops.mean(self, axis=axis, keepdims=keepdims)


def as_tensor(value, dtype=None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value, dtype=dtype)


def make_node(
    data: np.ndarray, parents: Iterable[Tensor], backward_fn: BackwardFn, op: str
) -> Tensor:
    """Wrap an op result; graph edges are kept only when a parent needs gradients."""
    parents = tuple(parents)
    if any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, parents=parents, backward_fn=backward_fn, op=op)
    return Tensor(data, op=op)


def backward(loss: Tensor, leaves: Iterable[Tensor] | None = None) -> dict[Tensor, np.ndarray]:
    """Accumulate d(loss)/d(node) for every node reachable from ``loss``.

    Returns gradients keyed by leaf tensor.  When ``leaves`` is given, each
    of them appears in the result, with a zero array if no path connects
    it to the loss.  Leaf ``.grad`` attributes are set as a side effect.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")

    # collect the reachable subgraph
    seen: dict[int, Tensor] = {}
    stack = [loss]
    while stack:
        node = stack.pop()
        if node.id in seen or not node.requires_grad:
            continue
        seen[node.id] = node
        stack.extend(node.parents)

    grads: dict[int, np.ndarray] = {loss.id: np.ones_like(loss.data)}
    result: dict[Tensor, np.ndarray] = {}
    for node_id in sorted(seen, reverse=True):
        node = seen[node_id]
        g = grads.pop(node_id, None)
        if g is None:
            continue
        if node.is_leaf:
            node.grad = g
            result[node] = g
            continue
        parent_grads = node.backward_fn(g)
        for parent, pg in zip(node.parents, parent_grads):
            if pg is None or not parent.requires_grad:
                continue
            if pg.shape != parent.data.shape:
                raise DimensionError(
                    f"gradient shape {pg.shape} does not match node shape {parent.data.shape} "
                    f"in op '{node.op}'"
                )
            if parent.id in grads:
                grads[parent.id] = grads[parent.id] + pg
            else:
                grads[parent.id] = pg

    if leaves is not None:
        for leaf in leaves:
            if leaf not in result:
                zero = np.zeros_like(leaf.data)
                leaf.grad = zero
                result[leaf] = zero
    return result
