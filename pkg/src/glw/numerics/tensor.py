"""Dense float64 tensors with a reverse-mode gradient tape.

Every primitive records its parents and a closure that pushes the output
gradient back to them. ``backward`` sorts the reachable graph topologically
and visits each node once.
"""
from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from glw.errors import ConfigError, ContractError, DimensionError, EmptyBatchError, NonFiniteError


def _as_array(value) -> np.ndarray:
    return np.array(value, dtype=np.float64)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = _as_array(data)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self.op = "leaf"
        self.name = name
        if not np.all(np.isfinite(self.data)):
            raise NonFiniteError(f"non-finite values in leaf {name or ''}".strip(), op="leaf")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, op={self.op}{tag})"

    # operator sugar -------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise ContractError("division is only defined by a constant")
        return mul(self, 1.0 / float(other))

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis: int | None = None):
        return reduce_sum(self, axis)

    def mean(self, axis: int | None = None):
        return reduce_mean(self, axis)

    def backward(self) -> None:
        backward(self)


def tensor(data, requires_grad: bool = False, name: str | None = None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, name=name)


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data: np.ndarray, parents: Sequence[Tensor], op: str,
            backward_fn: Callable[[np.ndarray], None]) -> Tensor:
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"non-finite output from op '{op}'", op=op)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    out.op = op
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward_fn
    else:
        out._parents = ()
        out._backward = None
    return out


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        t.grad = t.grad + g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# elementwise ---------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    _check_broadcast(a, b, "add")

    def _bw(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    return _result(a.data + b.data, (a, b), "add", _bw)


def sub(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    _check_broadcast(a, b, "sub")

    def _bw(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(-g, b.shape))

    return _result(a.data - b.data, (a, b), "sub", _bw)


def mul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    _check_broadcast(a, b, "mul")

    def _bw(g):
        _accumulate(a, _unbroadcast(g * b.data, a.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.shape))

    return _result(a.data * b.data, (a, b), "mul", _bw)


def square(a) -> Tensor:
    a = _lift(a)

    def _bw(g):
        _accumulate(a, 2.0 * a.data * g)

    return _result(a.data * a.data, (a,), "square", _bw)


def tanh(a) -> Tensor:
    a = _lift(a)
    y = np.tanh(a.data)

    def _bw(g):
        _accumulate(a, g * (1.0 - y * y))

    return _result(y, (a,), "tanh", _bw)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign so neither branch overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def logistic(a) -> Tensor:
    a = _lift(a)
    y = _sigmoid(a.data)

    def _bw(g):
        _accumulate(a, g * y * (1.0 - y))

    return _result(y, (a,), "logistic", _bw)


def relu(a) -> Tensor:
    a = _lift(a)
    mask = (a.data > 0).astype(np.float64)

    def _bw(g):
        _accumulate(a, g * mask)

    return _result(a.data * mask, (a,), "relu", _bw)


_NONLINEAR = {"tanh": tanh, "logistic": logistic, "sigmoid": logistic, "relu": relu}


def nonlinear(x, kind: str) -> Tensor:
    """Apply ``tanh``, ``logistic`` or ``relu`` elementwise."""
    try:
        fn = _NONLINEAR[kind]
    except KeyError:
        raise ConfigError(f"unknown nonlinearity {kind!r}; expected one of tanh, logistic, relu") from None
    return fn(x)


# linear algebra --------------------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")

    def _bw(g):
        if a.requires_grad:
            _accumulate(a, g @ b.data.T)
        if b.requires_grad:
            _accumulate(b, a.data.T @ g)

    return _result(a.data @ b.data, (a, b), "matmul", _bw)


def transpose(a) -> Tensor:
    a = _lift(a)
    if a.ndim != 2:
        raise DimensionError(f"transpose needs a matrix, got shape {a.shape}")

    def _bw(g):
        _accumulate(a, g.T)

    return _result(a.data.T.copy(), (a,), "transpose", _bw)


def affine(x, W, b) -> Tensor:
    """Row-batched affine map ``x @ W + b`` with ``b`` broadcast over rows."""
    x, W, b = _lift(x), _lift(W), _lift(b)
    if x.ndim != 2 or W.ndim != 2 or b.ndim != 1 or x.shape[1] != W.shape[0] or W.shape[1] != b.shape[0]:
        raise DimensionError(f"affine: x{x.shape} @ W{W.shape} + b{b.shape} is not defined")
    xd, Wd = x.data, W.data

    def _bw(g):
        if x.requires_grad:
            _accumulate(x, g @ Wd.T)
        if W.requires_grad:
            _accumulate(W, xd.T @ g)
        if b.requires_grad:
            _accumulate(b, g.sum(axis=0))

    return _result(xd @ Wd + b.data, (x, W, b), "affine", _bw)


# reductions and indexing --------------------------------------------------

def reduce_sum(a, axis: int | None = None) -> Tensor:
    a = _lift(a)
    shape = a.shape

    def _bw(g):
        if axis is None:
            _accumulate(a, np.broadcast_to(g, shape))
        else:
            _accumulate(a, np.broadcast_to(np.expand_dims(g, axis), shape))

    return _result(np.asarray(a.data.sum(axis=axis), dtype=np.float64), (a,), "sum", _bw)


def reduce_mean(a, axis: int | None = None) -> Tensor:
    a = _lift(a)
    count = a.data.size if axis is None else a.shape[axis]
    if count == 0:
        raise EmptyBatchError("mean over an empty axis")
    return mul(reduce_sum(a, axis), 1.0 / count)


def take_rows(a, index) -> Tensor:
    a = _lift(a)
    idx = np.asarray(index, dtype=np.int64)

    def _bw(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        _accumulate(a, full)

    return _result(a.data[idx], (a,), "take_rows", _bw)


def concat_columns(parts: Sequence[Tensor]) -> Tensor:
    parts = [_lift(p) for p in parts]
    widths = [p.shape[1] for p in parts]
    offsets = np.cumsum([0] + widths)

    def _bw(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            _accumulate(p, g[:, lo:hi])

    return _result(np.concatenate([p.data for p in parts], axis=1), tuple(parts), "concat", _bw)


# losses -------------------------------------------------------------------

def loss_mse(pred, target) -> Tensor:
    """Mean over all entries of the squared difference."""
    pred, target = _lift(pred), _lift(target)
    if pred.shape != target.shape:
        raise DimensionError(f"loss_mse: prediction {pred.shape} vs target {target.shape}")
    if pred.ndim == 0 or pred.shape[0] == 0:
        raise EmptyBatchError("loss_mse on an empty batch")
    diff = pred.data - target.data
    n = diff.size

    def _bw(g):
        _accumulate(pred, g * 2.0 * diff / n)
        _accumulate(target, -g * 2.0 * diff / n)

    return _result(np.asarray((diff * diff).sum() / n), (pred, target), "mse", _bw)


def sum_squares(a) -> Tensor:
    a = _lift(a)

    def _bw(g):
        _accumulate(a, 2.0 * g * a.data)

    return _result(np.asarray((a.data * a.data).sum()), (a,), "sum_squares", _bw)


def softmax_cross_entropy(logits, labels) -> Tensor:
    """Mean negative log-likelihood of integer ``labels`` under softmax(logits)."""
    logits = _lift(logits)
    y = np.asarray(labels, dtype=np.int64)
    n = logits.shape[0]
    if n == 0:
        raise EmptyBatchError("cross-entropy on an empty batch")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_p = shifted - log_z
    loss = -log_p[np.arange(n), y].sum() / n

    def _bw(g):
        p = np.exp(log_p)
        p[np.arange(n), y] -= 1.0
        _accumulate(logits, g * p / n)

    return _result(np.asarray(loss), (logits,), "softmax_xent", _bw)


# tape ---------------------------------------------------------------------

class Tape:
    """Topologically ordered view of everything upstream of a root tensor."""

    def __init__(self, root: Tensor):
        self.root = root
        self.nodes: list[Tensor] = self._toposort(root)

    @staticmethod
    def _toposort(root: Tensor) -> list[Tensor]:
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        return order

    def leaves(self) -> list[Tensor]:
        return [n for n in self.nodes if n.requires_grad and not n._parents]

    def run(self) -> None:
        root = self.root
        # interior nodes keep their gradient in a side table so that only
        # leaves end up holding .grad after the pass
        for node in self.nodes:
            if node._parents:
                node.grad = None
        root_grad = np.ones_like(root.data)
        if root._parents:
            root.grad = root_grad
        else:
            _accumulate(root, root_grad)
        for node in reversed(self.nodes):
            if node._backward is None or node.grad is None:
                continue
            g = node.grad
            node._backward(g)
            if not np.all(np.isfinite(g)):
                raise NonFiniteError(f"non-finite gradient through op '{node.op}'", op=node.op)
            node.grad = None


def backward(loss: Tensor) -> None:
    """Populate ``.grad`` on every leaf upstream of ``loss`` that requires it.

    Gradients accumulate across calls until the caller clears them.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar root, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    Tape(loss).run()


def zero_grads(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None
