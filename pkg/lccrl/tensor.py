"""Tensor

Dense tensors with define-by-run reverse-mode differentiation. Every operation in this module computes its result
with numpy and, when a Tape is active and any input requires a gradient, records a node holding the inputs and a
closure producing the partial derivatives. Tape.backward walks the nodes in reverse to populate `grad`.

There is no implicit broadcasting: binary operations accept equal shapes or a scalar operand only. Explicit
tiling is available through `repeat`.
"""
import logging
import threading

import numpy as np

from lccrl.errors import ContractError, DomainError, ShapeError


log = logging.getLogger(__name__)

DEFAULT_DTYPE = np.float64

_local = threading.local()


class Tensor:
    """
    An n-dimensional real array that may take part in a gradient tape.
    """

    def __init__(self, values, requires_grad=False, dtype=None):
        """
        :param values: Array-like values, stored row-major
        :param requires_grad: Whether backward passes should populate `grad` for this tensor
        :param dtype: Explicit numpy dtype; floating arrays keep their own dtype otherwise
        """
        if dtype is None:
            if isinstance(values, np.ndarray) and values.dtype.kind == 'f':
                dtype = values.dtype
            else:
                dtype = DEFAULT_DTYPE
        self.data = np.asarray(values, dtype=dtype)
        self.requires_grad = requires_grad
        self.grad = None
        self._tape = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return "Tensor(shape={0}, requires_grad={1})".format(self.shape, self.requires_grad)


class _Node:
    __slots__ = ('output', 'inputs', 'backward')

    def __init__(self, output, inputs, backward_fn):
        self.output = output
        self.inputs = inputs
        self.backward = backward_fn


class Tape:
    """
    Ordered record of the operations of one forward pass. Used as a context manager; tapes nest per thread.
    """

    def __init__(self):
        self.nodes = []

    def __enter__(self):
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        _tape_stack().pop()
        return False

    def record(self, output: Tensor, inputs: tuple, backward_fn) -> None:
        self.nodes.append(_Node(output, inputs, backward_fn))

    def backward(self, loss: Tensor) -> None:
        """
        Populate `grad` for every tensor that requires one and is reachable from the loss. Leaf gradients are
        accumulated, so callers zero them between optimisation steps.

        :param loss: A scalar tensor produced under this tape
        :raises ContractError: If the loss is not a scalar
        """
        if loss.ndim != 0:
            raise ContractError("backward needs a scalar loss, got shape {0}".format(loss.shape))
        grads = {id(loss): np.ones_like(loss.data)}
        leaves = {id(loss): loss}
        for node in reversed(self.nodes):
            grad = grads.pop(id(node.output), None)
            leaves.pop(id(node.output), None)
            if grad is None:
                continue
            node.output.grad = grad
            for tensor, partial in zip(node.inputs, node.backward(grad)):
                if partial is None or not tensor.requires_grad:
                    continue
                key = id(tensor)
                if key in grads:
                    grads[key] = grads[key] + partial
                else:
                    grads[key] = partial
                    leaves[key] = tensor
        for key, grad in grads.items():
            tensor = leaves[key]
            tensor.grad = grad if tensor.grad is None else tensor.grad + grad


def _tape_stack() -> list:
    if not hasattr(_local, 'tapes'):
        _local.tapes = []
    return _local.tapes


def current_tape():
    stack = _tape_stack()
    return stack[-1] if stack else None


def backward(loss: Tensor) -> None:
    """
    Run the backward pass of the tape that produced the loss.

    :param loss: Scalar tensor
    :raises ContractError: If the loss is not scalar or was not produced under a tape
    """
    if loss.ndim != 0:
        raise ContractError("backward needs a scalar loss, got shape {0}".format(loss.shape))
    if loss._tape is None:
        raise ContractError("loss was not computed under an active Tape")
    loss._tape.backward(loss)


def _record(out_data, inputs: tuple, backward_fn) -> Tensor:
    tape = current_tape()
    requires_grad = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=requires_grad)
    if requires_grad:
        tape.record(out, inputs, backward_fn)
        out._tape = tape
    return out


def as_tensor(value, like: Tensor = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value, dtype=like.dtype if like is not None else None)


def zeros(shape, dtype=None) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype or DEFAULT_DTYPE))


def _reduce_to(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    return np.asarray(np.sum(grad))


def _check_binary(a: Tensor, b: Tensor, name: str) -> None:
    if a.shape != b.shape and a.ndim != 0 and b.ndim != 0:
        raise ShapeError("{0}: shapes {1} and {2} differ".format(name, a.shape, b.shape))


def add(a, b) -> Tensor:
    a, b = _coerce_pair(a, b)
    _check_binary(a, b, "add")
    return _record(a.data + b.data, (a, b),
                   lambda g: (_reduce_to(g, a.shape), _reduce_to(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = _coerce_pair(a, b)
    _check_binary(a, b, "sub")
    return _record(a.data - b.data, (a, b),
                   lambda g: (_reduce_to(g, a.shape), _reduce_to(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = _coerce_pair(a, b)
    _check_binary(a, b, "mul")
    return _record(a.data * b.data, (a, b),
                   lambda g: (_reduce_to(g * b.data, a.shape), _reduce_to(g * a.data, b.shape)))


def _coerce_pair(a, b) -> tuple:
    if isinstance(a, Tensor):
        return a, as_tensor(b, like=a)
    b = as_tensor(b)
    return as_tensor(a, like=b), b


def sigmoid(x: Tensor) -> Tensor:
    # tanh form avoids overflow of exp for large negative inputs
    s = 0.5 * (np.tanh(0.5 * x.data) + 1.0)
    return _record(s, (x,), lambda g: (g * s * (1.0 - s),))


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)
    return _record(t, (x,), lambda g: (g * (1.0 - t * t),))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return _record(x.data * mask, (x,), lambda g: (g * mask,))


_ELEMENTWISE = {
    'add': add,
    'sub': sub,
    'mul': mul,
    'sigmoid': sigmoid,
    'tanh': tanh,
    'relu': relu,
}


def elementwise(op: str, *tensors) -> Tensor:
    """
    Apply a pointwise operation by name.

    :param op: One of add, sub, mul, sigmoid, tanh, relu
    :param tensors: The operands
    :return: The pointwise result
    """
    if op not in _ELEMENTWISE:
        raise DomainError("unknown elementwise operation '{0}'".format(op))
    return _ELEMENTWISE[op](*tensors)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """
    Matrix product of a (m x k) with b (k x n), or with a vector b (k).

    :raises ShapeError: If the inner dimensions disagree
    """
    if a.ndim != 2 or b.ndim not in (1, 2) or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul: cannot multiply {0} by {1}".format(a.shape, b.shape))

    def _backward(g):
        if b.ndim == 1:
            return np.outer(g, b.data), a.data.T @ g
        return g @ b.data.T, a.data.T @ g

    return _record(a.data @ b.data, (a, b), _backward)


def transpose(x: Tensor) -> Tensor:
    if x.ndim != 2:
        raise ShapeError("transpose needs a matrix, got shape {0}".format(x.shape))
    return _record(x.data.T, (x,), lambda g: (g.T,))


def concat(tensors: list, axis: int = 0) -> Tensor:
    """
    Concatenate tensors along an existing axis; the backward pass splits the incoming gradient.

    :raises ShapeError: On an empty list, an axis out of range or disagreeing non-concatenated dimensions
    """
    if not tensors:
        raise ShapeError("concat needs at least one tensor")
    ndim = tensors[0].ndim
    if not -ndim <= axis < ndim:
        raise ShapeError("concat: axis {0} out of range for {1}-d tensors".format(axis, ndim))
    axis = axis % ndim
    rest = tensors[0].shape[:axis] + tensors[0].shape[axis + 1:]
    for t in tensors:
        if t.ndim != ndim or t.shape[:axis] + t.shape[axis + 1:] != rest:
            raise ShapeError("concat: incompatible shapes {0}".format([t.shape for t in tensors]))
    tensors = tuple(tensors)
    boundaries = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _record(np.concatenate([t.data for t in tensors], axis=axis), tensors,
                   lambda g: tuple(np.split(g, boundaries, axis=axis)))


def stack(tensors: list) -> Tensor:
    """
    Stack equally shaped tensors along a new leading axis.
    """
    if not tensors:
        raise ShapeError("stack needs at least one tensor")
    shape = tensors[0].shape
    if any(t.shape != shape for t in tensors):
        raise ShapeError("stack: shapes differ {0}".format([t.shape for t in tensors]))
    tensors = tuple(tensors)
    return _record(np.stack([t.data for t in tensors]), tensors, lambda g: tuple(g[i] for i in range(len(tensors))))


def select(x: Tensor, key) -> Tensor:
    """
    Index a tensor with numpy indexing (integers, slices or integer arrays). Gradients are scattered back with
    accumulation, so repeated indices sum.
    """
    out = x.data[key]

    def _backward(g):
        grad = np.zeros_like(x.data)
        np.add.at(grad, key, g)
        return (grad,)

    return _record(np.array(out, copy=True), (x,), _backward)


def repeat(x: Tensor, count: int) -> Tensor:
    """
    Tile a vector into `count` identical rows.
    """
    if x.ndim != 1:
        raise ShapeError("repeat needs a vector, got shape {0}".format(x.shape))
    return _record(np.tile(x.data, (count, 1)), (x,), lambda g: (g.sum(axis=0),))


def sum(x: Tensor, axis=None) -> Tensor:  # noqa: A001
    def _backward(g):
        if axis is None:
            return (np.broadcast_to(g, x.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), x.shape).copy(),)

    return _record(np.asarray(np.sum(x.data, axis=axis)), (x,), _backward)


def logsumexp(x: Tensor, axis=None) -> Tensor:
    """
    log(sum(exp(x))) along an axis, shifted by the maximum.
    """
    if x.size == 0:
        raise DomainError("logsumexp of an empty tensor")
    peak = np.max(x.data, axis=axis, keepdims=True)
    shifted = np.exp(x.data - peak)
    total = np.sum(shifted, axis=axis, keepdims=True)
    out = peak + np.log(total)
    weights = shifted / total

    def _backward(g):
        g = np.asarray(g)
        if axis is None:
            return (g * weights,)
        return (np.expand_dims(g, axis) * weights,)

    out = out.reshape(()) if axis is None else np.squeeze(out, axis=axis)
    return _record(out, (x,), _backward)


def _check_logits(x: Tensor) -> None:
    if x.ndim == 0 or x.shape[-1] == 0:
        raise DomainError("softmax over an empty vector")
    if not np.all(np.isfinite(x.data)):
        raise DomainError("softmax over non-finite logits")


def softmax(x: Tensor) -> Tensor:
    """
    Softmax along the last axis with max subtraction.

    :raises DomainError: For empty or non-finite input
    """
    _check_logits(x)
    shifted = np.exp(x.data - np.max(x.data, axis=-1, keepdims=True))
    s = shifted / np.sum(shifted, axis=-1, keepdims=True)
    return _record(s, (x,), lambda g: (s * (g - np.sum(g * s, axis=-1, keepdims=True)),))


def log_softmax(x: Tensor) -> Tensor:
    """
    logits - max - log(sum(exp(logits - max))) along the last axis.
    """
    _check_logits(x)
    shifted = x.data - np.max(x.data, axis=-1, keepdims=True)
    out = shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))
    probs = np.exp(out)
    return _record(out, (x,), lambda g: (g - probs * np.sum(g, axis=-1, keepdims=True),))
