"""Dense float64 tensors with a reverse-mode tape.

Every differentiable operation returns a new :class:`Tensor` whose ``node``
records the inputs and a closure mapping the output gradient to input
gradients. :meth:`Tensor.backward` walks the tape once in reverse topological
order and accumulates gradients into the leaves that require them.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class DomainError(ValueError):
    """Input lies outside the domain of an operation."""


_grad_enabled = True


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Run forward computations without recording a tape."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def is_grad_enabled() -> bool:
    return _grad_enabled


@dataclass(eq=False)
class TapeNode:
    op: str
    inputs: tuple["Tensor", ...]
    # closure over the forward values its rule needs
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "node", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.array(data, dtype=np.float64)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.node: TapeNode | None = None
        self.name = name

    # -- basic accessors -------------------------------------------------
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
            raise DimensionError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag})"

    def __len__(self) -> int:
        return self.data.shape[0]

    # -- operators -------------------------------------------------------
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

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    # -- reverse mode ----------------------------------------------------
    def backward(self, grad: np.ndarray | None = None) -> None:
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``grad``."""
        if grad is None:
            if self.data.size != 1:
                raise DimensionError(
                    f"backward() without a seed gradient needs a scalar, got shape {self.shape}"
                )
            grad = np.ones_like(self.data)
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != self.shape:
            raise DimensionError(f"seed gradient {grad.shape} does not match {self.shape}")

        order = _topological_order(self)
        grads: dict[int, np.ndarray] = {id(self): grad}
        for t in order:
            g = grads.pop(id(t), None)
            if g is None:
                continue
            if t.node is None:
                if t.requires_grad:
                    t.grad = g.copy() if t.grad is None else t.grad + g
                continue
            for inp, gi in zip(t.node.inputs, t.node.backward(g)):
                if gi is None or not _needs_grad(inp):
                    continue
                key = id(inp)
                if key in grads:
                    grads[key] = grads[key] + gi
                else:
                    grads[key] = gi


def _needs_grad(t: Tensor) -> bool:
    return t.requires_grad or t.node is not None


def _topological_order(root: Tensor) -> list[Tensor]:
    # iterative DFS; output is reverse topological (root first)
    seen: set[int] = set()
    post: list[Tensor] = []
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        t, expanded = stack.pop()
        if expanded:
            post.append(t)
            continue
        if id(t) in seen:
            continue
        seen.add(id(t))
        stack.append((t, True))
        if t.node is not None:
            for inp in t.node.inputs:
                if id(inp) not in seen and _needs_grad(inp):
                    stack.append((inp, False))
    post.reverse()
    return post


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, op: str, inputs: Sequence[Tensor], backward) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.requires_grad = False
    out.name = None
    out.node = None
    if _grad_enabled and any(_needs_grad(t) for t in inputs):
        out.node = TapeNode(op, tuple(inputs), backward)
    return out


def custom_op(data: np.ndarray, op: str, inputs: Sequence[Tensor], backward) -> Tensor:
    """Wrap a forward result with a hand-written backward rule.

    ``backward`` maps the output gradient to one gradient (or None) per input.
    """
    return _make(np.asarray(data), op, inputs, backward)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# -- elementwise binary -------------------------------------------------
def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(a.data + b.data, "add", (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "sub")

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _make(a.data - b.data, "sub", (a, b), backward)


def mul(a, b) -> Tensor:
    """Elementwise (Hadamard) product with numpy broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "mul")

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _make(a.data * b.data, "mul", (a, b), backward)


elementwise_mul = mul


# -- elementwise unary --------------------------------------------------
def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return _make(y, "tanh", (x,), lambda g: (g * (1.0 - y * y),))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid(x: Tensor) -> Tensor:
    y = _sigmoid(x.data)
    return _make(y, "sigmoid", (x,), lambda g: (g * y * (1.0 - y),))


def relu(x: Tensor) -> Tensor:
    """max(0, x); the subgradient at exactly 0 is 0."""
    active = x.data > 0
    return _make(np.where(active, x.data, 0.0), "relu", (x,), lambda g: (g * active,))


tanh_op = tanh
sigmoid_op = sigmoid


# -- reductions and shape ops -------------------------------------------
def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    y = x.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _make(np.asarray(y), "sum", (x,), backward)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    if count == 0:
        raise DomainError("mean of an empty tensor")
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / float(count))


def reshape(x: Tensor, shape) -> Tensor:
    try:
        y = x.data.reshape(shape)
    except ValueError:
        raise DimensionError(f"cannot reshape {x.shape} into {shape}") from None
    return _make(y, "reshape", (x,), lambda g: (g.reshape(x.shape),))


def broadcast_to(x: Tensor, shape) -> Tensor:
    try:
        y = np.broadcast_to(x.data, shape)
    except ValueError:
        raise DimensionError(f"cannot broadcast {x.shape} to {tuple(shape)}") from None
    return _make(y.copy(), "broadcast_to", (x,), lambda g: (_unbroadcast(g, x.shape),))


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        y = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        shapes = [t.shape for t in tensors]
        raise DimensionError(f"concat: incompatible shapes {shapes} on axis {axis}") from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _make(y, "concat", tensors, backward)


def take(x: Tensor, index, axis: int = 0) -> Tensor:
    """Select ``index`` (int or slice) along ``axis``."""
    sl = [slice(None)] * x.ndim
    sl[axis] = index
    sl = tuple(sl)
    y = x.data[sl]

    def backward(g):
        out = np.zeros_like(x.data)
        out[sl] = g
        return (out,)

    return _make(np.array(y), "take", (x,), backward)


# -- linear algebra -----------------------------------------------------
def matmul(a, b) -> Tensor:
    """Matrix product with numpy batch semantics (both operands at least 2-D)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    try:
        y = np.matmul(a.data, b.data)
    except ValueError:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}") from None

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _make(y, "matmul", (a, b), backward)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x @ weight.T + bias`` over the last axis of ``x``; weight is [out, in]."""
    if weight.ndim != 2 or x.shape[-1] != weight.shape[1]:
        raise DimensionError(f"linear: input {x.shape} does not fit weight {weight.shape}")
    if bias is not None and bias.shape != (weight.shape[0],):
        raise DimensionError(f"linear: bias {bias.shape} does not fit weight {weight.shape}")
    y = x.data @ weight.data.T
    if bias is not None:
        y = y + bias.data

    def backward(g):
        gx = g @ weight.data
        g2 = g.reshape(-1, g.shape[-1])
        gw = g2.T @ x.data.reshape(-1, x.shape[-1])
        gb = g2.sum(axis=0) if bias is not None else None
        return (gx, gw, gb) if bias is not None else (gx, gw)

    inputs = (x, weight, bias) if bias is not None else (x, weight)
    return _make(y, "linear", inputs, backward)


def sq_euclidean(u: Tensor, v: Tensor, axis: int = -1) -> Tensor:
    """Squared Euclidean distance ||u - v||^2 reduced over ``axis`` (broadcasting)."""
    u, v = as_tensor(u), as_tensor(v)
    _broadcast_shape(u, v, "sq_euclidean")
    diff = u.data - v.data
    y = (diff * diff).sum(axis=axis)

    def backward(g):
        gd = 2.0 * diff * np.expand_dims(g, axis)
        return _unbroadcast(gd, u.shape), _unbroadcast(-gd, v.shape)

    return _make(np.asarray(y), "sq_euclidean", (u, v), backward)


# -- softmax family -----------------------------------------------------
def masked_softmax(logits: Tensor, mask=None, axis: int = -1) -> Tensor:
    """Softmax over ``axis`` restricted to ``mask``; masked entries are exactly 0."""
    logits = as_tensor(logits)
    z = logits.data
    if mask is None:
        mask = np.ones(z.shape, dtype=bool)
    else:
        mask = np.asarray(mask, dtype=bool)
        try:
            mask = np.broadcast_to(mask, z.shape)
        except ValueError:
            raise DimensionError(f"mask {mask.shape} does not fit logits {z.shape}") from None
    if not mask.any(axis=axis).all():
        raise DomainError("masked_softmax: every entry of some row is masked out")
    shifted = np.where(mask, z, -np.inf)
    shifted = shifted - shifted.max(axis=axis, keepdims=True)
    e = np.where(mask, np.exp(shifted), 0.0)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _make(y, "masked_softmax", (logits,), backward)


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Plain numpy softmax for inference-only code paths."""
    s = x - x.max(axis=axis, keepdims=True)
    e = np.exp(s)
    return e / e.sum(axis=axis, keepdims=True)


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean over rows of -log softmax(logits)[label], via log-sum-exp."""
    labels = np.atleast_1d(np.asarray(labels))
    z = logits.data.reshape(-1, logits.shape[-1])
    k = z.shape[1]
    if labels.shape[0] != z.shape[0]:
        raise DimensionError(f"cross_entropy: {z.shape[0]} rows but {labels.shape[0]} labels")
    if not np.issubdtype(labels.dtype, np.integer) or labels.min() < 0 or labels.max() >= k:
        raise IndexError(f"cross_entropy: labels {labels.tolist()} outside [0, {k})")
    m = z.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(z - m).sum(axis=1))
    rows = np.arange(z.shape[0])
    loss = (lse - z[rows, labels]).mean()

    def backward(g):
        p = softmax(z, axis=1)
        p[rows, labels] -= 1.0
        return ((g / z.shape[0]) * p).reshape(logits.shape),

    return _make(np.asarray(loss), "cross_entropy", (logits,), backward)


# -- lookups and masks --------------------------------------------------
def embedding(table: Tensor, ids) -> Tensor:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(f"embedding: id {int(ids.max())} outside table of {table.shape[0]} rows")

    def backward(g):
        out = np.zeros_like(table.data)
        np.add.at(out, ids.reshape(-1), g.reshape(-1, table.shape[1]))
        return (out,)

    return _make(table.data[ids], "embedding", (table,), backward)


# -- fused recurrent op -------------------------------------------------
def lstm(x: Tensor, mask, w_ih: Tensor, w_hh: Tensor, bias: Tensor, reverse: bool = False) -> Tensor:
    """Single-direction LSTM over [B, n, d] with gate order (input, forget, cell, output).

    Masked steps neither update the recurrent state nor emit output (zeros).
    Backpropagation through time is done in one fused backward rule.
    """
    B, n, d = x.shape
    h4 = w_ih.shape[0]
    hd = h4 // 4
    if w_ih.shape != (h4, d) or w_hh.shape != (h4, hd) or bias.shape != (h4,) or h4 % 4:
        raise DimensionError(
            f"lstm: weights {w_ih.shape}/{w_hh.shape}/{bias.shape} do not fit input {x.shape}"
        )
    m = np.asarray(mask, dtype=np.float64).reshape(B, n, 1)
    xw = x.data @ w_ih.data.T + bias.data
    steps = range(n - 1, -1, -1) if reverse else range(n)

    h = np.zeros((B, hd), dtype=xw.dtype)
    c = np.zeros((B, hd), dtype=xw.dtype)
    out = np.zeros((B, n, hd), dtype=xw.dtype)
    cache = []
    for t in steps:
        a = xw[:, t] + h @ w_hh.data.T
        i = _sigmoid(a[:, :hd])
        f = _sigmoid(a[:, hd:2 * hd])
        gg = np.tanh(a[:, 2 * hd:3 * hd])
        o = _sigmoid(a[:, 3 * hd:])
        c_new = f * c + i * gg
        tc = np.tanh(c_new)
        h_new = o * tc
        mt = m[:, t]
        cache.append((t, h, c, i, f, gg, o, tc, mt))
        h = mt * h_new + (1.0 - mt) * h
        c = mt * c_new + (1.0 - mt) * c
        out[:, t] = mt * h_new

    def backward(g):
        gxw = np.zeros_like(xw)
        gw_hh = np.zeros_like(w_hh.data)
        dh = np.zeros((B, hd))
        dc = np.zeros((B, hd))
        for t, h_prev, c_prev, i, f, gg, o, tc, mt in reversed(cache):
            # gradients w.r.t. the candidate new state, masked
            dh_new = mt * (dh + g[:, t])
            dc_new = mt * dc + dh_new * o * (1.0 - tc * tc)
            da = np.concatenate(
                [
                    dc_new * gg * i * (1.0 - i),
                    dc_new * c_prev * f * (1.0 - f),
                    dc_new * i * (1.0 - gg * gg),
                    dh_new * tc * o * (1.0 - o),
                ],
                axis=1,
            )
            gxw[:, t] = da
            gw_hh += da.T @ h_prev
            dh = (1.0 - mt) * dh + da @ w_hh.data
            dc = (1.0 - mt) * dc + dc_new * f
        gx = gxw @ w_ih.data
        gw_ih = gxw.reshape(-1, h4).T @ x.data.reshape(-1, d)
        gb = gxw.reshape(-1, h4).sum(axis=0)
        return gx, gw_ih, gw_hh, gb

    return _make(out, "lstm", (x, w_ih, w_hh, bias), backward)
