"""Reverse-mode automatic differentiation over float64 numpy arrays.

A :class:`Tensor` records the operation that produced it.  :func:`grad` walks
the recorded graph in reverse topological order.  Every operation carries two
vector-Jacobian products:

* a numpy one, used for ordinary first-order backward passes, and
* a graph one built from differentiable operations, used when
  ``create_graph=True`` so that gradients can themselves be differentiated
  (the gradient-penalty path needs this).
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from synthguard import kernels
from synthguard.errors import ShapeError

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


@contextlib.contextmanager
def _grad_mode(enabled: bool):
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = enabled
    try:
        yield
    finally:
        _grad_enabled = prev


def is_grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    """A float64 array that optionally records how it was computed."""

    __slots__ = ("data", "requires_grad", "_parents", "_vjp", "_vjp_graph", "name", "__weakref__")
    __array_priority__ = 100.0

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._vjp = None
        self._vjp_graph = None
        self.name = name

    # -- basic accessors -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def T(self) -> Tensor:
        return transpose(self)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def __repr__(self) -> str:
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    def __len__(self) -> int:
        return len(self.data)

    # -- operators -------------------------------------------------------
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

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent: float):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims: bool = False) -> Tensor:
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> Tensor:
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> Tensor:
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data: np.ndarray, parents: tuple[Tensor, ...], vjp, vjp_graph) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.name = None
    out._parents = ()
    out._vjp = None
    out._vjp_graph = None
    out.requires_grad = False
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._vjp = vjp
        out._vjp_graph = vjp_graph
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# shape plumbing
# ---------------------------------------------------------------------------


def sum_to(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    """Sum ``a`` down to a broadcast-compatible ``shape``."""
    a = as_tensor(a)
    shape = tuple(shape)
    if a.shape == shape:
        return a
    orig = a.shape
    return _result(
        _unbroadcast(a.data, shape),
        (a,),
        lambda g: (np.broadcast_to(g, orig).copy(),),
        lambda g: (broadcast_to(g, orig),),
    )


def broadcast_to(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    shape = tuple(shape)
    if a.shape == shape:
        return a
    orig = a.shape
    return _result(
        np.broadcast_to(a.data, shape).copy(),
        (a,),
        lambda g: (_unbroadcast(g, orig),),
        lambda g: (sum_to(g, orig),),
    )


def reshape(a: Tensor, shape) -> Tensor:
    a = as_tensor(a)
    orig = a.shape
    return _result(
        a.data.reshape(shape),
        (a,),
        lambda g: (g.reshape(orig),),
        lambda g: (reshape(g, orig),),
    )


def transpose(a: Tensor) -> Tensor:
    a = as_tensor(a)
    return _result(a.data.T, (a,), lambda g: (g.T,), lambda g: (transpose(g),))


def _is_basic(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return all(isinstance(i, (slice, int, type(None), type(Ellipsis))) for i in items)


def _place(g: np.ndarray, index, shape: tuple[int, ...]) -> np.ndarray:
    full = np.zeros(shape)
    if _is_basic(index):
        full[index] = g
    else:
        np.add.at(full, index, g)
    return full


def getitem(a: Tensor, index) -> Tensor:
    a = as_tensor(a)
    shape = a.shape

    def vjp(g):
        return (_place(g, index, shape),)

    return _result(a.data[index], (a,), vjp, lambda g: (scatter(g, index, shape),))


def scatter(g: Tensor, index, shape: tuple[int, ...]) -> Tensor:
    """Adjoint of indexing: place ``g`` at ``index`` in a zero array of ``shape``."""
    g = as_tensor(g)
    return _result(_place(g.data, index, shape), (g,), lambda gg: (gg[index],), lambda gg: (getitem(gg, index),))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = tuple(as_tensor(t) for t in tensors)
    axis = axis % tensors[0].ndim
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def _slices(g_ndim):
        out = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            idx = [slice(None)] * g_ndim
            idx[axis] = slice(int(lo), int(hi))
            out.append(tuple(idx))
        return out

    def vjp(g):
        return tuple(g[s] for s in _slices(g.ndim))

    def vjp_graph(g):
        return tuple(getitem(g, s) for s in _slices(g.ndim))

    return _result(np.concatenate([t.data for t in tensors], axis=axis), tensors, vjp, vjp_graph)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    expanded = [reshape(t, t.shape[:axis] + (1,) + t.shape[axis:]) for t in tensors]
    return concat(expanded, axis=axis)


# ---------------------------------------------------------------------------
# arithmetic
# ---------------------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return _result(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)),
        lambda g: (sum_to(g, sa), sum_to(g, sb)),
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return _result(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)),
        lambda g: (sum_to(g, sa), neg(sum_to(g, sb))),
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    ad, bd = a.data, b.data
    return _result(
        ad * bd,
        (a, b),
        lambda g: (_unbroadcast(g * bd, sa), _unbroadcast(g * ad, sb)),
        lambda g: (sum_to(mul(g, b), sa), sum_to(mul(g, a), sb)),
    )


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    ad, bd = a.data, b.data
    return _result(
        ad / bd,
        (a, b),
        lambda g: (_unbroadcast(g / bd, sa), _unbroadcast(-g * ad / (bd * bd), sb)),
        lambda g: (sum_to(div(g, b), sa), sum_to(neg(div(mul(g, a), mul(b, b))), sb)),
    )


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _result(-a.data, (a,), lambda g: (-g,), lambda g: (neg(g),))


def power(a, exponent: float) -> Tensor:
    a = as_tensor(a)
    p = float(exponent)
    ad = a.data
    return _result(
        ad**p,
        (a,),
        lambda g: (g * p * ad ** (p - 1.0),),
        lambda g: (mul(g, mul(p, power(a, p - 1.0))),),
    )


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data
    return _result(
        ad @ bd,
        (a, b),
        lambda g: (g @ bd.T, ad.T @ g),
        lambda g: (matmul(g, transpose(b)), matmul(transpose(a), g)),
    )


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    shape = a.shape
    kept = np.sum(a.data, axis=axis, keepdims=True).shape

    def vjp(g):
        return (np.broadcast_to(np.reshape(g, kept), shape).copy(),)

    def vjp_graph(g):
        return (broadcast_to(reshape(g, kept), shape),)

    return _result(np.sum(a.data, axis=axis, keepdims=keepdims), (a,), vjp, vjp_graph)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    if axis is None:
        n = a.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        n = int(np.prod([a.shape[ax] for ax in axes]))
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


# ---------------------------------------------------------------------------
# elementwise nonlinearities
# ---------------------------------------------------------------------------


def _sigmoid_np(x: np.ndarray) -> np.ndarray:
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


def exp(a) -> Tensor:
    a = as_tensor(a)
    y = np.exp(a.data)
    return _result(y, (a,), lambda g: (g * y,), lambda g: (mul(g, exp(a)),))


def log(a) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    return _result(np.log(ad), (a,), lambda g: (g / ad,), lambda g: (div(g, a),))


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    y = np.sqrt(a.data)
    return _result(y, (a,), lambda g: (0.5 * g / y,), lambda g: (div(mul(g, 0.5), sqrt(a)),))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    y = np.tanh(a.data)

    def vjp_graph(g):
        t = tanh(a)
        return (mul(g, sub(1.0, mul(t, t))),)

    return _result(y, (a,), lambda g: (g * (1.0 - y * y),), vjp_graph)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    y = _sigmoid_np(a.data)

    def vjp_graph(g):
        s = sigmoid(a)
        return (mul(g, mul(s, sub(1.0, s))),)

    return _result(y, (a,), lambda g: (g * y * (1.0 - y),), vjp_graph)


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = (a.data > 0).astype(np.float64)
    return _result(a.data * mask, (a,), lambda g: (g * mask,), lambda g: (mul(g, mask),))


def softplus(a) -> Tensor:
    """log(1 + exp(a)), computed stably."""
    a = as_tensor(a)
    ad = a.data
    y = np.logaddexp(0.0, ad)
    s = _sigmoid_np(ad)
    return _result(y, (a,), lambda g: (g * s,), lambda g: (mul(g, sigmoid(a)),))


def identity(a) -> Tensor:
    return as_tensor(a)


ACTIVATIONS: dict[str, Callable[[Tensor], Tensor]] = {
    "tanh": tanh,
    "sigmoid": sigmoid,
    "relu": relu,
    "linear": identity,
}


# ---------------------------------------------------------------------------
# fused LSTM gates
# ---------------------------------------------------------------------------


def _lstm_gates_composite(z: Tensor, c_prev: Tensor) -> Tensor:
    hidden = c_prev.shape[1]
    i = sigmoid(z[:, :hidden])
    f = sigmoid(z[:, hidden : 2 * hidden])
    g = tanh(z[:, 2 * hidden : 3 * hidden])
    o = sigmoid(z[:, 3 * hidden :])
    c = f * c_prev + i * g
    return concat([o * tanh(c), c], axis=1)


def lstm_gates(z, c_prev) -> Tensor:
    """Gate nonlinearities of one LSTM step, returning ``[h | c]`` side by side.

    ``z`` is the ``(batch, 4*hidden)`` pre-activation with column blocks
    ``input, forget, candidate, output``.
    """
    z, c_prev = as_tensor(z), as_tensor(c_prev)
    hidden = c_prev.shape[1]
    if z.ndim != 2 or z.shape != (c_prev.shape[0], 4 * hidden):
        raise ShapeError(f"lstm pre-activation {z.shape} does not match cell {c_prev.shape}")
    cp = np.ascontiguousarray(c_prev.data)
    h, c, gates, tanh_c = kernels.lstm_gates_forward(np.ascontiguousarray(z.data), cp)

    def vjp(g):
        dh = np.ascontiguousarray(g[:, :hidden])
        dc = np.ascontiguousarray(g[:, hidden:])
        return kernels.lstm_gates_backward(dh, dc, gates, cp, tanh_c)

    def vjp_graph(g):
        # differentiate the unfused composite so the result stays on the graph
        zz = Tensor(z.data, requires_grad=True)
        cc = Tensor(c_prev.data, requires_grad=True)
        with _grad_mode(True):
            out = _lstm_gates_composite(zz, cc)
            dz, dcp = grad(tsum(mul(out, g)), [zz, cc], create_graph=True)
        return (dz, dcp)

    return _result(np.concatenate([h, c], axis=1), (z, c_prev), vjp, vjp_graph)


# ---------------------------------------------------------------------------
# backward
# ---------------------------------------------------------------------------


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
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def grad(
    output: Tensor,
    inputs: Sequence[Tensor],
    create_graph: bool = False,
) -> list[Tensor]:
    """Gradients of a scalar ``output`` with respect to each of ``inputs``.

    Inputs the output does not depend on get zero gradients.  With
    ``create_graph=True`` the returned tensors are themselves differentiable.
    """
    if output.size != 1:
        raise ShapeError(f"gradient target must be scalar, got shape {output.shape}")
    zeros = [Tensor(np.zeros(t.shape)) for t in inputs]
    if not output.requires_grad:
        return zeros
    order = _toposort(output)
    wanted = {id(t) for t in inputs}
    results: dict[int, object] = {}

    if create_graph:
        acc: dict[int, Tensor] = {id(output): Tensor(np.ones(output.shape))}
        with _grad_mode(True):
            for node in reversed(order):
                g = acc.pop(id(node), None)
                if g is None:
                    continue
                if id(node) in wanted:
                    results[id(node)] = g
                if node._vjp_graph is None:
                    continue
                for parent, pg in zip(node._parents, node._vjp_graph(g)):
                    if pg is None or not parent.requires_grad:
                        continue
                    key = id(parent)
                    acc[key] = add(acc[key], pg) if key in acc else pg
        return [results.get(id(t), z) for t, z in zip(inputs, zeros)]

    acc_np: dict[int, np.ndarray] = {id(output): np.ones(output.shape)}
    with _grad_mode(False):
        for node in reversed(order):
            g = acc_np.pop(id(node), None)
            if g is None:
                continue
            if id(node) in wanted:
                results[id(node)] = g
            if node._vjp is None:
                continue
            for parent, pg in zip(node._parents, node._vjp(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in acc_np:
                    acc_np[key] = acc_np[key] + pg
                else:
                    acc_np[key] = pg
    return [Tensor(results[id(t)]) if id(t) in results else z for t, z in zip(inputs, zeros)]


def backward(loss: Tensor, params: Mapping[str, Tensor]) -> dict[str, np.ndarray]:
    """Gradient map ``name -> array`` of a scalar loss over named parameters."""
    names = list(params)
    grads = grad(loss, [params[n] for n in names])
    return {n: g.data for n, g in zip(names, grads)}


def parameters_of(*modules) -> dict[str, Tensor]:
    out: dict[str, Tensor] = {}
    for m in modules:
        out.update(m.parameters())
    return out


def total_norm(arrays: Iterable[np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.vdot(a, a)) for a in arrays)))
