"""Array-valued reverse-mode differentiation with nested (higher-order) support.

The engine records an expression DAG of `DiffValue` nodes over numpy arrays.
`grad` sweeps the DAG in reverse topological order and accumulates adjoints.
The crucial property for this package is *graph-retaining* differentiation:
every backward rule is itself written in terms of `DiffValue` operations, so
when `grad(..., create_graph=True)` is used the returned derivatives are
ordinary expression nodes that can be differentiated again. That is what lets
a training loss contain second spatial/temporal derivatives of the network
output and still yield parameter gradients (effective differentiation depth 3).

The primitive set is deliberately small: the affine/tanh network chain and the
wave residuals need exactly {+, -, *, /, integer power, tanh, sin, cos, 2-D
matmul/transpose, column stack/extract, sum/mean reductions, broadcasting}.
Nothing else is provided.

There is no global tape. Each node owns its parents, so independent graphs can
be built and differentiated concurrently; a single graph is meant to be used
from one logical thread at a time.

Precision follows the leaf arrays: float64 graphs stay float64, float32 stay
float32. Python scalars are coerced to the dtype of the node they combine with.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ContractViolationError

__all__ = [
    "DiffValue",
    "GradientVector",
    "leaf",
    "constant",
    "tanh",
    "sin",
    "cos",
    "matmul",
    "transpose",
    "stack_cols",
    "column",
    "grad",
    "second_derivative",
    "gradient_vector",
    "finite_difference_check",
]


class DiffValue:
    """One node of the expression DAG.

    `value` is the numpy array (0-d for scalars), `op` is a short provenance
    marker ("leaf", "const", "+", "tanh", ...), and `requires_grad` says
    whether a differentiable leaf is reachable from here. Only nodes with
    `requires_grad=True` keep their parents; everything else behaves as a
    constant and costs no graph memory.
    """

    __slots__ = ("value", "parents", "requires_grad", "op", "_vjp")

    def __init__(self, value, parents=(), requires_grad=False, op="const", vjp=None):
        if not isinstance(value, np.ndarray):
            # np.float32(…) and friends keep their precision; Python ints/floats
            # become float64 so no integer dtype ever enters a graph.
            value = np.asarray(value)
            if not np.issubdtype(value.dtype, np.floating):
                value = value.astype(np.float64)
        self.value = value
        self.parents = parents
        self.requires_grad = requires_grad
        self.op = op
        self._vjp = vjp

    # -- numeric protocol -------------------------------------------------

    def __add__(self, other):
        return _add(self, _coerce(other, self))

    def __radd__(self, other):
        return _add(_coerce(other, self), self)

    def __sub__(self, other):
        return _add(self, _neg(_coerce(other, self)))

    def __rsub__(self, other):
        return _add(_coerce(other, self), _neg(self))

    def __mul__(self, other):
        return _mul(self, _coerce(other, self))

    def __rmul__(self, other):
        return _mul(_coerce(other, self), self)

    def __truediv__(self, other):
        return _div(self, _coerce(other, self))

    def __rtruediv__(self, other):
        return _div(_coerce(other, self), self)

    def __neg__(self):
        return _neg(self)

    def __pow__(self, n):
        if not isinstance(n, (int, np.integer)):
            raise TypeError("only integer powers are supported; use / for reciprocals")
        return _powi(self, int(n))

    def __float__(self):
        return float(self.value)

    def __repr__(self):
        return f"DiffValue(op={self.op!r}, shape={self.value.shape}, requires_grad={self.requires_grad})"

    # -- reductions -------------------------------------------------------

    def sum(self):
        return _reduce_sum(self)

    def mean(self):
        size = self.value.size
        if size == 0:
            raise ContractViolationError("mean of an empty array")
        return _reduce_sum(self) * (1.0 / size)

    @property
    def shape(self):
        return self.value.shape

    @property
    def dtype(self):
        return self.value.dtype


def leaf(value, requires_grad=True, dtype=None):
    """Create a leaf node. Differentiable by default."""
    arr = np.asarray(value, dtype=dtype) if dtype is not None else value
    return DiffValue(arr, requires_grad=requires_grad, op="leaf")


def constant(value, dtype=None):
    """Create a constant node; its derivative is exactly zero."""
    arr = np.asarray(value, dtype=dtype) if dtype is not None else value
    return DiffValue(arr, op="const")


def _coerce(x, like):
    if isinstance(x, DiffValue):
        return x
    return DiffValue(np.asarray(x, dtype=like.value.dtype))


def _node(value, parents, op, vjp):
    track = any(p.requires_grad for p in parents)
    if not track:
        return DiffValue(value, op=op)
    return DiffValue(value, parents=parents, requires_grad=True, op=op, vjp=vjp)


# -- shape plumbing for broadcasting -------------------------------------


def _np_sum_to_shape(x: np.ndarray, shape: tuple) -> np.ndarray:
    while x.ndim > len(shape):
        x = x.sum(axis=0)
    for i, (have, want) in enumerate(zip(x.shape, shape)):
        if want == 1 and have != 1:
            x = x.sum(axis=i, keepdims=True)
    return x.reshape(shape)


def _sum_to_shape(a: DiffValue, shape: tuple) -> DiffValue:
    if a.value.shape == shape:
        return a
    val = _np_sum_to_shape(a.value, shape)

    def vjp(g, lift):
        return (_broadcast_to(g, a.value.shape),)

    return _node(val, (a,), "sumto", vjp)


def _broadcast_to(a: DiffValue, shape: tuple) -> DiffValue:
    if a.value.shape == shape:
        return a
    val = np.broadcast_to(a.value, shape)

    def vjp(g, lift):
        return (_sum_to_shape(g, a.value.shape),)

    return _node(val, (a,), "bcast", vjp)


# -- primitives ----------------------------------------------------------


def _add(a: DiffValue, b: DiffValue) -> DiffValue:
    val = a.value + b.value

    def vjp(g, lift):
        return (_sum_to_shape(g, a.value.shape), _sum_to_shape(g, b.value.shape))

    return _node(val, (a, b), "+", vjp)


def _neg(a: DiffValue) -> DiffValue:
    def vjp(g, lift):
        return (_neg(g),)

    return _node(-a.value, (a,), "neg", vjp)


def _mul(a: DiffValue, b: DiffValue) -> DiffValue:
    val = a.value * b.value

    def vjp(g, lift):
        return (
            _sum_to_shape(_mul(g, lift(b)), a.value.shape),
            _sum_to_shape(_mul(g, lift(a)), b.value.shape),
        )

    return _node(val, (a, b), "*", vjp)


def _div(a: DiffValue, b: DiffValue) -> DiffValue:
    val = a.value / b.value

    def vjp(g, lift):
        lb = lift(b)
        ga = _div(g, lb)
        # d(a/b)/db = -a/b^2 = -(a/b)/b
        gb = _neg(_div(_mul(g, _div(lift(a), lb)), lb))
        return (_sum_to_shape(ga, a.value.shape), _sum_to_shape(gb, b.value.shape))

    return _node(val, (a, b), "/", vjp)


def _powi(a: DiffValue, n: int) -> DiffValue:
    val = a.value ** n

    def vjp(g, lift):
        la = lift(a)
        if n == 0:
            return (_mul(g, constant(np.zeros_like(a.value))),)
        return (_mul(g, _mul(_coerce(float(n), a), _powi(la, n - 1))),)

    return _node(val, (a,), f"**{n}", vjp)


def tanh(a: DiffValue) -> DiffValue:
    a = a if isinstance(a, DiffValue) else constant(a)

    def vjp(g, lift):
        t = tanh(lift(a))
        return (_mul(g, _add(_coerce(1.0, a), _neg(_mul(t, t)))),)

    return _node(np.tanh(a.value), (a,), "tanh", vjp)


def sin(a: DiffValue) -> DiffValue:
    a = a if isinstance(a, DiffValue) else constant(a)

    def vjp(g, lift):
        return (_mul(g, cos(lift(a))),)

    return _node(np.sin(a.value), (a,), "sin", vjp)


def cos(a: DiffValue) -> DiffValue:
    a = a if isinstance(a, DiffValue) else constant(a)

    def vjp(g, lift):
        return (_neg(_mul(g, sin(lift(a)))),)

    return _node(np.cos(a.value), (a,), "cos", vjp)


def matmul(a: DiffValue, b: DiffValue) -> DiffValue:
    if a.value.ndim != 2 or b.value.ndim != 2:
        raise ContractViolationError("matmul expects 2-D operands")
    val = a.value @ b.value

    def vjp(g, lift):
        return (matmul(g, transpose(lift(b))), matmul(transpose(lift(a)), g))

    return _node(val, (a, b), "@", vjp)


def transpose(a: DiffValue) -> DiffValue:
    def vjp(g, lift):
        return (transpose(g),)

    return _node(a.value.T, (a,), "T", vjp)


def stack_cols(a: DiffValue, b: DiffValue) -> DiffValue:
    """Stack two 1-D arrays into the columns of an [N, 2] matrix."""
    val = np.stack([a.value, b.value], axis=1)

    def vjp(g, lift):
        return (column(g, 0), column(g, 1))

    return _node(val, (a, b), "stack", vjp)


def column(m: DiffValue, j: int) -> DiffValue:
    """Extract column j (0 or 1) of an [N, 2] matrix as a 1-D array."""
    val = np.ascontiguousarray(m.value[:, j])

    def vjp(g, lift):
        z = constant(np.zeros_like(val))
        return (stack_cols(g, z) if j == 0 else stack_cols(z, g),)

    return _node(val, (m,), f"col{j}", vjp)


def _reduce_sum(a: DiffValue) -> DiffValue:
    # Full reduction only; the residual losses never need axis-wise sums.
    val = a.value.sum()

    def vjp(g, lift):
        return (_broadcast_to(g, a.value.shape),)

    return _node(val, (a,), "sum", vjp)


# -- backward sweep -------------------------------------------------------


def _topo_order(root: DiffValue) -> list:
    """Iterative post-order over the requires_grad subgraph (no recursion
    so deep residual graphs cannot hit the interpreter stack limit)."""
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        nid = id(node)
        if nid in seen:
            continue
        seen.add(nid)
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def grad(f: DiffValue, wrt: Sequence[DiffValue], create_graph: bool = False) -> list:
    """Adjoints of a scalar expression with respect to the given nodes.

    Returns one `DiffValue` per entry of `wrt`, each with the shape of its
    target. Targets unreachable from `f` get an exact zero. With
    `create_graph=True` the results are themselves recorded expressions and
    can be differentiated again; without it they are detached constants and
    feeding them back into `grad`/`second_derivative` is a contract violation.
    """
    if not isinstance(f, DiffValue):
        raise TypeError("grad expects a DiffValue expression")
    if f.value.ndim != 0:
        raise ContractViolationError(
            f"grad needs a scalar output; got shape {f.value.shape} (reduce first)"
        )
    if f.op == "grad-detached":
        raise ContractViolationError(
            "expression is a detached gradient (create_graph was False on the inner pass)"
        )
    wrt = list(wrt)

    if create_graph:
        def lift(n):
            return n
    else:
        lifted = {}

        def lift(n):
            r = lifted.get(id(n))
            if r is None:
                r = DiffValue(n.value)
                lifted[id(n)] = r
            return r

    adjoints: dict[int, DiffValue] = {}
    if f.requires_grad:
        adjoints[id(f)] = constant(np.ones((), dtype=f.value.dtype))
        for node in reversed(_topo_order(f)):
            g = adjoints.get(id(node))
            if g is None or node._vjp is None:
                continue
            contribs = node._vjp(g, lift)
            for p, c in zip(node.parents, contribs):
                if c is None or not p.requires_grad:
                    continue
                prev = adjoints.get(id(p))
                adjoints[id(p)] = c if prev is None else _add(prev, c)

    out = []
    for w in wrt:
        g = adjoints.get(id(w))
        if g is None:
            g = constant(np.zeros_like(w.value))
        if not create_graph:
            g = DiffValue(g.value, op="grad-detached")
        out.append(g)
    return out


def second_derivative(f: DiffValue, x: DiffValue, create_graph: bool = False) -> DiffValue:
    """d2f/dx2 via two chained backward passes, the inner one graph-retaining."""
    g1 = grad(f, [x], create_graph=True)[0]
    if g1.value.ndim != 0:
        g1 = g1.sum()
    return grad(g1, [x], create_graph=create_graph)[0]


@dataclass(frozen=True)
class GradientVector:
    """Flat gradient aligned with a fixed parameter ordering."""

    entries: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.entries))

    def __len__(self) -> int:
        return len(self.entries)


def gradient_vector(f: DiffValue, wrt: Sequence[DiffValue]) -> GradientVector:
    """Detached, flattened gradient of a scalar expression (optimizer form)."""
    parts = grad(f, wrt, create_graph=False)
    flat = np.concatenate([np.asarray(g.value).reshape(-1) for g in parts]) if parts else np.zeros(0)
    return GradientVector(entries=flat)


def finite_difference_check(
    f: Callable[[DiffValue], DiffValue],
    x: float,
    h: float,
    order: int = 1,
    floor: float = 1.0,
) -> float:
    """Relative discrepancy between the recorded derivative and a central
    difference: |autodiff - central| / max(|autodiff|, floor).

    `f` maps a DiffValue to a DiffValue. Central stencils are
    (f(x+h) - f(x-h)) / 2h for order 1 and (f(x+h) - 2 f(x) + f(x-h)) / h^2
    for order 2. The caller interprets the returned discrepancy.
    """
    if h <= 0:
        raise ValueError("step size must be positive")
    lx = leaf(float(x))
    y = f(lx)
    if order == 1:
        ad = float(grad(y, [lx])[0].value)
        central = (float(f(constant(x + h)).value) - float(f(constant(x - h)).value)) / (2 * h)
    elif order == 2:
        ad = float(second_derivative(y, lx).value)
        central = (
            float(f(constant(x + h)).value)
            - 2 * float(f(constant(x)).value)
            + float(f(constant(x - h)).value)
        ) / (h * h)
    else:
        raise ValueError("order must be 1 or 2")
    return abs(ad - central) / max(abs(ad), floor)
