"""Minimal reverse-mode automatic differentiation over numpy arrays.

The fitting model needs exact gradients of a scalar log density built from
a few dozen vectorized operations, which is far below the scale where a
framework earns its import cost. Nodes are created eagerly; calling
``backward`` on a scalar output walks the graph once in reverse
topological order and accumulates vector-Jacobian products into the
requested inputs. Graphs are rebuilt per evaluation, so concurrent
evaluations never share mutable state.

Only the operations the model uses are provided. ``absolute`` uses the
subgradient 0 at the kink, matching the folded-Gaussian convention of the
model priors.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Var", "var", "backward"]


def _to_value(x):
    if isinstance(x, Var):
        raise TypeError("expected a constant, got a Var")
    return np.asarray(x, dtype=float)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Var:
    """A node in the differentiation graph: a value plus parent pullbacks."""

    __slots__ = ("value", "parents")

    # Make ndarray <op> Var defer to the reflected Var methods instead of
    # producing object arrays.
    __array_ufunc__ = None

    def __init__(self, value, parents=()):
        self.value = np.asarray(value, dtype=float)
        # parents: tuple of (Var, pullback) where pullback maps the incoming
        # gradient to that parent's gradient contribution.
        self.parents = parents

    @property
    def shape(self):
        return self.value.shape

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
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return Var(-self.value, ((self, lambda g: -g),))

    def __pow__(self, p):
        if not isinstance(p, (int, float)):
            return NotImplemented
        return Var(self.value ** p, ((self, lambda g: g * p * self.value ** (p - 1)),))

    def __repr__(self):
        return f"Var({self.value!r})"


def var(value) -> Var:
    """Wrap a leaf value (an input to differentiate with respect to)."""
    return Var(value)


def _lift(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


def add(a, b) -> Var:
    a, b = _lift(a), _lift(b)
    return Var(a.value + b.value, (
        (a, lambda g: _unbroadcast(g, a.value.shape)),
        (b, lambda g: _unbroadcast(g, b.value.shape)),
    ))


def sub(a, b) -> Var:
    a, b = _lift(a), _lift(b)
    return Var(a.value - b.value, (
        (a, lambda g: _unbroadcast(g, a.value.shape)),
        (b, lambda g: _unbroadcast(-g, b.value.shape)),
    ))


def mul(a, b) -> Var:
    a, b = _lift(a), _lift(b)
    return Var(a.value * b.value, (
        (a, lambda g: _unbroadcast(g * b.value, a.value.shape)),
        (b, lambda g: _unbroadcast(g * a.value, b.value.shape)),
    ))


def div(a, b) -> Var:
    a, b = _lift(a), _lift(b)
    inv = 1.0 / b.value
    out = a.value * inv
    return Var(out, (
        (a, lambda g: _unbroadcast(g * inv, a.value.shape)),
        (b, lambda g: _unbroadcast(-g * out * inv, b.value.shape)),
    ))


def square(a: Var) -> Var:
    return Var(a.value * a.value, ((a, lambda g: g * (2.0 * a.value)),))


def sqrt(a: Var) -> Var:
    root = np.sqrt(a.value)
    return Var(root, ((a, lambda g: g * (0.5 / root)),))


def absolute(a: Var) -> Var:
    # Subgradient 0 at the kink keeps the density total on a measure-zero set.
    sign = np.sign(a.value)
    return Var(np.abs(a.value), ((a, lambda g: g * sign),))


def sin(a: Var) -> Var:
    return Var(np.sin(a.value), ((a, lambda g: g * np.cos(a.value)),))


def cos(a: Var) -> Var:
    return Var(np.cos(a.value), ((a, lambda g: -g * np.sin(a.value)),))


def exp(a: Var) -> Var:
    e = np.exp(a.value)
    return Var(e, ((a, lambda g: g * e),))


def log(a: Var) -> Var:
    return Var(np.log(a.value), ((a, lambda g: g / a.value),))


def total(a: Var) -> Var:
    """Sum of all entries, as a scalar node."""
    shape = a.value.shape
    return Var(a.value.sum(), ((a, lambda g: np.broadcast_to(g, shape).copy()),))


def take(a: Var, indices) -> Var:
    """Gather entries of a flat vector; the pullback scatter-adds."""
    indices = np.asarray(indices, dtype=int)
    n = a.value.shape[0]

    def pullback(g):
        out = np.zeros(n)
        np.add.at(out, indices, g)
        return out

    return Var(a.value[indices], ((a, pullback),))


def matvec(m, a: Var) -> Var:
    """Product of a constant matrix with a variable vector."""
    m = _to_value(m)
    return Var(m @ a.value, ((a, lambda g: m.T @ g),))


def custom(value, *parent_pullbacks) -> Var:
    """Build a node from a precomputed value and (parent, pullback) pairs."""
    return Var(value, tuple(parent_pullbacks))


def backward(output: Var, inputs: list[Var]) -> list[np.ndarray]:
    """Gradients of a scalar output with respect to the given leaf nodes."""
    if output.value.shape != ():
        raise ValueError("backward expects a scalar output")
    order: list[Var] = []
    seen: set[int] = set()
    stack: list[tuple[Var, bool]] = [(output, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent, _ in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))

    grads: dict[int, np.ndarray] = {id(output): np.asarray(1.0)}
    for node in reversed(order):
        g = grads.get(id(node))
        if g is None:
            continue
        for parent, pullback in node.parents:
            contribution = pullback(g)
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + contribution
            else:
                grads[key] = np.asarray(contribution)
    zero = lambda v: np.zeros_like(v.value)
    return [grads.get(id(v), zero(v)) for v in inputs]
