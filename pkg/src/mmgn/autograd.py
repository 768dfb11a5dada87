"""Tape-based reverse-mode automatic differentiation over float64 numpy arrays.

A :class:`Graph` records every primitive application in the order it is
evaluated (define-by-run), so node ids are already a topological order.
Values are computed eagerly; :func:`backward` walks the tape once in reverse.

Broadcasting follows the trailing-dimension rule: two shapes are compatible
when, aligned on their last axes, every pair of extents is equal or one of
them is 1. Transposes are never implicit.

GELU is the exact form ``0.5 * x * (1 + erf(x / sqrt(2)))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np
from scipy.special import erf


class AutogradError(Exception):
    pass


class ShapeError(AutogradError, ValueError):
    pass


class UnknownPrimitiveError(AutogradError, KeyError):
    pass


class NonFiniteError(AutogradError, FloatingPointError):
    pass


@dataclass
class Node:
    op: str
    inputs: tuple[int, ...]
    value: np.ndarray
    attrs: dict = field(default_factory=dict)
    requires_grad: bool = False
    name: str | None = None

    @property
    def is_leaf(self) -> bool:
        return self.op in ("leaf", "const")


class Var:
    """Handle on a graph node with arithmetic operator sugar."""

    __slots__ = ("graph", "id")
    __array_priority__ = 1000

    def __init__(self, graph: "Graph", node_id: int):
        self.graph = graph
        self.id = node_id

    @property
    def value(self) -> np.ndarray:
        return self.graph.nodes[self.id].value

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self):
        node = self.graph.nodes[self.id]
        return f"Var(id={self.id}, op={node.op!r}, shape={self.shape})"

    def _lift(self, other) -> "Var":
        if isinstance(other, Var):
            return other
        return self.graph.constant(other)

    def __add__(self, other):
        return self.graph.apply("add", self, self._lift(other))

    def __radd__(self, other):
        return self.graph.apply("add", self._lift(other), self)

    def __sub__(self, other):
        return self.graph.apply("sub", self, self._lift(other))

    def __rsub__(self, other):
        return self.graph.apply("sub", self._lift(other), self)

    def __mul__(self, other):
        if np.isscalar(other):
            return self.graph.apply("scale", self, c=float(other))
        return self.graph.apply("mul", self, self._lift(other))

    def __rmul__(self, other):
        if np.isscalar(other):
            return self.graph.apply("scale", self, c=float(other))
        return self.graph.apply("mul", self._lift(other), self)

    def __truediv__(self, other):
        if np.isscalar(other):
            return self.graph.apply("scale", self, c=1.0 / float(other))
        return self.graph.apply("div", self, self._lift(other))

    def __neg__(self):
        return self.graph.apply("scale", self, c=-1.0)

    def __matmul__(self, other):
        return self.graph.apply("matmul", self, self._lift(other))

    @property
    def T(self):
        return self.graph.apply("transpose", self)


# -- broadcasting helpers ----------------------------------------------------


def broadcast_shape(a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, ...]:
    out = []
    for i in range(1, max(len(a), len(b)) + 1):
        da = a[-i] if i <= len(a) else 1
        db = b[-i] if i <= len(b) else 1
        if da != db and da != 1 and db != 1:
            raise ShapeError(f"shapes {a} and {b} are not broadcast-compatible")
        out.append(max(da, db) if 0 not in (da, db) else 0)
    return tuple(reversed(out))


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (adjoint of trailing-dim broadcasting)."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# -- primitive table ---------------------------------------------------------


@dataclass(frozen=True)
class Primitive:
    arity: int
    forward: Callable[..., np.ndarray]
    # vjp(g, inputs, out, attrs) -> tuple of adjoints, one per input
    vjp: Callable[..., tuple]
    check: Callable[..., None] | None = None


def _check_binary(shapes, attrs):
    broadcast_shape(shapes[0], shapes[1])


def _check_matmul(shapes, attrs):
    a, b = shapes
    if len(a) != 2 or len(b) != 2 or a[1] != b[0]:
        raise ShapeError(f"matmul needs (m, k) @ (k, n); got {a} and {b}")


def _check_transpose(shapes, attrs):
    if len(shapes[0]) != 2:
        raise ShapeError(f"transpose needs a 2-D array; got {shapes[0]}")


def _check_take(shapes, attrs):
    idx = attrs["indices"]
    if len(shapes[0]) < 1:
        raise ShapeError("take needs at least one axis")
    if idx.size and (idx.min() < 0 or idx.max() >= shapes[0][0]):
        raise ShapeError(f"take indices out of range for shape {shapes[0]}")


def _check_concat(shapes, attrs):
    a, b = shapes
    if len(a) != len(b) or a[:-1] != b[:-1]:
        raise ShapeError(f"concat along last axis needs matching leading dims; got {a} and {b}")


def _check_reshape(shapes, attrs):
    try:
        np.empty(shapes[0], dtype=np.bool_).reshape(attrs["shape"])
    except ValueError:
        raise ShapeError(f"cannot reshape {shapes[0]} to {attrs['shape']}") from None


def _reduce_vjp(g, x, axis, keepdims):
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, x.shape).copy()


_SQRT_2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _gelu(x):
    return 0.5 * x * (1.0 + erf(x / _SQRT_2))


def _gelu_grad(x):
    return 0.5 * (1.0 + erf(x / _SQRT_2)) + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def _take_vjp(g, ins, out, attrs):
    (x,) = ins
    dx = np.zeros_like(x)
    np.add.at(dx, attrs["indices"], g)
    return (dx,)


PRIMITIVES: dict[str, Primitive] = {
    "add": Primitive(
        2, lambda a, b, **k: a + b,
        lambda g, ins, out, at: (unbroadcast(g, ins[0].shape), unbroadcast(g, ins[1].shape)),
        _check_binary),
    "sub": Primitive(
        2, lambda a, b, **k: a - b,
        lambda g, ins, out, at: (unbroadcast(g, ins[0].shape), unbroadcast(-g, ins[1].shape)),
        _check_binary),
    "mul": Primitive(
        2, lambda a, b, **k: a * b,
        lambda g, ins, out, at: (unbroadcast(g * ins[1], ins[0].shape),
                                 unbroadcast(g * ins[0], ins[1].shape)),
        _check_binary),
    "div": Primitive(
        2, lambda a, b, **k: a / b,
        lambda g, ins, out, at: (unbroadcast(g / ins[1], ins[0].shape),
                                 unbroadcast(-g * out / ins[1], ins[1].shape)),
        _check_binary),
    "scale": Primitive(
        1, lambda a, c, **k: c * a,
        lambda g, ins, out, at: (at["c"] * g,)),
    "matmul": Primitive(
        2, lambda a, b, **k: a @ b,
        lambda g, ins, out, at: (g @ ins[1].T, ins[0].T @ g),
        _check_matmul),
    "transpose": Primitive(
        1, lambda a, **k: np.ascontiguousarray(a.T),
        lambda g, ins, out, at: (g.T,),
        _check_transpose),
    "reshape": Primitive(
        1, lambda a, shape, **k: a.reshape(shape),
        lambda g, ins, out, at: (g.reshape(ins[0].shape),),
        _check_reshape),
    "sin": Primitive(1, lambda a, **k: np.sin(a), lambda g, ins, out, at: (g * np.cos(ins[0]),)),
    "cos": Primitive(1, lambda a, **k: np.cos(a), lambda g, ins, out, at: (-g * np.sin(ins[0]),)),
    "exp": Primitive(1, lambda a, **k: np.exp(a), lambda g, ins, out, at: (g * out,)),
    "square": Primitive(1, lambda a, **k: a * a, lambda g, ins, out, at: (2.0 * g * ins[0],)),
    "rsqrt": Primitive(1, lambda a, **k: 1.0 / np.sqrt(a),
                       lambda g, ins, out, at: (-0.5 * g * out ** 3,)),
    "gelu": Primitive(1, lambda a, **k: _gelu(a), lambda g, ins, out, at: (g * _gelu_grad(ins[0]),)),
    "sum": Primitive(
        1, lambda a, axis=None, keepdims=False, **k: np.sum(a, axis=axis, keepdims=keepdims),
        lambda g, ins, out, at: (_reduce_vjp(g, ins[0], at.get("axis"), at.get("keepdims", False)),)),
    "mean": Primitive(
        1, lambda a, axis=None, keepdims=False, **k: np.mean(a, axis=axis, keepdims=keepdims),
        lambda g, ins, out, at: (_reduce_vjp(g, ins[0], at.get("axis"), at.get("keepdims", False))
                                 * (out.size / ins[0].size),)),
    "take": Primitive(
        1, lambda a, indices, **k: a[indices],
        _take_vjp, _check_take),
    "concat": Primitive(
        2, lambda a, b, **k: np.concatenate([a, b], axis=-1),
        lambda g, ins, out, at: (g[..., : ins[0].shape[-1]], g[..., ins[0].shape[-1]:]),
        _check_concat),
}


class Graph:
    """Single-writer tape. Build a fresh one per optimization step."""

    def __init__(self, check_finite: bool = True):
        self.nodes: list[Node] = []
        self.check_finite = check_finite

    def __len__(self):
        return len(self.nodes)

    def _push(self, node: Node) -> Var:
        self.nodes.append(node)
        return Var(self, len(self.nodes) - 1)

    def leaf(self, value, name: str | None = None, requires_grad: bool = True) -> Var:
        arr = np.array(value, dtype=np.float64)
        return self._push(Node("leaf", (), arr, requires_grad=requires_grad, name=name))

    def constant(self, value, name: str | None = None) -> Var:
        arr = np.asarray(value, dtype=np.float64)
        return self._push(Node("const", (), arr, requires_grad=False, name=name))

    def apply(self, op: str, *inputs, **attrs) -> Var:
        """Evaluate primitive ``op`` on ``inputs`` (Vars or node ids) and record it."""
        try:
            prim = PRIMITIVES[op]
        except KeyError:
            raise UnknownPrimitiveError(f"unknown primitive {op!r}") from None
        ids = tuple(v.id if isinstance(v, Var) else int(v) for v in inputs)
        if len(ids) != prim.arity:
            raise AutogradError(f"{op} takes {prim.arity} inputs, got {len(ids)}")
        vals = [self.nodes[i].value for i in ids]
        if "indices" in attrs:
            attrs["indices"] = np.asarray(attrs["indices"], dtype=np.intp)
        if "shape" in attrs:
            attrs["shape"] = tuple(attrs["shape"])
        if prim.check is not None:
            prim.check([v.shape for v in vals], attrs)
        # overflow is reported below as NonFiniteError, not as a numpy warning
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            out = np.asarray(prim.forward(*vals, **attrs), dtype=np.float64)
        if self.check_finite and not math.isfinite(out.sum()) and not np.all(np.isfinite(out)):
            if all(np.all(np.isfinite(v)) for v in vals):
                raise NonFiniteError(f"{op} produced non-finite values from finite inputs")
        needs = any(self.nodes[i].requires_grad for i in ids)
        return self._push(Node(op, ids, out, attrs, requires_grad=needs))

    def leaves(self) -> list[int]:
        return [i for i, n in enumerate(self.nodes) if n.op == "leaf" and n.requires_grad]


def apply_primitive(graph: Graph, op: str, inputs) -> Var:
    return graph.apply(op, *inputs)


def backward(graph: Graph, loss) -> dict[int, np.ndarray]:
    """Adjoints of a scalar ``loss`` with respect to every trainable leaf."""
    loss_id = loss.id if isinstance(loss, Var) else int(loss)
    lval = graph.nodes[loss_id].value
    if lval.size != 1:
        raise ShapeError(f"backward needs a scalar loss; got shape {lval.shape}")

    adj: dict[int, np.ndarray] = {loss_id: np.ones_like(lval)}
    for nid in range(loss_id, -1, -1):
        node = graph.nodes[nid]
        g = adj.get(nid)
        if g is None or node.is_leaf or not node.requires_grad:
            continue
        prim = PRIMITIVES[node.op]
        ins = [graph.nodes[i].value for i in node.inputs]
        with np.errstate(over="ignore", invalid="ignore"):
            grads = prim.vjp(g, ins, node.value, node.attrs)
        for i, gi in zip(node.inputs, grads):
            if not graph.nodes[i].requires_grad:
                continue
            if i in adj:
                adj[i] = adj[i] + gi
            else:
                adj[i] = gi
        if nid != loss_id:
            del adj[nid]

    return {i: adj.get(i, np.zeros_like(graph.nodes[i].value)) for i in graph.leaves()}


# -- functional sugar ---------------------------------------------------------


def sin(x: Var) -> Var:
    return x.graph.apply("sin", x)


def cos(x: Var) -> Var:
    return x.graph.apply("cos", x)


def exp(x: Var) -> Var:
    return x.graph.apply("exp", x)


def square(x: Var) -> Var:
    return x.graph.apply("square", x)


def rsqrt(x: Var) -> Var:
    return x.graph.apply("rsqrt", x)


def gelu(x: Var) -> Var:
    return x.graph.apply("gelu", x)


def matmul(a: Var, b: Var) -> Var:
    return a.graph.apply("matmul", a, b)


def transpose(x: Var) -> Var:
    return x.graph.apply("transpose", x)


def reshape(x: Var, shape) -> Var:
    return x.graph.apply("reshape", x, shape=shape)


def sum(x: Var, axis=None, keepdims=False) -> Var:  # noqa: A001
    return x.graph.apply("sum", x, axis=axis, keepdims=keepdims)


def mean(x: Var, axis=None, keepdims=False) -> Var:
    return x.graph.apply("mean", x, axis=axis, keepdims=keepdims)


def take(x: Var, indices) -> Var:
    return x.graph.apply("take", x, indices=indices)


def concat(a: Var, b: Var) -> Var:
    return a.graph.apply("concat", a, b)


def linear(x: Var, w: Var, b: Var | None = None) -> Var:
    """``x @ w.T + b`` with ``w`` stored as (out, in)."""
    y = x @ transpose(w)
    return y if b is None else y + b


# -- finite-difference verification --------------------------------------------


GraphBuilder = Callable[[Graph, Mapping[str, Var]], Var]


def evaluate(f: GraphBuilder, params: Mapping[str, np.ndarray]) -> float:
    g = Graph()
    pvars = {k: g.leaf(v, name=k) for k, v in params.items()}
    return float(f(g, pvars).value)


def gradients(f: GraphBuilder, params: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    g = Graph()
    pvars = {k: g.leaf(v, name=k) for k, v in params.items()}
    grads = backward(g, f(g, pvars))
    return {k: grads[v.id] for k, v in pvars.items()}


def gradient_check(f: GraphBuilder, params: Mapping[str, Any], step: float = 1e-6) -> float:
    """Largest relative disagreement between AD and central differences.

    ``f(graph, vars)`` must build a scalar loss from the leaf ``vars``.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    ad = gradients(f, params)
    worst = 0.0
    for name, arr in params.items():
        flat = arr.reshape(-1)
        g_ad = ad[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            try:
                flat[i] = orig + step
                fp = evaluate(f, params)
                flat[i] = orig - step
                fm = evaluate(f, params)
            except NonFiniteError as exc:
                raise NonFiniteError(f"non-finite value probing {name}[{i}]") from exc
            finally:
                flat[i] = orig
            if not (math.isfinite(fp) and math.isfinite(fm)):
                raise NonFiniteError(f"non-finite loss probing {name}[{i}]")
            g_fd = (fp - fm) / (2.0 * step)
            err = abs(g_ad[i] - g_fd) / max(1e-12, abs(g_ad[i]) + abs(g_fd))
            worst = max(worst, err)
    return worst
