"""Small reverse-mode differentiation core on 2-D float64 arrays.

Everything here is matrix-valued: scalars are 1x1, vectors are rows or
columns.  A :class:`Value` records the operation that produced it, and
:func:`backward` walks the recorded graph in reverse creation order.

Only what the set encoder and the similarity loss need is provided:
dense layers (fused affine + activation), residual blocks, row pooling
(whole matrix, contiguous segments or a sparse pooling matrix), row gathers, a handful of
elementwise functions and Adam.
"""

from __future__ import annotations

import contextlib
import itertools
import json
import math
from typing import Callable, Iterable, Sequence

import numpy as np

_ids = itertools.count()
_grad_enabled = True


class ShapeError(ValueError):
    pass


class EmptyPoolError(ValueError):
    pass


@contextlib.contextmanager
def no_grad():
    """Disable graph recording (inference only)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Value:
    """A float64 matrix node in the computation graph."""

    __slots__ = ("data", "_grad", "parents", "backward_fn", "op", "id")

    def __init__(self, data, parents: tuple = (), backward_fn: Callable | None = None,
                 op: str = "leaf"):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ShapeError(f"Value must be at most 2-D, got shape {arr.shape}")
        self.data = arr
        self._grad = None
        if _grad_enabled:
            self.parents = parents
            self.backward_fn = backward_fn
        else:
            self.parents = ()
            self.backward_fn = None
        self.op = op
        self.id = next(_ids)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def grad(self) -> np.ndarray:
        # allocated on first use; arrays stored here are never mutated in place
        if self._grad is None:
            self._grad = np.zeros_like(self.data)
        return self._grad

    @grad.setter
    def grad(self, value) -> None:
        self._grad = np.asarray(value, dtype=np.float64)

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a 1x1 value, got {self.shape}")
        return float(self.data[0, 0])

    def zero_grad(self) -> None:
        self._grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        self._grad = g if self._grad is None else self._grad + g

    def __repr__(self) -> str:
        return f"Value(shape={self.shape}, op={self.op})"

    def __add__(self, other):
        return add(self, _lift(other, self))

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, scale(_lift(other, self), -1.0))

    def __rsub__(self, other):
        return add(_lift(other, self), scale(self, -1.0))

    def __mul__(self, other):
        if isinstance(other, Value):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __pow__(self, exponent: float):
        return power(self, exponent)


def _lift(x, like: Value) -> Value:
    if isinstance(x, Value):
        return x
    return Value(np.full(like.shape, float(x)), op="const")


def _node(data, parents, backward_fn, op) -> Value:
    return Value(data, parents, backward_fn, op)


# --------------------------------------------------------------------- ops


def add(a: Value, b: Value) -> Value:
    if a.shape != b.shape:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} differ")
    return _node(a.data + b.data, (a, b), lambda g: (g, g), "add")


def scale(a: Value, c: float) -> Value:
    return _node(a.data * c, (a,), lambda g: (g * c,), "scale")


def mul(a: Value, b: Value) -> Value:
    if a.shape != b.shape:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} differ")
    return _node(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data), "mul")


def power(a: Value, p: float) -> Value:
    out = a.data ** p
    return _node(out, (a,), lambda g: (g * p * a.data ** (p - 1),), "pow")


def relu(a: Value) -> Value:
    mask = a.data > 0
    return _node(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,), "relu")


def exp(a: Value) -> Value:
    out = np.exp(a.data)
    return _node(out, (a,), lambda g: (g * out,), "exp")


def log(a: Value) -> Value:
    return _node(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def clip(a: Value, lo: float, hi: float) -> Value:
    """Clamp to [lo, hi]; gradient is zero where clamping is active."""
    inside = (a.data >= lo) & (a.data <= hi)
    return _node(np.clip(a.data, lo, hi), (a,), lambda g: (g * inside,), "clip")


def matmul(a: Value, b: Value) -> Value:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not align")
    return _node(a.data @ b.data, (a, b),
                 lambda g: (g @ b.data.T, a.data.T @ g), "matmul")


def affine(x: Value, w: Value, b: Value, activation: str = "relu") -> Value:
    """Fused ``activation(x @ w + b)`` with ``b`` a 1 x out row."""
    if x.shape[1] != w.shape[0]:
        raise ShapeError(
            f"dense: input shape {x.shape} does not match weight shape {w.shape}")
    z = x.data @ w.data
    z += b.data
    if activation == "relu":
        mask = z > 0
        z *= mask

        def backward_fn(g):
            g = g * mask
            return g @ w.data.T, x.data.T @ g, g.sum(axis=0, keepdims=True)
    elif activation == "identity":
        def backward_fn(g):
            return g @ w.data.T, x.data.T @ g, g.sum(axis=0, keepdims=True)
    else:
        raise ValueError(f"unknown activation {activation!r}")
    return _node(z, (x, w, b), backward_fn, "dense")


def total(a: Value) -> Value:
    return _node(np.array([[a.data.sum()]]), (a,),
                 lambda g: (np.full(a.shape, g[0, 0]),), "sum")


def mean(a: Value) -> Value:
    n = a.data.size
    if n == 0:
        raise EmptyPoolError("mean of an empty value")
    return _node(np.array([[a.data.sum() / n]]), (a,),
                 lambda g: (np.full(a.shape, g[0, 0] / n),), "mean")


def mean_pool(a: Value) -> Value:
    """Column means as a single row; pairwise summation via ``np.sum``."""
    n = a.shape[0]
    if n == 0:
        raise EmptyPoolError("mean_pool over zero rows")
    out = np.sum(a.data, axis=0, keepdims=True) / n
    return _node(out, (a,), lambda g: (np.repeat(g / n, n, axis=0),), "mean_pool")


def segment_mean(a: Value, offsets: np.ndarray) -> Value:
    """Mean over contiguous row segments ``a[offsets[i]:offsets[i+1]]``.

    ``offsets`` starts at 0, ends at ``a.shape[0]`` and is strictly
    increasing (no empty segments).
    """
    offsets = np.asarray(offsets, dtype=np.int64)
    counts = np.diff(offsets)
    if offsets[0] != 0 or offsets[-1] != a.shape[0] or np.any(counts <= 0):
        raise EmptyPoolError("segment offsets must cover all rows with non-empty segments")
    sums = np.add.reduceat(a.data, offsets[:-1], axis=0)
    out = sums / counts[:, None]

    def backward_fn(g):
        return (np.repeat(g / counts[:, None], counts, axis=0),)

    return _node(out, (a,), backward_fn, "segment_mean")


def sparse_pool(a: Value, matrix) -> Value:
    """``matrix @ a`` for a fixed (typically scipy sparse) pooling matrix."""
    if matrix.shape[1] != a.shape[0]:
        raise ShapeError(f"pooling matrix {matrix.shape} does not match {a.shape[0]} rows")
    out = np.asarray(matrix @ a.data)
    return _node(out, (a,), lambda g: (np.asarray(matrix.T @ g),), "sparse_pool")


def take_rows(a: Value, index: Sequence[int]) -> Value:
    idx = np.asarray(index, dtype=np.int64)

    def backward_fn(g):
        out = np.zeros_like(a.data)
        np.add.at(out, idx, g)
        return (out,)

    return _node(a.data[idx], (a,), backward_fn, "take_rows")


def row_norm(a: Value) -> Value:
    """Euclidean norm of each row, as a column; zero rows get zero gradient."""
    n = np.sqrt(np.sum(a.data * a.data, axis=1, keepdims=True))

    def backward_fn(g):
        safe = np.where(n > 0, n, 1.0)
        return (np.where(n > 0, g / safe, 0.0) * a.data,)

    return _node(n, (a,), backward_fn, "row_norm")


# ---------------------------------------------------------------- backward


def _topo_order(root: Value) -> list[Value]:
    seen = {id(root): root}
    stack = [root]
    while stack:
        node = stack.pop()
        for p in node.parents:
            if id(p) not in seen:
                seen[id(p)] = p
                stack.append(p)
    # creation order is a valid topological order of the tape
    return sorted(seen.values(), key=lambda v: v.id, reverse=True)


def backward(loss: Value) -> None:
    """Accumulate d(loss)/d(node) into ``.grad`` of every reachable node."""
    if loss.shape != (1, 1):
        raise ValueError(f"backward needs a scalar (1x1) loss, got shape {loss.shape}")
    order = _topo_order(loss)
    pending: dict[int, np.ndarray] = {id(loss): np.ones((1, 1))}
    for node in order:
        g = pending.pop(id(node), None)
        if g is None:
            continue
        node._accumulate(g)
        if node.backward_fn is None:
            continue
        for parent, pg in zip(node.parents, node.backward_fn(g)):
            key = id(parent)
            if key in pending:
                pending[key] = pending[key] + pg
            else:
                pending[key] = pg


# ------------------------------------------------------------------ layers


class DenseLayer:
    def __init__(self, n_in: int, n_out: int, activation: str = "relu",
                 rng: np.random.Generator | None = None):
        if activation not in ("relu", "identity"):
            raise ValueError(f"unknown activation {activation!r}")
        rng = rng if rng is not None else np.random.default_rng(0)
        # He-uniform
        limit = math.sqrt(6.0 / n_in)
        self.weights = Value(rng.uniform(-limit, limit, size=(n_in, n_out)), op="param")
        self.bias = Value(np.zeros((1, n_out)), op="param")
        self.activation = activation

    @property
    def n_in(self) -> int:
        return self.weights.shape[0]

    @property
    def n_out(self) -> int:
        return self.weights.shape[1]

    def __call__(self, x: Value) -> Value:
        return affine(x, self.weights, self.bias, self.activation)

    def parameters(self) -> list[Value]:
        return [self.weights, self.bias]

    def describe(self) -> dict:
        return {"type": "dense", "in": self.n_in, "out": self.n_out,
                "activation": self.activation}


class ResidualBlock:
    """``x + F(x)`` where F is ``depth`` ReLU dense layers of equal width.

    ``branch_scale`` shrinks the initial weights of the last layer of F so
    that long stacks of blocks do not inflate activations at initialization.
    """

    def __init__(self, depth: int, width: int, rng: np.random.Generator | None = None,
                 branch_scale: float = 1.0):
        self.layers = [DenseLayer(width, width, "relu", rng) for _ in range(depth)]
        self.layers[-1].weights.data = self.layers[-1].weights.data * branch_scale

    @property
    def n_in(self) -> int:
        return self.layers[0].n_in

    @property
    def n_out(self) -> int:
        return self.layers[-1].n_out

    def __call__(self, x: Value) -> Value:
        if x.shape[1] != self.n_in:
            raise ShapeError(
                f"residual block: input shape {x.shape} does not match width {self.n_in}")
        e = x
        for layer in self.layers:
            e = layer(e)
        return add(x, e)

    def parameters(self) -> list[Value]:
        return [p for layer in self.layers for p in layer.parameters()]

    def describe(self) -> dict:
        return {"type": "residual", "depth": len(self.layers), "width": self.n_in}


class Sequential:
    def __init__(self, modules: Iterable):
        self.modules = list(modules)

    def __call__(self, x: Value) -> Value:
        for m in self.modules:
            x = m(x)
        return x

    def parameters(self) -> list[Value]:
        return [p for m in self.modules for p in m.parameters()]

    @property
    def n_in(self) -> int:
        return self.modules[0].n_in

    @property
    def n_out(self) -> int:
        return self.modules[-1].n_out


def count_parameters(params: Iterable[Value]) -> int:
    return int(sum(p.data.size for p in params))


# --------------------------------------------------------------- optimizer


class Adam:
    def __init__(self, params: Sequence[Value], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        """Apply one bias-corrected update from the parameters' ``.grad``.

        Raises FloatingPointError (and leaves everything untouched) when any
        gradient entry is NaN or infinite.
        """
        for i, p in enumerate(self.params):
            if not np.all(np.isfinite(p.grad)):
                raise FloatingPointError(
                    f"non-finite gradient in parameter {i} (shape {p.shape}); update rejected")
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


# -------------------------------------------------------------- checkpoint

CHECKPOINT_FORMAT = "metafeat-params"
CHECKPOINT_VERSION = 1


def params_to_dict(params: Sequence[Value]) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "arrays": [{"shape": list(p.shape), "data": p.data.ravel().tolist()}
                   for p in params],
    }


def params_from_dict(params: Sequence[Value], doc: dict) -> None:
    if doc.get("format") != CHECKPOINT_FORMAT or doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError("not a parameter checkpoint of a supported version")
    arrays = doc["arrays"]
    if len(arrays) != len(params):
        raise ValueError(f"checkpoint has {len(arrays)} arrays, model has {len(params)}")
    for i, (p, a) in enumerate(zip(params, arrays)):
        if tuple(a["shape"]) != p.shape:
            raise ShapeError(f"array {i}: checkpoint shape {tuple(a['shape'])} != {p.shape}")
        p.data = np.asarray(a["data"], dtype=np.float64).reshape(p.shape)
        p.zero_grad()


def save_params(params: Sequence[Value], path, extra: dict | None = None) -> None:
    doc = params_to_dict(params)
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh)
