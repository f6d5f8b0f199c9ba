"""Minimal reverse-mode automatic differentiation over dense float64 arrays.

Everything the forecasters need is expressible with scalar, 1-D and 2-D
tensors: causal dilated convolution, affine maps, pointwise nonlinearities,
reductions, and a handful of structural ops (shift, concat, stack, row
picks). Each operation records its inputs and a backward closure; calling
:func:`backward` on a scalar loss replays the recorded operations in
reverse insertion order and accumulates gradients on every leaf that
requires them.

The tape is implicit: tensors carry a monotonically increasing insertion
id, so parents always precede children and the reachable subgraph sorted
by id is a valid topological order. A fresh graph is built on every
forward pass.
"""

from __future__ import annotations

import itertools

import numpy as np

_INSERTION = itertools.count()


class Tensor:
    """Dense float64 array plus its position in the differentiation graph.

    ``node`` is the insertion id; ``grad`` stays ``None`` until a backward
    pass deposits a gradient of identical shape.
    """

    __slots__ = ("data", "requires_grad", "grad", "node", "_parents", "_backward", "_done")

    def __init__(self, values, requires_grad: bool = False):
        data = np.asarray(values, dtype=np.float64)
        if data.ndim > 2:
            raise ValueError(f"only scalar, 1-D and 2-D tensors are supported, got ndim={data.ndim}")
        self.data = data
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.node = next(_INSERTION)
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None
        self._done = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> np.ndarray:
        return self.data.copy()

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


class Graph:
    """Insertion-ordered view of every tensor reachable from a root.

    ``nodes`` is sorted by insertion id, so parents always precede
    children; the reversed order is the backward schedule.
    """

    def __init__(self, nodes: list[Tensor]):
        self.nodes = nodes

    @classmethod
    def trace(cls, root: Tensor) -> "Graph":
        seen: dict[int, Tensor] = {}
        stack = [root]
        while stack:
            t = stack.pop()
            if id(t) in seen:
                continue
            seen[id(t)] = t
            stack.extend(t._parents)
        return cls(sorted(seen.values(), key=lambda t: t.node))


def _result(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    out = Tensor(data)
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = parents
        out._backward = backward_fn
    return out


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def backward(loss: Tensor) -> None:
    """Populate gradients on every requires_grad leaf reachable from ``loss``.

    The loss must be scalar and attached to a graph; a second call on the
    same loss without rebuilding the graph is an error.
    """
    if loss.data.ndim != 0 and loss.data.size != 1:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.shape}")
    if loss._done:
        raise RuntimeError("backward already ran for this loss; rebuild the graph first")
    if not loss._parents and not loss.requires_grad:
        raise RuntimeError("loss is detached from the differentiation graph")
    graph = Graph.trace(loss)
    loss.grad = np.ones_like(loss.data)
    for t in reversed(graph.nodes):
        if t._backward is not None and t.grad is not None:
            t._backward(t.grad)
    loss._done = True


def zero_grad(params) -> None:
    for p in params:
        p.grad = None


def _check_same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{op}: shape mismatch {a.shape} vs {b.shape} (no broadcasting)")


# ---------------------------------------------------------------------------
# elementwise operations

def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "add")

    def back(g):
        _accumulate(a, g)
        _accumulate(b, g)

    return _result(a.data + b.data, (a, b), back)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "sub")

    def back(g):
        _accumulate(a, g)
        _accumulate(b, -g)

    return _result(a.data - b.data, (a, b), back)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "mul")

    def back(g):
        _accumulate(a, g * b.data)
        _accumulate(b, g * a.data)

    return _result(a.data * b.data, (a, b), back)


def scale(x: Tensor, c: float) -> Tensor:
    c = float(c)

    def back(g):
        _accumulate(x, g * c)

    return _result(x.data * c, (x,), back)


def add_scalar(x: Tensor, c: float) -> Tensor:
    c = float(c)

    def back(g):
        _accumulate(x, g)

    return _result(x.data + c, (x,), back)


def square(x: Tensor) -> Tensor:
    def back(g):
        _accumulate(x, 2.0 * x.data * g)

    return _result(x.data * x.data, (x,), back)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def back(g):
        _accumulate(x, g * mask)

    return _result(np.maximum(x.data, 0.0), (x,), back)


def sigmoid(x: Tensor) -> Tensor:
    s = 1.0 / (1.0 + np.exp(-x.data))

    def back(g):
        _accumulate(x, g * s * (1.0 - s))

    return _result(s, (x,), back)


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)

    def back(g):
        _accumulate(x, g * (1.0 - t * t))

    return _result(t, (x,), back)


_UNARY = {"relu": relu, "sigmoid": sigmoid, "tanh": tanh}
_BINARY = {"add": add, "mul": mul}


def elementwise(kind: str, *inputs: Tensor) -> Tensor:
    """Dispatch on ``kind``: relu/sigmoid/tanh take one input, add/mul two."""
    if kind in _UNARY:
        if len(inputs) != 1:
            raise ValueError(f"{kind} takes exactly one input")
        return _UNARY[kind](inputs[0])
    if kind in _BINARY:
        if len(inputs) != 2:
            raise ValueError(f"{kind} takes exactly two inputs")
        return _BINARY[kind](inputs[0], inputs[1])
    raise ValueError(f"unknown elementwise kind {kind!r}")


def apply_mask(x: Tensor, mask: np.ndarray) -> Tensor:
    """Multiply by a constant (non-differentiated) mask, e.g. for dropout."""
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != x.shape:
        raise ValueError(f"mask shape {mask.shape} does not match {x.shape}")

    def back(g):
        _accumulate(x, g * mask)

    return _result(x.data * mask, (x,), back)


# ---------------------------------------------------------------------------
# linear algebra

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product for (m,n)@(n,) -> (m,) and (m,n)@(n,p) -> (m,p)."""
    if a.data.ndim != 2:
        raise ValueError(f"matmul: left operand must be 2-D, got {a.shape}")
    if b.data.ndim not in (1, 2):
        raise ValueError(f"matmul: right operand must be 1-D or 2-D, got {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: inner dimensions disagree {a.shape} vs {b.shape}")

    if b.data.ndim == 1:
        def back(g):
            _accumulate(a, np.outer(g, b.data))
            _accumulate(b, a.data.T @ g)
    else:
        def back(g):
            _accumulate(a, g @ b.data.T)
            _accumulate(b, a.data.T @ g)

    return _result(a.data @ b.data, (a, b), back)


def transpose(x: Tensor) -> Tensor:
    if x.data.ndim != 2:
        raise ValueError(f"transpose expects a 2-D tensor, got {x.shape}")

    def back(g):
        _accumulate(x, g.T)

    return _result(x.data.T.copy(), (x,), back)


def dense(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    """Affine map weights @ x + bias for a 1-D input.

    Shapes must agree exactly: weights (m, n), x (n,), bias (m,).
    """
    if x.data.ndim != 1 or weights.data.ndim != 2 or bias.data.ndim != 1:
        raise ValueError("dense expects x (n,), weights (m,n), bias (m,)")
    m, n = weights.shape
    if x.shape[0] != n or bias.shape[0] != m:
        raise ValueError(
            f"dense: shape mismatch weights {weights.shape}, x {x.shape}, bias {bias.shape}")
    return add(matmul(weights, x), bias)


def add_rowvec(x: Tensor, v: Tensor) -> Tensor:
    """Add a length-C vector to every row of a (T, C) tensor."""
    if x.data.ndim != 2 or v.data.ndim != 1 or x.shape[1] != v.shape[0]:
        raise ValueError(f"add_rowvec: incompatible shapes {x.shape} and {v.shape}")

    def back(g):
        _accumulate(x, g)
        _accumulate(v, g.sum(axis=0))

    return _result(x.data + v.data, (x, v), back)


# ---------------------------------------------------------------------------
# structural operations

def shift_rows(x: Tensor, s: int) -> Tensor:
    """Shift forward in time by ``s`` steps along axis 0, zero-filling the start."""
    if s < 0:
        raise ValueError("shift must be non-negative (causal)")
    n = x.shape[0]
    out = np.zeros_like(x.data)
    if s < n:
        out[s:] = x.data[: n - s]

    def back(g):
        gx = np.zeros_like(x.data)
        if s < n:
            gx[: n - s] = g[s:]
        _accumulate(x, gx)

    return _result(out, (x,), back)


def concat_cols(parts: list[Tensor]) -> Tensor:
    """Concatenate (T, C_i) tensors along the feature axis."""
    if not parts:
        raise ValueError("concat_cols needs at least one tensor")
    rows = parts[0].shape[0]
    for p in parts:
        if p.data.ndim != 2 or p.shape[0] != rows:
            raise ValueError("concat_cols: all parts must be 2-D with equal row counts")
    widths = [p.shape[1] for p in parts]
    offsets = np.cumsum([0] + widths)

    def back(g):
        for p, a, b in zip(parts, offsets[:-1], offsets[1:]):
            _accumulate(p, g[:, a:b])

    return _result(np.concatenate([p.data for p in parts], axis=1), tuple(parts), back)


def concat_vec(parts: list[Tensor]) -> Tensor:
    """Concatenate 1-D tensors into one vector."""
    if not parts:
        raise ValueError("concat_vec needs at least one tensor")
    for p in parts:
        if p.data.ndim != 1:
            raise ValueError("concat_vec: all parts must be 1-D")
    widths = [p.shape[0] for p in parts]
    offsets = np.cumsum([0] + widths)

    def back(g):
        for p, a, b in zip(parts, offsets[:-1], offsets[1:]):
            _accumulate(p, g[a:b])

    return _result(np.concatenate([p.data for p in parts]), tuple(parts), back)


def pick_row(x: Tensor, i: int) -> Tensor:
    """Extract row ``i`` of a (T, C) tensor as a (C,) tensor."""
    if x.data.ndim != 2:
        raise ValueError(f"pick_row expects a 2-D tensor, got {x.shape}")
    if not 0 <= i < x.shape[0]:
        raise IndexError(f"row {i} out of range for {x.shape}")

    def back(g):
        gx = np.zeros_like(x.data)
        gx[i] = g
        _accumulate(x, gx)

    return _result(x.data[i].copy(), (x,), back)


def stack_rows(rows: list[Tensor]) -> Tensor:
    """Stack 1-D tensors of equal length into a (T, C) tensor."""
    if not rows:
        raise ValueError("stack_rows needs at least one tensor")
    width = rows[0].shape[0]
    for r in rows:
        if r.data.ndim != 1 or r.shape[0] != width:
            raise ValueError("stack_rows: all rows must be 1-D with equal length")

    def back(g):
        for i, r in enumerate(rows):
            _accumulate(r, g[i])

    return _result(np.stack([r.data for r in rows]), tuple(rows), back)


def tsum(x: Tensor) -> Tensor:
    def back(g):
        _accumulate(x, np.full_like(x.data, float(g)))

    return _result(np.asarray(x.data.sum()), (x,), back)


def tmean(x: Tensor) -> Tensor:
    n = x.data.size

    def back(g):
        _accumulate(x, np.full_like(x.data, float(g) / n))

    return _result(np.asarray(x.data.mean()), (x,), back)


# ---------------------------------------------------------------------------
# convolution and normalization

def causal_dilated_conv1d(x: Tensor, filt: Tensor, dilation: int) -> Tensor:
    """Dilated causal convolution of a 1-D signal with a 1-D filter.

    output[s] = sum_i filt[i] * x[s - dilation*i], with out-of-range terms
    zero, so the output has the same length as the input and no future
    sample contributes to any position.
    """
    if x.data.ndim != 1 or filt.data.ndim != 1:
        raise ValueError("causal_dilated_conv1d expects 1-D signal and filter")
    if x.data.size == 0:
        raise ValueError("empty input signal")
    k = filt.shape[0]
    if k < 1:
        raise ValueError("filter must have at least one tap")
    d = int(dilation)
    if d < 1:
        raise ValueError("dilation must be a positive integer")

    n = x.shape[0]
    pad = (k - 1) * d
    xp = np.concatenate([np.zeros(pad), x.data])
    out = np.zeros(n)
    for i in range(k):
        out += filt.data[i] * xp[pad - d * i : pad - d * i + n]

    def back(g):
        gp = np.concatenate([g, np.zeros(pad)])
        gx = np.zeros(n)
        gf = np.zeros(k)
        for i in range(k):
            gx += filt.data[i] * gp[d * i : d * i + n]
            gf[i] = g @ xp[pad - d * i : pad - d * i + n]
        _accumulate(x, gx)
        _accumulate(filt, gf)

    return _result(out, (x, filt), back)


def normalize_axis(x: Tensor, gamma: Tensor, beta: Tensor, axis: int, eps: float = 1e-5) -> Tensor:
    """Normalize a (T, C) tensor along ``axis`` and rescale per channel.

    axis=1 normalizes each timestep over its channels (layer style);
    axis=0 normalizes each channel over time (batch style, which mixes
    timesteps and is therefore not causal).
    """
    if x.data.ndim != 2:
        raise ValueError("normalize_axis expects a 2-D tensor")
    if axis not in (0, 1):
        raise ValueError("axis must be 0 or 1")
    c = x.shape[1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ValueError("gamma and beta must have one entry per channel")

    mu = x.data.mean(axis=axis, keepdims=True)
    var = x.data.var(axis=axis, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = xhat * gamma.data + beta.data

    def back(g):
        gh = g * gamma.data
        m1 = gh.mean(axis=axis, keepdims=True)
        m2 = (gh * xhat).mean(axis=axis, keepdims=True)
        _accumulate(x, inv * (gh - m1 - xhat * m2))
        _accumulate(gamma, (g * xhat).sum(axis=0))
        _accumulate(beta, g.sum(axis=0))

    return _result(out, (x, gamma, beta), back)


def colnorm_scale(v: Tensor, g: Tensor, eps: float = 1e-12) -> Tensor:
    """Weight normalization: column j of the result is g[j] * v[:,j] / ||v[:,j]||."""
    if v.data.ndim != 2 or g.data.ndim != 1 or v.shape[1] != g.shape[0]:
        raise ValueError(f"colnorm_scale: incompatible shapes {v.shape} and {g.shape}")
    norms = np.sqrt((v.data * v.data).sum(axis=0)) + eps
    unit = v.data / norms
    out = unit * g.data

    def back(grad):
        dot = (grad * unit).sum(axis=0)
        _accumulate(v, (g.data / norms) * (grad - unit * dot))
        _accumulate(g, dot)

    return _result(out, (v, g), back)
