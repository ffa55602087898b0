"""Minimal reverse-mode autodiff on float64 numpy arrays.

Values are plain C-order ndarrays wrapped in graph `Node`s. Each op builds a
node whose backward closure accumulates into its parents; `backward(loss)`
walks the graph once in reverse topological order. Only the operations the
dialogue model needs are provided; no fusion, no higher-order grads, no GPU.
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Operand shapes do not satisfy an op's contract."""


class GraphError(RuntimeError):
    """Graph misuse: non-scalar loss, repeated backward, non-finite update."""


Array = np.ndarray


def _f64(x) -> Array:
    arr = np.asarray(x, dtype=np.float64)
    # ascontiguousarray would promote 0-d scalars to shape (1,)
    return arr if arr.flags["C_CONTIGUOUS"] else np.ascontiguousarray(arr)


class Node:
    """One value in the computation graph.

    value (ndarray, float64), grad (same shape, lazily created), parents and
    a backward closure that routes the output gradient to them.
    """

    __slots__ = ("value", "grad", "parents", "requires_grad", "name", "_backward", "_done")

    def __init__(self, value, parents=(), backward=None, requires_grad=None, name=None):
        self.value = _f64(value)
        self.parents = tuple(parents)
        self._backward = backward
        if requires_grad is None:
            requires_grad = any(p.requires_grad for p in self.parents)
        self.requires_grad = requires_grad
        self.grad = None
        self.name = name
        self._done = False

    @property
    def shape(self):
        return self.value.shape

    def accumulate(self, g: Array) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad = self.grad + g

    def __repr__(self):
        tag = self.name or "node"
        return f"Node({tag}, shape={self.value.shape}, requires_grad={self.requires_grad})"


def constant(x, name=None) -> Node:
    return Node(x, requires_grad=False, name=name)


def param(x, name=None) -> Node:
    return Node(x, requires_grad=True, name=name)


# -----------------------------------------------------------------------------
# backward
# -----------------------------------------------------------------------------


def _toposort(root: Node) -> list[Node]:
    """Iterative DFS; each node appears once, parents before children."""
    order: list[Node] = []
    seen: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    return order


def backward(loss: Node) -> dict[Node, Array]:
    """Backpropagate from a scalar loss.

    Fills .grad on every node that requires grad and returns {leaf: grad} for
    the requires_grad leaves. One shot per graph: a second call without
    `reset` raises GraphError.
    """
    if loss.value.size != 1:
        raise GraphError(f"loss must be scalar, got shape {loss.value.shape}")
    if loss._done:
        raise GraphError("backward already ran on this graph; call reset(loss) first")
    loss._done = True
    order = _toposort(loss)
    for node in order:
        node.grad = None  # leaves may be shared with earlier graphs
    loss.grad = np.ones_like(loss.value)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
    return {n: n.grad for n in order if not n.parents and n.requires_grad}


def reset(loss: Node) -> None:
    """Clear grads and the one-shot flag so the same graph can backprop again."""
    for node in _toposort(loss):
        node.grad = None
    loss._done = False


# -----------------------------------------------------------------------------
# elementwise and structural ops
# -----------------------------------------------------------------------------


def _unbroadcast(g: Array, shape: tuple) -> Array:
    """Sum g down to `shape` (reverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def add(a: Node, b: Node) -> Node:
    out = Node(a.value + b.value, (a, b))

    def bw(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.value.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g, b.value.shape))

    out._backward = bw
    return out


def sub(a: Node, b: Node) -> Node:
    out = Node(a.value - b.value, (a, b))

    def bw(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.value.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(-g, b.value.shape))

    out._backward = bw
    return out


def mul(a: Node, b: Node) -> Node:
    out = Node(a.value * b.value, (a, b))

    def bw(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g * b.value, a.value.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g * a.value, b.value.shape))

    out._backward = bw
    return out


def scale(a: Node, s: float) -> Node:
    out = Node(a.value * s, (a,))

    def bw(g):
        if a.requires_grad:
            a.accumulate(g * s)

    out._backward = bw
    return out


def tanh(a: Node) -> Node:
    y = np.tanh(a.value)
    out = Node(y, (a,))

    def bw(g):
        if a.requires_grad:
            a.accumulate(g * (1.0 - y * y))

    out._backward = bw
    return out


def sigmoid(a: Node) -> Node:
    y = 1.0 / (1.0 + np.exp(-a.value))
    out = Node(y, (a,))

    def bw(g):
        if a.requires_grad:
            a.accumulate(g * y * (1.0 - y))

    out._backward = bw
    return out


def exp(a: Node) -> Node:
    y = np.exp(a.value)
    out = Node(y, (a,))

    def bw(g):
        if a.requires_grad:
            a.accumulate(g * y)

    out._backward = bw
    return out


def safe_log(a: Node, floor: float = 1e-12) -> Node:
    """log(max(a, floor)); gradient is 0 where the floor clamped."""
    clamped = np.maximum(a.value, floor)
    out = Node(np.log(clamped), (a,))

    def bw(g):
        if a.requires_grad:
            a.accumulate(np.where(a.value > floor, g / clamped, 0.0))

    out._backward = bw
    return out


def softmax(a: Node, axis: int = -1) -> Node:
    """Stable softmax over `axis`; each slice sums to 1."""
    if a.value.shape == () or a.value.shape[axis] == 0:
        raise ShapeError(f"softmax needs a non-empty axis, got shape {a.value.shape}")
    shifted = a.value - a.value.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)
    out = Node(y, (a,))

    def bw(g):
        if a.requires_grad:
            dot = (g * y).sum(axis=axis, keepdims=True)
            a.accumulate(y * (g - dot))

    out._backward = bw
    return out


def matmul(a: Node, b: Node) -> Node:
    """Matrix/vector product for ndim <= 2 operands."""
    av, bv = a.value, b.value
    a_inner = av.shape[-1] if av.ndim else None
    b_inner = bv.shape[-2] if bv.ndim >= 2 else (bv.shape[0] if bv.ndim == 1 else None)
    if av.ndim == 0 or bv.ndim == 0 or a_inner != b_inner:
        raise ShapeError(f"matmul shape mismatch: {av.shape} x {bv.shape}")
    out = Node(av @ bv, (a, b))

    def bw(g):
        if a.requires_grad:
            if av.ndim == 2 and bv.ndim == 2:
                a.accumulate(g @ bv.T)
            elif av.ndim == 2 and bv.ndim == 1:
                a.accumulate(np.outer(g, bv))
            elif av.ndim == 1 and bv.ndim == 2:
                a.accumulate(bv @ g)
            else:  # vec . vec -> scalar
                a.accumulate(g * bv)
        if b.requires_grad:
            if av.ndim == 2 and bv.ndim == 2:
                b.accumulate(av.T @ g)
            elif av.ndim == 2 and bv.ndim == 1:
                b.accumulate(av.T @ g)
            elif av.ndim == 1 and bv.ndim == 2:
                b.accumulate(np.outer(av, g))
            else:
                b.accumulate(g * av)

    out._backward = bw
    return out


def transpose(a: Node) -> Node:
    out = Node(a.value.T, (a,))

    def bw(g):
        if a.requires_grad:
            a.accumulate(g.T)

    out._backward = bw
    return out


def reshape(a: Node, shape) -> Node:
    out = Node(a.value.reshape(shape), (a,))

    def bw(g):
        if a.requires_grad:
            a.accumulate(g.reshape(a.value.shape))

    out._backward = bw
    return out


def concat(nodes, axis: int = 0) -> Node:
    nodes = list(nodes)
    out = Node(np.concatenate([n.value for n in nodes], axis=axis), tuple(nodes))
    sizes = [n.value.shape[axis] for n in nodes]

    def bw(g):
        offset = 0
        for n, size in zip(nodes, sizes):
            if n.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(offset, offset + size)
                n.accumulate(g[tuple(idx)])
            offset += size

    out._backward = bw
    return out


def stack_cols(nodes) -> Node:
    """Stack 1-D vectors as the columns of a (d, n) matrix."""
    nodes = list(nodes)
    out = Node(np.stack([n.value for n in nodes], axis=1), tuple(nodes))

    def bw(g):
        for i, n in enumerate(nodes):
            if n.requires_grad:
                n.accumulate(g[:, i])

    out._backward = bw
    return out


def narrow(a: Node, axis: int, start: int, stop: int) -> Node:
    idx = [slice(None)] * a.value.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)
    out = Node(a.value[idx].copy(), (a,))

    def bw(g):
        if a.requires_grad:
            full = np.zeros_like(a.value)
            full[idx] = g
            a.accumulate(full)

    out._backward = bw
    return out


def pad_vec(a: Node, total: int, offset: int = 0) -> Node:
    """Embed a 1-D vector into a zero vector of length `total` at `offset`."""
    n = a.value.shape[0]
    y = np.zeros(total)
    y[offset:offset + n] = a.value
    out = Node(y, (a,))

    def bw(g):
        if a.requires_grad:
            a.accumulate(g[offset:offset + n])

    out._backward = bw
    return out


def pick(a: Node, index: int) -> Node:
    """Scalar element of a 1-D vector."""
    out = Node(a.value[index], (a,))

    def bw(g):
        if a.requires_grad:
            full = np.zeros_like(a.value)
            full[index] = g
            a.accumulate(full)

    out._backward = bw
    return out


def reduce_sum(a: Node, axis=None, keepdims: bool = False) -> Node:
    out = Node(a.value.sum(axis=axis, keepdims=keepdims), (a,))

    def bw(g):
        if a.requires_grad:
            if axis is None:
                a.accumulate(np.broadcast_to(g, a.value.shape).copy())
            else:
                axes = (axis,) if isinstance(axis, int) else tuple(axis)
                if not keepdims:
                    g = np.expand_dims(g, tuple(sorted(ax % a.value.ndim for ax in axes)))
                a.accumulate(np.broadcast_to(g, a.value.shape).copy())

    out._backward = bw
    return out


def reduce_mean(a: Node, axis=None, keepdims: bool = False) -> Node:
    if axis is None:
        count = a.value.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        count = int(np.prod([a.value.shape[ax] for ax in axes]))
    return scale(reduce_sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def embed_lookup(table: Node, ids) -> Node:
    """Gather rows of an (n_tokens, d) table; returns columns (d, len(ids))."""
    ids = np.asarray(ids, dtype=np.intp)
    out = Node(table.value[ids].T, (table,))

    def bw(g):
        if table.requires_grad:
            full = np.zeros_like(table.value)
            np.add.at(full, ids, g.T)
            table.accumulate(full)

    out._backward = bw
    return out


def embed_vec(table: Node, index: int) -> Node:
    """Single row of an (n_tokens, d) table as a (d,) vector."""
    out = Node(table.value[index].copy(), (table,))

    def bw(g):
        if table.requires_grad:
            full = np.zeros_like(table.value)
            full[index] = g
            table.accumulate(full)

    out._backward = bw
    return out


def dropout(a: Node, rate: float, train: bool, rng: np.random.Generator) -> Node:
    """Inverted dropout: scales by 1/(1-rate) at train time, identity at eval."""
    if not train or rate == 0.0:
        return a
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    mask = (rng.random(a.value.shape) >= rate) / (1.0 - rate)
    out = Node(a.value * mask, (a,))

    def bw(g):
        if a.requires_grad:
            a.accumulate(g * mask)

    out._backward = bw
    return out


# -----------------------------------------------------------------------------
# optimizer
# -----------------------------------------------------------------------------


def global_norm(grads: dict[str, Array]) -> float:
    total = 0.0
    for g in grads.values():
        total += float((g * g).sum())
    return float(np.sqrt(total))


def clip_by_global_norm(grads: dict[str, Array], max_norm: float) -> tuple[dict[str, Array], float]:
    """Scale all grads so their joint L2 norm is at most max_norm."""
    norm = global_norm(grads)
    if norm > max_norm and norm > 0.0:
        factor = max_norm / norm
        grads = {k: g * factor for k, g in grads.items()}
    return grads, norm


class Adam:
    """Adam with decoupled weight decay (p -= lr*wd*p before the moment update)."""

    def __init__(self, params: dict[str, Node], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8, weight_decay: float = 0.0):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {k: np.zeros_like(p.value) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.value) for k, p in params.items()}

    def step(self, grads: dict[str, Array]) -> None:
        """One update over the params named in `grads`; mutates param values in place."""
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise GraphError(f"non-finite gradient for parameter '{name}'")
            p = self.params[name]
            if self.weight_decay:
                p.value -= self.lr * self.weight_decay * p.value
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.value -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def adam_step(params: dict[str, Node], grads: dict[str, Array], lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
              weight_decay: float = 0.0, state: Adam | None = None) -> Adam:
    """Functional single step; returns the optimizer state for reuse."""
    if state is None:
        state = Adam(params, lr, beta1, beta2, eps, weight_decay)
    else:
        state.lr = lr
    state.step(grads)
    return state
