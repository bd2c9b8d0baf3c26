"""Dense float64 tensors with recorded reverse-mode gradients.

Each operation appends itself to the implicit tape by linking the output
tensor to its parents together with a closure that propagates the output
gradient. ``backward`` replays that record once, in reverse topological
order. Everything is float64; the networks here are tiny, so precision wins
over speed.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

LOG_FLOOR = 1e-12


class Tensor:
    """Immutable-valued dense array node on the tape.

    Forward ops never mutate ``data`` in place; optimizers rebind it between
    tapes. ``grad`` accumulates across backward passes until cleared, which
    is what per-epoch gradient accumulation over instances relies on.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backprop")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backprop = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # operator sugar; constants are wrapped as non-grad tensors
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __rtruediv__(self, other):
        return div(_wrap(other), self)

    def __neg__(self):
        return mul(self, _wrap(-1.0))

    def __matmul__(self, other):
        return matmul(self, _wrap(other))


def _wrap(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _from_op(data: np.ndarray, parents: tuple[Tensor, ...], backprop) -> Tensor:
    out = Tensor(data, requires_grad=any(p.requires_grad for p in parents))
    if out.requires_grad:
        out._parents = parents
        out._backprop = backprop
    return out


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def topo_order(root: Tensor) -> list[Tensor]:
    """Tape order: every recorded op exactly once, parents before children."""
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


def backward(loss: Tensor, params: tuple[Tensor, ...] | list[Tensor] = ()) -> list[np.ndarray]:
    """Replay the tape of ``loss`` backward, accumulating ``grad`` on leaves.

    ``loss`` must be scalar. Returns gradients aligned with ``params``;
    parameters not reached by the tape get zeros.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    _accumulate(loss, np.ones_like(loss.data))
    for node in reversed(topo_order(loss)):
        if node._backprop is not None and node.grad is not None:
            node._backprop(node.grad)
    return [p.grad if p.grad is not None else np.zeros_like(p.data) for p in params]


def zero_grads(params) -> None:
    for p in params:
        p.grad = None


# ---------------------------------------------------------------------------
# elementwise and broadcast arithmetic


def add(a: Tensor, b: Tensor) -> Tensor:
    def backprop(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    return _from_op(a.data + b.data, (a, b), backprop)


def sub(a: Tensor, b: Tensor) -> Tensor:
    def backprop(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(-g, b.data.shape))

    return _from_op(a.data - b.data, (a, b), backprop)


def mul(a: Tensor, b: Tensor) -> Tensor:
    def backprop(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _from_op(a.data * b.data, (a, b), backprop)


def div(a: Tensor, b: Tensor) -> Tensor:
    def backprop(g):
        _accumulate(a, _unbroadcast(g / b.data, a.data.shape))
        _accumulate(b, _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return _from_op(a.data / b.data, (a, b), backprop)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError(
            f"matmul expects 2-d operands, got {a.data.shape} and {b.data.shape}"
        )
    if a.data.shape[1] != b.data.shape[0]:
        raise ValueError(
            f"matmul inner dimensions differ: {a.data.shape} vs {b.data.shape}"
        )

    def backprop(g):
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)

    return _from_op(a.data @ b.data, (a, b), backprop)


# ---------------------------------------------------------------------------
# nonlinearities


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0.0

    def backprop(g):
        _accumulate(x, g * mask)

    return _from_op(np.where(mask, x.data, 0.0), (x,), backprop)


def sigmoid(x: Tensor) -> Tensor:
    d = x.data
    y = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.abs(d))), np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d))))

    def backprop(g):
        _accumulate(x, g * y * (1.0 - y))

    return _from_op(y, (x,), backprop)


def log(x: Tensor) -> Tensor:
    """Natural log with inputs clamped to LOG_FLOOR; gradient is zero below it."""
    clamped = np.maximum(x.data, LOG_FLOOR)

    def backprop(g):
        _accumulate(x, np.where(x.data > LOG_FLOOR, g / clamped, 0.0))

    return _from_op(np.log(clamped), (x,), backprop)


def clip(x: Tensor, lo: float, hi: float) -> Tensor:
    inside = (x.data > lo) & (x.data < hi)

    def backprop(g):
        _accumulate(x, g * inside)

    return _from_op(np.clip(x.data, lo, hi), (x,), backprop)


def sqrt(x: Tensor) -> Tensor:
    y = np.sqrt(x.data)

    def backprop(g):
        _accumulate(x, g * 0.5 / y)

    return _from_op(y, (x,), backprop)


def softmax_rows(x: Tensor) -> Tensor:
    if x.data.ndim != 2:
        raise ValueError(f"softmax-row expects a 2-d input, got shape {x.data.shape}")
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)

    def backprop(g):
        _accumulate(x, y * (g - (g * y).sum(axis=1, keepdims=True)))

    return _from_op(y, (x,), backprop)


# ---------------------------------------------------------------------------
# shape and indexing ops


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    old = x.data.shape

    def backprop(g):
        _accumulate(x, g.reshape(old))

    return _from_op(x.data.reshape(shape), (x,), backprop)


def concat(parts: list[Tensor], axis: int = 1) -> Tensor:
    widths = [p.data.shape[axis] for p in parts]
    bounds = np.cumsum(widths)[:-1]

    def backprop(g):
        for p, piece in zip(parts, np.split(g, bounds, axis=axis)):
            _accumulate(p, piece)

    return _from_op(np.concatenate([p.data for p in parts], axis=axis), tuple(parts), backprop)


def gather_rows(x: Tensor, idx: np.ndarray) -> Tensor:
    idx = np.asarray(idx, dtype=np.int64)

    def backprop(g):
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            np.add.at(gx, idx, g)
            _accumulate(x, gx)

    return _from_op(x.data[idx], (x,), backprop)


def total(x: Tensor) -> Tensor:
    """Sum of all elements, as a scalar tensor."""

    def backprop(g):
        _accumulate(x, np.full_like(x.data, float(g)))

    return _from_op(np.asarray(x.data.sum()), (x,), backprop)


def mean(x: Tensor) -> Tensor:
    n = x.data.size

    def backprop(g):
        _accumulate(x, np.full_like(x.data, float(g) / n))

    return _from_op(np.asarray(x.data.mean()), (x,), backprop)


def maxpool_rows(x: Tensor) -> Tensor:
    """Columnwise max over rows; returns a 1xH tensor."""
    if x.data.ndim != 2 or x.data.shape[0] == 0:
        raise ValueError(f"max-pool-rows requires a non-empty 2-d input, got shape {x.data.shape}")
    argmax = x.data.argmax(axis=0)
    cols = np.arange(x.data.shape[1])

    def backprop(g):
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            gx[argmax, cols] = g[0]
            _accumulate(x, gx)

    return _from_op(x.data[argmax, cols][None, :], (x,), backprop)


def segment_maxpool(x: Tensor, offsets: np.ndarray) -> Tensor:
    """Columnwise max over contiguous row segments; returns (num_segments, H).

    ``offsets`` holds each segment's first row; segments must be non-empty
    and cover the rows in order.
    """
    if x.data.ndim != 2 or x.data.shape[0] == 0:
        raise ValueError("segment max-pool requires a non-empty 2-d input")
    out = np.maximum.reduceat(x.data, offsets, axis=0)
    n, h = x.data.shape
    seg_of_row = np.zeros(n, dtype=np.int64)
    seg_of_row[offsets[1:]] = 1
    seg_of_row = np.cumsum(seg_of_row)
    hits = x.data == out[seg_of_row]
    rows = np.where(hits, np.arange(n)[:, None], n)
    first_hit = np.minimum.reduceat(rows, offsets, axis=0)
    cols = np.broadcast_to(np.arange(h), first_hit.shape)

    def backprop(g):
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            np.add.at(gx, (first_hit.ravel(), cols.ravel()), g.ravel())
            _accumulate(x, gx)

    return _from_op(out, (x,), backprop)


# ---------------------------------------------------------------------------
# sparse neighbor aggregation


class AggPlan:
    """Precomputed scatter/gather structure for one fixed edge list.

    Aggregation result row i is the weighted sum of h[src[e]] over edges e
    with dst[e] == i. Only the CSR data vector changes between calls, so the
    index structure is built once per graph.
    """

    def __init__(self, num_nodes: int, src: np.ndarray, dst: np.ndarray):
        self.num_nodes = int(num_nodes)
        self.src = np.asarray(src, dtype=np.int64)
        self.dst = np.asarray(dst, dtype=np.int64)
        n, e = self.num_nodes, len(self.src)

        self._fwd_order = np.argsort(self.dst, kind="stable")
        self._fwd_indices = self.src[self._fwd_order]
        self._fwd_indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.dst, minlength=n), out=self._fwd_indptr[1:])

        self._bwd_order = np.argsort(self.src, kind="stable")
        self._bwd_indices = self.dst[self._bwd_order]
        self._bwd_indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.src, minlength=n), out=self._bwd_indptr[1:])

        ones = np.ones(e, dtype=np.float64)
        self._ones_fwd = self._csr(ones, forward=True)
        self._ones_bwd = self._csr(ones, forward=False)
        self._cache_key: np.ndarray | None = None
        self._cache_fwd: sp.csr_matrix | None = None
        self._cache_bwd: sp.csr_matrix | None = None
        self._work_fwd: sp.csr_matrix | None = None
        self._work_bwd: sp.csr_matrix | None = None

    def _csr(self, data: np.ndarray, forward: bool) -> sp.csr_matrix:
        n = self.num_nodes
        if forward:
            return sp.csr_matrix((data, self._fwd_indices, self._fwd_indptr), shape=(n, n))
        return sp.csr_matrix((data, self._bwd_indices, self._bwd_indptr), shape=(n, n))

    def fwd_matrix(self, w: np.ndarray | None) -> sp.csr_matrix:
        if w is None:
            return self._ones_fwd
        if w is self._cache_key:
            return self._cache_fwd
        if self._work_fwd is None:
            self._work_fwd = self._csr(w[self._fwd_order], forward=True)
        else:
            # the work matrix never escapes a single multiply, so mutating
            # its data vector in place is safe and skips CSR construction
            self._work_fwd.data[:] = w[self._fwd_order]
        return self._work_fwd

    def bwd_matrix(self, w: np.ndarray | None) -> sp.csr_matrix:
        if w is None:
            return self._ones_bwd
        if w is self._cache_key:
            return self._cache_bwd
        if self._work_bwd is None:
            self._work_bwd = self._csr(w[self._bwd_order], forward=False)
        else:
            self._work_bwd.data[:] = w[self._bwd_order]
        return self._work_bwd

    def pin_weights(self, w: np.ndarray) -> np.ndarray:
        """Cache the CSR pair for a weight vector reused across many calls."""
        self._cache_key = w
        self._cache_fwd = self._csr(w[self._fwd_order], forward=True)
        self._cache_bwd = self._csr(w[self._bwd_order], forward=False)
        return w


def edge_aggregate(h: Tensor, plan: AggPlan, w: Tensor | None = None) -> Tensor:
    """out[i] = sum over incoming edges e of w[e] * h[src[e]].

    ``w`` is a length-E vector tensor or None for unit weights.
    """
    if h.data.ndim != 2 or h.data.shape[0] != plan.num_nodes:
        raise ValueError(f"node matrix shape {h.data.shape} does not match plan with {plan.num_nodes} nodes")
    wdata = None if w is None else w.data
    if wdata is not None and wdata.shape != (len(plan.src),):
        raise ValueError(f"edge weight vector shape {wdata.shape} does not match {len(plan.src)} edges")
    out = plan.fwd_matrix(wdata) @ h.data
    parents = (h,) if w is None else (h, w)

    def backprop(g):
        if h.requires_grad:
            _accumulate(h, plan.bwd_matrix(wdata) @ g)
        if w is not None and w.requires_grad:
            _accumulate(w, np.einsum("ij,ij->i", h.data[plan.src], g[plan.dst]))

    return _from_op(out, parents, backprop)
