"""Dense multi-dimensional arrays with reverse-mode automatic differentiation.

Every model and loss in this package is built from the operations here.
numpy provides storage and arithmetic; differentiation works by recording
parent links and a backward closure on each operation's output, then walking
the graph in reverse topological order from a scalar root.

Tensors are immutable once constructed (enforced via numpy's writeable
flag); only the ``grad`` buffer is written, and only by :func:`backward`.
Use 64-bit tensors when gradient-checking and 32-bit for faster training;
avoid mixing the two dtypes inside one graph.
"""

from __future__ import annotations

import math
from contextlib import contextmanager

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "ShapeError",
    "no_grad",
    "backward",
    "grad_check",
    "zero_grads",
    "add",
    "subtract",
    "multiply",
    "scale",
    "matmul",
    "transpose",
    "reshape",
    "concat",
    "stack",
    "take",
    "tensor_sum",
    "mean",
    "relu",
    "gelu",
    "softmax",
    "layer_norm",
    "dropout",
    "embedding_lookup",
    "cosine_similarity",
    "cross_entropy_logits",
    "channel_graph_mix",
]

_FLOAT_DTYPES = (np.float32, np.float64)


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible with an operation."""


_grad_enabled = True


@contextmanager
def no_grad():
    """Suspend graph recording inside the block (use on inference paths)."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


class Tensor:
    """An immutable n-d array plus the bookkeeping for reverse-mode autodiff.

    ``data`` holds the value, frozen after construction.  ``grad`` starts as
    None and is populated by :func:`backward` for every tensor with
    ``requires_grad`` that participated in the computation.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_bwd", "_backward_ran")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.array(data, dtype=dtype)
        if arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(np.float64)
        arr.setflags(write=False)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._bwd = None
        self._backward_ran = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, shape) -> "Tensor":
        return reshape(self, shape)

    def transpose(self, axes=None) -> "Tensor":
        return transpose(self, axes)

    def __add__(self, other):
        return add(self, _lift(other, self))

    def __radd__(self, other):
        return add(_lift(other, self), self)

    def __sub__(self, other):
        return subtract(self, _lift(other, self))

    def __rsub__(self, other):
        return subtract(_lift(other, self), self)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return multiply(self, other)
        return scale(self, float(other))

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype.name}{flag})"


def _lift(x, like: Tensor) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.dtype))


def _from_op(data, parents, bwd) -> Tensor:
    """Wrap an op result, attaching the graph only when gradients can flow."""
    out = Tensor.__new__(Tensor)
    arr = np.asarray(data)
    arr.setflags(write=False)
    out.data = arr
    out.grad = None
    out._backward_ran = False
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._bwd = bwd
    else:
        out.requires_grad = False
        out._parents = ()
        out._bwd = None
    return out


def _acc(t: Tensor, g) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum a gradient down to ``shape`` after numpy broadcasting."""
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise and shape primitives


def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} do not broadcast") from None

    def bwd(g):
        if a.requires_grad:
            _acc(a, _unbroadcast(g, a.shape))
        if b.requires_grad:
            _acc(b, _unbroadcast(g, b.shape))

    return _from_op(data, (a, b), bwd)


def subtract(a: Tensor, b: Tensor) -> Tensor:
    try:
        data = a.data - b.data
    except ValueError:
        raise ShapeError(f"subtract: shapes {a.shape} and {b.shape} do not broadcast") from None

    def bwd(g):
        if a.requires_grad:
            _acc(a, _unbroadcast(g, a.shape))
        if b.requires_grad:
            _acc(b, _unbroadcast(-g, b.shape))

    return _from_op(data, (a, b), bwd)


def multiply(a: Tensor, b: Tensor) -> Tensor:
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError(f"multiply: shapes {a.shape} and {b.shape} do not broadcast") from None

    def bwd(g):
        if a.requires_grad:
            _acc(a, _unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            _acc(b, _unbroadcast(g * a.data, b.shape))

    return _from_op(data, (a, b), bwd)


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)
    data = a.data * np.asarray(s, dtype=a.dtype)

    def bwd(g):
        if a.requires_grad:
            _acc(a, g * s)

    return _from_op(data, (a,), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; stacked leading axes follow numpy broadcasting."""
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs at least 2-d operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} vs {b.shape}")
    try:
        data = np.matmul(a.data, b.data)
    except ValueError:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not broadcast") from None

    def bwd(g):
        if a.requires_grad:
            _acc(a, _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape))
        if b.requires_grad:
            _acc(b, _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape))

    return _from_op(data, (a, b), bwd)


def transpose(a: Tensor, axes=None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    axes = tuple(int(x) for x in axes)
    data = np.transpose(a.data, axes)
    inverse = tuple(np.argsort(axes))

    def bwd(g):
        if a.requires_grad:
            _acc(a, np.transpose(g, inverse))

    return _from_op(data, (a,), bwd)


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape)) != a.size:
        raise ShapeError(f"cannot reshape {a.shape} ({a.size} elements) to {shape}")
    data = a.data.reshape(shape)

    def bwd(g):
        if a.requires_grad:
            _acc(a, g.reshape(a.shape))

    return _from_op(data, (a,), bwd)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ShapeError("concat of zero tensors")
    first = tensors[0]
    axis = axis % first.ndim
    for t in tensors[1:]:
        if t.ndim != first.ndim or any(
            i != axis and t.shape[i] != first.shape[i] for i in range(first.ndim)
        ):
            raise ShapeError(
                f"concat axis {axis}: incompatible shapes {[t.shape for t in tensors]}"
            )
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                _acc(t, g[tuple(idx)])

    return _from_op(data, tuple(tensors), bwd)


def stack(tensors, axis: int = 0) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ShapeError("stack of zero tensors")
    if any(t.shape != tensors[0].shape for t in tensors):
        raise ShapeError(f"stack: mismatched shapes {[t.shape for t in tensors]}")
    data = np.stack([t.data for t in tensors], axis=axis)

    def bwd(g):
        slices = np.moveaxis(g, axis, 0)
        for t, gs in zip(tensors, slices):
            if t.requires_grad:
                _acc(t, gs)

    return _from_op(data, tuple(tensors), bwd)


def take(a: Tensor, indices, axis: int = 0) -> Tensor:
    """Gather slices along ``axis``; repeated indices scatter-add on backward."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise ShapeError(f"take expects 1-d indices, got shape {idx.shape}")
    axis = axis % a.ndim
    n = a.shape[axis]
    bad = (idx < 0) | (idx >= n)
    if bad.any():
        raise IndexError(f"index {int(idx[bad][0])} out of range for axis {axis} with size {n}")
    data = np.take(a.data, idx, axis=axis)

    def bwd(g):
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            key = (slice(None),) * axis + (idx,)
            np.add.at(a.grad, key, g)

    return _from_op(data, (a,), bwd)


def _reduce_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        return (axis % ndim,)
    return tuple(a % ndim for a in axis)


def tensor_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _reduce_axes(axis, a.ndim)
    data = a.data.sum(axis=axes, keepdims=keepdims)

    def bwd(g):
        if a.requires_grad:
            gg = g if keepdims else np.expand_dims(g, axes)
            _acc(a, np.broadcast_to(gg, a.shape))

    return _from_op(data, (a,), bwd)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _reduce_axes(axis, a.ndim)
    count = int(np.prod([a.shape[i] for i in axes]))
    data = a.data.mean(axis=axes, keepdims=keepdims)

    def bwd(g):
        if a.requires_grad:
            gg = g if keepdims else np.expand_dims(g, axes)
            _acc(a, np.broadcast_to(gg, a.shape) / count)

    return _from_op(data, (a,), bwd)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    data = np.where(mask, a.data, 0)

    def bwd(g):
        if a.requires_grad:
            _acc(a, g * mask)

    return _from_op(data, (a,), bwd)


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(a: Tensor) -> Tensor:
    """Gaussian error linear unit, tanh approximation."""
    x = a.data
    inner = _GELU_C * (x + 0.044715 * x**3)
    t = np.tanh(inner)
    data = 0.5 * x * (1.0 + t)

    def bwd(g):
        if a.requires_grad:
            d_inner = _GELU_C * (1.0 + 3 * 0.044715 * x**2)
            _acc(a, g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * d_inner))

    return _from_op(data, (a,), bwd)


# ---------------------------------------------------------------------------
# normalization, attention and loss building blocks


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Numerically stabilized softmax along ``axis`` (max subtraction)."""
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        if a.requires_grad:
            _acc(a, s * (g - (g * s).sum(axis=axis, keepdims=True)))

    return _from_op(s, (a,), bwd)


def layer_norm(a: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last dimension to zero mean / unit variance, then affine."""
    d = a.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeError(
            f"layer_norm: gamma {gamma.shape} / beta {beta.shape} must match last dim ({d},)"
        )
    mu = a.data.mean(axis=-1, keepdims=True)
    xc = a.data - mu
    var = (xc**2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    data = xhat * gamma.data + beta.data

    def bwd(g):
        if gamma.requires_grad:
            _acc(gamma, (g * xhat).reshape(-1, d).sum(axis=0))
        if beta.requires_grad:
            _acc(beta, g.reshape(-1, d).sum(axis=0))
        if a.requires_grad:
            gh = g * gamma.data
            term = gh - gh.mean(axis=-1, keepdims=True) - xhat * (gh * xhat).mean(axis=-1, keepdims=True)
            _acc(a, inv * term)

    return _from_op(data, (a, gamma, beta), bwd)


def dropout(a: Tensor, p: float, train: bool, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: identity at inference, survivors scaled by 1/(1-p)."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if not train or p == 0.0:
        return a
    keep = (rng.random(a.shape) >= p) / np.asarray(1.0 - p, dtype=a.dtype)

    def bwd(g):
        if a.requires_grad:
            _acc(a, g * keep)

    return _from_op(a.data * keep, (a,), bwd)


def embedding_lookup(table: Tensor, ids) -> Tensor:
    """Gather rows of a V x d table; backward scatter-adds into the table."""
    if table.ndim != 2:
        raise ShapeError(f"embedding table must be 2-d, got {table.shape}")
    idx = np.asarray(ids, dtype=np.int64)
    v = table.shape[0]
    bad = (idx < 0) | (idx >= v)
    if bad.any():
        raise IndexError(f"token id {int(idx[bad][0])} out of range for embedding table with {v} rows")
    data = table.data[idx]

    def bwd(g):
        if table.requires_grad:
            if table.grad is None:
                table.grad = np.zeros_like(table.data)
            np.add.at(table.grad, idx, g)

    return _from_op(data, (table,), bwd)


def cosine_similarity(u: Tensor, v: Tensor, eps: float = 1e-8) -> Tensor:
    """Cosine of the angle between two vectors as a differentiable scalar."""
    if u.ndim != 1 or v.ndim != 1 or u.shape != v.shape:
        raise ShapeError(f"cosine_similarity expects equal-length vectors, got {u.shape} and {v.shape}")
    s = float(u.data @ v.data)
    nu = float(np.linalg.norm(u.data))
    nv = float(np.linalg.norm(v.data))
    denom = nu * nv + eps
    data = np.asarray(s / denom, dtype=u.dtype)

    def bwd(g):
        g0 = float(g)
        # guard the norms; the op contract assumes non-zero inputs
        nu_s = max(nu, 1e-30)
        nv_s = max(nv, 1e-30)
        if u.requires_grad:
            _acc(u, (g0 * (v.data / denom - s * nv * u.data / (nu_s * denom**2))).astype(u.dtype))
        if v.requires_grad:
            _acc(v, (g0 * (u.data / denom - s * nu * v.data / (nv_s * denom**2))).astype(v.dtype))

    return _from_op(data, (u, v), bwd)


def cross_entropy_logits(logits: Tensor, targets, ignore_index=None) -> Tensor:
    """Mean negative log-likelihood of ``targets`` under row-wise softmax.

    Rows whose target equals ``ignore_index`` contribute nothing to the value
    or the gradient.
    """
    if logits.ndim != 2:
        raise ShapeError(f"logits must be 2-d (positions x vocab), got {logits.shape}")
    t = np.asarray(targets, dtype=np.int64)
    n, v = logits.shape
    if t.shape != (n,):
        raise ShapeError(f"targets shape {t.shape} does not match {n} logit rows")
    active = np.ones(n, dtype=bool) if ignore_index is None else t != ignore_index
    bad = active & ((t < 0) | (t >= v))
    if bad.any():
        raise IndexError(f"target id {int(t[bad][0])} out of range for vocabulary of size {v}")
    rows = np.nonzero(active)[0]
    if rows.size == 0:
        raise ValueError("cross entropy undefined: every position is ignored")

    x = logits.data
    m = x.max(axis=1, keepdims=True)
    lse = m + np.log(np.exp(x - m).sum(axis=1, keepdims=True))
    logp = x - lse
    data = np.asarray(-logp[rows, t[rows]].mean(), dtype=logits.dtype)

    def bwd(g):
        if logits.requires_grad:
            gl = np.zeros_like(x)
            sm = np.exp(logp[rows])
            sm[np.arange(rows.size), t[rows]] -= 1.0
            gl[rows] = sm * (float(g) / rows.size)
            _acc(logits, gl)

    return _from_op(data, (logits,), bwd)


def channel_graph_mix(x: Tensor, mix: Tensor) -> Tensor:
    """Aggregate graph neighbours with a per-channel mixing matrix.

    ``x`` is (T, V, C) node features, ``mix`` is (C, V, V); output
    out[t, u, c] = sum_v mix[c, u, v] * x[t, v, c].
    """
    if x.ndim != 3 or mix.ndim != 3:
        raise ShapeError(f"channel_graph_mix expects (T,V,C) and (C,V,V), got {x.shape} and {mix.shape}")
    t_, v_, c_ = x.shape
    if mix.shape != (c_, v_, v_):
        raise ShapeError(f"mixing matrix shape {mix.shape} does not match features {x.shape}")
    data = np.einsum("cuv,tvc->tuc", mix.data, x.data)

    def bwd(g):
        if x.requires_grad:
            _acc(x, np.einsum("cuv,tuc->tvc", mix.data, g))
        if mix.requires_grad:
            _acc(mix, np.einsum("tuc,tvc->cuv", g, x.data))

    return _from_op(data, (x, mix), bwd)


# ---------------------------------------------------------------------------
# backward pass and gradient checking


class Tape:
    """Topologically ordered record of the operations reachable from a root.

    Each node is an operation output holding its parent references and
    backward rule; parents always appear before their consumers, and every
    node appears exactly once.
    """

    def __init__(self, root: Tensor):
        order = []
        seen = set()
        stack = [(root, False)]
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
                if id(p) not in seen:
                    stack.append((p, False))
        self.nodes = order

    def __len__(self):
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes)


def backward(root: Tensor) -> None:
    """Populate ``grad`` on every participating tensor by reverse traversal.

    ``root`` must be scalar.  Calling backward twice on the same root is an
    error; rebuild the graph instead.
    """
    if root.shape != ():
        raise ShapeError(f"backward needs a scalar root, got shape {root.shape}")
    if root._backward_ran:
        raise RuntimeError("backward() was already called on this root; rebuild the graph")
    tape = Tape(root)
    root.grad = np.ones((), dtype=root.dtype)
    for node in reversed(tape.nodes):
        if node._bwd is not None and node.grad is not None:
            node._bwd(node.grad)
    for node in tape.nodes:
        if node.requires_grad and node.grad is None:
            node.grad = np.zeros_like(node.data)
    root._backward_ran = True


def zero_grads(tensors) -> None:
    for t in tensors:
        t.grad = None


def grad_check(
    f,
    inputs,
    eps: float = 1e-6,
    tol: float = 1e-5,
    max_coords_per_input=None,
    rng=None,
) -> float:
    """Compare backward gradients of scalar-valued ``f`` to central differences.

    Returns the worst relative error over the checked coordinates; callers
    assert against ``tol`` (conventionally 1e-5 at 64-bit).  Inputs must be
    float64.  ``f`` must be deterministic: if it needs randomness, seed a
    fresh generator inside each call.  ``max_coords_per_input`` bounds the
    cost on large tensors by checking a seeded random subset of coordinates.
    """
    del tol  # advisory threshold for callers; the check itself just measures
    inputs = list(inputs)
    for t in inputs:
        if t.dtype != np.float64:
            raise ValueError("grad_check requires float64 inputs")
    tracked = [Tensor(t.data, requires_grad=True) for t in inputs]
    out = f(*tracked)
    if out.shape != ():
        raise ShapeError(f"grad_check function must return a scalar, got shape {out.shape}")
    backward(out)
    analytic = [t.grad if t.grad is not None else np.zeros_like(t.data) for t in tracked]

    if rng is None:
        rng = np.random.default_rng(0)
    worst = 0.0
    for which, t in enumerate(inputs):
        flat = t.data.reshape(-1)
        n = flat.size
        coords = np.arange(n)
        if max_coords_per_input is not None and n > max_coords_per_input:
            coords = np.sort(rng.choice(n, size=max_coords_per_input, replace=False))
        for c in coords:
            fp = _eval_perturbed(f, inputs, which, c, +eps)
            fm = _eval_perturbed(f, inputs, which, c, -eps)
            numeric = (fp - fm) / (2.0 * eps)
            a = float(analytic[which].reshape(-1)[c])
            # absolute floor of 1 keeps finite-difference roundoff on
            # near-zero gradients from masquerading as relative error
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1.0)
            worst = max(worst, rel)
    return worst


def _eval_perturbed(f, inputs, which, coord, delta) -> float:
    data = inputs[which].data.copy()
    data.reshape(-1)[coord] += delta
    args = [Tensor(t.data) if i != which else Tensor(data) for i, t in enumerate(inputs)]
    return float(f(*args).data)
