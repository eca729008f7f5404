"""Dense float64 tensors with reverse-mode automatic differentiation.

The graph is recorded dynamically: each op output keeps references to its
parent tensors and a closure mapping the output gradient to parent gradients.
`backward` walks a topologically sorted tape once and *adds* into `.grad`
buffers, so running it twice without `zero_grad` exactly doubles every
gradient. Tensors built from ops whose inputs all have requires_grad=False
record nothing and never accumulate gradient.

All data is float64; ops never change dtype.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import InputError, NumericError, ShapeError
from .rng import stream

Array = np.ndarray

# BCE probabilities are clamped to [EPS_P, 1 - EPS_P] before the log.
EPS_P = 1e-7


def _as_array(x) -> Array:
    return np.asarray(x, dtype=np.float64)


class Tensor:
    """A float64 ndarray plus the bookkeeping needed for backward()."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_grad_fn", "_op")

    def __init__(self, data, requires_grad: bool = False):
        self.data: Array = _as_array(data)
        self.requires_grad = bool(requires_grad)
        self.grad: Array | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._grad_fn: Callable[[Array], tuple] | None = None
        self._op = ""

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def zero_grad(self) -> None:
        self.grad = None

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single element, shape is {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        flag = ", grad" if self.requires_grad else ""
        return f"Tensor({self._op or 'leaf'}, shape={self.shape}{flag})"

    # operator sugar; scalars and arrays are wrapped as constants
    def __add__(self, other):
        return add(self, _ensure(other))

    def __radd__(self, other):
        return add(_ensure(other), self)

    def __sub__(self, other):
        return sub(self, _ensure(other))

    def __rsub__(self, other):
        return sub(_ensure(other), self)

    def __mul__(self, other):
        return mul(self, _ensure(other))

    def __rmul__(self, other):
        return mul(_ensure(other), self)

    def __matmul__(self, other):
        return matmul(self, _ensure(other))


def _ensure(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def param(data) -> Tensor:
    return Tensor(data, requires_grad=True)


def zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape))


def _make(data: Array, parents: tuple[Tensor, ...], grad_fn, op: str) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._grad_fn = grad_fn
        out._op = op
    return out


def build_tape(root: Tensor) -> list[Tensor]:
    """Topological order of the recorded graph: parents before children.

    Only tensors on a gradient path (requires_grad) are included.
    """
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


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(t) into t.grad for every requires_grad tensor.

    loss must hold exactly one element. Accumulation is additive: callers
    must reset grads between independent backward passes.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    tape = build_tape(loss)
    flowing: dict[int, Array] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape):
        g = flowing.get(id(node))
        if g is None or node._grad_fn is None:
            continue
        parent_grads = node._grad_fn(g)
        for parent, pg in zip(node._parents, parent_grads):
            if pg is None or not parent.requires_grad:
                continue
            prev = flowing.get(id(parent))
            flowing[id(parent)] = pg if prev is None else prev + pg
    for node in tape:
        g = flowing.get(id(node))
        if g is not None:
            node.grad = g.copy() if node.grad is None else node.grad + g


def zero_grads(params: Iterable[Tensor] | dict) -> None:
    tensors = params.values() if isinstance(params, dict) else params
    for t in tensors:
        t.zero_grad()


# ---------------------------------------------------------------------------
# broadcasting helpers


def _unbroadcast(g: Array, shape: tuple[int, ...]) -> Array:
    """Sum g down to `shape` (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _broadcast_check(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as e:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from e


# ---------------------------------------------------------------------------
# arithmetic


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _ensure(a), _ensure(b)
    _broadcast_check(a, b, "add")
    out = a.data + b.data

    def grad_fn(g: Array):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(out, (a, b), grad_fn, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = _ensure(a), _ensure(b)
    _broadcast_check(a, b, "sub")
    out = a.data - b.data

    def grad_fn(g: Array):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _make(out, (a, b), grad_fn, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _ensure(a), _ensure(b)
    _broadcast_check(a, b, "mul")
    out = a.data * b.data

    def grad_fn(g: Array):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _make(out, (a, b), grad_fn, "mul")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product for 1-D/2-D operands (1-D promoted the numpy way)."""
    a, b = _ensure(a), _ensure(b)
    if a.ndim not in (1, 2) or b.ndim not in (1, 2):
        raise ShapeError(f"matmul supports rank 1/2, got {a.shape} @ {b.shape}")
    inner_a = a.shape[-1]
    inner_b = b.shape[0]
    if inner_a != inner_b:
        raise ShapeError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def grad_fn(g: Array):
        a2 = a.data.reshape(1, -1) if a.ndim == 1 else a.data
        b2 = b.data.reshape(-1, 1) if b.ndim == 1 else b.data
        g2 = g.reshape(a2.shape[0], b2.shape[1])
        ga = (g2 @ b2.T).reshape(a.shape)
        gb = (a2.T @ g2).reshape(b.shape)
        return ga, gb

    return _make(out, (a, b), grad_fn, "matmul")


def transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise ShapeError(f"transpose needs rank 2, got {a.shape}")
    out = a.data.T.copy()

    def grad_fn(g: Array):
        return (g.T,)

    return _make(out, (a,), grad_fn, "transpose")


# ---------------------------------------------------------------------------
# nonlinearities


def relu(a: Tensor) -> Tensor:
    a = _ensure(a)
    mask = a.data > 0
    out = np.where(mask, a.data, 0.0)

    def grad_fn(g: Array):
        return (g * mask,)

    return _make(out, (a,), grad_fn, "relu")


def _sigmoid(x: Array) -> Array:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a: Tensor) -> Tensor:
    a = _ensure(a)
    s = _sigmoid(a.data)

    def grad_fn(g: Array):
        return (g * s * (1.0 - s),)

    return _make(s, (a,), grad_fn, "sigmoid")


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    a = _ensure(a)
    if np.isnan(a.data).any():
        raise NumericError("softmax input contains NaN")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)

    def grad_fn(g: Array):
        inner = (g * s).sum(axis=axis, keepdims=True)
        return (s * (g - inner),)

    return _make(s, (a,), grad_fn, "softmax")


def layernorm(a: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance (no affine)."""
    a = _ensure(a)
    mu = a.data.mean(axis=-1, keepdims=True)
    var = a.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (a.data - mu) * inv

    def grad_fn(g: Array):
        gm = g.mean(axis=-1, keepdims=True)
        gx = (g * xhat).mean(axis=-1, keepdims=True)
        return (inv * (g - gm - xhat * gx),)

    return _make(xhat, (a,), grad_fn, "layernorm")


def dropout(a: Tensor, p: float, key: Sequence[int | str], training: bool = True) -> Tensor:
    """Inverted dropout with a mask that is a pure function of `key`.

    Eval mode (training=False) or p=0 returns the input tensor unchanged —
    the exact identity, not a rescaled copy.
    """
    a = _ensure(a)
    if not 0.0 <= p < 1.0:
        raise InputError(f"dropout rate must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return a
    keep = stream(*key).random(a.shape) >= p
    scale = 1.0 / (1.0 - p)
    out = a.data * keep * scale

    def grad_fn(g: Array):
        return (g * keep * scale,)

    return _make(out, (a,), grad_fn, "dropout")


# ---------------------------------------------------------------------------
# shape ops


def reshape(a: Tensor, shape) -> Tensor:
    a = _ensure(a)
    try:
        out = a.data.reshape(shape)
    except ValueError as e:
        raise ShapeError(f"cannot reshape {a.shape} to {shape}") from e
    out = out.copy()

    def grad_fn(g: Array):
        return (g.reshape(a.shape),)

    return _make(out, (a,), grad_fn, "reshape")


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice [start, start+length) along one axis."""
    a = _ensure(a)
    if not 0 <= axis < a.ndim:
        raise ShapeError(f"narrow axis {axis} out of range for shape {a.shape}")
    if start < 0 or length < 0 or start + length > a.shape[axis]:
        raise ShapeError(f"narrow [{start}:{start + length}] exceeds axis {axis} of {a.shape}")
    idx = [slice(None)] * a.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)
    out = a.data[idx].copy()

    def grad_fn(g: Array):
        full = np.zeros_like(a.data)
        full[idx] = g
        return (full,)

    return _make(out, (a,), grad_fn, "narrow")


def row(a: Tensor, i: int) -> Tensor:
    """Row i of a rank-2 tensor as a rank-1 tensor."""
    if a.ndim != 2:
        raise ShapeError(f"row needs rank 2, got {a.shape}")
    return reshape(narrow(a, 0, i, 1), (a.shape[1],))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [_ensure(t) for t in tensors]
    if not tensors:
        raise InputError("concat needs at least one tensor")
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeError(f"concat: incompatible shapes {[t.shape for t in tensors]}") from e
    sizes = [t.shape[axis] for t in tensors]

    def grad_fn(g: Array):
        pieces = []
        offset = 0
        for t, size in zip(tensors, sizes):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(offset, offset + size)
            pieces.append(g[tuple(idx)])
            offset += size
        return tuple(pieces)

    return _make(out, tuple(tensors), grad_fn, "concat")


def gather_rows(table: Tensor, ids) -> Tensor:
    """Rows table[ids]; backward scatter-adds (repeated ids accumulate)."""
    table = _ensure(table)
    if table.ndim != 2:
        raise ShapeError(f"gather_rows needs a rank-2 table, got {table.shape}")
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim != 1:
        raise ShapeError(f"gather_rows needs rank-1 ids, got {ids.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise InputError(f"gather_rows: id out of range [0, {table.shape[0]})")
    out = table.data[ids].copy()

    def grad_fn(g: Array):
        full = np.zeros_like(table.data)
        np.add.at(full, ids, g)
        return (full,)

    return _make(out, (table,), grad_fn, "gather_rows")


# ---------------------------------------------------------------------------
# reductions and losses


def mean_pool(a: Tensor, axis: int = 0) -> Tensor:
    """Mean over rows of a rank-2 tensor (axis 0 only)."""
    a = _ensure(a)
    if a.ndim != 2:
        raise ShapeError(f"mean_pool needs rank 2, got {a.shape}")
    if axis != 0:
        raise ShapeError("mean_pool supports axis=0 only")
    n = a.shape[0]
    if n == 0:
        raise InputError("mean_pool over an empty set of rows")
    out = a.data.mean(axis=0)

    def grad_fn(g: Array):
        return (np.tile(g / n, (n, 1)),)

    return _make(out, (a,), grad_fn, "mean_pool")


def sum_all(a: Tensor) -> Tensor:
    a = _ensure(a)
    out = a.data.sum()

    def grad_fn(g: Array):
        return (np.full_like(a.data, float(g)),)

    return _make(np.asarray(out), (a,), grad_fn, "sum_all")


def mean_tensors(tensors: Sequence[Tensor]) -> Tensor:
    """Mean of same-shaped tensors (used for batch losses)."""
    if not tensors:
        raise InputError("mean of zero tensors")
    total = tensors[0]
    for t in tensors[1:]:
        total = add(total, t)
    return mul(total, constant(1.0 / len(tensors)))


def bce_loss(p: Tensor, y: int | float) -> Tensor:
    """Binary cross-entropy of a scalar probability against label y ∈ {0, 1}.

    p is clamped to [1e-7, 1 - 1e-7] before the log; the gradient is zero in
    the clamped region.
    """
    p = _ensure(p)
    if p.data.size != 1:
        raise ShapeError(f"bce_loss needs a scalar probability, got shape {p.shape}")
    yf = float(y)
    if yf not in (0.0, 1.0):
        raise InputError(f"bce_loss label must be 0 or 1, got {y!r}")
    pc = np.clip(p.data, EPS_P, 1.0 - EPS_P)
    inside = (p.data >= EPS_P) & (p.data <= 1.0 - EPS_P)
    out = -(yf * np.log(pc) + (1.0 - yf) * np.log(1.0 - pc))

    def grad_fn(g: Array):
        dp = (pc - yf) / (pc * (1.0 - pc))
        return (g * dp * inside,)

    return _make(out.reshape(()), (p,), grad_fn, "bce_loss")


# ---------------------------------------------------------------------------
# gradient checking


def finite_difference(f: Callable[[], float], x: Array, eps: float = 1e-5,
                      indices: Sequence[int] | None = None) -> Array:
    """Central finite differences of f w.r.t. the flat entries of x.

    f re-evaluates the computation reading x in place. When `indices` is
    given only those flat positions are probed (others stay zero).
    """
    flat = x.reshape(-1)
    g = np.zeros_like(flat)
    probe = range(flat.size) if indices is None else indices
    for i in probe:
        keep = flat[i]
        flat[i] = keep + eps
        fp = f()
        flat[i] = keep - eps
        fm = f()
        flat[i] = keep
        g[i] = (fp - fm) / (2.0 * eps)
    return g.reshape(x.shape)


def max_rel_error(analytic: Array, numeric: Array) -> float:
    """Max of |a - n| / max(1, |a|, |n|) over all entries."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(n)))
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - n) / denom))


def gradcheck(build_loss: Callable[[], Tensor], params: dict[str, Tensor],
              eps: float = 1e-5, max_entries: int | None = None,
              seed: int = 0) -> dict[str, float]:
    """Compare backward() against central differences for each named tensor.

    Returns {name: max relative error}. Large tensors are subsampled to
    max_entries seeded positions; None probes everything.
    """
    zero_grads(params)
    loss = build_loss()
    backward(loss)
    analytic = {}
    for name, t in params.items():
        if t.grad is None:
            analytic[name] = np.zeros_like(t.data)
        else:
            analytic[name] = t.grad.copy()

    def f() -> float:
        return build_loss().item()

    report: dict[str, float] = {}
    for name, t in params.items():
        size = t.data.size
        if max_entries is not None and size > max_entries:
            idx = stream(seed, "gradcheck", name).choice(size, size=max_entries, replace=False)
            indices = sorted(int(i) for i in idx)
        else:
            indices = list(range(size))
        numeric = finite_difference(f, t.data, eps=eps, indices=indices)
        a_sel = analytic[name].reshape(-1)[indices]
        n_sel = numeric.reshape(-1)[indices]
        report[name] = max_rel_error(a_sel, n_sel)
    return report
