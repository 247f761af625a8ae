"""Dense float64 tensors with reverse-mode differentiation on an explicit tape.

Small by design: enough operations for attention-style message passing,
GRU updates and categorical heads, at graph sizes where clarity beats speed.
Reductions over an axis sum their inputs in sorted order, so any computation
whose inputs are a permutation of another's produces bit-identical values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class ShapeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    """Raised when an operation produces NaN or Inf."""


class Parameter:
    """A named, trainable array. Mutated in place by the optimizer."""

    __slots__ = ("name", "data")

    def __init__(self, name: str, data):
        self.name = name
        self.data = np.array(data, dtype=np.float64)

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape})"


def uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    """Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)]."""
    bound = 1.0 / math.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)


def _check_finite(data: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(data)):
        raise NonFiniteError("operation produced a non-finite value")
    return data


def _stable_sum(data: np.ndarray, axis=None) -> np.ndarray:
    # Canonical (sorted) summation order: permutation-invariant forward values.
    if axis is None:
        return np.sort(data, axis=None).sum()
    return np.sort(data, axis=axis).sum(axis=axis)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a gradient back to the shape of a broadcast operand."""
    grad = np.asarray(grad, dtype=np.float64)
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, size in enumerate(shape):
        if size == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad.reshape(shape)


class Tape:
    """Records the operation graph of one forward pass.

    Nodes are appended in creation order, which is a topological order, so
    the backward sweep visits each node exactly once in reverse.
    """

    def __init__(self):
        self._entries: list[tuple[tuple[int, ...], object]] = []
        self._param_nodes: dict[str, int] = {}
        self._param_shapes: dict[str, tuple] = {}
        self._watch_cache: dict[str, "Tensor"] = {}

    def _add(self, parent_ids: tuple[int, ...], vjp) -> int:
        self._entries.append((parent_ids, vjp))
        return len(self._entries) - 1

    def watch(self, param: Parameter) -> "Tensor":
        """Lift a parameter onto the tape (idempotent per parameter name)."""
        cached = self._watch_cache.get(param.name)
        if cached is not None:
            return cached
        nid = self._add((), None)
        self._param_nodes[param.name] = nid
        self._param_shapes[param.name] = param.data.shape
        t = Tensor(param.data, self, nid)
        self._watch_cache[param.name] = t
        return t

    def register(self, param: Parameter) -> None:
        """Register a parameter so backward reports a gradient even if unused."""
        self.watch(param)

    def gradients(self, loss: "Tensor") -> dict[str, np.ndarray]:
        """Backward pass from a scalar loss; one gradient per registered parameter."""
        if loss.tape is not self:
            raise ValueError("loss was not recorded on this tape")
        if loss.data.shape != ():
            raise ShapeError(f"loss must be scalar, got shape {loss.data.shape}")
        grads: list = [None] * len(self._entries)
        grads[loss.nid] = np.array(1.0)
        for nid in range(loss.nid, -1, -1):
            gout = grads[nid]
            if gout is None:
                continue
            parent_ids, vjp = self._entries[nid]
            if vjp is None:
                continue
            for pid, pg in zip(parent_ids, vjp(gout)):
                if pg is None:
                    continue
                if grads[pid] is None:
                    grads[pid] = pg
                else:
                    grads[pid] = grads[pid] + pg
        out = {}
        for name, nid in self._param_nodes.items():
            g = grads[nid]
            if g is None:
                g = np.zeros(self._param_shapes[name])
            out[name] = np.asarray(g, dtype=np.float64).reshape(self._param_shapes[name])
        return out


class Tensor:
    """Immutable float64 array, optionally tracked on a tape."""

    __slots__ = ("data", "tape", "nid")

    def __init__(self, data, tape: Tape | None = None, nid: int | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.tape = tape
        self.nid = nid

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, tracked={self.tape is not None})"

    def item(self) -> float:
        return float(self.data)

    # operator sugar
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

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


def _common_tape(*tensors) -> Tape | None:
    tape = None
    for t in tensors:
        if isinstance(t, Tensor) and t.tape is not None:
            if tape is None:
                tape = t.tape
            elif tape is not t.tape:
                raise ValueError("operands belong to different tapes")
    return tape


def _result(data, inputs: list[Tensor], vjps: list) -> Tensor:
    """Create an op result; record it when any input is tracked.

    `vjps[i]` maps the output gradient to input i's gradient; entries for
    untracked inputs are skipped.
    """
    data = _check_finite(np.asarray(data, dtype=np.float64))
    tape = _common_tape(*inputs)
    if tape is None:
        return Tensor(data)
    tracked = [(t, v) for t, v in zip(inputs, vjps) if t.tape is not None]
    parent_ids = tuple(t.nid for t, _ in tracked)
    fns = [v for _, v in tracked]

    def vjp(gout):
        return [fn(gout) for fn in fns]

    nid = tape._add(parent_ids, vjp)
    return Tensor(data, tape, nid)


# ---------------------------------------------------------------------------
# elementwise / linear ops
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data
    return _result(out, [a, b], [
        lambda g: _unbroadcast(g, a.data.shape),
        lambda g: _unbroadcast(g, b.data.shape),
    ])


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data - b.data
    return _result(out, [a, b], [
        lambda g: _unbroadcast(g, a.data.shape),
        lambda g: _unbroadcast(-g, b.data.shape),
    ])


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _result(-a.data, [a], [lambda g: -g])


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data
    return _result(out, [a, b], [
        lambda g: _unbroadcast(g * b.data, a.data.shape),
        lambda g: _unbroadcast(g * a.data, b.data.shape),
    ])


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim == 0 or b.data.ndim == 0:
        raise ShapeError("matmul requires 1-D or 2-D operands")
    try:
        out = a.data @ b.data
    except ValueError as exc:
        raise ShapeError(str(exc)) from None
    an, bn = a.data.ndim, b.data.ndim

    def grad_a(g):
        if an == 2 and bn == 2:
            return g @ b.data.T
        if an == 1 and bn == 2:
            return b.data @ g
        if an == 2 and bn == 1:
            return np.outer(g, b.data)
        return g * b.data  # 1-D @ 1-D

    def grad_b(g):
        if an == 2 and bn == 2:
            return a.data.T @ g
        if an == 1 and bn == 2:
            return np.outer(a.data, g)
        if an == 2 and bn == 1:
            return a.data.T @ g
        return g * a.data

    return _result(out, [a, b], [grad_a, grad_b])


def concat(parts, axis: int = 0) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    if not parts:
        raise ShapeError("concat of zero tensors")
    out = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis if axis >= 0 else p.data.ndim + axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def make_vjp(i):
        lo, hi = offsets[i], offsets[i + 1]

        def vjp(g):
            sl = [slice(None)] * g.ndim
            sl[axis if axis >= 0 else g.ndim + axis] = slice(lo, hi)
            return g[tuple(sl)]

        return vjp

    return _result(out, parts, [make_vjp(i) for i in range(len(parts))])


def stack(parts) -> Tensor:
    """Stack 1-D tensors into a (len, dim) matrix."""
    parts = [as_tensor(p) for p in parts]
    if not parts:
        raise ShapeError("stack of zero tensors")
    out = np.stack([p.data for p in parts], axis=0)

    def make_vjp(i):
        return lambda g: g[i]

    return _result(out, parts, [make_vjp(i) for i in range(len(parts))])


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.data.shape
    return _result(a.data.reshape(shape), [a], [lambda g: g.reshape(old)])


def tile_row(v, k: int) -> Tensor:
    """Repeat a 1-D tensor as k identical rows."""
    v = as_tensor(v)
    if v.data.ndim != 1:
        raise ShapeError("tile_row expects a 1-D tensor")
    out = np.tile(v.data, (k, 1))
    return _result(out, [v], [lambda g: g.sum(axis=0)])


def rows(a, ids) -> Tensor:
    """Gather rows of a 2-D tensor; also the embedding lookup."""
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeError("rows expects a 2-D tensor")
    ids = np.asarray(ids, dtype=int)
    out = a.data[ids]

    def vjp(g):
        acc = np.zeros_like(a.data)
        np.add.at(acc, ids, g)
        return acc

    return _result(out, [a], [vjp])


def embedding_lookup(table, ids) -> Tensor:
    return rows(table, ids)


def take(a, ids) -> Tensor:
    """Gather entries of a 1-D tensor."""
    a = as_tensor(a)
    if a.data.ndim != 1:
        raise ShapeError("take expects a 1-D tensor")
    ids = np.asarray(ids, dtype=int)
    out = a.data[ids]

    def vjp(g):
        acc = np.zeros_like(a.data)
        np.add.at(acc, ids, g)
        return acc

    return _result(out, [a], [vjp])


def gather2d(a, row_ids, col_ids) -> Tensor:
    """Entries a[row_ids[k], col_ids[k]] of a 2-D tensor, as a 1-D tensor."""
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeError("gather2d expects a 2-D tensor")
    row_ids = np.asarray(row_ids, dtype=int)
    col_ids = np.asarray(col_ids, dtype=int)
    out = a.data[row_ids, col_ids]

    def vjp(g):
        acc = np.zeros_like(a.data)
        np.add.at(acc, (row_ids, col_ids), g)
        return acc

    return _result(out, [a], [vjp])


def pick(a, i: int) -> Tensor:
    """A single entry of a 1-D tensor, as a scalar."""
    a = as_tensor(a)
    if a.data.ndim != 1:
        raise ShapeError("pick expects a 1-D tensor")

    def vjp(g):
        acc = np.zeros_like(a.data)
        acc[i] = g
        return acc

    return _result(a.data[i], [a], [vjp])


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return _result(np.where(mask, a.data, 0.0), [a], [lambda g: g * mask])


def leaky_relu(a, slope: float = 0.2) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    scale = np.where(mask, 1.0, slope)
    return _result(a.data * scale, [a], [lambda g: g * scale])


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = 1.0 / (1.0 + np.exp(-a.data))
    return _result(out, [a], [lambda g: g * out * (1.0 - out)])


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _result(out, [a], [lambda g: g * (1.0 - out * out)])


def exp(a) -> Tensor:
    a = as_tensor(a)
    with np.errstate(over="ignore"):
        out = np.exp(a.data)  # inf is caught by the finiteness check
    return _result(out, [a], [lambda g: g * out])


def log(a) -> Tensor:
    a = as_tensor(a)
    with np.errstate(divide="raise", invalid="raise"):
        try:
            out = np.log(a.data)
        except FloatingPointError:
            raise NonFiniteError("log of a non-positive value") from None
    return _result(out, [a], [lambda g: g / a.data])


def tsum(a, axis=None) -> Tensor:
    a = as_tensor(a)
    out = _stable_sum(a.data, axis=axis)
    shape = a.data.shape

    def vjp(g):
        if axis is None:
            return np.broadcast_to(g, shape).copy()
        return np.broadcast_to(np.expand_dims(g, axis), shape).copy()

    return _result(out, [a], [vjp])


def tmean(a, axis=None) -> Tensor:
    a = as_tensor(a)
    n = a.data.size if axis is None else a.data.shape[axis]
    return mul(tsum(a, axis=axis), 1.0 / n)


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    if a.data.size == 0:
        raise ShapeError("softmax of an empty tensor")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    denom = np.sort(e, axis=axis).sum(axis=axis, keepdims=True)
    out = e / denom

    def vjp(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return out * (g - inner)

    return _result(out, [a], [vjp])


def logsumexp(a, axis=None) -> Tensor:
    """Stabilized log-sum-exp, composed from primitives (exact gradient)."""
    a = as_tensor(a)
    if axis is None:
        m = float(a.data.max())
        return add(log(tsum(exp(sub(a, m)))), m)
    m = a.data.max(axis=axis, keepdims=True)
    return add(log(tsum(exp(sub(a, m)), axis=axis)), np.squeeze(m, axis=axis))


def gru_cell(h, m, params: dict) -> Tensor:
    """Gated recurrent update of state h given aggregated message m.

    params maps 'wz','uz','bz','wr','ur','br','wc','uc','bc' to tensors;
    w* act on h, u* on m. Output: (1 - z) * h + z * tanh((r * h) Wc + m Uc + bc).
    """
    h, m = as_tensor(h), as_tensor(m)
    if h.data.shape != m.data.shape:
        raise ShapeError(f"state {h.data.shape} and message {m.data.shape} differ")
    z = sigmoid(add(add(matmul(h, params["wz"]), matmul(m, params["uz"])), params["bz"]))
    r = sigmoid(add(add(matmul(h, params["wr"]), matmul(m, params["ur"])), params["br"]))
    c = tanh(add(add(matmul(mul(r, h), params["wc"]), matmul(m, params["uc"])), params["bc"]))
    one_minus_z = sub(1.0, z)
    return add(mul(one_minus_z, h), mul(z, c))


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------

def grad_check(fn, params: dict[str, Parameter], eps: float = 1e-5) -> float:
    """Max relative error between tape gradients and central differences.

    `fn(tape)` must rebuild the same scalar loss on every call; it receives
    None when evaluated purely numerically.
    """
    base1 = fn(None)
    base2 = fn(None)
    v1 = base1.data if isinstance(base1, Tensor) else np.asarray(base1)
    v2 = base2.data if isinstance(base2, Tensor) else np.asarray(base2)
    if not np.array_equal(v1, v2):
        raise ValueError("fn is not deterministic under fixed inputs")

    tape = Tape()
    for p in params.values():
        tape.register(p)
    loss = fn(tape)
    grads = tape.gradients(loss)

    worst = 0.0
    for name, p in params.items():
        flat = p.data.reshape(-1)
        gflat = grads[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = fn(None)
            flat[i] = orig - eps
            lo = fn(None)
            flat[i] = orig
            hi = hi.item() if isinstance(hi, Tensor) else float(hi)
            lo = lo.item() if isinstance(lo, Tensor) else float(lo)
            fd = (hi - lo) / (2.0 * eps)
            err = abs(gflat[i] - fd) / (abs(fd) + 1e-8)
            worst = max(worst, err)
    return worst
