"""Dense tensors with reverse-mode differentiation.

Only the operations the extraction model needs are provided. Each op
records a closure that pushes the upstream gradient into its inputs, and
:func:`backward` replays those closures in reverse topological order.
Everything runs in float64 so finite-difference checks stay meaningful.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ContractError, DimensionError, EmptyInputError

DTYPE = np.float64
LEAKY_SLOPE = 0.01

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Run a block without recording the computation graph."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def is_grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    """An n-dimensional float64 array that can take part in a graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.array(data, dtype=DTYPE)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        """Return a constant view of the same values (no gradient path)."""
        out = Tensor.__new__(Tensor)
        out.data = self.data
        out.grad = None
        out.requires_grad = False
        out._parents = ()
        out._backward = None
        return out

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(astensor(other), -1.0))

    def __rsub__(self, other):
        return add(astensor(other), mul(self, -1.0))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("division by a tensor is not supported")
        return mul(self, 1.0 / other)

    def __matmul__(self, other):
        return matmul(self, other)


def astensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.requires_grad = False
    out._parents = ()
    out._backward = None
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=DTYPE)
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _broadcast_shape(a: Tensor, b: Tensor) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"cannot broadcast shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------------------
# graph traversal


def backward(loss: Tensor) -> None:
    """Populate ``.grad`` on every tensor that ``loss`` depends on.

    Leaf gradients accumulate across calls; call ``zero_grad`` between
    optimizer steps.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
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
    for node in order:
        if node._backward is not None:
            node.grad = None
    if not loss.requires_grad:
        return
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# linear algebra and elementwise ops


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = astensor(a), astensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    def _bw(g):
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)

    return _result(a.data @ b.data, (a, b), _bw)


def add(a, b) -> Tensor:
    a, b = astensor(a), astensor(b)
    _broadcast_shape(a, b)

    def _bw(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    return _result(a.data + b.data, (a, b), _bw)


def mul(a, b) -> Tensor:
    a, b = astensor(a), astensor(b)
    _broadcast_shape(a, b)

    def _bw(g):
        _accumulate(a, _unbroadcast(g * b.data, a.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.shape))

    return _result(a.data * b.data, (a, b), _bw)


def scale_rows(x: Tensor, w: Tensor) -> Tensor:
    """Multiply row ``i`` of ``x`` by ``w[i]``."""
    x, w = astensor(x), astensor(w)
    if x.ndim != 2 or w.ndim != 1 or w.shape[0] != x.shape[0]:
        raise DimensionError(f"scale_rows needs weights of length {x.shape[0]}, got shape {w.shape}")

    def _bw(g):
        _accumulate(x, g * w.data[:, None])
        _accumulate(w, (g * x.data).sum(axis=1))

    return _result(x.data * w.data[:, None], (x, w), _bw)


def sigmoid(x: Tensor) -> Tensor:
    x = astensor(x)
    y = _stable_sigmoid(x.data)

    def _bw(g):
        _accumulate(x, g * y * (1.0 - y))

    return _result(y, (x,), _bw)


def _stable_sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def leaky_relu(x: Tensor, slope: float = LEAKY_SLOPE) -> Tensor:
    x = astensor(x)
    factor = np.where(x.data > 0, 1.0, slope)

    def _bw(g):
        _accumulate(x, g * factor)

    return _result(x.data * factor, (x,), _bw)


def transpose(x: Tensor) -> Tensor:
    x = astensor(x)
    if x.ndim != 2:
        raise DimensionError(f"transpose needs a matrix, got shape {x.shape}")

    def _bw(g):
        _accumulate(x, g.T)

    return _result(x.data.T, (x,), _bw)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    x = astensor(x)

    def _bw(g):
        _accumulate(x, g.reshape(x.shape))

    return _result(x.data.reshape(shape), (x,), _bw)


# ---------------------------------------------------------------------------
# normalisation and reductions


def softmax_rows(x: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Row-wise softmax; ``mask`` (True = keep) zeroes excluded entries."""
    x = astensor(x)
    if x.ndim != 2:
        raise DimensionError(f"softmax_rows needs a matrix, got shape {x.shape}")
    z = x.data
    if mask is not None:
        if not mask.any(axis=1).all():
            raise EmptyInputError("softmax row with every entry masked out")
        z = np.where(mask, z, -np.inf)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=1, keepdims=True)

    def _bw(g):
        _accumulate(x, y * (g - (g * y).sum(axis=1, keepdims=True)))

    return _result(y, (x,), _bw)


def reduce(kind: str, x: Tensor, axis: int) -> Tensor:
    """Reduce ``x`` along ``axis`` with ``max``, ``mean`` or ``sum``."""
    x = astensor(x)
    if not -x.ndim <= axis < x.ndim:
        raise DimensionError(f"axis {axis} out of range for shape {x.shape}")
    if x.shape[axis] == 0:
        raise EmptyInputError(f"cannot reduce over empty axis {axis} of shape {x.shape}")
    axis = axis % x.ndim
    if kind == "sum":
        def _bw(g):
            _accumulate(x, np.broadcast_to(np.expand_dims(g, axis), x.shape))

        return _result(x.data.sum(axis=axis), (x,), _bw)
    if kind == "mean":
        n = x.shape[axis]

        def _bw(g):
            _accumulate(x, np.broadcast_to(np.expand_dims(g, axis), x.shape) / n)

        return _result(x.data.mean(axis=axis), (x,), _bw)
    if kind == "max":
        # np.argmax returns the first maximal index, which fixes tie routing
        idx = np.expand_dims(np.argmax(x.data, axis=axis), axis)
        out = np.take_along_axis(x.data, idx, axis=axis).squeeze(axis)

        def _bw(g):
            dx = np.zeros_like(x.data)
            np.put_along_axis(dx, idx, np.expand_dims(g, axis), axis=axis)
            _accumulate(x, dx)

        return _result(out, (x,), _bw)
    raise ValueError(f"unknown reduction {kind!r}")


def segment_max(x: Tensor, segments: Sequence[tuple[int, int]], empty: str = "error") -> Tensor:
    """Max-pool the rows of ``x`` inside each half-open ``(begin, end)`` range.

    ``empty="zero"`` turns an empty range into a zero row instead of raising.
    """
    x = astensor(x)
    if x.ndim != 2:
        raise DimensionError(f"segment_max needs a matrix, got shape {x.shape}")
    n, h = x.shape
    k = len(segments)
    if k == 0:
        return _result(np.zeros((0, h)), (x,), lambda g: None)
    bounds = np.asarray(segments, dtype=np.int64).reshape(k, 2)
    begins, ends = bounds[:, 0], bounds[:, 1]
    if (begins < 0).any() or (ends > n).any() or (ends < begins).any():
        raise DimensionError(f"segment out of range for {n} rows")
    widths = ends - begins
    is_empty = widths == 0
    if is_empty.any() and empty != "zero":
        raise EmptyInputError("empty segment in max-pool")
    width = max(int(widths.max()), 1)
    rows = begins[:, None] + np.arange(width)[None, :]
    valid = rows < ends[:, None]
    rows = np.where(valid, rows, 0)
    gathered = np.where(valid[:, :, None], x.data[rows] if n else 0.0, -np.inf)
    pick = np.argmax(gathered, axis=1)  # k x h, first occurrence on ties
    src = np.take_along_axis(rows, pick, axis=1) if width else pick
    out = np.take_along_axis(gathered, pick[:, None, :], axis=1)[:, 0, :]
    out[is_empty] = 0.0
    cols = np.broadcast_to(np.arange(h), (k, h))

    def _bw(g):
        dx = np.zeros_like(x.data)
        live = ~is_empty
        np.add.at(dx, (src[live], cols[live]), g[live])
        _accumulate(x, dx)

    return _result(out, (x,), _bw)


# ---------------------------------------------------------------------------
# indexing and layout


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [astensor(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        shapes = [t.shape for t in tensors]
        raise DimensionError(f"cannot concatenate shapes {shapes}: {exc}") from None
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def _bw(g):
        for t, piece in zip(tensors, np.split(g, sizes, axis=axis)):
            _accumulate(t, piece)

    return _result(data, tensors, _bw)


def take_rows(x: Tensor, index) -> Tensor:
    x = astensor(x)
    index = np.asarray(index, dtype=np.int64)

    def _bw(g):
        dx = np.zeros_like(x.data)
        np.add.at(dx, index, g)
        _accumulate(x, dx)

    return _result(x.data[index], (x,), _bw)


def slice_cols(x: Tensor, start: int, stop: int) -> Tensor:
    x = astensor(x)

    def _bw(g):
        dx = np.zeros_like(x.data)
        dx[..., start:stop] = g
        _accumulate(x, dx)

    return _result(x.data[..., start:stop], (x,), _bw)


def dropout(x: Tensor, rate: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    """Inverted dropout; identity outside training mode."""
    x = astensor(x)
    if not training or rate <= 0.0:
        return x
    if rng is None:
        raise ContractError("dropout in training mode needs a seeded generator")
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)

    def _bw(g):
        _accumulate(x, g * keep)

    return _result(x.data * keep, (x,), _bw)


def layer_norm(x: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalise each row to zero mean and unit variance (no affine part)."""
    x = astensor(x)
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    y = xc * inv

    def _bw(g):
        gm = g.mean(axis=-1, keepdims=True)
        gy = (g * y).mean(axis=-1, keepdims=True)
        _accumulate(x, inv * (g - gm - y * gy))

    return _result(y, (x,), _bw)


# ---------------------------------------------------------------------------
# losses


def cross_entropy(logits: Tensor, targets: Sequence[int]) -> Tensor:
    """Mean softmax cross-entropy of each row against an integer class."""
    logits = astensor(logits)
    targets = np.asarray(targets, dtype=np.int64)
    if logits.ndim != 2 or targets.shape != (logits.shape[0],):
        raise DimensionError(f"cross_entropy: logits {logits.shape} vs targets {targets.shape}")
    if logits.shape[0] == 0:
        raise EmptyInputError("cross_entropy over zero rows")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - logsum
    rows = np.arange(len(targets))
    loss = -logp[rows, targets].mean()

    def _bw(g):
        d = np.exp(logp)
        d[rows, targets] -= 1.0
        _accumulate(logits, g * d / len(targets))

    return _result(np.asarray(loss), (logits,), _bw)


def binary_cross_entropy(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean sigmoid binary cross-entropy over every element."""
    logits = astensor(logits)
    targets = np.asarray(targets, dtype=DTYPE)
    if targets.shape != logits.shape:
        raise DimensionError(f"binary_cross_entropy: logits {logits.shape} vs targets {targets.shape}")
    if logits.data.size == 0:
        raise EmptyInputError("binary_cross_entropy over zero elements")
    z = logits.data
    loss = (np.maximum(z, 0.0) - z * targets + np.log1p(np.exp(-np.abs(z)))).mean()
    n = z.size

    def _bw(g):
        _accumulate(logits, g * (_stable_sigmoid(z) - targets) / n)

    return _result(np.asarray(loss), (logits,), _bw)


# ---------------------------------------------------------------------------
# checking


def gradcheck(
    fn: Callable[..., Tensor],
    inputs: Iterable[Tensor],
    h: float = 1e-5,
    seed: int = 0,
) -> float:
    """Largest relative error between analytic and central-difference gradients.

    The output of ``fn`` is contracted with a fixed random tensor so every
    output component is exercised. Relative error is measured per input as
    ``||analytic - numeric|| / max(||analytic||, ||numeric||, 1e-12)``.
    """
    inputs = list(inputs)
    probe = fn(*inputs)
    weights = np.random.default_rng(seed).standard_normal(probe.shape)

    def scalar():
        return float((fn(*inputs).data * weights).sum())

    for t in inputs:
        t.grad = None
    out = fn(*inputs)
    backward(reduce("sum", reshape(mul(out, weights), (-1,)), 0))
    worst = 0.0
    for t in inputs:
        if not t.requires_grad:
            continue
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        numeric = np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        nflat = numeric.reshape(-1)
        with no_grad():
            for i in range(flat.size):
                saved = flat[i]
                flat[i] = saved + h
                up = scalar()
                flat[i] = saved - h
                down = scalar()
                flat[i] = saved
                nflat[i] = (up - down) / (2 * h)
        denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
        worst = max(worst, float(np.linalg.norm(analytic - numeric) / denom))
    return worst
