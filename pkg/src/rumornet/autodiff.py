"""Reverse-mode automatic differentiation on dense float64 arrays.

A small define-by-run engine: every operation records its parent tensors
and a closure mapping the upstream gradient to per-parent gradients.
Graphs are rebuilt on every forward pass and reclaimed by garbage
collection, which keeps recurrent loops over variable-length sequences
simple and correct.

Broadcasting is deliberately restricted to two cases: a scalar (shape
``()``) against any shape, and a vector added against the rows of a
matrix. Everything else must match shapes exactly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class NondeterminismError(RuntimeError):
    """Two forward passes of a supposedly pure function disagreed."""


_seq_counter = itertools.count()


class Tensor:
    """Dense float64 array participating in reverse-mode autodiff.

    ``grad`` is populated by :func:`backward` for tensors created with
    ``requires_grad=True`` and accumulates across backward calls until
    :meth:`zero_grad` is invoked. Leaf values must not be mutated
    between building a graph and running its backward pass.
    """

    __slots__ = ("values", "requires_grad", "grad", "_parents", "_backward", "_seq")

    def __init__(self, values, requires_grad: bool = False):
        if type(values) is np.ndarray and values.dtype == np.float64:
            self.values = values
        else:
            self.values = np.asarray(values, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], tuple] | None = None
        self._seq = next(_seq_counter)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def size(self) -> int:
        return self.values.size

    def item(self) -> float:
        return float(self.values)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # Operator sugar; all real work happens in the module-level ops.
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

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def sum(self, axis: int | None = None) -> "Tensor":
        return _reduce(self, axis, how="sum")

    def mean(self, axis: int | None = None) -> "Tensor":
        return _reduce(self, axis, how="mean")

    def reshape(self, shape) -> "Tensor":
        return reshape(self, shape)


def constant(values) -> Tensor:
    return Tensor(values, requires_grad=False)


def parameter(values) -> Tensor:
    return Tensor(values, requires_grad=True)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _from_op(values: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    out = Tensor(values)
    for p in parents:
        if p.requires_grad:
            out.requires_grad = True
            out._parents = parents
            out._backward = backward_fn
            break
    return out


def _pairwise_ok(a: np.ndarray, b: np.ndarray) -> bool:
    """Exact shape match, scalar-vs-any, or matrix-rows-vs-vector."""
    if a.shape == b.shape:
        return True
    if a.shape == () or b.shape == ():
        return True
    if a.ndim == 2 and b.ndim == 1 and a.shape[1] == b.shape[0]:
        return True
    if b.ndim == 2 and a.ndim == 1 and b.shape[1] == a.shape[0]:
        return True
    return False


def _reduce_to(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum an upstream gradient down to a broadcast operand's shape."""
    if g.shape == shape:
        return g
    if shape == ():
        return np.asarray(g.sum())
    # vector operand broadcast over matrix rows
    return g.sum(axis=0)


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if not _pairwise_ok(a.values, b.values):
        raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}")
    av, bv = a.values, b.values

    def backward_fn(g):
        return _reduce_to(g, av.shape), _reduce_to(g, bv.shape)

    return _from_op(av + bv, (a, b), backward_fn)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if not _pairwise_ok(a.values, b.values):
        raise ShapeError(f"sub: incompatible shapes {a.shape} and {b.shape}")
    av, bv = a.values, b.values

    def backward_fn(g):
        return _reduce_to(g, av.shape), _reduce_to(-g, bv.shape)

    return _from_op(av - bv, (a, b), backward_fn)


def mul(a, b) -> Tensor:
    """Elementwise product, with scalar and row-vector broadcasting."""
    a, b = _as_tensor(a), _as_tensor(b)
    if not _pairwise_ok(a.values, b.values):
        raise ShapeError(f"mul: incompatible shapes {a.shape} and {b.shape}")
    av, bv = a.values, b.values

    def backward_fn(g):
        return _reduce_to(g * bv, av.shape), _reduce_to(g * av, bv.shape)

    return _from_op(av * bv, (a, b), backward_fn)


def matmul(a, b) -> Tensor:
    """Matrix product over 1-D or 2-D operands.

    1-D operands are treated as a single row (left) or column (right),
    and the corresponding axis is dropped from the result, so
    ``vector @ matrix -> vector`` and ``vector @ vector -> scalar``.
    """
    a, b = _as_tensor(a), _as_tensor(b)
    av, bv = a.values, b.values
    if av.ndim not in (1, 2) or bv.ndim not in (1, 2):
        raise ShapeError(f"matmul: operands must be 1-D or 2-D, got {a.shape} and {b.shape}")
    a2 = av if av.ndim == 2 else av[np.newaxis, :]
    b2 = bv if bv.ndim == 2 else bv[:, np.newaxis]
    if a2.shape[1] != b2.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} vs {b.shape}")
    out2 = a2 @ b2
    out = out2
    if av.ndim == 1:
        out = out[0]
    if bv.ndim == 1:
        out = out[..., 0]

    def backward_fn(g):
        g2 = np.asarray(g).reshape(a2.shape[0], b2.shape[1])
        ga = (g2 @ b2.T).reshape(av.shape)
        gb = (a2.T @ g2).reshape(bv.shape)
        return ga, gb

    return _from_op(out, (a, b), backward_fn)


def dot(a, b) -> Tensor:
    """Inner product of two vectors (scalar result)."""
    return matmul(a, b)


def sigmoid(x) -> Tensor:
    x = _as_tensor(x)
    # Overflow-free for any input: sigma(x) = (1 + tanh(x/2)) / 2.
    out = 0.5 * (1.0 + np.tanh(0.5 * x.values))

    def backward_fn(g):
        return (g * out * (1.0 - out),)

    return _from_op(out, (x,), backward_fn)


def tanh(x) -> Tensor:
    x = _as_tensor(x)
    out = np.tanh(x.values)

    def backward_fn(g):
        return (g * (1.0 - out * out),)

    return _from_op(out, (x,), backward_fn)


def relu(x) -> Tensor:
    x = _as_tensor(x)
    xv = x.values
    out = np.maximum(xv, 0.0)

    def backward_fn(g):
        return (g * (xv > 0.0),)

    return _from_op(out, (x,), backward_fn)


def exp(x) -> Tensor:
    x = _as_tensor(x)
    out = np.exp(x.values)

    def backward_fn(g):
        return (g * out,)

    return _from_op(out, (x,), backward_fn)


def log(x) -> Tensor:
    x = _as_tensor(x)
    xv = x.values

    def backward_fn(g):
        return (g / xv,)

    return _from_op(np.log(xv), (x,), backward_fn)


def clip(x, lo: float, hi: float) -> Tensor:
    """Clamp values to [lo, hi]; gradient passes only where unclipped."""
    x = _as_tensor(x)
    xv = x.values
    out = np.clip(xv, lo, hi)
    inside = (xv >= lo) & (xv <= hi)

    def backward_fn(g):
        return (g * inside,)

    return _from_op(out, (x,), backward_fn)


def softmax_masked(x, mask: np.ndarray, axis: int = -1) -> Tensor:
    """Softmax over unmasked positions; masked positions are exactly 0.

    ``mask`` is a boolean array of the same shape as ``x`` with True
    marking positions that participate. Every slice along ``axis`` must
    contain at least one unmasked position.
    """
    x = _as_tensor(x)
    xv = x.values
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != xv.shape:
        raise ShapeError(f"softmax_masked: mask shape {mask.shape} != input shape {xv.shape}")
    if not mask.any(axis=axis).all():
        raise ValueError("softmax_masked: a slice has every position masked")
    shifted = np.where(mask, xv, -np.inf)
    mx = shifted.max(axis=axis, keepdims=True)
    e = np.exp(shifted - mx)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward_fn(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - inner),)

    return _from_op(out, (x,), backward_fn)


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    parts = [_as_tensor(t) for t in tensors]
    if not parts:
        raise ValueError("concat: empty tensor list")
    values = np.concatenate([p.values for p in parts], axis=axis)
    sizes = [p.values.shape[axis if axis >= 0 else p.values.ndim + axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def backward_fn(g):
        return tuple(np.split(g, splits, axis=axis))

    return _from_op(values, tuple(parts), backward_fn)


def stack_rows(vectors: Sequence) -> Tensor:
    """Stack equal-length vectors into a matrix, one row per vector."""
    return concat([reshape(v, (1, -1)) for v in vectors], axis=0)


def reshape(x, shape) -> Tensor:
    x = _as_tensor(x)
    xv = x.values
    out = xv.reshape(shape)

    def backward_fn(g):
        return (np.asarray(g).reshape(xv.shape),)

    return _from_op(out, (x,), backward_fn)


def tensor_slice(x, index) -> Tensor:
    """Basic slicing (ints, slices, tuples thereof) with scatter gradient."""
    x = _as_tensor(x)
    xv = x.values
    out = xv[index].copy() if isinstance(xv[index], np.ndarray) else np.asarray(xv[index])

    def backward_fn(g):
        gx = np.zeros_like(xv)
        gx[index] += g
        return (gx,)

    return _from_op(out, (x,), backward_fn)


def _reduce(x, axis: int | None, how: str) -> Tensor:
    x = _as_tensor(x)
    xv = x.values
    if how == "sum":
        out = xv.sum(axis=axis)
        scale = 1.0
    else:
        out = xv.mean(axis=axis)
        scale = 1.0 / (xv.size if axis is None else xv.shape[axis])

    def backward_fn(g):
        if axis is None:
            return (np.full_like(xv, g * scale),)
        g = np.expand_dims(np.asarray(g), axis)
        return (np.broadcast_to(g, xv.shape) * scale,)

    return _from_op(out, (x,), backward_fn)


def dropout(x, rate: float, train: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: zero with probability ``rate``, scale survivors.

    Identity at evaluation time. ``rng`` is required when training with
    a nonzero rate so masks are reproducible.
    """
    x = _as_tensor(x)
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout: rate must be in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout: rng required at train time")
    keep = (rng.random(x.values.shape) >= rate) / (1.0 - rate)
    out = x.values * keep

    def backward_fn(g):
        return (g * keep,)

    return _from_op(out, (x,), backward_fn)


def conv1d_valid(x, filt) -> Tensor:
    """Valid 1-D convolution of an (n, d) input with an (h, d) filter.

    Each output position is the Frobenius inner product of the filter
    with one length-h window of input rows; output length is n - h + 1.
    """
    x, filt = _as_tensor(x), _as_tensor(filt)
    xv, fv = x.values, filt.values
    if xv.ndim != 2 or fv.ndim != 2 or xv.shape[1] != fv.shape[1]:
        raise ShapeError(f"conv1d_valid: input {x.shape} incompatible with filter {filt.shape}")
    n, d = xv.shape
    h = fv.shape[0]
    if h > n:
        raise ShapeError(f"conv1d_valid: filter height {h} exceeds input length {n}")
    windows = np.lib.stride_tricks.sliding_window_view(xv, (h, d))[:, 0]
    out = np.einsum("ihd,hd->i", windows, fv)

    def backward_fn(g):
        gf = np.einsum("i,ihd->hd", g, windows)
        gx = np.zeros_like(xv)
        for r in range(h):
            gx[r : r + n - h + 1] += g[:, np.newaxis] * fv[r]
        return gx, gf

    return _from_op(out, (x, filt), backward_fn)


def kmax_pool(x, k: int) -> Tensor:
    """The k largest entries of a vector, in their original order.

    Ties are broken toward the earliest index. The gradient routes 1 to
    each selected input position and 0 elsewhere.
    """
    x = _as_tensor(x)
    xv = x.values
    if xv.ndim != 1:
        raise ShapeError(f"kmax_pool: expected a vector, got shape {x.shape}")
    if not 1 <= k <= xv.shape[0]:
        raise ValueError(f"kmax_pool: k={k} out of range for length {xv.shape[0]}")
    top = np.argsort(-xv, kind="stable")[:k]
    idx = np.sort(top)
    out = xv[idx].copy()

    def backward_fn(g):
        gx = np.zeros_like(xv)
        gx[idx] += g
        return (gx,)

    return _from_op(out, (x,), backward_fn)


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every requires_grad leaf reachable from loss.

    The loss must be scalar. Repeated calls accumulate into existing
    leaf gradients; interior gradients are recomputed from scratch each
    call.
    """
    if loss.shape != ():
        raise ValueError(f"backward: loss must be scalar, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    # Creation order is a valid topological order: parents precede children.
    seen: dict[int, Tensor] = {id(loss): loss}
    stack = [loss]
    while stack:
        node = stack.pop()
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                seen[id(p)] = p
                stack.append(p)
    order = sorted(seen.values(), key=lambda t: t._seq, reverse=True)
    grads: dict[int, np.ndarray] = {id(loss): np.ones((), dtype=np.float64)}
    for node in order:
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is not None:
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
        else:
            node.grad = np.array(g) if node.grad is None else node.grad + g


@dataclass
class GradCheckFailure:
    leaf: int
    index: int
    analytic: float
    numeric: float
    rel_error: float


@dataclass
class GradCheckReport:
    passed: bool
    max_rel_error: float
    tolerance: float
    n_checked: int
    failures: list[GradCheckFailure] = field(default_factory=list)

    def __str__(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (
            f"{status}: max rel err {self.max_rel_error:.3e} over "
            f"{self.n_checked} entries (tolerance {self.tolerance:.1e})"
        )


def grad_check(
    f: Callable[[], Tensor],
    leaves: Sequence[Tensor],
    epsilon: float = 1e-5,
    tolerance: float = 1e-4,
) -> GradCheckReport:
    """Compare analytic gradients of f() against central finite differences.

    ``f`` must be a deterministic closure over ``leaves`` returning a
    scalar Tensor (run any dropout in eval mode). Relative error is
    |a - n| / max(1e-8, |a| + |n|) per element.
    """
    if not 0.0 < epsilon <= 1e-2:
        raise ValueError(f"grad_check: epsilon must be in (0, 1e-2], got {epsilon}")
    first = f().values
    second = f().values
    if first.shape != () or second.shape != ():
        raise ValueError("grad_check: f must return a scalar Tensor")
    if not np.array_equal(first, second):
        raise NondeterminismError("grad_check: two forward passes disagree")

    for leaf in leaves:
        leaf.zero_grad()
    backward(f())
    analytic = [
        np.zeros_like(leaf.values) if leaf.grad is None else leaf.grad.copy()
        for leaf in leaves
    ]

    max_rel = 0.0
    n_checked = 0
    failures: list[GradCheckFailure] = []
    for li, leaf in enumerate(leaves):
        flat = leaf.values.reshape(-1)
        for i in range(flat.shape[0]):
            saved = flat[i]
            flat[i] = saved + epsilon
            fp = float(f().values)
            flat[i] = saved - epsilon
            fm = float(f().values)
            flat[i] = saved
            numeric = (fp - fm) / (2.0 * epsilon)
            ana = float(analytic[li].reshape(-1)[i])
            rel = abs(ana - numeric) / max(1e-8, abs(ana) + abs(numeric))
            n_checked += 1
            if rel > max_rel:
                max_rel = rel
            if rel >= tolerance:
                failures.append(GradCheckFailure(li, i, ana, numeric, rel))
    return GradCheckReport(
        passed=max_rel < tolerance,
        max_rel_error=max_rel,
        tolerance=tolerance,
        n_checked=n_checked,
        failures=failures,
    )
