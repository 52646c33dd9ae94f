"""Dense float64 tensors with reverse-mode automatic differentiation.

Every forward operation records a node on an implicit tape (the graph of
``TapeNode`` objects hanging off each result).  ``backward`` replays the
tape in reverse topological order and accumulates one gradient per
``requires_grad`` leaf, with the same shape as the leaf.

Design constraints honoured throughout:

* float64 everywhere; speed is irrelevant at desk scale, gradient checks
  are not.
* every forward op verifies its output is finite and raises
  ``NumericError`` otherwise; NaN/Inf never propagate silently.
* no implicit broadcasting beyond (a) Python scalars and (b) a trailing
  ``(n,)`` row-vector operand (the bias-add case).  Anything else is a
  ``ShapeError`` so equation-transcription bugs surface immediately.
  Broadcasts along other axes must be spelled out with ``expand``.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import NumericError, ShapeError

__all__ = [
    "Tensor",
    "no_grad",
    "apply_op",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "matmul",
    "transpose",
    "reshape",
    "concat",
    "expand",
    "tsum",
    "tmean",
    "relu",
    "sigmoid",
    "tanh",
    "exp",
    "log",
    "softmax",
    "log_softmax",
    "conv1d",
    "conv2d",
    "batch_norm",
    "layer_norm",
    "linear",
    "embedding",
    "row_l1_normalize",
    "threshold_keep",
    "backward",
    "finite_diff_check",
    "uniform_init",
]

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable tape recording inside the block (evaluation fast path)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class TapeNode:
    """One recorded forward op: its parents and the backward rule.

    ``backward_fn(grad_out)`` returns one gradient array (or None) per
    parent, aligned with ``parents``.
    """

    __slots__ = ("name", "parents", "backward_fn")

    def __init__(self, name: str, parents: tuple, backward_fn: Callable):
        self.name = name
        self.parents = parents
        self.backward_fn = backward_fn


class Tensor:
    """Dense n-dimensional float64 array, row-major, optionally tracked
    by the autodiff tape."""

    __slots__ = ("data", "requires_grad", "grad", "_node")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self._node: Optional[TapeNode] = None

    # -- basic introspection ------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numel(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single element, shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- operator sugar -----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return _getitem(self, idx)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, axes=None) -> "Tensor":
        return transpose(self, axes)

    @property
    def T(self) -> "Tensor":
        return transpose(self, None)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tmean(self, axis, keepdims)

    def backward(self) -> None:
        backward(self)


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


def apply_op(
    name: str,
    out_data: np.ndarray,
    parents: Sequence[Tensor],
    backward_fn: Callable,
) -> Tensor:
    """Wrap an op result, checking finiteness and recording the tape node.

    Exposed so other modules can define custom differentiable ops (CTC,
    normalizers) with handwritten backward rules.
    """
    if not np.all(np.isfinite(out_data)):
        raise NumericError(f"op '{name}' produced non-finite values")
    out = Tensor(out_data)
    needs = _grad_enabled and any(p.requires_grad for p in parents)
    if needs:
        out.requires_grad = True
        out._node = TapeNode(name, tuple(parents), backward_fn)
    return out


def backward(loss: Tensor) -> None:
    """Reverse-accumulate gradients of a scalar loss into every
    ``requires_grad`` leaf reachable from it.

    Gradients accumulate (+=) across calls; callers zero them between
    steps.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise NumericError("loss does not depend on any requires_grad tensor")

    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        t, processed = stack.pop()
        if processed:
            topo.append(t)
            continue
        if id(t) in seen:
            continue
        seen.add(id(t))
        stack.append((t, True))
        if t._node is not None:
            for p in t._node.parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for t in reversed(topo):
        g = grads.pop(id(t), None)
        if g is None:
            continue
        node = t._node
        if node is None:
            if t.requires_grad:
                if t.grad is None:
                    t.grad = g.copy()
                else:
                    t.grad += g
            continue
        parent_grads = node.backward_fn(g)
        for p, pg in zip(node.parents, parent_grads):
            if pg is None or not p.requires_grad:
                continue
            if pg.shape != p.data.shape:
                raise ShapeError(
                    f"backward of '{node.name}' produced grad shape {pg.shape} "
                    f"for parent shape {p.data.shape}"
                )
            key = id(p)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg


# -- elementwise binary ops ------------------------------------------------


def _binary_layout(a: Tensor, b: Tensor, opname: str) -> str:
    """Classify the permitted shape combination of a binary op.

    Returns 'equal', 'scalar_a', 'scalar_b', 'row_b' (b is a trailing
    (n,) vector broadcast over a's leading axes) or 'row_a'.
    """
    sa, sb = a.data.shape, b.data.shape
    if sa == sb:
        return "equal"
    if sb == () or b.data.size == 1 and sb == (1,):
        return "scalar_b"
    if sa == () or a.data.size == 1 and sa == (1,):
        return "scalar_a"
    if len(sb) == 1 and len(sa) >= 1 and sa[-1] == sb[0]:
        return "row_b"
    if len(sa) == 1 and len(sb) >= 1 and sb[-1] == sa[0]:
        return "row_a"
    raise ShapeError(f"{opname}: incompatible shapes {sa} and {sb}")


def _reduce_to(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum g down to `shape` (scalar or trailing row vector)."""
    if g.shape == shape:
        return g
    if shape == () or shape == (1,):
        return np.sum(g).reshape(shape)
    axes = tuple(range(g.ndim - 1))
    return np.sum(g, axis=axes)


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_layout(a, b, "add")
    out = a.data + b.data

    def bwd(g):
        return _reduce_to(g, a.data.shape), _reduce_to(g, b.data.shape)

    return apply_op("add", out, (a, b), bwd)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_layout(a, b, "sub")
    out = a.data - b.data

    def bwd(g):
        return _reduce_to(g, a.data.shape), _reduce_to(-g, b.data.shape)

    return apply_op("sub", out, (a, b), bwd)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_layout(a, b, "mul")
    out = a.data * b.data

    def bwd(g):
        return (
            _reduce_to(g * b.data, a.data.shape),
            _reduce_to(g * a.data, b.data.shape),
        )

    return apply_op("mul", out, (a, b), bwd)


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_layout(a, b, "div")
    with np.errstate(all="ignore"):  # non-finite results raise in apply_op
        out = a.data / b.data

    def bwd(g):
        return (
            _reduce_to(g / b.data, a.data.shape),
            _reduce_to(-g * a.data / (b.data * b.data), b.data.shape),
        )

    return apply_op("div", out, (a, b), bwd)


def neg(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    return apply_op("neg", -a.data, (a,), lambda g: (-g,))


# -- linear algebra / shape ops ---------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-d operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dims disagree, {a.shape} x {b.shape}")
    out = a.data @ b.data

    def bwd(g):
        return g @ b.data.T, a.data.T @ g

    return apply_op("matmul", out, (a, b), bwd)


def transpose(a: Tensor, axes=None) -> Tensor:
    a = _as_tensor(a)
    out = np.transpose(a.data, axes)

    def bwd(g):
        if axes is None:
            return (np.transpose(g),)
        return (np.transpose(g, np.argsort(axes)),)

    return apply_op("transpose", out, (a,), bwd)


def reshape(a: Tensor, shape) -> Tensor:
    a = _as_tensor(a)
    out = np.reshape(a.data, shape)
    orig = a.data.shape
    return apply_op("reshape", out, (a,), lambda g: (np.reshape(g, orig),))


def _getitem(a: Tensor, idx) -> Tensor:
    out = a.data[idx]
    orig = a.data.shape

    def bwd(g):
        full = np.zeros(orig)
        full[idx] = g
        return (full,)

    return apply_op("getitem", np.array(out, copy=True), (a,), bwd)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    ts = [_as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in ts], axis=axis)
    sizes = [t.data.shape[axis] for t in ts]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.split(g, splits, axis=axis))

    return apply_op("concat", out, tuple(ts), bwd)


def expand(a: Tensor, axis: int, repeats: int) -> Tensor:
    """Insert a new axis of length ``repeats`` (explicit broadcast)."""
    a = _as_tensor(a)
    out = np.repeat(np.expand_dims(a.data, axis), repeats, axis=axis)
    return apply_op("expand", out, (a,), lambda g: (np.sum(g, axis=axis),))


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    out = np.sum(a.data, axis=axis, keepdims=keepdims)
    orig = a.data.shape

    def bwd(g):
        if axis is None:
            return (np.full(orig, float(g)) if np.isscalar(g) or g.ndim == 0 else np.full(orig, g.reshape(())) ,)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, orig).copy(),)

    return apply_op("sum", out, (a,), bwd)


def tmean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    out = np.mean(a.data, axis=axis, keepdims=keepdims)
    orig = a.data.shape
    n = a.data.size if axis is None else orig[axis]

    def bwd(g):
        if axis is None:
            return (np.full(orig, g.reshape(()) / n),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, orig) / n,)

    return apply_op("mean", out, (a,), bwd)


# -- nonlinearities ----------------------------------------------------------


def relu(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    out = np.maximum(a.data, 0.0)
    mask = a.data > 0

    def bwd(g):
        return (g * mask,)

    return apply_op("relu", out, (a,), bwd)


def sigmoid(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    # stable two-branch form avoids overflow in exp
    x = a.data
    out = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def bwd(g):
        return (g * out * (1.0 - out),)

    return apply_op("sigmoid", out, (a,), bwd)


def tanh(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    out = np.tanh(a.data)

    def bwd(g):
        return (g * (1.0 - out * out),)

    return apply_op("tanh", out, (a,), bwd)


def exp(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    with np.errstate(all="ignore"):
        out = np.exp(a.data)

    def bwd(g):
        return (g * out,)

    return apply_op("exp", out, (a,), bwd)


def log(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    with np.errstate(all="ignore"):
        out = np.log(a.data)

    def bwd(g):
        return (g / a.data,)

    return apply_op("log", out, (a,), bwd)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Max-stabilized softmax along ``axis``; rows sum to one."""
    a = _as_tensor(a)
    shifted = a.data - np.max(a.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / np.sum(e, axis=axis, keepdims=True)

    def bwd(g):
        dot = np.sum(g * out, axis=axis, keepdims=True)
        return ((g - dot) * out,)

    return apply_op("softmax", out, (a,), bwd)


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    a = _as_tensor(a)
    shifted = a.data - np.max(a.data, axis=axis, keepdims=True)
    lse = np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))
    out = shifted - lse

    def bwd(g):
        return (g - np.exp(out) * np.sum(g, axis=axis, keepdims=True),)

    return apply_op("log_softmax", out, (a,), bwd)


# -- structured ops ----------------------------------------------------------


def conv1d(x: Tensor, kernel: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """1-d convolution (cross-correlation), x (T, Cin), kernel (w, Cin, Cout).

    Output length T' = floor((T + 2*padding - w)/stride) + 1.
    """
    x, kernel = _as_tensor(x), _as_tensor(kernel)
    if x.ndim != 2 or kernel.ndim != 3:
        raise ShapeError(f"conv1d: x {x.shape} must be (T,Cin), kernel {kernel.shape} (w,Cin,Cout)")
    T, cin = x.shape
    w, kcin, cout = kernel.shape
    if cin != kcin:
        raise ShapeError(f"conv1d: channel mismatch x {x.shape} vs kernel {kernel.shape}")
    tp = T + 2 * padding
    if w > tp:
        raise ShapeError(f"conv1d: kernel width {w} exceeds padded length {tp}")
    tout = (tp - w) // stride + 1

    xp = np.pad(x.data, ((padding, padding), (0, 0))) if padding else x.data
    # windows: (tout, w, cin) gathered by index matrix
    starts = np.arange(tout) * stride
    idx = starts[:, None] + np.arange(w)[None, :]
    cols = xp[idx]  # (tout, w, cin)
    kmat = kernel.data.reshape(w * cin, cout)
    out = cols.reshape(tout, w * cin) @ kmat

    def bwd(g):
        gcols = (g @ kmat.T).reshape(tout, w, cin)
        gk = cols.reshape(tout, w * cin).T @ g
        gxp = np.zeros_like(xp)
        np.add.at(gxp, idx, gcols)
        gx = gxp[padding : padding + T] if padding else gxp
        return gx, gk.reshape(w, cin, cout)

    return apply_op("conv1d", out, (x, kernel), bwd)


def conv2d(x: Tensor, kernel: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """2-d convolution, x (N, Cin, H, W), kernel (kh, kw, Cin, Cout)."""
    x, kernel = _as_tensor(x), _as_tensor(kernel)
    if x.ndim != 4 or kernel.ndim != 4:
        raise ShapeError(f"conv2d: x {x.shape} must be (N,Cin,H,W), kernel {kernel.shape} (kh,kw,Cin,Cout)")
    n, cin, h, wdt = x.shape
    kh, kw, kcin, cout = kernel.shape
    if cin != kcin:
        raise ShapeError(f"conv2d: channel mismatch x {x.shape} vs kernel {kernel.shape}")
    hp, wp = h + 2 * padding, wdt + 2 * padding
    if kh > hp or kw > wp:
        raise ShapeError(f"conv2d: kernel ({kh},{kw}) exceeds padded input ({hp},{wp})")
    hout = (hp - kh) // stride + 1
    wout = (wp - kw) // stride + 1

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.data
    ri = (np.arange(hout) * stride)[:, None] + np.arange(kh)[None, :]  # (hout, kh)
    ci = (np.arange(wout) * stride)[:, None] + np.arange(kw)[None, :]  # (wout, kw)
    # cols: (n, hout, wout, kh, kw, cin)
    cols = xp[:, :, ri[:, None, :, None], ci[None, :, None, :]].transpose(0, 2, 3, 4, 5, 1)
    kmat = kernel.data.reshape(kh * kw * cin, cout)
    # kernel layout is (kh, kw, cin); cols trailing dims are (kh, kw, cin)
    out = (cols.reshape(n * hout * wout, kh * kw * cin) @ kmat).reshape(n, hout, wout, cout)
    out = out.transpose(0, 3, 1, 2)

    def bwd(g):
        gmat = g.transpose(0, 2, 3, 1).reshape(n * hout * wout, cout)
        gk = cols.reshape(n * hout * wout, kh * kw * cin).T @ gmat
        gcols = (gmat @ kmat.T).reshape(n, hout, wout, kh, kw, cin).transpose(0, 5, 1, 2, 3, 4)
        gxp = np.zeros_like(xp)
        np.add.at(gxp, (slice(None), slice(None), ri[:, None, :, None], ci[None, :, None, :]), gcols)
        gx = gxp[:, :, padding : padding + h, padding : padding + wdt] if padding else gxp
        return gx, gk.reshape(kh, kw, cin, cout)

    return apply_op("conv2d", out, (x, kernel), bwd)


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """Per-channel batch normalization over axis 0 of a (T, C) input.

    Train mode normalizes by batch statistics (biased variance) and
    updates the running stats in place; eval mode normalizes by the
    running stats.
    """
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    if x.ndim != 2:
        raise ShapeError(f"batch_norm expects (T, C), got {x.shape}")
    T, C = x.shape
    if gamma.shape != (C,) or beta.shape != (C,):
        raise ShapeError(f"batch_norm: gamma/beta must be ({C},)")

    if training:
        mu = np.mean(x.data, axis=0)
        var = np.var(x.data, axis=0)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        running_var *= 1.0 - momentum
        running_var += momentum * var
        inv = 1.0 / np.sqrt(var + eps)
        xhat = (x.data - mu) * inv
        out = gamma.data * xhat + beta.data

        def bwd(g):
            ggamma = np.sum(g * xhat, axis=0)
            gbeta = np.sum(g, axis=0)
            gxhat = g * gamma.data
            gx = inv / T * (T * gxhat - np.sum(gxhat, axis=0) - xhat * np.sum(gxhat * xhat, axis=0))
            return gx, ggamma, gbeta

        return apply_op("batch_norm", out, (x, gamma, beta), bwd)

    inv = 1.0 / np.sqrt(running_var + eps)
    xhat = (x.data - running_mean) * inv
    out = gamma.data * xhat + beta.data

    def bwd_eval(g):
        return g * gamma.data * inv, np.sum(g * xhat, axis=0), np.sum(g, axis=0)

    return apply_op("batch_norm", out, (x, gamma, beta), bwd_eval)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the trailing axis to zero mean / unit variance, then affine."""
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    C = x.shape[-1]
    if gamma.shape != (C,) or beta.shape != (C,):
        raise ShapeError(f"layer_norm: gamma/beta must be ({C},)")
    mu = np.mean(x.data, axis=-1, keepdims=True)
    var = np.var(x.data, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = gamma.data * xhat + beta.data

    def bwd(g):
        ggamma = np.sum(g * xhat, axis=tuple(range(x.ndim - 1)))
        gbeta = np.sum(g, axis=tuple(range(x.ndim - 1)))
        gxhat = g * gamma.data
        gx = inv / C * (
            C * gxhat
            - np.sum(gxhat, axis=-1, keepdims=True)
            - xhat * np.sum(gxhat * xhat, axis=-1, keepdims=True)
        )
        return gx, ggamma, gbeta

    return apply_op("layer_norm", out, (x, gamma, beta), bwd)


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """Affine map over the trailing axis: x @ weight (+ bias)."""
    x = _as_tensor(x)
    if x.ndim == 2:
        out = matmul(x, weight)
    else:
        lead = x.shape[:-1]
        flat = reshape(x, (-1, x.shape[-1]))
        out = reshape(matmul(flat, weight), lead + (weight.shape[1],))
    if bias is not None:
        out = add(out, bias)
    return out


def embedding(table: Tensor, ids) -> Tensor:
    """Row lookup into ``table`` (V, d) by integer ids (L,)."""
    ids = np.asarray(ids, dtype=np.int64)
    out = table.data[ids]

    def bwd(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        return (gt,)

    return apply_op("embedding", np.array(out, copy=True), (table,), bwd)


def row_l1_normalize(x: Tensor) -> Tensor:
    """Divide each row by its sum; all-zero rows stay all-zero.

    Intended for nonnegative inputs (post-ReLU similarity rows).
    """
    x = _as_tensor(x)
    if x.ndim != 2:
        raise ShapeError(f"row_l1_normalize expects a matrix, got {x.shape}")
    s = np.sum(x.data, axis=1, keepdims=True)
    nz = s[:, 0] > 0
    safe = np.where(s > 0, s, 1.0)
    out = np.where(s > 0, x.data / safe, 0.0)

    def bwd(g):
        dot = np.sum(g * out, axis=1, keepdims=True)
        gx = np.where(s > 0, (g - dot) / safe, 0.0)
        return (gx,)

    return apply_op("row_l1_normalize", out, (x,), bwd)


def threshold_keep(x: Tensor, tau: float) -> Tensor:
    """Zero entries below ``tau``; keep entries >= tau unchanged."""
    x = _as_tensor(x)
    mask = x.data >= tau
    out = np.where(mask, x.data, 0.0)
    return apply_op("threshold_keep", out, (x,), lambda g: (g * mask,))


# -- gradient checking -------------------------------------------------------


def finite_diff_check(f: Callable[[Tensor], Tensor], x: Tensor, h: float = 1e-5) -> float:
    """Max relative error between analytic and central finite differences.

    For each coordinate i: |analytic_i - (f(x+h e_i) - f(x-h e_i)) / 2h|
    divided by (|analytic_i| + 1e-8).  ``f`` must map the tensor to a
    scalar Tensor through tape-recorded ops.
    """
    x.zero_grad()
    x.requires_grad = True
    out = f(x)
    backward(out)
    analytic = x.grad.copy() if x.grad is not None else np.zeros_like(x.data)
    x.zero_grad()

    flat = x.data.reshape(-1)
    num = np.zeros_like(flat)
    with no_grad():
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = f(x).item()
            flat[i] = orig - h
            fm = f(x).item()
            flat[i] = orig
            num[i] = (fp - fm) / (2.0 * h)
    num = num.reshape(x.data.shape)
    rel = np.abs(analytic - num) / (np.abs(analytic) + 1e-8)
    return float(np.max(rel)) if rel.size else 0.0


def uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    """Parameter init: uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))."""
    bound = 1.0 / math.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)
