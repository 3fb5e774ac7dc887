"""Dense float64 tensors with tape-based reverse-mode automatic differentiation.

Every primitive here computes its forward value eagerly with numpy and, when a
Tape is active, appends a record holding the backward closure. Tape.backward
walks the records in exact reverse execution order and accumulates gradients
into the participating tensors; Parameter gradients persist across backward
calls until zero_grads().
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor", "Parameter", "Tape", "no_tape", "register", "detach", "backward",
    "add", "sub", "mul", "div", "neg",
    "exp", "log", "sqrt", "rsqrt", "relu", "sigmoid", "softmax",
    "sum_along", "mean_along", "max_along", "min_along",
    "reshape", "transpose", "narrow", "index_rows",
    "pad_hw", "crop_hw", "roll_hw", "permute_channels", "apply_matrix",
]

# Sigmoid saturates to exactly 0.0 / 1.0 in float64 for |x| > ~37; clip back
# into the open interval so attention maps keep the strict (0, 1) contract.
_SIG_LO = np.nextafter(0.0, 1.0)
_SIG_HI = np.nextafter(1.0, 0.0)


class Tensor:
    """A dense float64 array plus a gradient slot filled in by Tape.backward."""

    __slots__ = ("data", "grad")

    def __init__(self, data):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(()))

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"

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

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)


class Parameter(Tensor):
    """Named learnable tensor; grad accumulates until zero_grads()."""

    __slots__ = ("name", "init")

    def __init__(self, name: str, data, init: str):
        super().__init__(data)
        self.name = name
        self.init = init
        self.grad = np.zeros_like(self.data)

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape})"


class _Record:
    __slots__ = ("out", "inputs", "backward")

    def __init__(self, out, inputs, backward):
        self.out = out
        self.inputs = inputs
        self.backward = backward


_TAPE_STACK: list = []


def _active_tape():
    return _TAPE_STACK[-1] if _TAPE_STACK else None


class Tape:
    """Ordered record of executed primitives, replayed in reverse by backward.

    Use as a context manager around the forward pass. Calling backward twice
    on the same tape is an error (there is nothing fresh to differentiate).
    """

    def __init__(self):
        self._records: list[_Record] = []
        self._spent = False

    def __enter__(self):
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc):
        _TAPE_STACK.pop()
        return False

    def __len__(self):
        return len(self._records)

    def backward(self, loss: Tensor):
        if self._spent:
            raise RuntimeError("backward called twice on the same tape; rerun the forward pass")
        if not self._records:
            raise RuntimeError("backward on an empty tape")
        if loss.data.size != 1:
            raise ValueError(f"loss must be scalar, got shape {loss.data.shape}")
        self._spent = True
        # Transient tensors get fresh gradients per backward; Parameters accumulate.
        seen = set()
        for rec in self._records:
            for t in (rec.out,) + rec.inputs:
                if id(t) not in seen:
                    seen.add(id(t))
                    if not isinstance(t, Parameter):
                        t.grad = None
        loss.grad = np.ones_like(loss.data)
        for rec in reversed(self._records):
            gout = rec.out.grad
            if gout is None:
                continue
            for t, g in zip(rec.inputs, rec.backward(gout)):
                if g is None:
                    continue
                if t.grad is None:
                    t.grad = np.zeros_like(t.data)
                t.grad = t.grad + g


class no_tape:
    """Context manager suspending gradient recording (pure forward)."""

    def __enter__(self):
        _TAPE_STACK.append(None)
        return self

    def __exit__(self, *exc):
        _TAPE_STACK.pop()
        return False


def backward(tape: Tape, loss: Tensor):
    """Run reverse-mode accumulation of d(loss)/d(input) through the tape."""
    tape.backward(loss)


def register(out_data, inputs, backward_fn) -> Tensor:
    """Wrap a forward result and record its backward closure on the active tape.

    `inputs` lists the Tensor operands in the order `backward_fn` returns
    gradients for them; non-Tensor operands are constants and stay out of it.
    """
    out = Tensor(out_data)
    tape = _active_tape()
    if tape is not None and inputs:
        tape._records.append(_Record(out, tuple(inputs), backward_fn))
    return out


def _val(x):
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """Sum `grad` down to `shape`, inverting numpy broadcasting."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, dim in enumerate(shape):
        if dim == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


def detach(t: Tensor) -> Tensor:
    """A constant copy of `t`: same values, gradient flow cut."""
    return Tensor(t.data.copy())


# ---------------------------------------------------------------------------
# arithmetic
# ---------------------------------------------------------------------------

def _binary(a, b, out_data, da, db):
    inputs, grads = [], []
    if isinstance(a, Tensor):
        inputs.append(a)
        grads.append(da)
    if isinstance(b, Tensor):
        inputs.append(b)
        grads.append(db)

    def bwd(g):
        return [fn(g) for fn in grads]

    return register(out_data, inputs, bwd)


def add(a, b):
    av, bv = _val(a), _val(b)
    return _binary(a, b, av + bv,
                   lambda g: _unbroadcast(g, av.shape),
                   lambda g: _unbroadcast(g, bv.shape))


def sub(a, b):
    av, bv = _val(a), _val(b)
    return _binary(a, b, av - bv,
                   lambda g: _unbroadcast(g, av.shape),
                   lambda g: _unbroadcast(-g, bv.shape))


def mul(a, b):
    av, bv = _val(a), _val(b)
    return _binary(a, b, av * bv,
                   lambda g: _unbroadcast(g * bv, av.shape),
                   lambda g: _unbroadcast(g * av, bv.shape))


def div(a, b):
    av, bv = _val(a), _val(b)
    return _binary(a, b, av / bv,
                   lambda g: _unbroadcast(g / bv, av.shape),
                   lambda g: _unbroadcast(-g * av / (bv * bv), bv.shape))


def neg(a):
    return register(-a.data, [a], lambda g: [-g])


# ---------------------------------------------------------------------------
# elementwise nonlinearities
# ---------------------------------------------------------------------------

def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return register(out, [a], lambda g: [g * out])


def log(a: Tensor) -> Tensor:
    v = a.data
    return register(np.log(v), [a], lambda g: [g / v])


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)
    return register(out, [a], lambda g: [g * (0.5 / out)])


def rsqrt(a: Tensor) -> Tensor:
    out = 1.0 / np.sqrt(a.data)
    return register(out, [a], lambda g: [g * (-0.5 * out / a.data)])


def relu(a: Tensor) -> Tensor:
    v = a.data
    mask = v > 0.0
    return register(np.where(mask, v, 0.0), [a], lambda g: [g * mask])


def sigmoid(a: Tensor) -> Tensor:
    v = a.data
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    np.clip(out, _SIG_LO, _SIG_HI, out=out)
    return register(out, [a], lambda g: [g * out * (1.0 - out)])


def softmax(a: Tensor, axis: int) -> Tensor:
    if not -a.ndim <= axis < a.ndim:
        raise ValueError(f"softmax axis {axis} invalid for shape {a.shape}")
    # Shift by the (detached) max: softmax is shift-invariant, so treating the
    # max as a constant leaves the gradient exact while keeping exp stable.
    shift = sub(a, a.data.max(axis=axis, keepdims=True))
    e = exp(shift)
    return div(e, sum_along(e, axes=(axis,), keepdims=True))


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------

def _norm_axes(axes, ndim):
    if axes is None:
        return tuple(range(ndim))
    if isinstance(axes, int):
        axes = (axes,)
    return tuple(sorted(a % ndim for a in axes))


def _expand_reduced(g, shape, axes, keepdims):
    if not keepdims:
        for ax in axes:
            g = np.expand_dims(g, ax)
    return np.broadcast_to(g, shape)


def sum_along(a: Tensor, axes=None, keepdims: bool = False) -> Tensor:
    axes = _norm_axes(axes, a.ndim)
    shape = a.data.shape
    out = a.data.sum(axis=axes, keepdims=keepdims)
    return register(out, [a], lambda g: [_expand_reduced(g, shape, axes, keepdims).copy()])


def mean_along(a: Tensor, axes=None, keepdims: bool = False) -> Tensor:
    axes = _norm_axes(axes, a.ndim)
    shape = a.data.shape
    count = int(np.prod([shape[ax] for ax in axes])) if axes else 1
    out = a.data.sum(axis=axes, keepdims=keepdims) / count
    return register(out, [a],
                    lambda g: [_expand_reduced(g / count, shape, axes, keepdims).copy()])


def _extreme_along(a, axes, keepdims, minimum):
    """Shared max/min reduction; ties route the whole gradient to the first
    position in row-major scan order over the reduced region."""
    axes = _norm_axes(axes, a.ndim)
    shape = a.data.shape
    other = tuple(ax for ax in range(a.ndim) if ax not in axes)
    perm = other + axes
    red = int(np.prod([shape[ax] for ax in axes])) if axes else 1
    flat = a.data.transpose(perm).reshape(tuple(shape[ax] for ax in other) + (red,))
    idx = flat.argmin(axis=-1) if minimum else flat.argmax(axis=-1)
    picked = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
    if keepdims:
        out = picked.reshape(tuple(1 if ax in axes else shape[ax] for ax in range(a.ndim)))
    else:
        out = picked

    def bwd(g):
        gflat = np.zeros_like(flat)
        np.put_along_axis(gflat, idx[..., None], g.reshape(idx.shape + (1,)), axis=-1)
        gx = gflat.reshape(tuple(shape[ax] for ax in perm))
        return [gx.transpose(np.argsort(perm))]

    return register(out, [a], bwd)


def max_along(a: Tensor, axes=None, keepdims: bool = False) -> Tensor:
    return _extreme_along(a, axes, keepdims, minimum=False)


def min_along(a: Tensor, axes=None, keepdims: bool = False) -> Tensor:
    return _extreme_along(a, axes, keepdims, minimum=True)


# ---------------------------------------------------------------------------
# shape and indexing ops (exact linear permutations/selections)
# ---------------------------------------------------------------------------

def reshape(a: Tensor, shape) -> Tensor:
    old = a.data.shape
    return register(a.data.reshape(shape), [a], lambda g: [g.reshape(old)])


def transpose(a: Tensor, axes) -> Tensor:
    inv = np.argsort(axes)
    return register(a.data.transpose(axes), [a], lambda g: [g.transpose(inv)])


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Slice `length` entries starting at `start` along `axis`."""
    sl = [slice(None)] * a.ndim
    sl[axis] = slice(start, start + length)
    sl = tuple(sl)
    shape = a.data.shape

    def bwd(g):
        gx = np.zeros(shape)
        gx[sl] = g
        return [gx]

    return register(a.data[sl].copy(), [a], bwd)


def index_rows(a: Tensor, idx: np.ndarray) -> Tensor:
    """out[n] = a[n, idx[n]] for a 2-D tensor (per-row gather)."""
    idx = np.asarray(idx)
    n = a.data.shape[0]
    rows = np.arange(n)
    shape = a.data.shape

    def bwd(g):
        gx = np.zeros(shape)
        gx[rows, idx] = g
        return [gx]

    return register(a.data[rows, idx].copy(), [a], bwd)


def pad_hw(a: Tensor, top: int, bottom: int, left: int, right: int) -> Tensor:
    """Zero-pad the trailing spatial axes (2, 3) of an N,C,H,W tensor."""
    widths = [(0, 0)] * (a.ndim - 2) + [(top, bottom), (left, right)]
    h, w = a.data.shape[-2], a.data.shape[-1]

    def bwd(g):
        sl = (Ellipsis, slice(top, top + h), slice(left, left + w))
        return [g[sl].copy()]

    return register(np.pad(a.data, widths), [a], bwd)


def crop_hw(a: Tensor, top: int, height: int, left: int, width: int) -> Tensor:
    """Crop a height×width region from the trailing spatial axes."""
    sl = (Ellipsis, slice(top, top + height), slice(left, left + width))
    shape = a.data.shape

    def bwd(g):
        gx = np.zeros(shape)
        gx[sl] = g
        return [gx]

    return register(a.data[sl].copy(), [a], bwd)


def roll_hw(a: Tensor, dy: int, dx: int) -> Tensor:
    """Toroidal roll of the spatial axes (2, 3)."""
    out = np.roll(a.data, (dy, dx), axis=(-2, -1))
    return register(out, [a], lambda g: [np.roll(g, (-dy, -dx), axis=(-2, -1))])


def permute_channels(a: Tensor, perm: np.ndarray) -> Tensor:
    """Reorder axis-1 entries: out[:, p] = a[:, perm[p]]."""
    perm = np.asarray(perm)
    inv = np.argsort(perm)
    return register(a.data[:, perm].copy(), [a], lambda g: [g[:, inv].copy()])


def apply_matrix(a: Tensor, mat: np.ndarray, axis: int) -> Tensor:
    """Contract a constant matrix against one axis: out = mat @ a along `axis`."""
    axis = axis % a.ndim

    def fwd(arr, m):
        return np.moveaxis(np.tensordot(m, arr, axes=([1], [axis])), 0, axis)

    return register(fwd(a.data, mat), [a], lambda g: [fwd(g, mat.T)])
