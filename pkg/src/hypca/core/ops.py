"""Neural-net primitives on N,C,H,W tensors: convolutions, pooling, batch
norm, dropout, channel shuffle, dense maps.

Convolutions come in the five flavors used by the attention blocks:

  PC    pointwise 1x1, full channel mixing
  GPC   grouped pointwise 1x1
  DWC   depthwise k x k
  DDC   dilated depthwise k x k
  SDWC  strided depthwise k x k (stride 1 unless stated)

All spatial ops use "same" padding: output is ceil(extent / stride), with the
surplus pad placed bottom/right. Pooling pads with the neutral element of its
statistic (0 for AP/SP, -inf for MP, +inf for MN).
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from .tensor import Tensor, mul, permute_channels, register, relu, sigmoid, softmax

CONV_KINDS = ("PC", "GPC", "DWC", "DDC", "SDWC")
LOCAL_POOLS = ("AP", "MP", "MN", "SP")
GLOBAL_POOLS = ("GAP", "GMP", "GMN", "GSP")

_MAC_STACK: list = []


@contextmanager
def count_macs():
    """Accumulate multiply-accumulate counts of conv/dense calls in scope.

    Only learnable conv and dense layers contribute; pooling, activations and
    fixed transforms count as zero.
    """
    acc = MacCounter()
    _MAC_STACK.append(acc)
    try:
        yield acc
    finally:
        _MAC_STACK.pop()


class MacCounter:
    def __init__(self):
        self.total = 0

    def add(self, n: int):
        self.total += int(n)


def _tally_macs(n: int):
    if _MAC_STACK:
        _MAC_STACK[-1].add(n)


def _same_pad(extent: int, kernel: int, stride: int, dilation: int):
    eff = dilation * (kernel - 1) + 1
    out = -(-extent // stride)
    total = max((out - 1) * stride + eff - extent, 0)
    lo = total // 2
    return out, lo, total - lo


# ---------------------------------------------------------------------------
# convolutions
# ---------------------------------------------------------------------------

def _pointwise(x: Tensor, weight: Tensor, bias: Tensor, groups: int) -> Tensor:
    n, c, h, w = x.data.shape
    if weight.data.ndim != 3 or weight.data.shape[0] != groups:
        raise ValueError(f"pointwise weight must be (groups, c_out/g, c_in/g), got {weight.data.shape}")
    g, og, ig = weight.data.shape
    if c % g or ig != c // g:
        raise ValueError(f"groups {g} incompatible with {c} input channels")
    c_out = g * og
    if bias.data.shape != (c_out,):
        raise ValueError(f"bias shape {bias.data.shape} != ({c_out},)")
    xg = x.data.reshape(n, g, ig, h, w)
    out = np.einsum("goi,ngihw->ngohw", weight.data, xg).reshape(n, c_out, h, w)
    out = out + bias.data[None, :, None, None]
    _tally_macs(c_out * ig * h * w)
    wv = weight.data

    def bwd(grad):
        gg = grad.reshape(n, g, og, h, w)
        gx = np.einsum("goi,ngohw->ngihw", wv, gg).reshape(n, c, h, w)
        gw = np.einsum("ngohw,ngihw->goi", gg, xg)
        gb = grad.sum(axis=(0, 2, 3))
        return [gx, gw, gb]

    return register(out, [x, weight, bias], bwd)


def _depthwise(x: Tensor, weight: Tensor, bias: Tensor, dilation: int, stride: int) -> Tensor:
    n, c, h, w = x.data.shape
    if weight.data.ndim != 3 or weight.data.shape[0] != c:
        raise ValueError(f"depthwise weight must be (C, k, k), got {weight.data.shape} for C={c}")
    k = weight.data.shape[1]
    if bias.data.shape != (c,):
        raise ValueError(f"bias shape {bias.data.shape} != ({c},)")
    ho, pt, pb = _same_pad(h, k, stride, dilation)
    wo, pl, pr = _same_pad(w, k, stride, dilation)
    xp = np.pad(x.data, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    out = np.zeros((n, c, ho, wo))
    taps = [(u, v) for u in range(k) for v in range(k)]
    for u, v in taps:
        sl = xp[:, :, u * dilation:u * dilation + ho * stride:stride,
                v * dilation:v * dilation + wo * stride:stride]
        out += weight.data[:, u, v][None, :, None, None] * sl
    out += bias.data[None, :, None, None]
    _tally_macs(c * k * k * ho * wo)
    wv = weight.data

    def bwd(grad):
        gxp = np.zeros_like(xp)
        gw = np.zeros_like(wv)
        for u, v in taps:
            rows = slice(u * dilation, u * dilation + ho * stride, stride)
            cols = slice(v * dilation, v * dilation + wo * stride, stride)
            gw[:, u, v] = (grad * xp[:, :, rows, cols]).sum(axis=(0, 2, 3))
            gxp[:, :, rows, cols] += wv[:, u, v][None, :, None, None] * grad
        gx = gxp[:, :, pt:pt + h, pl:pl + w]
        gb = grad.sum(axis=(0, 2, 3))
        return [gx, gw, gb]

    return register(out, [x, weight, bias], bwd)


def conv2d(x: Tensor, kind: str, weight: Tensor, bias: Tensor, *,
           groups: int = 1, dilation: int = 2, stride: int = 1) -> Tensor:
    """Dispatch one of the five convolution flavors with same padding."""
    if kind not in CONV_KINDS:
        raise ValueError(f"unknown conv kind {kind!r}")
    if x.data.ndim != 4:
        raise ValueError(f"conv2d expects N,C,H,W input, got shape {x.data.shape}")
    if min(x.data.shape[2:]) < 1:
        raise ValueError("zero-size spatial dims")
    if kind == "PC":
        return _pointwise(x, weight, bias, groups=1)
    if kind == "GPC":
        return _pointwise(x, weight, bias, groups=groups)
    if kind == "DWC":
        return _depthwise(x, weight, bias, dilation=1, stride=1)
    if kind == "DDC":
        return _depthwise(x, weight, bias, dilation=dilation, stride=1)
    return _depthwise(x, weight, bias, dilation=1, stride=stride)


def dense(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map over the trailing axis: y = x @ W + b."""
    din, dout = weight.data.shape
    if x.data.shape[-1] != din:
        raise ValueError(f"dense: input dim {x.data.shape[-1]} != weight dim {din}")
    if bias.data.shape != (dout,):
        raise ValueError(f"dense: bias shape {bias.data.shape} != ({dout},)")
    out = np.einsum("...i,io->...o", x.data, weight.data) + bias.data
    _tally_macs(din * dout * (x.data.size // din))
    xv, wv = x.data, weight.data

    def bwd(grad):
        gx = np.einsum("...o,io->...i", grad, wv)
        gw = xv.reshape(-1, din).T @ grad.reshape(-1, dout)
        gb = grad.reshape(-1, dout).sum(axis=0)
        return [gx, gw, gb]

    return register(out, [x, weight, bias], bwd)


# ---------------------------------------------------------------------------
# pooling
# ---------------------------------------------------------------------------

_NEUTRAL = {"AP": 0.0, "SP": 0.0, "MP": -np.inf, "MN": np.inf}


def pool_local(x: Tensor, kind: str, k: int, stride: int = 1) -> Tensor:
    """Sliding-window statistic with same padding and neutral-element fill."""
    if kind not in LOCAL_POOLS:
        raise ValueError(f"unknown local pool {kind!r}")
    if k < 1:
        raise ValueError("pool window must be >= 1")
    n, c, h, w = x.data.shape
    ho, pt, pb = _same_pad(h, k, stride, 1)
    wo, pl, pr = _same_pad(w, k, stride, 1)
    if k > h + pt + pb or k > w + pl + pr:
        raise ValueError(f"pool window {k} exceeds padded extent")
    xp = np.pad(x.data, ((0, 0), (0, 0), (pt, pb), (pl, pr)),
                constant_values=_NEUTRAL[kind])
    taps = [(u, v) for u in range(k) for v in range(k)]
    windows = [xp[:, :, u:u + ho * stride:stride, v:v + wo * stride:stride]
               for u, v in taps]
    area = k * k

    if kind in ("AP", "SP"):
        # Sequential accumulation in row-major tap order (the order the
        # brute-force oracle uses, so results agree bit for bit).
        out = windows[0].copy()
        for sl in windows[1:]:
            out += sl
        scale = 1.0 / area if kind == "AP" else 1.0
        if kind == "AP":
            out = out * scale

        def bwd(grad):
            gxp = np.zeros_like(xp)
            for u, v in taps:
                gxp[:, :, u:u + ho * stride:stride, v:v + wo * stride:stride] += grad * scale
            return [gxp[:, :, pt:pt + h, pl:pl + w]]

    else:
        # Strictly-better updates keep the first tap on ties, i.e. gradient
        # routes to the first row-major argmax/argmin position.
        out = windows[0].copy()
        idx = np.zeros(out.shape, dtype=np.intp)
        for t, sl in enumerate(windows[1:], start=1):
            better = sl < out if kind == "MN" else sl > out
            np.copyto(out, sl, where=better)
            idx[better] = t

        def bwd(grad):
            gxp = np.zeros_like(xp)
            for t, (u, v) in enumerate(taps):
                gxp[:, :, u:u + ho * stride:stride, v:v + wo * stride:stride] += grad * (idx == t)
            return [gxp[:, :, pt:pt + h, pl:pl + w]]

    return register(out, [x], bwd)


def pool_global(x: Tensor, kind: str) -> Tensor:
    """Per-channel spatial reduction to N,C,1,1."""
    if kind not in GLOBAL_POOLS:
        raise ValueError(f"unknown global pool {kind!r}")
    n, c, h, w = x.data.shape
    if h * w < 1:
        raise ValueError("empty spatial extent")
    flat = x.data.reshape(n, c, h * w)

    if kind in ("GAP", "GSP"):
        out = flat.sum(axis=-1)
        scale = 1.0 / (h * w) if kind == "GAP" else 1.0
        if kind == "GAP":
            out = out * scale

        def bwd(grad):
            return [np.broadcast_to(grad * scale, (n, c, h, w)).copy()]

    else:
        idx = flat.argmin(axis=-1) if kind == "GMN" else flat.argmax(axis=-1)
        out = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]

        def bwd(grad):
            gf = np.zeros((n, c, h * w))
            np.put_along_axis(gf, idx[..., None], grad.reshape(n, c, 1), axis=-1)
            return [gf.reshape(n, c, h, w)]

    return register(out.reshape(n, c, 1, 1), [x], bwd)


# ---------------------------------------------------------------------------
# activation dispatch, dropout, channel shuffle
# ---------------------------------------------------------------------------

def activation(x: Tensor, kind: str, axis: int = 1) -> Tensor:
    if kind == "relu":
        return relu(x)
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "softmax":
        return softmax(x, axis)
    raise ValueError(f"unknown activation {kind!r}")


def dropout(x: Tensor, p: float, training: bool, rng: np.random.Generator) -> Tensor:
    """Bernoulli(p) zeroing with 1/(1-p) rescaling; identity in eval or at p=0."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    mask = (rng.random(x.data.shape) >= p) / (1.0 - p)
    return mul(x, mask)


def shuffle_permutation(c: int, g: int) -> np.ndarray:
    if c % g:
        raise ValueError(f"shuffle groups {g} must divide {c} channels")
    return np.arange(c).reshape(g, c // g).T.reshape(-1)


def channel_shuffle(x: Tensor, g: int) -> Tensor:
    """Interleave channel groups: (g, C/g) -> transpose -> flatten."""
    return permute_channels(x, shuffle_permutation(x.data.shape[1], g))


def channel_unshuffle(x: Tensor, g: int) -> Tensor:
    """Exact inverse of channel_shuffle with the same g."""
    perm = shuffle_permutation(x.data.shape[1], g)
    return permute_channels(x, np.argsort(perm))
