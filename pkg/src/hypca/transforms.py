"""Exactly invertible spatial/frequency transforms: orthonormal 2-D DCT,
cyclic shifts, window partition/merge, and the Haar wavelet sub-band split.

All of these are linear, participate in autodiff, and invert exactly:
partition/merge and shift/unshift are pure element permutations (bitwise
roundtrips); DCT and Haar use orthonormal kernels, so their inverses are
their transposes and energy is conserved.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .core.tensor import (Tensor, apply_matrix, crop_hw, pad_hw, register,
                          reshape, roll_hw, transpose)

__all__ = [
    "WindowTokens", "WaveletBands", "dct2", "idct2", "cyclic_shift",
    "window_partition", "window_merge", "haar_dwt", "haar_idwt",
]


# ---------------------------------------------------------------------------
# orthonormal type-II DCT
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def dct_matrix(w: int) -> np.ndarray:
    """Orthonormal DCT-II basis: M[k, n] = s_k * cos(pi * (2n+1) * k / (2w))."""
    k = np.arange(w)[:, None]
    n = np.arange(w)[None, :]
    m = np.cos(np.pi * (2 * n + 1) * k / (2 * w))
    m[0] *= np.sqrt(1.0 / w)
    m[1:] *= np.sqrt(2.0 / w)
    return m


def dct2(x: Tensor, axes=(-3, -2)) -> Tensor:
    """Separable orthonormal 2-D DCT over two axes (default: the h, w axes of
    an ...,h,w,C layout)."""
    h, w = x.shape[axes[0]], x.shape[axes[1]]
    return apply_matrix(apply_matrix(x, dct_matrix(h), axes[0]), dct_matrix(w), axes[1])


def idct2(x: Tensor, axes=(-3, -2)) -> Tensor:
    h, w = x.shape[axes[0]], x.shape[axes[1]]
    return apply_matrix(apply_matrix(x, dct_matrix(h).T, axes[0]), dct_matrix(w).T, axes[1])


# ---------------------------------------------------------------------------
# cyclic shift
# ---------------------------------------------------------------------------

def cyclic_shift(x: Tensor, dy: int, dx: int) -> Tensor:
    """Toroidal roll of the spatial axes of an N,C,H,W tensor."""
    return roll_hw(x, dy, dx)


def cyclic_unshift(x: Tensor, dy: int, dx: int) -> Tensor:
    return roll_hw(x, -dy, -dx)


# ---------------------------------------------------------------------------
# window partition / merge
# ---------------------------------------------------------------------------

@dataclass
class WindowTokens:
    """Per-window token matrices plus the bookkeeping to invert exactly.

    tokens: Tensor of shape (N, windows, w*w, C); window index scans the grid
    row-major and token index scans each window row-major. `shift` is the
    cyclic offset applied before partitioning and `padded` the spatial shape
    after bottom/right zero padding.
    """
    tokens: Tensor
    window: int
    grid: tuple[int, int]
    shift: tuple[int, int]
    source_shape: tuple[int, int, int, int]
    padded: tuple[int, int]

    def with_tokens(self, tokens: Tensor) -> "WindowTokens":
        if tokens.shape != self.tokens.shape:
            raise ValueError(f"token shape {tokens.shape} != {self.tokens.shape}")
        return replace(self, tokens=tokens)


def window_partition(x: Tensor, w: int, shift: tuple[int, int] = (0, 0)) -> WindowTokens:
    """Cyclically shift, zero-pad bottom/right to a multiple of w, and cut
    into non-overlapping w x w windows of C-vector tokens."""
    if w < 1:
        raise ValueError("window size must be >= 1")
    n, c, h, wd = x.shape
    dy, dx = shift
    if (dy, dx) != (0, 0):
        x = cyclic_shift(x, dy, dx)
    ph = (-h) % w
    pw = (-wd) % w
    if ph or pw:
        x = pad_hw(x, 0, ph, 0, pw)
    hp, wp = h + ph, wd + pw
    rows, cols = hp // w, wp // w
    t = reshape(x, (n, c, rows, w, cols, w))
    t = transpose(t, (0, 2, 4, 3, 5, 1))            # n, rows, cols, wy, wx, c
    tokens = reshape(t, (n, rows * cols, w * w, c))
    return WindowTokens(tokens=tokens, window=w, grid=(rows, cols), shift=(dy, dx),
                        source_shape=(n, c, h, wd), padded=(hp, wp))


def window_merge(wt: WindowTokens) -> Tensor:
    """Reassemble windows, crop the padding, and reverse the cyclic shift."""
    n, c, h, wd = wt.source_shape
    rows, cols = wt.grid
    w = wt.window
    t = reshape(wt.tokens, (n, rows, cols, w, w, c))
    t = transpose(t, (0, 5, 1, 3, 2, 4))            # n, c, rows, wy, cols, wx
    x = reshape(t, (n, c, rows * w, cols * w))
    hp, wp = wt.padded
    if (hp, wp) != (h, wd):
        x = crop_hw(x, 0, h, 0, wd)
    dy, dx = wt.shift
    if (dy, dx) != (0, 0):
        x = cyclic_unshift(x, dy, dx)
    return x


def dct_tokens(wt: WindowTokens) -> Tensor:
    """Frequency tokens: orthonormal 2-D DCT of each window, token layout
    matching wt.tokens."""
    n, nw, _, c = wt.tokens.shape
    w = wt.window
    grid = reshape(wt.tokens, (n, nw, w, w, c))
    return reshape(dct2(grid, axes=(2, 3)), (n, nw, w * w, c))


# ---------------------------------------------------------------------------
# Haar wavelet sub-bands
# ---------------------------------------------------------------------------

@dataclass
class WaveletBands:
    """Half-resolution sub-bands: coarse average (ll), horizontal-edge (hl),
    vertical-edge (lh), diagonal-texture (hh)."""
    ll: Tensor
    hl: Tensor
    lh: Tensor
    hh: Tensor


def _haar_split(v: np.ndarray):
    a = v[:, :, 0::2, 0::2]
    b = v[:, :, 0::2, 1::2]
    c = v[:, :, 1::2, 0::2]
    d = v[:, :, 1::2, 1::2]
    return a, b, c, d


def _haar_fwd(v: np.ndarray) -> np.ndarray:
    """Stack (ll, hl, lh, hh) on a leading axis. Kernels are the fixed
    orthonormal stride-2 Haar filters 0.5*[[1,1],[1,1]], 0.5*[[1,-1],[1,-1]],
    0.5*[[1,1],[-1,-1]], 0.5*[[1,-1],[-1,1]]."""
    a, b, c, d = _haar_split(v)
    return np.stack([(a + b + c + d) * 0.5,
                     (a - b + c - d) * 0.5,
                     (a + b - c - d) * 0.5,
                     (a - b - c + d) * 0.5])


def _haar_inv(bands: np.ndarray) -> np.ndarray:
    ll, hl, lh, hh = bands
    n, c, hh2, ww2 = ll.shape
    out = np.empty((n, c, hh2 * 2, ww2 * 2))
    out[:, :, 0::2, 0::2] = (ll + hl + lh + hh) * 0.5
    out[:, :, 0::2, 1::2] = (ll - hl + lh - hh) * 0.5
    out[:, :, 1::2, 0::2] = (ll + hl - lh - hh) * 0.5
    out[:, :, 1::2, 1::2] = (ll - hl - lh + hh) * 0.5
    return out


def haar_dwt(x: Tensor) -> WaveletBands:
    """Fixed-kernel orthonormal Haar decomposition (not learnable); each 2x2
    block maps through an orthogonal matrix, so the adjoint is the inverse."""
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"Haar transform needs even spatial dims, got {h}x{w}")
    stacked = _haar_fwd(x.data)
    out = register(stacked, [x], lambda g: [_haar_inv(g)])
    return WaveletBands(ll=_band(out, 0), hl=_band(out, 1), lh=_band(out, 2), hh=_band(out, 3))


def _band(stacked: Tensor, i: int) -> Tensor:
    shape = stacked.data.shape

    def bwd(g):
        gx = np.zeros(shape)
        gx[i] = g
        return [gx]

    return register(stacked.data[i].copy(), [stacked], bwd)


def haar_idwt(bands: WaveletBands) -> Tensor:
    """Exact inverse of haar_dwt."""
    shapes = [t.shape for t in (bands.ll, bands.hl, bands.lh, bands.hh)]
    if len(set(shapes)) != 1:
        raise ValueError(f"sub-band shapes differ: {shapes}")
    stacked = np.stack([bands.ll.data, bands.hl.data, bands.lh.data, bands.hh.data])
    out = _haar_inv(stacked)

    def bwd(g):
        gb = _haar_fwd(g)
        return [gb[0], gb[1], gb[2], gb[3]]

    return register(out, [bands.ll, bands.hl, bands.lh, bands.hh], bwd)
