"""Dual-view cascaded attention path.

Per modality, HySfa runs a token-space/frequency gate (Tfsi) and a dual-solver
feature refinement (Fdca) over two window scales, then folds the reconstructed
windows back into the feature map. Across modalities, Mmmua exchanges wavelet
channel statistics (Fcif) against multi-scale spatial statistics (Smif)
through bidirectional interactions (Mcbi) and recalibrates every modality.
"""

from __future__ import annotations

import numpy as np

from .core.layers import BatchNorm, Dense, Dropout, Initializer, Module
from .core.ops import pool_global, pool_local
from .core.tensor import (Tensor, add, max_along, mean_along, min_along, mul,
                          narrow, pad_hw, relu, reshape, sigmoid, softmax, sub,
                          sum_along)
from .rala import Mshc, Scpfa
from .transforms import WaveletBands, dct_tokens, haar_dwt, window_merge, window_partition

DEFAULT_WINDOW_SIZES = (4, 8)
DROPOUT_RATE = 0.1


def _pool4_tokens(t: Tensor) -> Tensor:
    """mean+max+min+sum over all window/token positions of (N,nw,P,C) tokens."""
    axes = (1, 2)
    s = add(mean_along(t, axes), max_along(t, axes))
    return add(s, add(min_along(t, axes), sum_along(t, axes)))


def _pool4_spatial(x: Tensor) -> Tensor:
    """mean+max+min+sum global pools of an N,C,H,W map, flattened to (N, C)."""
    acc = pool_global(x, "GAP")
    for kind in ("GMP", "GMN", "GSP"):
        acc = add(acc, pool_global(x, kind))
    return reshape(acc, (x.shape[0], x.shape[1]))


class TokenMlp(Module):
    """One-hidden-layer C -> C -> C map with ReLU, applied token-wise."""

    def __init__(self, init: Initializer, name: str, channels: int):
        self.fc1 = Dense(init, f"{name}/fc1", channels, channels)
        self.fc2 = Dense(init, f"{name}/fc2", channels, channels)

    def forward(self, t: Tensor) -> Tensor:
        return self.fc2(relu(self.fc1(t)))


class Tfsi(Module):
    """Token-space gate fusing spatial and frequency evidence.

    One MLP is shared between both token streams. The gate follows
    u = (a_sp * a_f) + (1 - a_sp) * s_t; with `freq_token_values` the
    frequency weights additionally multiply the frequency tokens themselves
    (the alternative reading, off by default).
    """

    def __init__(self, init: Initializer, name: str, channels: int,
                 freq_token_values: bool = False):
        self.mlp = TokenMlp(init, f"{name}/mlp", channels)
        self.freq_token_values = freq_token_values

    def forward(self, s_t: Tensor, f_t: Tensor) -> Tensor:
        a_sp = sigmoid(self.mlp(s_t))
        a_f = sigmoid(self.mlp(f_t))
        fused = mul(a_sp, a_f)
        if self.freq_token_values:
            fused = mul(fused, f_t)
        return add(fused, mul(sub(1.0, a_sp), s_t))


class Fdca(Module):
    """Dual-solver channel attention over token features.

    The tokens are the initial state of a learned flow; a sigmoid head yields
    the per-sample step size tau and a softmax head the two-way fusion gate.
    An explicit Euler proposal and a midpoint (RK2) proposal are formed, and
    the gate scales their combined update on top of the preserved state, so a
    zero flow returns the state unchanged for every tau and gate value. A
    pooled-statistics channel attention then reweights the result.
    """

    def __init__(self, init: Initializer, name: str, channels: int, scale_index: int):
        self.flow = Dense(init, f"{name}/flow", channels, channels)
        self.tau_head = Dense(init, f"{name}/tau_head", channels, 1)
        self.gate_head = Dense(init, f"{name}/gate_head", channels, 2)
        self.hca = TokenMlp(init, f"{name}/hca", channels)
        self.scale_index = scale_index

    def refine(self, tokens: Tensor):
        """Solver fusion only: (fused state, fusion simplex, step size)."""
        n = tokens.shape[0]
        pooled = mean_along(tokens, (1, 2))                       # (N, C)
        tau = reshape(sigmoid(self.tau_head(pooled)), (n, 1, 1, 1))
        alpha = softmax(self.gate_head(pooled), axis=1)           # (N, 2)
        k1 = self.flow(tokens)
        k2 = self.flow(add(tokens, mul(mul(tau, 0.5), k1)))
        euler_step = mul(tau, k1)                                 # U_e - H0
        rk2_step = mul(tau, k2)                                   # U_r - H0
        gate = reshape(narrow(alpha, 1, self.scale_index, 1), (n, 1, 1, 1))
        fused = add(tokens, mul(gate, add(euler_step, rk2_step)))
        return fused, alpha, tau

    def forward(self, tokens: Tensor):
        n, _, _, c = tokens.shape
        fused, alpha, tau = self.refine(tokens)
        a_hs = sigmoid(self.hca(_pool4_tokens(fused)))            # (N, C)
        out = mul(fused, reshape(a_hs, (n, 1, 1, c)))
        return out, alpha, tau


class HySfa(Module):
    """Hybrid-space fusion attention over two window scales.

    Per scale ws: shift by floor(w/4), partition, gate tokens (Tfsi), refine
    them (Fdca), merge back to x_tilde, and weight it by the channel softmax
    of pooled frequency-token statistics times the scale's fusion-gate
    component. The summed contributions pass a k=2 local sum pool and add
    residually onto the input.
    """

    def __init__(self, init: Initializer, name: str, channels: int,
                 window_sizes=DEFAULT_WINDOW_SIZES, use_tfsi: bool = True,
                 use_fdca: bool = True, freq_token_values: bool = False):
        self.window_sizes = tuple(window_sizes)
        self.tfsi = [Tfsi(init, f"{name}/scale{s}/tfsi", channels, freq_token_values)
                     if use_tfsi else None
                     for s in range(len(self.window_sizes))]
        self.fdca = [Fdca(init, f"{name}/scale{s}/fdca", channels, scale_index=s)
                     if use_fdca else None
                     for s in range(len(self.window_sizes))]

    def forward(self, x: Tensor) -> Tensor:
        n, c, _, _ = x.shape
        acc = None
        for s, w in enumerate(self.window_sizes):
            shift = w // 4
            wt = window_partition(x, w, shift=(shift, shift))
            f_t = dct_tokens(wt)
            u = self.tfsi[s](wt.tokens, f_t) if self.tfsi[s] is not None else wt.tokens
            if self.fdca[s] is not None:
                u, alpha, _ = self.fdca[s](u)
                gate = reshape(narrow(alpha, 1, s, 1), (n, 1, 1, 1))
            else:
                gate = None
            x_tilde = window_merge(wt.with_tokens(u))
            w_ins = reshape(softmax(_pool4_tokens(f_t), axis=1), (n, c, 1, 1))
            contrib = mul(x_tilde, w_ins)
            if gate is not None:
                contrib = mul(contrib, gate)
            acc = contrib if acc is None else add(acc, contrib)
        return add(x, pool_local(acc, "SP", k=2, stride=1))


def hcf(bands: WaveletBands):
    """Hierarchical channel fusion of the four sub-bands.

    Per pool kind, statistics are summed across sub-bands; the parallel route
    adds all four pooled contexts, the subtractive route is max minus
    (mean + min). Returns (c_sum, c_diff), each (N, C).
    """
    pooled = {}
    for kind in ("GAP", "GMP", "GMN", "GSP"):
        acc = None
        for band in (bands.ll, bands.lh, bands.hl, bands.hh):
            p = pool_global(band, kind)
            acc = p if acc is None else add(acc, p)
        n, c = acc.shape[0], acc.shape[1]
        pooled[kind] = reshape(acc, (n, c))
    c_sum = add(add(pooled["GAP"], pooled["GMP"]), add(pooled["GMN"], pooled["GSP"]))
    c_diff = sub(pooled["GMP"], add(pooled["GAP"], pooled["GMN"]))
    return c_sum, c_diff


class Fcif(Module):
    """Frequency-domain channel fusion: Haar sub-bands -> hcf -> per-branch
    BN + dropout -> channel-weighted sum."""

    def __init__(self, init: Initializer, name: str, channels: int, rng: np.random.Generator):
        self.bn_sum = BatchNorm(init, f"{name}/bn_sum", channels)
        self.bn_diff = BatchNorm(init, f"{name}/bn_diff", channels)
        self.dr_sum = Dropout(DROPOUT_RATE, rng)
        self.dr_diff = Dropout(DROPOUT_RATE, rng)
        self.w_sum = init.ones(f"{name}/w_sum", (channels,))
        self.w_diff = init.ones(f"{name}/w_diff", (channels,))

    def forward(self, x: Tensor) -> Tensor:
        _, _, h, w = x.shape
        if h % 2 or w % 2:
            x = pad_hw(x, 0, h % 2, 0, w % 2)
        c_sum, c_diff = hcf(haar_dwt(x))
        a = mul(self.w_sum, self.dr_sum(self.bn_sum(c_sum)))
        b = mul(self.w_diff, self.dr_diff(self.bn_diff(c_diff)))
        return add(a, b)


class Smif(Module):
    """Spatial-domain statistics of Scpfa(Mshc(x)), summed over the four
    global pools. Carries its own full Mshc+Scpfa stack."""

    def __init__(self, init: Initializer, name: str, channels: int, wiring: str):
        self.mshc = Mshc(init, f"{name}/mshc", channels)
        self.scpfa = Scpfa(init, f"{name}/scpfa", channels, wiring)

    def forward(self, x: Tensor) -> Tensor:
        return _pool4_spatial(self.scpfa(self.mshc(x)))


class Mcbi(Module):
    """Bidirectional cross-interaction of frequency (c_f) and spatial (c_sp)
    channel vectors; returns the two sigmoid attention vectors."""

    def __init__(self, init: Initializer, name: str, channels: int, rng: np.random.Generator):
        self.w1 = init.ones(f"{name}/w1", (channels,))
        self.w2 = init.ones(f"{name}/w2", (channels,))
        self.w3 = init.ones(f"{name}/w3", (channels,))
        self.bn = BatchNorm(init, f"{name}/bn", channels)
        self.dr = Dropout(DROPOUT_RATE, rng)
        self.channels = channels

    def forward(self, c_f: Tensor, c_sp: Tensor):
        if c_f.shape != c_sp.shape or c_f.shape[-1] != self.channels:
            raise ValueError(f"channel vectors must be (N, {self.channels}), "
                             f"got {c_f.shape} and {c_sp.shape}")
        c_sp_hat = add(mul(self.w1, c_sp), mul(self.w2, c_f))
        c_f_hat = add(mul(self.dr(self.bn(c_sp_hat)), self.w3), mul(c_f, self.w2))
        return sigmoid(c_f_hat), sigmoid(c_sp_hat)


class Mmmua(Module):
    """Cross-modal mutual update: ring pairs (i, i+1 mod m) exchange fcif(x_i)
    against smif(x_j) through Mcbi; each modality is recalibrated exactly once
    (for m=2 this is a single bidirectional exchange), then scaled by its
    learned channel weights."""

    def __init__(self, init: Initializer, name: str, channels: int, modalities: int,
                 wiring: str, rng: np.random.Generator,
                 use_fcif: bool = True, use_smif: bool = True, use_mcbi: bool = True):
        if modalities < 2:
            raise ValueError("mutual update needs at least 2 modalities")
        self.channels = channels
        self.fcif = Fcif(init, f"{name}/fcif", channels, rng) if use_fcif else None
        self.smif = Smif(init, f"{name}/smif", channels, wiring) if use_smif else None
        self.mcbi = Mcbi(init, f"{name}/mcbi", channels, rng) if use_mcbi else None
        self.w_mod = [init.ones(f"{name}/w_mod{i}", (channels,)) for i in range(modalities)]

    def forward(self, xs: list[Tensor]) -> list[Tensor]:
        m = len(xs)
        if m != len(self.w_mod):
            raise ValueError(f"expected {len(self.w_mod)} modalities, got {m}")
        shapes = {x.shape for x in xs}
        if len(shapes) != 1:
            raise ValueError(f"modalities must share one shape, got {sorted(shapes)}")
        n = xs[0].shape[0]
        maps: list = [None] * m
        for i in range(m):
            j = (i + 1) % m
            if maps[i] is not None and maps[j] is not None:
                continue
            c_f = self.fcif(xs[i]) if self.fcif is not None else Tensor(np.zeros((n, self.channels)))
            c_sp = self.smif(xs[j]) if self.smif is not None else Tensor(np.zeros((n, self.channels)))
            if self.mcbi is not None:
                a_i, a_j = self.mcbi(c_f, c_sp)
            else:
                a_i, a_j = sigmoid(c_f), sigmoid(c_sp)
            if maps[i] is None:
                maps[i] = a_i
            if maps[j] is None:
                maps[j] = a_j
        out = []
        for k, x in enumerate(xs):
            scale = reshape(mul(maps[k], self.w_mod[k]), (n, self.channels, 1, 1))
            out.append(mul(x, scale))
        return out


class Dvca(Module):
    """Per-modality HySfa followed by the cross-modal mutual update."""

    def __init__(self, init: Initializer, name: str, channels: int, modalities: int, *,
                 wiring: str = "hybrid", window_sizes=DEFAULT_WINDOW_SIZES,
                 rng: np.random.Generator | None = None,
                 use_hysfa: bool = True, use_mmmua: bool = True,
                 use_tfsi: bool = True, use_fdca: bool = True,
                 use_fcif: bool = True, use_smif: bool = True, use_mcbi: bool = True,
                 freq_token_values: bool = False):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.hysfa = [HySfa(init, f"{name}/hysfa{i}", channels, window_sizes,
                            use_tfsi, use_fdca, freq_token_values)
                      for i in range(modalities)] if use_hysfa else None
        self.mmmua = Mmmua(init, f"{name}/mmmua", channels, modalities, wiring, rng,
                           use_fcif, use_smif, use_mcbi) if use_mmmua else None

    def forward(self, xs: list[Tensor]) -> list[Tensor]:
        if self.hysfa is not None:
            xs = [blk(x) for blk, x in zip(self.hysfa, xs)]
        if self.mmmua is not None:
            xs = self.mmmua(xs)
        return xs
