"""Residual adaptive-learning attention path.

Building blocks, bottom up:

  Mshc   three heterogeneous conv branches (1x1 grouped pointwise, 3x3
         depthwise, 3x3 dilated depthwise with an effective 5x5 field) fused
         by elementwise sum, then channel shuffle and a DWC -> GPC -> SDWC
         refinement chain. Shape preserving.
  Chia   channel attention from summed global poolings through one dense map.
  Shia   spatial attention from summed local poolings, each reduced to a
         single map by a 1x1 conv, then a 3x3 conv.
  Scpfa  joint recalibration; "hybrid" gates once with the sigmoid of the
         summed channel+spatial logits, "cascaded" applies the two sigmoid
         gates sequentially. Both wirings share the same parameters.
  Scala  x + Scpfa(Mshc(x)).
  Rala   relu(x + BN(PC(Scala2(relu(BN(Scala1(x))))))).
"""

from __future__ import annotations

from .core.layers import BatchNorm, Conv2d, Dense, Initializer, Module
from .core.ops import channel_shuffle, pool_global, pool_local
from .core.tensor import Tensor, add, mul, relu, reshape, sigmoid

SCPFA_WIRINGS = ("hybrid", "cascaded")


def shuffle_groups(channels: int) -> int:
    """4 when divisible by 4, else 2 when even, else 1."""
    if channels % 4 == 0:
        return 4
    if channels % 2 == 0:
        return 2
    return 1


class Mshc(Module):
    def __init__(self, init: Initializer, name: str, channels: int):
        g = shuffle_groups(channels)
        self.groups = g
        self.branch_k1 = Conv2d(init, f"{name}/branch_k1", "GPC", channels, channels, groups=g)
        self.branch_k3 = Conv2d(init, f"{name}/branch_k3", "DWC", channels, channels, k=3)
        self.branch_k5 = Conv2d(init, f"{name}/branch_k5", "DDC", channels, channels, k=3, dilation=2)
        self.post_dwc = Conv2d(init, f"{name}/post_dwc", "DWC", channels, channels, k=3)
        self.post_gpc = Conv2d(init, f"{name}/post_gpc", "GPC", channels, channels, groups=g)
        self.post_sdwc = Conv2d(init, f"{name}/post_sdwc", "SDWC", channels, channels, k=3, stride=1)

    def forward(self, x: Tensor) -> Tensor:
        fused = add(add(self.branch_k1(x), self.branch_k3(x)), self.branch_k5(x))
        y = channel_shuffle(fused, self.groups)
        return self.post_sdwc(self.post_gpc(self.post_dwc(y)))


class Chia(Module):
    """Channel attention over long-range contexts from all four global pools."""

    def __init__(self, init: Initializer, name: str, channels: int):
        self.channels = channels
        self.fc = Dense(init, f"{name}/fc", channels, channels)

    def logits(self, x: Tensor) -> Tensor:
        pooled = pool_global(x, "GAP")
        for kind in ("GMP", "GMN", "GSP"):
            pooled = add(pooled, pool_global(x, kind))
        n = x.shape[0]
        z = self.fc(reshape(pooled, (n, self.channels)))
        return reshape(z, (n, self.channels, 1, 1))

    def forward(self, x: Tensor) -> Tensor:
        return sigmoid(self.logits(x))


class Shia(Module):
    """Spatial attention over fine-grained detail from all four local pools."""

    def __init__(self, init: Initializer, name: str, channels: int):
        self.reduce = [Conv2d(init, f"{name}/reduce_{kind.lower()}", "PC", channels, 1)
                       for kind in ("AP", "MP", "MN", "SP")]
        self.conv = Conv2d(init, f"{name}/conv", "DWC", 1, 1, k=3)

    def logits(self, x: Tensor) -> Tensor:
        acc = None
        for red, kind in zip(self.reduce, ("AP", "MP", "MN", "SP")):
            m = red(pool_local(x, kind, k=3, stride=1))
            acc = m if acc is None else add(acc, m)
        return self.conv(acc)

    def forward(self, x: Tensor) -> Tensor:
        return sigmoid(self.logits(x))


class Scpfa(Module):
    """Parallel (hybrid) or sequential (cascaded) spatial-channel gating.

    Disabled sub-attentions drop out of the gate; with both disabled this is
    the identity. Parameter count is wiring independent.
    """

    def __init__(self, init: Initializer, name: str, channels: int, wiring: str = "hybrid",
                 use_chia: bool = True, use_shia: bool = True):
        if wiring not in SCPFA_WIRINGS:
            raise ValueError(f"unknown scpfa wiring {wiring!r}")
        self.wiring = wiring
        self.chia = Chia(init, f"{name}/chia", channels) if use_chia else None
        self.shia = Shia(init, f"{name}/shia", channels) if use_shia else None

    def forward(self, x: Tensor) -> Tensor:
        if self.chia is None and self.shia is None:
            return x
        if self.wiring == "hybrid":
            z = None
            for att in (self.shia, self.chia):
                if att is not None:
                    z = att.logits(x) if z is None else add(z, att.logits(x))
            return mul(x, sigmoid(z))
        y = x
        if self.chia is not None:
            y = mul(y, self.chia(y))
        if self.shia is not None:
            y = mul(y, self.shia(y))
        return y


class Scala(Module):
    def __init__(self, init: Initializer, name: str, channels: int, wiring: str,
                 use_mshc: bool = True, use_chia: bool = True, use_shia: bool = True):
        self.mshc = Mshc(init, f"{name}/mshc", channels) if use_mshc else None
        self.scpfa = Scpfa(init, f"{name}/scpfa", channels, wiring, use_chia, use_shia)

    def forward(self, x: Tensor) -> Tensor:
        h = self.mshc(x) if self.mshc is not None else x
        return add(x, self.scpfa(h))


class Rala(Module):
    """Two Scala stages with independent parameters, refined progressively
    and closed by a residual ReLU."""

    def __init__(self, init: Initializer, name: str, channels: int, wiring: str = "hybrid",
                 use_mshc: bool = True, use_chia: bool = True, use_shia: bool = True):
        self.scala1 = Scala(init, f"{name}/scala1", channels, wiring, use_mshc, use_chia, use_shia)
        self.bn_mid = BatchNorm(init, f"{name}/bn_mid", channels)
        self.scala2 = Scala(init, f"{name}/scala2", channels, wiring, use_mshc, use_chia, use_shia)
        self.pc = Conv2d(init, f"{name}/pc", "PC", channels, channels)
        self.bn_out = BatchNorm(init, f"{name}/bn_out", channels)

    def forward(self, x: Tensor) -> Tensor:
        h = relu(self.bn_mid(self.scala1(x)))
        h = self.bn_out(self.pc(self.scala2(h)))
        return relu(add(x, h))
