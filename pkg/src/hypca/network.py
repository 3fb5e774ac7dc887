"""Two-phase multimodal network: per-modality stem and cascaded attention
blocks producing shared representations, then per-task per-modality
classification heads combined by a weighted multitask loss."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .core.layers import Conv2d, Dense, Initializer, Module
from .core.ops import pool_global
from .core.tensor import (Tensor, add, exp, index_rows, log, mean_along, mul,
                          relu, reshape, sub, sum_along)
from .dvca import DEFAULT_WINDOW_SIZES, Dvca
from .rala import SCPFA_WIRINGS, Rala


@dataclass
class Switches:
    """Ablation toggles; a disabled module is simply absent (identity)."""
    rala: bool = True
    hysfa: bool = True
    mmmua: bool = True
    mshc: bool = True
    chia: bool = True
    shia: bool = True
    fcif: bool = True
    smif: bool = True
    mcbi: bool = True
    tfsi: bool = True
    fdca: bool = True

    @classmethod
    def none(cls) -> "Switches":
        return cls(**{k: False for k in cls().__dict__})


@dataclass
class ModelConfig:
    modalities: int = 2
    blocks: int = 2
    channels: int = 16
    stem_downsample: int = 4
    window_sizes: tuple = DEFAULT_WINDOW_SIZES
    task_classes: tuple = (4,)
    loss_weights: list | None = None          # T x m; default uniform 1/(T*m)
    switches: Switches = field(default_factory=Switches)
    scpfa_wiring: str = "hybrid"
    tfsi_freq_token_values: bool = False
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.switches, dict):
            self.switches = Switches(**self.switches)
        self.window_sizes = tuple(self.window_sizes)
        self.task_classes = tuple(self.task_classes)
        if self.modalities < 2:
            raise ValueError("config needs at least 2 modalities")
        if self.blocks < 0:
            raise ValueError("block count must be >= 0")
        if self.stem_downsample != 4:
            raise ValueError("stem is fixed at two stride-2 stages (downsample 4)")
        if self.scpfa_wiring not in SCPFA_WIRINGS:
            raise ValueError(f"unknown scpfa wiring {self.scpfa_wiring!r}")

    def weights_matrix(self) -> np.ndarray:
        t, m = len(self.task_classes), self.modalities
        if self.loss_weights is None:
            return np.full((t, m), 1.0 / (t * m))
        w = np.asarray(self.loss_weights, dtype=np.float64)
        if w.shape != (t, m):
            raise ValueError(f"loss weights must be {t}x{m}, got {w.shape}")
        if (w < 0).any() or not (w > 0).any():
            raise ValueError("loss weights must be nonnegative with at least one positive")
        return w

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window_sizes"] = list(self.window_sizes)
        d["task_classes"] = list(self.task_classes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    def with_switches(self, **flags) -> "ModelConfig":
        return replace(self, switches=replace(self.switches, **flags))


class Stem(Module):
    """Two separable 3x3 stride-2 stages with ReLU: 3 -> C channels, H -> H/4."""

    def __init__(self, init: Initializer, name: str, channels: int):
        self.dw1 = Conv2d(init, f"{name}/dw1", "SDWC", 3, 3, k=3, stride=2)
        self.pc1 = Conv2d(init, f"{name}/pc1", "PC", 3, channels)
        self.dw2 = Conv2d(init, f"{name}/dw2", "SDWC", channels, channels, k=3, stride=2)
        self.pc2 = Conv2d(init, f"{name}/pc2", "PC", channels, channels)

    def forward(self, x: Tensor) -> Tensor:
        h, w = x.shape[2], x.shape[3]
        if h % 4 or w % 4:
            raise ValueError(f"stem needs spatial dims divisible by 4, got {h}x{w}")
        h1 = relu(self.pc1(self.dw1(x)))
        return relu(self.pc2(self.dw2(h1)))


class HypcaBlock(Module):
    """Per-modality Rala, then one cross-modal Dvca over all branches."""

    def __init__(self, init: Initializer, name: str, cfg: ModelConfig,
                 rng: np.random.Generator):
        s = cfg.switches
        self.rala = [Rala(init, f"{name}/rala{i}", cfg.channels, cfg.scpfa_wiring,
                          s.mshc, s.chia, s.shia)
                     for i in range(cfg.modalities)] if s.rala else None
        if s.hysfa or s.mmmua:
            self.dvca = Dvca(init, f"{name}/dvca", cfg.channels, cfg.modalities,
                             wiring=cfg.scpfa_wiring, window_sizes=cfg.window_sizes,
                             rng=rng, use_hysfa=s.hysfa, use_mmmua=s.mmmua,
                             use_tfsi=s.tfsi, use_fdca=s.fdca, use_fcif=s.fcif,
                             use_smif=s.smif, use_mcbi=s.mcbi,
                             freq_token_values=cfg.tfsi_freq_token_values)
        else:
            self.dvca = None

    def forward(self, xs: list[Tensor]) -> list[Tensor]:
        if self.rala is not None:
            xs = [blk(x) for blk, x in zip(self.rala, xs)]
        if self.dvca is not None:
            xs = self.dvca(xs)
        return xs


class HypcaNet(Module):
    """Stem + b cascaded blocks per modality branch, plus multitask heads."""

    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg
        init = Initializer(cfg.seed)
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xD0]))
        self.stems = [Stem(init, f"stem{i}", cfg.channels) for i in range(cfg.modalities)]
        self.blocks = [HypcaBlock(init, f"block{b}", cfg, rng) for b in range(cfg.blocks)]
        self.heads = [[Dense(init, f"head_t{t}_m{i}", cfg.channels, k)
                       for i in range(cfg.modalities)]
                      for t, k in enumerate(cfg.task_classes)]

    def rmil(self, images: list[Tensor]) -> list[Tensor]:
        """Shared representations: per-modality stem, then the block cascade."""
        if len(images) != self.cfg.modalities:
            raise ValueError(f"expected {self.cfg.modalities} modalities, got {len(images)}")
        xs = [stem(img) for stem, img in zip(self.stems, images)]
        for block in self.blocks:
            xs = block(xs)
        return xs

    def heads_logits(self, feats: list[Tensor]) -> list[list[Tensor]]:
        """Per (task, modality) class scores from pooled shared features."""
        out = []
        for task_heads in self.heads:
            row = []
            for head, x in zip(task_heads, feats):
                n, c = x.shape[0], x.shape[1]
                row.append(head(reshape(pool_global(x, "GAP"), (n, c))))
            out.append(row)
        return out

    def forward(self, images: list[Tensor]) -> list[list[Tensor]]:
        return self.heads_logits(self.rmil(images))

    def loss(self, logits: list[list[Tensor]], labels: list[np.ndarray]) -> Tensor:
        return mml_loss(logits, labels, self.cfg.weights_matrix())


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean softmax cross-entropy of (N, K) scores against integer labels."""
    labels = np.asarray(labels)
    n, k = logits.shape
    if labels.shape != (n,):
        raise ValueError(f"labels shape {labels.shape} != ({n},)")
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError("label outside [0, classes)")
    shifted = sub(logits, logits.data.max(axis=1, keepdims=True))
    lse = log(sum_along(exp(shifted), axes=(1,)))
    picked = index_rows(shifted, labels)
    return mean_along(sub(lse, picked))


def mml_loss(logits: list[list[Tensor]], labels: list[np.ndarray],
             weights: np.ndarray) -> Tensor:
    """Weighted sum of per-task per-modality cross-entropies."""
    t, m = weights.shape
    if len(logits) != t or any(len(row) != m for row in logits):
        raise ValueError(f"logit grid must be {t}x{m}")
    if len(labels) != t:
        raise ValueError(f"need {t} label vectors, got {len(labels)}")
    total = None
    for ti in range(t):
        for mi in range(m):
            cell = mul(cross_entropy(logits[ti][mi], labels[ti]), float(weights[ti, mi]))
            total = cell if total is None else add(total, cell)
    return total
