"""Deterministic synthetic multimodal classification data.

Each class renders a fixed geometric pattern per modality (an oriented
grating plus a Gaussian blob, both drawn once from the spec seed); samples of
one class differ only by additive Gaussian noise. The classes are linearly
separable from raw pixels by construction, so a failing training run points at
the network, not the data.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

SPLIT_FRACTIONS = (0.8, 0.1, 0.1)
CHANNEL_GAINS = np.array([1.0, 0.9, 1.1])


@dataclass
class DatasetSpec:
    seed: int = 0
    n: int = 400
    classes: int = 4
    modalities: int = 2
    image_size: int = 32
    noise: float | list = 0.25    # scalar, or one level per modality

    def __post_init__(self):
        if self.classes < 2:
            raise ValueError("need at least 2 classes")
        if self.modalities < 2:
            raise ValueError("need at least 2 modalities")
        if self.n < self.classes:
            raise ValueError("need at least one sample per class")
        levels = self.noise_levels()
        if len(levels) != self.modalities:
            raise ValueError(f"need {self.modalities} noise levels, got {len(levels)}")
        if any(v < 0 for v in levels):
            raise ValueError("noise level must be nonnegative")

    def noise_levels(self) -> list:
        if isinstance(self.noise, (int, float)):
            return [float(self.noise)] * self.modalities
        return [float(v) for v in self.noise]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSpec":
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _class_pattern(rng: np.random.Generator, k: int, classes: int, size: int) -> np.ndarray:
    """Oriented grating at a class-specific angle/frequency plus one blob."""
    theta = np.pi * k / classes + rng.uniform(-0.1, 0.1)
    freq = 2.0 + k + rng.uniform(-0.25, 0.25)
    phase = rng.uniform(0, 2 * np.pi)
    yy, xx = np.mgrid[0:size, 0:size] / size
    grating = np.sin(2 * np.pi * freq * (np.cos(theta) * xx + np.sin(theta) * yy) + phase)
    cy, cx = rng.uniform(0.2, 0.8, size=2)
    blob = np.exp(-(((yy - cy) ** 2 + (xx - cx) ** 2) / 0.02))
    return grating + 1.5 * blob


class SyntheticDataset:
    """Materialized samples with a deterministic 80/10/10 split by index."""

    def __init__(self, spec: DatasetSpec):
        self.spec = spec
        rng = np.random.default_rng(spec.seed)
        size = spec.image_size
        # One pattern per (class, modality), rendered independently.
        patterns = np.stack([
            np.stack([_class_pattern(rng, k, spec.classes, size)
                      for _ in range(spec.modalities)])
            for k in range(spec.classes)
        ])  # (classes, modalities, H, W)
        contrasts = 1.0 + 0.25 * rng.standard_normal(spec.modalities)
        noise = spec.noise_levels()
        self.labels = np.arange(spec.n, dtype=np.int64) % spec.classes
        self.images = []
        for i in range(spec.modalities):
            base = patterns[self.labels, i] * contrasts[i]          # (n, H, W)
            imgs = base[:, None, :, :] * CHANNEL_GAINS[None, :, None, None]
            if noise[i] > 0:
                imgs = imgs + rng.normal(0.0, noise[i], imgs.shape)
            self.images.append(np.ascontiguousarray(imgs))

    @property
    def n(self) -> int:
        return self.spec.n

    def splits(self):
        """Disjoint (train, val, test) index arrays, 80/10/10 by index."""
        n = self.spec.n
        n_train = int(n * SPLIT_FRACTIONS[0])
        n_val = int(n * SPLIT_FRACTIONS[1])
        idx = np.arange(n)
        return idx[:n_train], idx[n_train:n_train + n_val], idx[n_train + n_val:]

    def batch(self, idx: np.ndarray):
        """(images per modality, per-task labels) for the given sample indices."""
        return [img[idx] for img in self.images], self.labels[idx]

    def task_labels(self, idx: np.ndarray, task_classes) -> list[np.ndarray]:
        """Labels per task; every task reuses the base labeling, so each task
        must declare exactly `classes` classes."""
        for k in task_classes:
            if k != self.spec.classes:
                raise ValueError(f"task with {k} classes does not match dataset "
                                 f"with {self.spec.classes}")
        return [self.labels[idx] for _ in task_classes]


def synth_dataset(spec: DatasetSpec) -> SyntheticDataset:
    return SyntheticDataset(spec)
