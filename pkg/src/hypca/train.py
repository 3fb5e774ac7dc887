"""Training/evaluation loop: Adam over the multitask loss, deterministic batch
order, best-validation checkpointing, and metric reporting."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .core.ops import count_macs
from .core.tensor import Tape, Tensor, no_tape
from .data import DatasetSpec, SyntheticDataset
from .metrics import classification_metrics
from .network import HypcaNet, ModelConfig


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass
class ExperimentConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    data: DatasetSpec = field(default_factory=DatasetSpec)
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.model.modalities != self.data.modalities:
            raise ValueError("model and data disagree on modality count")

    def to_dict(self) -> dict:
        return {"model": self.model.to_dict(), "data": self.data.to_dict(),
                "train": self.train.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return cls(model=ModelConfig.from_dict(d.get("model", {})),
                   data=DatasetSpec.from_dict(d.get("data", {})),
                   train=TrainConfig.from_dict(d.get("train", {})))

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def with_seed(self, seed: int) -> "ExperimentConfig":
        """Global seed override: reseeds model, data, and batch order."""
        from dataclasses import replace
        return ExperimentConfig(model=replace(self.model, seed=seed),
                                data=replace(self.data, seed=seed + 1000),
                                train=replace(self.train, seed=seed + 2000))


class Adam:
    """Adam with bias correction; state keyed by parameter order."""

    def __init__(self, params, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for i, p in enumerate(self.params):
            g = p.grad
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            p.data = p.data - self.lr * (self.m[i] / bias1) / (np.sqrt(self.v[i] / bias2) + self.eps)


def _batches(indices: np.ndarray, batch_size: int):
    for start in range(0, len(indices), batch_size):
        yield indices[start:start + batch_size]


def _forward_loss(net: HypcaNet, dataset: SyntheticDataset, idx: np.ndarray) -> Tensor:
    images, _ = dataset.batch(idx)
    labels = dataset.task_labels(idx, net.cfg.task_classes)
    logits = net([Tensor(img) for img in images])
    return net.loss(logits, labels)


def _eval_loss(net: HypcaNet, dataset: SyntheticDataset, idx: np.ndarray,
               batch_size: int) -> float:
    net.eval()
    total, count = 0.0, 0
    with no_tape():
        for b in _batches(idx, batch_size):
            total += _forward_loss(net, dataset, b).item() * len(b)
            count += len(b)
    return total / count


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def evaluate(net: HypcaNet, dataset: SyntheticDataset, idx: np.ndarray,
             batch_size: int = 32) -> dict:
    """Test metrics per task/modality plus modality and overall means."""
    net.eval()
    t_count = len(net.cfg.task_classes)
    m_count = net.cfg.modalities
    scores = [[[] for _ in range(m_count)] for _ in range(t_count)]
    with no_tape():
        for b in _batches(idx, batch_size):
            images, _ = dataset.batch(b)
            logits = net([Tensor(img) for img in images])
            for t in range(t_count):
                for m in range(m_count):
                    scores[t][m].append(_softmax_rows(logits[t][m].data))
    per = []
    for t, k in enumerate(net.cfg.task_classes):
        labels = dataset.task_labels(idx, net.cfg.task_classes)[t]
        row = [classification_metrics(np.concatenate(scores[t][m]), labels, k)
               for m in range(m_count)]
        per.append(row)
    mean = {key: float(np.mean([cell[key] for row in per for cell in row
                                if cell[key] is not None]))
            for key in ("accuracy", "macro_f1")}
    aucs = [cell["auc"] for row in per for cell in row if cell["auc"] is not None]
    mean["auc"] = float(np.mean(aucs)) if aucs else None
    return {"per_task_modality": per, "mean": mean}


def count_params_macs(cfg: ModelConfig, image_size: int) -> tuple[int, int]:
    """Exact parameter count and per-forward multiply-accumulates (batch 1)."""
    net = HypcaNet(cfg).eval()
    params = sum(p.size for p in net.parameters())
    dummy = [Tensor(np.zeros((1, 3, image_size, image_size)))
             for _ in range(cfg.modalities)]
    with no_tape(), count_macs() as macs:
        net(dummy)
    return params, macs.total


def train(cfg: ExperimentConfig) -> tuple[dict, HypcaNet, dict]:
    """Run the full loop; returns (result record, trained net, best state).

    The record is a pure function of the config (timing lives in the separate
    "timing" entry, which callers persist as a sidecar). Divergence (NaN loss)
    is reported as status "diverged" rather than raised.
    """
    started = time.perf_counter()
    dataset = SyntheticDataset(cfg.data)
    train_idx, val_idx, test_idx = dataset.splits()
    net = HypcaNet(cfg.model)
    opt = Adam(net.parameters(), lr=cfg.train.lr)
    order_rng = np.random.default_rng(cfg.train.seed)

    epochs = []
    status = "ok"
    best_val = np.inf
    best_state = {name: arr.copy() for name, arr in net.state_items()}
    for epoch in range(cfg.train.epochs):
        net.train()
        perm = order_rng.permutation(train_idx)
        losses = []
        for b in _batches(perm, cfg.train.batch_size):
            with Tape() as tape:
                loss = _forward_loss(net, dataset, b)
                tape.backward(loss)
            opt.step()
            net.zero_grads()
            losses.append(loss.item())
        train_loss = float(np.mean(losses))
        if not np.isfinite(train_loss):
            status = "diverged"
            epochs.append({"epoch": epoch, "train_loss": train_loss, "val_loss": None})
            break
        val_loss = _eval_loss(net, dataset, val_idx, cfg.train.batch_size)
        epochs.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss})
        if val_loss < best_val:
            best_val = val_loss
            best_state = {name: arr.copy() for name, arr in net.state_items()}

    net.load_state(best_state)
    test = evaluate(net, dataset, test_idx, cfg.train.batch_size)
    params, macs = count_params_macs(cfg.model, cfg.data.image_size)
    result = {
        "config": cfg.to_dict(),
        "config_digest": cfg.digest(),
        "seed": cfg.model.seed,
        "status": status,
        "epochs": epochs,
        "final_train_loss": epochs[-1]["train_loss"] if epochs else None,
        "best_val_loss": None if not np.isfinite(best_val) else best_val,
        "test_metrics": test,
        "param_count": params,
        "mac_count": macs,
        "timing": {"wall_clock_seconds": time.perf_counter() - started},
    }
    return result, net, best_state


def result_record(result: dict) -> dict:
    """The deterministic portion of a result (timing sidecar stripped)."""
    return {k: v for k, v in result.items() if k != "timing"}
