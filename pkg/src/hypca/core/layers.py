"""Parameter-owning layers and the module tree they live in.

Initialization policy: He-normal for conv/dense weights, zeros for biases,
ones for batch-norm gamma and for channel-weight vectors. All draws come from
one seeded generator consumed in construction order, so two nets built from
the same config are bitwise identical.
"""

from __future__ import annotations

import numpy as np

from . import ops
from .tensor import Parameter, Tensor, mean_along, mul, add, sub, rsqrt, reshape


class Initializer:
    """Seeded parameter factory; one per network instance."""

    def __init__(self, seed: int):
        self.rng = np.random.default_rng(seed)
        self.seed = seed

    def he_normal(self, name: str, shape, fan_in: int) -> Parameter:
        std = np.sqrt(2.0 / fan_in)
        return Parameter(name, self.rng.normal(0.0, std, shape), init=f"he-normal({self.seed})")

    def zeros(self, name: str, shape) -> Parameter:
        return Parameter(name, np.zeros(shape), init="zeros")

    def ones(self, name: str, shape) -> Parameter:
        return Parameter(name, np.ones(shape), init="ones")


class Module:
    """Minimal container: tracks sub-modules and Parameters in creation order."""

    def parameters(self):
        out = []
        for v in self.__dict__.values():
            for item in _flatten(v):
                if isinstance(item, Parameter):
                    out.append(item)
                elif isinstance(item, Module):
                    out.extend(item.parameters())
        return out

    def modules(self):
        out = [self]
        for v in self.__dict__.values():
            for item in _flatten(v):
                if isinstance(item, Module):
                    out.extend(item.modules())
        return out

    def zero_grads(self):
        for p in self.parameters():
            p.zero_grad()

    def train(self):
        for m in self.modules():
            m.training = True
        return self

    def eval(self):
        for m in self.modules():
            m.training = False
        return self

    def state_items(self):
        """(name, array) pairs for every Parameter and persistent buffer."""
        items = [(p.name, p.data) for p in self.parameters()]
        for m in self.modules():
            items.extend(getattr(m, "buffers", lambda: [])())
        return items

    def load_state(self, state: dict):
        expected = dict(self.state_items())
        missing = sorted(set(expected) - set(state))
        extra = sorted(set(state) - set(expected))
        if missing or extra:
            raise ValueError(f"state mismatch; missing={missing[:3]} extra={extra[:3]}")
        for p in self.parameters():
            arr = np.asarray(state[p.name], dtype=np.float64)
            if arr.shape != p.data.shape:
                raise ValueError(f"{p.name}: shape {arr.shape} != {p.data.shape}")
            p.data = arr.copy()
        for m in self.modules():
            if hasattr(m, "set_buffers"):
                m.set_buffers(state)

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def _flatten(v):
    if isinstance(v, (list, tuple)):
        out = []
        for item in v:
            out.extend(_flatten(item))
        return out
    return [v]


class Conv2d(Module):
    """One of the PC/GPC/DWC/DDC/SDWC convolutions with owned weight/bias."""

    def __init__(self, init: Initializer, name: str, kind: str, c_in: int, c_out: int, *,
                 k: int = 3, groups: int = 1, dilation: int = 2, stride: int = 1):
        self.kind = kind
        self.groups = groups
        self.dilation = dilation
        self.stride = stride
        if kind in ("PC", "GPC"):
            g = 1 if kind == "PC" else groups
            if c_in % g or c_out % g:
                raise ValueError(f"{name}: groups {g} must divide {c_in} and {c_out}")
            self.weight = init.he_normal(f"{name}/weight", (g, c_out // g, c_in // g), fan_in=c_in // g)
        else:
            if c_in != c_out:
                raise ValueError(f"{name}: depthwise conv needs c_in == c_out")
            self.weight = init.he_normal(f"{name}/weight", (c_in, k, k), fan_in=k * k)
        self.bias = init.zeros(f"{name}/bias", (c_out,))

    def forward(self, x: Tensor) -> Tensor:
        return ops.conv2d(x, self.kind, self.weight, self.bias,
                          groups=self.groups, dilation=self.dilation, stride=self.stride)


class Dense(Module):
    def __init__(self, init: Initializer, name: str, d_in: int, d_out: int):
        self.weight = init.he_normal(f"{name}/weight", (d_in, d_out), fan_in=d_in)
        self.bias = init.zeros(f"{name}/bias", (d_out,))

    def forward(self, x: Tensor) -> Tensor:
        return ops.dense(x, self.weight, self.bias)


class BatchNorm(Module):
    """Batch normalization over (N,H,W) for 4-D inputs or N for 2-D inputs.

    Train mode normalizes with batch statistics and updates running stats;
    eval mode normalizes with the stored running statistics.
    """

    def __init__(self, init: Initializer, name: str, num_features: int, *,
                 eps: float = 1e-5, momentum: float = 0.1):
        self.name = name
        self.gamma = init.ones(f"{name}/gamma", (num_features,))
        self.beta = init.zeros(f"{name}/beta", (num_features,))
        self.eps = eps
        self.momentum = momentum
        self.running_mean = np.zeros(num_features)
        self.running_var = np.ones(num_features)
        self.training = True

    def buffers(self):
        return [(f"{self.name}/running_mean", self.running_mean),
                (f"{self.name}/running_var", self.running_var)]

    def set_buffers(self, state: dict):
        self.running_mean = np.asarray(state[f"{self.name}/running_mean"], dtype=np.float64).copy()
        self.running_var = np.asarray(state[f"{self.name}/running_var"], dtype=np.float64).copy()

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim == 4:
            axes, pshape = (0, 2, 3), (1, -1, 1, 1)
        elif x.ndim == 2:
            axes, pshape = (0,), (1, -1)
        else:
            raise ValueError(f"batch norm expects 2-D or 4-D input, got {x.shape}")
        gamma = reshape(self.gamma, pshape)
        beta = reshape(self.beta, pshape)
        if self.training:
            count = int(np.prod([x.shape[a] for a in axes]))
            if count < 2:
                raise ValueError("train-mode batch norm needs at least 2 values per channel")
            mu = mean_along(x, axes, keepdims=True)
            centered = sub(x, mu)
            var = mean_along(mul(centered, centered), axes, keepdims=True)
            inv = rsqrt(add(var, self.eps))
            m = self.momentum
            self.running_mean = (1 - m) * self.running_mean + m * mu.data.reshape(-1)
            self.running_var = (1 - m) * self.running_var + m * var.data.reshape(-1)
            return add(mul(mul(centered, inv), gamma), beta)
        rm = self.running_mean.reshape(pshape)
        ri = 1.0 / np.sqrt(self.running_var.reshape(pshape) + self.eps)
        return add(mul(mul(sub(x, rm), ri), gamma), beta)


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float, mode: str,
               running_mean: np.ndarray | None = None,
               running_var: np.ndarray | None = None) -> Tensor:
    """Functional batch norm over (N,H,W) per channel (op-level surface)."""
    axes, pshape = ((0, 2, 3), (1, -1, 1, 1)) if x.ndim == 4 else ((0,), (1, -1))
    g = reshape(gamma, pshape) if isinstance(gamma, Tensor) else np.asarray(gamma).reshape(pshape)
    b = reshape(beta, pshape) if isinstance(beta, Tensor) else np.asarray(beta).reshape(pshape)
    if mode == "train":
        count = int(np.prod([x.shape[a] for a in axes]))
        if count < 2:
            raise ValueError("train-mode batch norm needs at least 2 values per channel")
        mu = mean_along(x, axes, keepdims=True)
        centered = sub(x, mu)
        var = mean_along(mul(centered, centered), axes, keepdims=True)
        return add(mul(mul(centered, rsqrt(add(var, eps))), g), b)
    if mode == "eval":
        rm = np.zeros(x.shape[1]) if running_mean is None else running_mean
        rv = np.ones(x.shape[1]) if running_var is None else running_var
        inv = 1.0 / np.sqrt(rv.reshape(pshape) + eps)
        return add(mul(mul(sub(x, rm.reshape(pshape)), inv), g), b)
    raise ValueError(f"unknown batch norm mode {mode!r}")


class Dropout(Module):
    def __init__(self, p: float, rng: np.random.Generator):
        if not 0.0 <= p < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {p}")
        self.p = p
        self.rng = rng
        self.training = True

    def forward(self, x: Tensor) -> Tensor:
        return ops.dropout(x, self.p, self.training, self.rng)
