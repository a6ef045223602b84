"""Dense feed-forward nets in plain numpy: forward, exact reverse-mode
gradients, Gaussian negative log-likelihood, and Adagrad updates.

Everything runs in float64 so analytic gradients can be checked against
central finite differences at tight tolerances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

RELU = "relu"
IDENTITY = "identity"

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0

HALF_LOG_TWO_PI = 0.5 * math.log(2.0 * math.pi)


class NnError(ValueError):
    pass


@dataclass
class Layer:
    w: np.ndarray      # (fan_in, fan_out)
    b: np.ndarray      # (fan_out,)
    act: str = RELU


@dataclass
class DenseNet:
    layers: list[Layer]

    @property
    def in_dim(self) -> int:
        return self.layers[0].w.shape[0]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].w.shape[1]

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend([layer.w, layer.b])
        return out

    def param_count(self) -> int:
        return sum(p.size for p in self.params())


def build_net(dims: list[int], rng: np.random.Generator,
              last_act: str = IDENTITY, last_scale: float = 1.0) -> DenseNet:
    """He-initialized MLP with relu hidden layers. `last_scale` shrinks the
    output layer so initial predictions start near zero."""
    layers = []
    for i, (fan_in, fan_out) in enumerate(zip(dims, dims[1:])):
        w = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        b = np.zeros(fan_out)
        if i == len(dims) - 2:
            layers.append(Layer(w=w * last_scale, b=b, act=last_act))
        else:
            layers.append(Layer(w=w, b=b, act=RELU))
    return DenseNet(layers=layers)


def forward(net: DenseNet, x: np.ndarray, caches: list | None = None) -> np.ndarray:
    """Forward pass; x is (n, in_dim) or (in_dim,). If `caches` is given the
    per-layer inputs and pre-activations needed by backward are appended."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[1] != net.in_dim:
        raise NnError(f"input dim {h.shape[1]} != net in_dim {net.in_dim}")
    for layer in net.layers:
        z = h @ layer.w + layer.b
        if caches is not None:
            caches.append((h, z))
        if layer.act == RELU:
            h = np.maximum(z, 0.0)
        elif layer.act == IDENTITY:
            h = z
        else:
            raise NnError(f"unknown activation {layer.act!r}")
    return h[0] if single else h


def backward(net: DenseNet, caches: list, d_out: np.ndarray
             ) -> tuple[np.ndarray, list[np.ndarray]]:
    """Reverse-mode through a recorded forward pass. Returns (d_input, grads)
    with grads aligned to net.params()."""
    grads: list[np.ndarray] = [None] * (2 * len(net.layers))
    d = np.asarray(d_out, dtype=float)
    if d.ndim == 1:
        d = d[None, :]
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        h_in, z = caches[i]
        if layer.act == RELU:
            d = d * (z > 0)
        grads[2 * i] = h_in.T @ d
        grads[2 * i + 1] = d.sum(axis=0)
        d = d @ layer.w.T
    return d, grads


def gaussian_nll(mean, log_std, target):
    """Elementwise NLL of target under N(mean, exp(clamped log_std)^2)."""
    mean = np.asarray(mean, dtype=float)
    target = np.asarray(target, dtype=float)
    ls = np.clip(np.asarray(log_std, dtype=float), LOG_STD_MIN, LOG_STD_MAX)
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(target))):
        raise NnError("non-finite inputs to gaussian_nll")
    inv_var = np.exp(-2.0 * ls)
    return 0.5 * (target - mean) ** 2 * inv_var + ls + HALF_LOG_TWO_PI


def gaussian_nll_grads(mean, log_std, target):
    """(d/d mean, d/d log_std) of gaussian_nll; zero beyond the clamp range."""
    mean = np.asarray(mean, dtype=float)
    target = np.asarray(target, dtype=float)
    raw = np.asarray(log_std, dtype=float)
    ls = np.clip(raw, LOG_STD_MIN, LOG_STD_MAX)
    inv_var = np.exp(-2.0 * ls)
    d_mean = (mean - target) * inv_var
    d_ls = 1.0 - (target - mean) ** 2 * inv_var
    in_range = (raw > LOG_STD_MIN) & (raw < LOG_STD_MAX)
    return d_mean, np.where(in_range, d_ls, 0.0)


@dataclass
class OptimizerState:
    """Adagrad: per-parameter squared-gradient accumulators."""
    lr: float = 1e-4
    decay: float = 0.0            # subtracted from lr once per epoch
    eps: float = 1e-8
    accum: list[np.ndarray] = field(default_factory=list)
    epochs_seen: int = 0

    def effective_lr(self) -> float:
        return max(self.lr - self.decay * self.epochs_seen, 0.0)

    def end_epoch(self) -> None:
        self.epochs_seen += 1


def adagrad_step(params: list[np.ndarray], grads: list[np.ndarray],
                 opt: OptimizerState) -> None:
    """In-place update: accum += g^2; p -= lr * g / (sqrt(accum) + eps)."""
    if not opt.accum:
        opt.accum = [np.zeros_like(p) for p in params]
    if len(params) != len(grads) or len(params) != len(opt.accum):
        raise NnError("parameter/gradient shape mismatch")
    lr = opt.effective_lr()
    for p, g, a in zip(params, grads, opt.accum):
        if p.shape != g.shape:
            raise NnError(f"gradient shape {g.shape} != param shape {p.shape}")
        a += g ** 2
        p -= lr * g / (np.sqrt(a) + opt.eps)
