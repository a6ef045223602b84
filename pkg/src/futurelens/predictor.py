"""Learned decomposed-return predictor: shared trunk, one Gaussian head per
reward component, two-stage training, JSON checkpointing, fast inference."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .envs import ComponentSet
from .nn import (DenseNet, Layer, NnError, OptimizerState, adagrad_step, backward,
                 build_net, forward, gaussian_nll, gaussian_nll_grads,
                 LOG_STD_MIN, LOG_STD_MAX, IDENTITY)
from .rollouts import NormalizationSpec, RolloutSample

CHECKPOINT_MAGIC = "cbx1"


class PredictorError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    trunk_widths: tuple[int, ...] = (128, 128)
    head_widths: tuple[int, ...] = (64,)
    stage1_lr: float = 1e-4
    stage1_epochs: int = 50
    batch_size: int = 64
    stage2_lr: float = 1e-5
    stage2_epochs: int = 10
    loss_weights: tuple[float, ...] | None = None   # None: all ones
    decay: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise PredictorError("batch_size must be >= 1")
        if self.stage1_epochs < 1:
            raise PredictorError("stage1_epochs must be >= 1")

    def to_obj(self) -> dict:
        return {"trunk_widths": list(self.trunk_widths),
                "head_widths": list(self.head_widths),
                "stage1_lr": self.stage1_lr, "stage1_epochs": self.stage1_epochs,
                "batch_size": self.batch_size, "stage2_lr": self.stage2_lr,
                "stage2_epochs": self.stage2_epochs,
                "loss_weights": list(self.loss_weights) if self.loss_weights else None,
                "decay": self.decay, "seed": self.seed}

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_obj(), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class PredictorModel:
    trunk: DenseNet
    heads: dict[str, DenseNet]
    component_set: ComponentSet
    normalization: NormalizationSpec
    feature_dim: int
    action_dim: int
    config_hash: str

    @property
    def in_dim(self) -> int:
        return self.feature_dim + self.action_dim


@dataclass(frozen=True)
class Explanation:
    components: tuple[str, ...]
    means_norm: np.ndarray
    stds_norm: np.ndarray
    means: np.ndarray             # denormalized units
    stds: np.ndarray
    total: float                  # weighted sum of denormalized means
    action: object
    degenerate: tuple[bool, ...]


@dataclass
class TrainResult:
    model: PredictorModel
    stage1_losses: list[float]
    stage2_losses: list[float]


def _batch_pass(trunk, heads, names, weights, X, Y, update, trunk_opt, head_opts,
                freeze_trunk):
    """One forward/backward (and optional update) over a batch. Returns the
    weighted mean loss."""
    n = X.shape[0]
    trunk_caches: list = []
    H = forward(trunk, X, trunk_caches)
    total_loss = 0.0
    dH = np.zeros_like(H)
    head_grads = {}
    for j, name in enumerate(names):
        head = heads[name]
        caches: list = []
        out = forward(head, H, caches)
        mean, log_std = out[:, 0], out[:, 1]
        nll = gaussian_nll(mean, log_std, Y[:, j])
        total_loss += weights[j] * float(nll.mean())
        if update:
            d_mean, d_ls = gaussian_nll_grads(mean, log_std, Y[:, j])
            d_out = np.stack([d_mean, d_ls], axis=1) * (weights[j] / n)
            d_h, grads = backward(head, caches, d_out)
            dH += d_h
            head_grads[name] = grads
    if not np.isfinite(total_loss):
        raise PredictorError("non-finite training loss; check data scaling and lr")
    if update:
        for name in names:
            adagrad_step(heads[name].params(), head_grads[name], head_opts[name])
        if not freeze_trunk:
            _, trunk_grads = backward(trunk, trunk_caches, dH)
            adagrad_step(trunk.params(), trunk_grads, trunk_opt)
    return total_loss


def train(samples: list[RolloutSample], normalization: NormalizationSpec,
          component_set: ComponentSet, config: TrainConfig | None = None
          ) -> TrainResult:
    """Two-stage fit on normalized targets: end-to-end, then heads only with
    the trunk frozen at the smaller learning rate."""
    config = config or TrainConfig()
    if not samples:
        raise PredictorError("empty training dataset")
    X = np.stack([np.concatenate([s.features, s.action_encoding]) for s in samples])
    Y = np.stack([s.target for s in samples])
    names = component_set.names
    if Y.shape[1] != len(names):
        raise PredictorError(f"targets have {Y.shape[1]} components, expected {len(names)}")
    feature_dim = len(samples[0].features)
    action_dim = len(samples[0].action_encoding)
    weights = config.loss_weights or tuple(1.0 for _ in names)

    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    trunk = build_net([X.shape[1], *config.trunk_widths], rng, last_act="relu")
    heads = {name: build_net([config.trunk_widths[-1], *config.head_widths, 2], rng,
                             last_act=IDENTITY, last_scale=0.01)
             for name in names}

    def run_stage(lr, epochs, freeze_trunk):
        trunk_opt = OptimizerState(lr=lr, decay=config.decay)
        head_opts = {name: OptimizerState(lr=lr, decay=config.decay) for name in names}
        losses = []
        for _ in range(epochs):
            order = rng.permutation(len(X))
            epoch_loss, n_batches = 0.0, 0
            for start in range(0, len(X), config.batch_size):
                idx = order[start:start + config.batch_size]
                epoch_loss += _batch_pass(trunk, heads, names, weights,
                                          X[idx], Y[idx], True, trunk_opt, head_opts,
                                          freeze_trunk)
                n_batches += 1
            losses.append(epoch_loss / n_batches)
            trunk_opt.end_epoch()
            for opt in head_opts.values():
                opt.end_epoch()
        return losses

    stage1 = run_stage(config.stage1_lr, config.stage1_epochs, freeze_trunk=False)
    stage2 = run_stage(config.stage2_lr, config.stage2_epochs, freeze_trunk=True) \
        if config.stage2_epochs > 0 else []

    model = PredictorModel(trunk=trunk, heads=heads, component_set=component_set,
                           normalization=normalization, feature_dim=feature_dim,
                           action_dim=action_dim, config_hash=config.digest())
    return TrainResult(model=model, stage1_losses=stage1, stage2_losses=stage2)


def predict(model: PredictorModel, features: np.ndarray, action_encoding: np.ndarray,
            action=None) -> Explanation:
    """Single forward pass; pure, no state mutated."""
    features = np.asarray(features, dtype=float)
    action_encoding = np.asarray(action_encoding, dtype=float)
    if len(features) != model.feature_dim or len(action_encoding) != model.action_dim:
        raise PredictorError(
            f"dims ({len(features)}, {len(action_encoding)}) do not match model "
            f"({model.feature_dim}, {model.action_dim})")
    x = np.concatenate([features, action_encoding])
    h = forward(model.trunk, x)
    names = model.component_set.names
    means_norm = np.empty(len(names))
    stds_norm = np.empty(len(names))
    for j, name in enumerate(names):
        out = forward(model.heads[name], h)
        means_norm[j] = out[0]
        stds_norm[j] = np.exp(np.clip(out[1], LOG_STD_MIN, LOG_STD_MAX))
    spec = model.normalization
    means = spec.denormalize(means_norm)
    stds = spec.scale_std(stds_norm)
    return Explanation(
        components=names,
        means_norm=means_norm, stds_norm=stds_norm,
        means=means, stds=stds,
        total=model.component_set.total(means),
        action=action,
        degenerate=tuple(bool(d) for d in spec.degenerate),
    )


def head_mean_mse(model: PredictorModel, samples: list[RolloutSample]) -> float:
    """Mean squared error of head means vs normalized targets."""
    errs = []
    for s in samples:
        x = np.concatenate([s.features, s.action_encoding])
        h = forward(model.trunk, x)
        pred = np.array([forward(model.heads[n], h)[0]
                         for n in model.component_set.names])
        errs.append(np.mean((pred - s.target) ** 2))
    return float(np.mean(errs))


def save(model: PredictorModel, path) -> None:
    def net_obj(net: DenseNet):
        return [{"w": layer.w.tolist(), "b": layer.b.tolist(), "act": layer.act}
                for layer in net.layers]

    doc = {
        "magic": CHECKPOINT_MAGIC,
        "config_hash": model.config_hash,
        "component_set": {"names": list(model.component_set.names),
                          "weights": list(model.component_set.weights)},
        "normalization": model.normalization.to_obj(),
        "feature_dim": model.feature_dim,
        "action_dim": model.action_dim,
        "trunk": net_obj(model.trunk),
        "heads": {name: net_obj(net) for name, net in model.heads.items()},
    }
    with open(path, "w") as f:
        json.dump(doc, f)


def load(path) -> PredictorModel:
    with open(path) as f:
        doc = json.load(f)
    if doc.get("magic") != CHECKPOINT_MAGIC:
        raise PredictorError(f"{path}: not a predictor checkpoint (bad magic)")
    if "config_hash" not in doc:
        raise PredictorError(f"{path}: checkpoint missing config hash")

    def net_from(obj) -> DenseNet:
        return DenseNet([Layer(w=np.array(l["w"], dtype=float),
                               b=np.array(l["b"], dtype=float), act=l["act"])
                         for l in obj])

    cs = ComponentSet(names=tuple(doc["component_set"]["names"]),
                      weights=tuple(doc["component_set"]["weights"]))
    return PredictorModel(
        trunk=net_from(doc["trunk"]),
        heads={name: net_from(obj) for name, obj in doc["heads"].items()},
        component_set=cs,
        normalization=NormalizationSpec.from_obj(doc["normalization"]),
        feature_dim=int(doc["feature_dim"]),
        action_dim=int(doc["action_dim"]),
        config_hash=doc["config_hash"],
    )
