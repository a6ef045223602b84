"""Monte Carlo collection of truncated decomposed returns.

Anchors are placed every `spacing` steps along an episode. At each anchor the
featurized state, the encoded anchor action, and the discounted sum of the
next t_max per-component reward vectors are recorded. Exploratory anchors
replace the policy action with an explorative one; because spacing >= t_max,
no anchor's reward window ever overlaps a later anchor's perturbation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .envs import AbrEnv, CcEnv
from .policies import PolicyHandle, featurize
from .traces import TraceSet

ONPOLICY = "onpolicy"
EXPLORATORY = "exploratory"

CC_EXPLORE_GRID = (-0.5, 0.0, 0.5)


class RolloutError(ValueError):
    pass


@dataclass(frozen=True)
class RolloutConfig:
    gamma: float = 0.9
    t_max: int = 5
    spacing: int = 5
    exploratory_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.gamma <= 1:
            raise RolloutError("gamma must be in [0, 1]")
        if self.t_max < 1:
            raise RolloutError("t_max must be >= 1")
        if self.spacing < self.t_max:
            raise RolloutError("spacing must be >= t_max (keeps anchor windows disjoint)")
        if not 0 <= self.exploratory_fraction <= 1:
            raise RolloutError("exploratory_fraction must be in [0, 1]")


@dataclass(frozen=True)
class RolloutSample:
    features: np.ndarray
    action_encoding: np.ndarray
    target: np.ndarray            # per-component truncated return
    flavor: str
    trace_id: str
    anchor: int                   # step index of the anchor within its episode
    action: object = None         # raw anchor action, kept for oracle replay


@dataclass(frozen=True)
class NormalizationSpec:
    lo: np.ndarray
    hi: np.ndarray
    degenerate: np.ndarray        # bool per component: hi == lo

    def normalize(self, v: np.ndarray) -> np.ndarray:
        span = np.where(self.degenerate, 1.0, self.hi - self.lo)
        out = (np.asarray(v) - self.lo) / span
        return np.where(self.degenerate, 0.5, out)

    def denormalize(self, v: np.ndarray) -> np.ndarray:
        return np.where(self.degenerate, self.lo,
                        np.asarray(v) * (self.hi - self.lo) + self.lo)

    def scale_std(self, std: np.ndarray) -> np.ndarray:
        return np.asarray(std) * np.where(self.degenerate, 0.0, self.hi - self.lo)

    def to_obj(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist(),
                "degenerate": [bool(d) for d in self.degenerate]}

    @classmethod
    def from_obj(cls, obj: dict) -> "NormalizationSpec":
        return cls(lo=np.array(obj["lo"], dtype=float),
                   hi=np.array(obj["hi"], dtype=float),
                   degenerate=np.array(obj["degenerate"], dtype=bool))


def truncated_decomposed_return(rewards, gamma: float, t_max: int) -> np.ndarray:
    """Discounted sum of the first min(t_max, len) per-component vectors."""
    if len(rewards) == 0:
        raise RolloutError("empty reward sequence")
    window = np.asarray(rewards[:t_max], dtype=float)
    discounts = gamma ** np.arange(len(window))
    return (discounts[:, None] * window).sum(axis=0)


def encode_action(policy: PolicyHandle, action) -> np.ndarray:
    if policy.is_discrete:
        enc = np.zeros(policy.discrete_size)
        enc[int(action)] = 1.0
        return enc
    return np.array([float(action)])


def make_env(kind: str, config=None):
    if kind == "abr":
        return AbrEnv(config)
    if kind == "cc":
        return CcEnv(config)
    raise RolloutError(f"unknown env kind {kind!r}")


def sample_explore_action(policy: PolicyHandle, rng: np.random.Generator):
    if policy.is_discrete:
        return int(rng.integers(policy.discrete_size))
    # mix a coarse grid with uniform continuous draws
    if rng.random() < 0.5:
        return float(CC_EXPLORE_GRID[rng.integers(len(CC_EXPLORE_GRID))])
    return float(rng.uniform(-1.0, 1.0))


def collect(trace_set: TraceSet, policy: PolicyHandle, config: RolloutConfig,
            env_config=None, exploratory_fraction: float | None = None
            ) -> list[RolloutSample]:
    """Roll every trace once; anchors alternate flavor by seeded coin flip
    with probability `exploratory_fraction` (defaults to the config value)."""
    frac = config.exploratory_fraction if exploratory_fraction is None else exploratory_fraction
    samples: list[RolloutSample] = []
    for trace_idx, trace in enumerate(trace_set):
        rng = np.random.default_rng(np.random.SeedSequence((config.seed, trace_idx)))
        samples.extend(_collect_trace(trace, policy, config, env_config, frac, rng))
    return samples


def collect_onpolicy(trace_set, policy, config, env_config=None):
    return collect(trace_set, policy, config, env_config, exploratory_fraction=0.0)


def collect_exploratory(trace_set, policy, config, env_config=None):
    return collect(trace_set, policy, config, env_config, exploratory_fraction=1.0)


def _collect_trace(trace, policy, config, env_config, frac, rng):
    env = make_env(policy.kind, env_config)
    env.reset(trace)
    pending = []   # (sample stub, reward list) for the anchor still in window
    out = []
    step = 0
    done = False
    while not done:
        state = env.state
        at_anchor = step % config.spacing == 0
        if at_anchor:
            exploratory = rng.random() < frac
            if exploratory:
                action = sample_explore_action(policy, rng)
            else:
                action = policy.evaluate(state)
            stub = RolloutSample(
                features=featurize(state, config=env_config).values,
                action_encoding=encode_action(policy, action),
                target=np.empty(0),
                flavor=EXPLORATORY if exploratory else ONPOLICY,
                trace_id=trace.id,
                anchor=step,
                action=action,
            )
            pending.append((stub, []))
        else:
            action = policy.evaluate(state)
        outcome = env.step(action)
        for _, rewards in pending:
            if len(rewards) < config.t_max:
                rewards.append(outcome.reward_components)
        done = outcome.done
        step += 1
        flushed = []
        for stub, rewards in pending:
            if len(rewards) >= config.t_max or done:
                out.append(replace(
                    stub, target=truncated_decomposed_return(rewards, config.gamma,
                                                             config.t_max)))
            else:
                flushed.append((stub, rewards))
        pending = flushed
    return out


def normalize_returns(samples: list[RolloutSample]
                      ) -> tuple[list[RolloutSample], NormalizationSpec]:
    """Affine-map each target component to [0, 1] over the dataset; constant
    components map to 0.5 and are flagged degenerate."""
    if not samples:
        raise RolloutError("no samples to normalize")
    targets = np.stack([s.target for s in samples])
    lo = targets.min(axis=0)
    hi = targets.max(axis=0)
    spec = NormalizationSpec(lo=lo, hi=hi, degenerate=hi == lo)
    normalized = [replace(s, target=spec.normalize(s.target)) for s in samples]
    return normalized, spec


def save_dataset(samples, spec: NormalizationSpec, config: RolloutConfig, path) -> None:
    with open(path, "w") as f:
        header = {"kind": "dataset", "normalization": spec.to_obj(),
                  "config": {"gamma": config.gamma, "t_max": config.t_max,
                             "spacing": config.spacing,
                             "exploratory_fraction": config.exploratory_fraction,
                             "seed": config.seed}}
        f.write(json.dumps(header) + "\n")
        for s in samples:
            f.write(json.dumps({
                "features": s.features.tolist(),
                "action": s.action_encoding.tolist(),
                "target": np.asarray(s.target).tolist(),
                "flavor": s.flavor,
                "trace": s.trace_id,
                "anchor": s.anchor,
            }) + "\n")


def load_dataset(path) -> tuple[list[RolloutSample], NormalizationSpec, RolloutConfig]:
    with open(path) as f:
        header = json.loads(f.readline())
        if header.get("kind") != "dataset":
            raise RolloutError(f"{path}: missing dataset header")
        spec = NormalizationSpec.from_obj(header["normalization"])
        config = RolloutConfig(**header["config"])
        samples = []
        for line in f:
            if not line.strip():
                continue
            obj = json.loads(line)
            samples.append(RolloutSample(
                features=np.array(obj["features"]),
                action_encoding=np.array(obj["action"]),
                target=np.array(obj["target"]),
                flavor=obj["flavor"],
                trace_id=obj["trace"],
                anchor=int(obj["anchor"]),
            ))
    return samples, spec, config
