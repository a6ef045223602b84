"""Fixed controllers under explanation, plus state featurization.

The explainer works with any fixed policy; two deterministic reference
heuristics are shipped so the whole pipeline runs without a pretrained
model. External learned policies can be plugged in through PolicyHandle
as long as they provide `evaluate` (and `embed` for embedding mode).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .envs import AbrConfig, AbrState, CcConfig, CcState

RAW = "raw"
EMBEDDING = "embedding"


class PolicyError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    mode: str


@dataclass(frozen=True)
class PolicyHandle:
    id: str
    kind: str                        # "abr" or "cc"
    discrete_size: int | None        # None for continuous
    evaluate: Callable
    embed: Callable | None = None

    @property
    def is_discrete(self) -> bool:
        return self.discrete_size is not None


# Buffer-based ABR heuristic: lowest quality below the reservoir, highest
# above the cushion, linear index ramp in between.
ABR_RESERVOIR = 5.0
ABR_CUSHION = 10.0


def abr_reference_policy(state: AbrState, n_actions: int = 5) -> int:
    if state.buffer <= ABR_RESERVOIR:
        return 0
    if state.buffer >= ABR_CUSHION:
        return n_actions - 1
    frac = (state.buffer - ABR_RESERVOIR) / (ABR_CUSHION - ABR_RESERVOIR)
    return min(math.floor(frac * (n_actions - 1)), n_actions - 1)


# AIMD-style CC heuristic: back off on loss or queueing delay, otherwise probe.
CC_BACKOFF = -0.3
CC_PROBE = 0.1
CC_LATENCY_TRIGGER = 1.1


def cc_reference_policy(state: CcState) -> float:
    _, _, latency_ratio, loss = state.history[-1]
    if loss > 0 or latency_ratio > CC_LATENCY_TRIGGER:
        return CC_BACKOFF
    return CC_PROBE


def abr_policy_handle(config: AbrConfig | None = None) -> PolicyHandle:
    cfg = config or AbrConfig()
    return PolicyHandle(id="abr-bba", kind="abr", discrete_size=cfg.n_actions,
                        evaluate=lambda s: abr_reference_policy(s, cfg.n_actions))


def cc_policy_handle() -> PolicyHandle:
    return PolicyHandle(id="cc-aimd", kind="cc", discrete_size=None,
                        evaluate=cc_reference_policy)


def get_policy(policy_id: str, abr_config: AbrConfig | None = None) -> PolicyHandle:
    if policy_id == "abr-bba":
        return abr_policy_handle(abr_config)
    if policy_id == "cc-aimd":
        return cc_policy_handle()
    raise PolicyError(f"unknown policy {policy_id!r}")


# Fixed scaling constants for raw features; values are clamped so that any
# valid state maps into [0, 1] per entry.
ABR_CHUNK_SCALE = 16.0
ABR_TIME_SCALE = 10.0
CC_LATENCY_CLAMP = 5.0


def featurize_abr(state: AbrState, config: AbrConfig | None = None,
                  mode: str = RAW, policy: PolicyHandle | None = None) -> FeatureVector:
    if mode == EMBEDDING:
        return _embed(state, policy)
    cfg = config or AbrConfig()
    values = np.concatenate([
        np.clip(np.array(state.chunk_history) / ABR_CHUNK_SCALE, 0.0, 1.0),
        np.clip(np.array(state.time_history) / ABR_TIME_SCALE, 0.0, 1.0),
        [state.buffer / cfg.buffer_max,
         state.last_quality_index / (cfg.n_actions - 1)],
    ])
    return FeatureVector(values=values, mode=RAW)


def featurize_cc(state: CcState, config: CcConfig | None = None,
                 mode: str = RAW, policy: PolicyHandle | None = None) -> FeatureVector:
    if mode == EMBEDDING:
        return _embed(state, policy)
    cfg = config or CcConfig()
    hist = np.array(state.history)  # (k, 4): sent, delivered, lat ratio, loss
    sent = np.clip(hist[:, 0] / cfg.rate_max, 0.0, 1.0)
    delivered = np.clip(hist[:, 1] / cfg.rate_max, 0.0, 1.0)
    latency = (np.clip(hist[:, 2], 1.0, CC_LATENCY_CLAMP) - 1.0) / (CC_LATENCY_CLAMP - 1.0)
    loss = hist[:, 3]
    values = np.concatenate([
        np.stack([sent, delivered, latency, loss], axis=1).ravel(),
        [min(state.rate / cfg.rate_max, 1.0)],
    ])
    return FeatureVector(values=values, mode=RAW)


def featurize(state, mode: str = RAW, config=None, policy: PolicyHandle | None = None
              ) -> FeatureVector:
    if mode not in (RAW, EMBEDDING):
        raise PolicyError(f"unknown featurization mode {mode!r}")
    if isinstance(state, AbrState):
        return featurize_abr(state, config, mode, policy)
    if isinstance(state, CcState):
        return featurize_cc(state, config, mode, policy)
    raise PolicyError(f"cannot featurize {type(state).__name__}")


def _embed(state, policy: PolicyHandle | None) -> FeatureVector:
    if policy is None or policy.embed is None:
        raise PolicyError("embedding mode requires a policy that exposes embed")
    return FeatureVector(values=np.asarray(policy.embed(state), dtype=float),
                         mode=EMBEDDING)


def feature_length(kind: str, config=None) -> int:
    if kind == "abr":
        cfg = config or AbrConfig()
        return 2 * cfg.history_len + 2
    if kind == "cc":
        cfg = config or CcConfig()
        return 4 * cfg.history_len + 1
    raise PolicyError(f"unknown env kind {kind!r}")
