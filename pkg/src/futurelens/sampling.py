"""Simulation-based return estimators: naive uniform future sampling and a
distribution-aware variant that conditions on the state's recent throughput
via k-means clusters over trace summary statistics."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .envs import AbrState, CcState, EnvSnapshot, graft_future
from .policies import PolicyHandle
from .rollouts import truncated_decomposed_return
from .traces import TraceSet, trace_stats

MAX_OFFSET_RETRIES = 16


class SamplingError(ValueError):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    n_samples: int = 20
    gamma: float = 0.9
    t_max: int = 5
    window: int = 4          # recent steps used to summarize observed inputs
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise SamplingError("n_samples must be >= 1")
        if self.window < 1:
            raise SamplingError("window must be >= 1")


@dataclass
class ClusterModel:
    centroids: np.ndarray          # (k, 2) in standardized (mean_bw, cov_bw) space
    feature_mean: np.ndarray
    feature_std: np.ndarray
    assignments: dict[str, int]    # trace id -> centroid index

    def standardize(self, features: np.ndarray) -> np.ndarray:
        return (np.asarray(features) - self.feature_mean) / self.feature_std

    def nearest(self, features: np.ndarray, extra_scale: np.ndarray | None = None
                ) -> int:
        """Index of the closest centroid. `extra_scale` widens each dimension
        by the sampling noise of the query summary, so a dimension whose
        across-trace spread is tiny cannot dominate a noisy observation."""
        if extra_scale is None:
            z = self.standardize(features)
            return int(np.argmin(((self.centroids - z) ** 2).sum(axis=1)))
        scale = np.sqrt(self.feature_std ** 2 + np.asarray(extra_scale) ** 2)
        q = (np.asarray(features) - self.feature_mean) / scale
        cz = self.centroids * (self.feature_std / scale)
        return int(np.argmin(((cz - q) ** 2).sum(axis=1)))

    def to_obj(self) -> dict:
        return {"centroids": self.centroids.tolist(),
                "feature_mean": self.feature_mean.tolist(),
                "feature_std": self.feature_std.tolist(),
                "assignments": self.assignments}

    @classmethod
    def from_obj(cls, obj: dict) -> "ClusterModel":
        return cls(centroids=np.array(obj["centroids"], dtype=float),
                   feature_mean=np.array(obj["feature_mean"], dtype=float),
                   feature_std=np.array(obj["feature_std"], dtype=float),
                   assignments={k: int(v) for k, v in obj["assignments"].items()})

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_obj(), f)

    @classmethod
    def load(cls, path) -> "ClusterModel":
        with open(path) as f:
            return cls.from_obj(json.load(f))


def _step_duration(snapshot: EnvSnapshot, trace) -> float:
    if snapshot.kind == "cc":
        return trace.base_rtt_ms / 1000.0
    return snapshot.config.chunk_seconds


def _one_rollout(snapshot: EnvSnapshot, policy: PolicyHandle, trace, offset,
                 action, config: SamplerConfig) -> np.ndarray:
    env = graft_future(snapshot, trace, offset)
    rewards = [env.step(action).reward_components]
    for _ in range(config.t_max - 1):
        if env.state.done:
            break
        rewards.append(env.step(policy.evaluate(env.state)).reward_components)
    return truncated_decomposed_return(rewards, config.gamma, config.t_max)


def _sample_offset(trace, snapshot, t_max, rng) -> float | None:
    # leave room for a full rollout horizon after the graft point
    step = _step_duration(snapshot, trace)
    hi = trace.duration - t_max * step
    if hi <= 0:
        return None
    return float(rng.uniform(0.0, hi))


def _estimate(snapshot, policy, traces, action, config, rng,
              return_individuals=False):
    individuals = []
    for _ in range(config.n_samples):
        offset = None
        for _ in range(MAX_OFFSET_RETRIES):
            trace = traces[rng.integers(len(traces))]
            offset = _sample_offset(trace, snapshot, config.t_max, rng)
            if offset is not None:
                break
        if offset is None:
            raise SamplingError("no sampled trace admits a full rollout horizon")
        individuals.append(_one_rollout(snapshot, policy, trace, offset, action, config))
    mean = np.mean(individuals, axis=0)
    if return_individuals:
        return mean, individuals
    return mean


def naive_estimate(snapshot: EnvSnapshot, policy: PolicyHandle, trace_set: TraceSet,
                   action, config: SamplerConfig, return_individuals=False):
    """Average truncated decomposed returns over futures grafted uniformly at
    random from the training traces."""
    if len(trace_set) == 0:
        raise SamplingError("empty trace set")
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    return _estimate(snapshot, policy, list(trace_set), action, config, rng,
                     return_individuals)


def fit_clusters(trace_set: TraceSet, k: int, seed: int) -> ClusterModel:
    """Lloyd's k-means with greedy ++-style seeding on standardized
    (mean bandwidth, coefficient of variation) trace summaries."""
    if k < 1:
        raise SamplingError("k must be >= 1")
    if k > len(trace_set):
        raise SamplingError(f"k={k} exceeds number of traces {len(trace_set)}")
    ids = [t.id for t in trace_set]
    stats = [trace_stats(t) for t in trace_set]
    feats = np.array([[s.mean_bw, s.cov_bw] for s in stats])
    mean = feats.mean(axis=0)
    std = feats.std(axis=0)
    std = np.where(std == 0, 1.0, std)
    z = (feats - mean) / std

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    centroids = _kmeans_pp(z, k, rng)
    labels = None
    for _ in range(100):
        d2 = ((z[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = z[labels == j]
            if len(members):
                centroids[j] = members.mean(axis=0)
    return ClusterModel(centroids=centroids, feature_mean=mean, feature_std=std,
                        assignments={i: int(l) for i, l in zip(ids, labels)})


def _kmeans_pp(z: np.ndarray, k: int, rng) -> np.ndarray:
    centroids = [z[rng.integers(len(z))]]
    for _ in range(1, k):
        d2 = np.min([(np.asarray(c) - z) ** 2 for c in centroids], axis=0).sum(axis=1)
        total = d2.sum()
        if total == 0:
            centroids.append(z[rng.integers(len(z))])
            continue
        probs = d2 / total
        centroids.append(z[rng.choice(len(z), p=probs)])
    return np.array(centroids, dtype=float)


def kmeans_objective(model: ClusterModel, trace_set: TraceSet) -> float:
    """Within-cluster sum of squared distances in standardized space."""
    total = 0.0
    for t in trace_set:
        s = trace_stats(t)
        z = model.standardize(np.array([s.mean_bw, s.cov_bw]))
        total += float(((z - model.centroids[model.assignments[t.id]]) ** 2).sum())
    return total


def state_input_summary(state, window: int) -> np.ndarray:
    """(mean, cov) of the observed recent throughput in a state's history."""
    if isinstance(state, AbrState):
        pairs = [(c, d) for c, d in zip(state.chunk_history, state.time_history)
                 if d > 0]
        values = [c / d for c, d in pairs[-window:]]
    elif isinstance(state, CcState):
        values = [h[1] for h in state.history if h[1] > 0][-window:]
    else:
        raise SamplingError(f"cannot summarize {type(state).__name__}")
    if not values:
        raise SamplingError("state has no observable recent inputs")
    arr = np.array(values)
    mean = float(arr.mean())
    cov = float(arr.std() / mean) if mean > 0 else 0.0
    return np.array([mean, cov])


def distribution_aware_estimate(snapshot: EnvSnapshot, state, policy: PolicyHandle,
                                model: ClusterModel, trace_set: TraceSet, action,
                                config: SamplerConfig, return_individuals=False):
    """Like naive_estimate, but futures are drawn only from the cluster nearest
    to the state's recent input summary."""
    if len(trace_set) == 0:
        raise SamplingError("empty trace set")
    try:
        summary = state_input_summary(state, config.window)
    except SamplingError:
        # nothing observed yet, so there is nothing to condition on
        rng = np.random.default_rng(np.random.SeedSequence(config.seed))
        return _estimate(snapshot, policy, list(trace_set), action, config, rng,
                         return_individuals)
    # a w-sample summary is noisy; widen the match metric accordingly
    noise = np.abs(summary) / math.sqrt(config.window)
    cluster = model.nearest(summary, extra_scale=noise)
    members = [t for t in trace_set if model.assignments.get(t.id) == cluster]
    if not members:
        warnings.warn(f"cluster {cluster} has no member traces; falling back to "
                      "nearest non-empty cluster")
        z = model.standardize(summary)
        order = np.argsort(((model.centroids - z) ** 2).sum(axis=1))
        for j in order:
            members = [t for t in trace_set if model.assignments.get(t.id) == j]
            if members:
                break
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    return _estimate(snapshot, policy, members, action, config, rng,
                     return_individuals)
