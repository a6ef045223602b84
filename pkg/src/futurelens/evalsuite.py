"""Evaluation machinery: fidelity of return estimates on held-out traces,
threshold-based event detection, dominant-component analysis for reward
tuning, and latency benchmarks."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .envs import ComponentSet, restore
from .policies import PolicyHandle, featurize
from .rollouts import (RolloutConfig, encode_action, make_env,
                       truncated_decomposed_return, NormalizationSpec)
from .sampling import (ClusterModel, SamplerConfig, distribution_aware_estimate,
                       naive_estimate)
from .predictor import PredictorModel, predict
from .traces import TraceSet

FACTUAL = "factual"
COUNTERFACTUAL = "counterfactual"

CC_QUERY_GRID = (-0.5, 0.0, 0.5)

# Default alert thresholds on truncated decomposed returns (event iff below).
ABR_THRESHOLDS = {"quality": 0.55, "quality_change": -0.1, "stalling": -0.25}
CC_THRESHOLDS = {"throughput": 0.3, "latency": -0.075, "loss": -0.1}


class EvalError(ValueError):
    pass


@dataclass(frozen=True)
class FidelityRecord:
    sq_errors: np.ndarray          # per component, in [0,1]-scaled space
    included: np.ndarray           # bool mask; degenerate components excluded
    flavor: str
    method: str
    trace_id: str = ""
    anchor: int = -1
    action: object = None


@dataclass(frozen=True)
class EventMetrics:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if (self.tp + self.fn) else 1.0

    @property
    def fpr(self) -> float:
        return self.fp / (self.fp + self.tn) if (self.fp + self.tn) else 0.0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def fidelity(predicted: np.ndarray, truth: np.ndarray, spec: NormalizationSpec,
             flavor: str = FACTUAL, method: str = "", **meta) -> FidelityRecord:
    """Per-component squared error after scaling both returns to [0, 1]."""
    predicted = np.asarray(predicted, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if predicted.shape != truth.shape:
        raise EvalError(f"component mismatch: {predicted.shape} vs {truth.shape}")
    p = spec.normalize(predicted)
    t = spec.normalize(truth)
    errs = (p - t) ** 2
    return FidelityRecord(sq_errors=errs, included=~spec.degenerate,
                          flavor=flavor, method=method, **meta)


def default_thresholds(kind: str) -> dict[str, float]:
    return dict(ABR_THRESHOLDS if kind == "abr" else CC_THRESHOLDS)


def detect_events(values: np.ndarray, component_set: ComponentSet,
                  thresholds: dict[str, float]) -> np.ndarray:
    """flag_c = value_c strictly below its threshold."""
    values = np.asarray(values, dtype=float)
    return np.array([values[i] < thresholds[name]
                     for i, name in enumerate(component_set.names)])


def event_metrics(predicted_flags, truth_flags) -> EventMetrics:
    p = np.asarray(predicted_flags, dtype=bool)
    t = np.asarray(truth_flags, dtype=bool)
    if p.shape != t.shape:
        raise EvalError("flag length mismatch")
    return EventMetrics(tp=int((p & t).sum()), fp=int((p & ~t).sum()),
                        tn=int((~p & ~t).sum()), fn=int((~p & t).sum()))


def dominant_component(means_a: np.ndarray, means_b: np.ndarray,
                       component_set: ComponentSet,
                       weighted: bool = False) -> str:
    """Component with the largest absolute difference between two
    explanations; ties break to the first in component order."""
    a = np.asarray(means_a, dtype=float)
    b = np.asarray(means_b, dtype=float)
    if a.shape != b.shape or len(a) != len(component_set.names):
        raise EvalError("component mismatch")
    diffs = np.abs(a - b)
    if weighted:
        diffs = diffs * np.asarray(component_set.weights)
    return component_set.names[int(np.argmax(diffs))]


# --- anchor-level evaluation over held-out traces -------------------------

@dataclass(frozen=True)
class Query:
    snapshot: object
    state: object
    features: np.ndarray
    action: object
    policy_action: object
    trace_id: str
    anchor: int
    truth: np.ndarray               # single-sample ground-truth return


def collect_queries(holdout: TraceSet, policy: PolicyHandle, flavor: str,
                    config: RolloutConfig, env_config=None,
                    max_anchors: int | None = None) -> list[Query]:
    """Walk each held-out trace on-policy; at every anchor, emit one query per
    action required by the flavor, each with its own ground-truth rollout."""
    queries: list[Query] = []
    anchors_seen = 0
    for trace in holdout:
        env = make_env(policy.kind, env_config)
        env.reset(trace)
        step = 0
        done = False
        while not done:
            if step % config.spacing == 0:
                if max_anchors is not None and anchors_seen >= max_anchors:
                    break
                anchors_seen += 1
                snap = env.snapshot()
                state = snap.state  # deep copy, frozen at the anchor
                feats = featurize(state, config=env_config).values
                pol_action = policy.evaluate(state)
                for action in _query_actions(policy, pol_action, flavor):
                    truth = _truth_rollout(snap, policy, action, config)
                    queries.append(Query(snapshot=snap, state=state, features=feats,
                                         action=action, policy_action=pol_action,
                                         trace_id=trace.id, anchor=step, truth=truth))
            done = env.step(policy.evaluate(env.state)).done
            step += 1
        if max_anchors is not None and anchors_seen >= max_anchors:
            break
    return queries


def _query_actions(policy: PolicyHandle, policy_action, flavor: str) -> list:
    if flavor == FACTUAL:
        return [policy_action]
    if flavor != COUNTERFACTUAL:
        raise EvalError(f"unknown flavor {flavor!r}")
    if policy.is_discrete:
        return [a for a in range(policy.discrete_size) if a != policy_action]
    nearest = min(CC_QUERY_GRID, key=lambda g: abs(g - policy_action))
    return [g for g in CC_QUERY_GRID if g != nearest]


def _truth_rollout(snapshot, policy: PolicyHandle, action, config: RolloutConfig
                   ) -> np.ndarray:
    env = restore(snapshot)
    rewards = [env.step(action).reward_components]
    for _ in range(config.t_max - 1):
        if env.state.done:
            break
        rewards.append(env.step(policy.evaluate(env.state)).reward_components)
    return truncated_decomposed_return(rewards, config.gamma, config.t_max)


def predictor_method(model: PredictorModel, policy: PolicyHandle):
    def fn(query: Query) -> np.ndarray:
        enc = encode_action(policy, query.action)
        return predict(model, query.features, enc, action=query.action).means
    fn.method_id = "predictor"
    return fn


def naive_method(train_set: TraceSet, policy: PolicyHandle, config: SamplerConfig):
    def fn(query: Query) -> np.ndarray:
        return naive_estimate(query.snapshot, policy, train_set, query.action, config)
    fn.method_id = "naive"
    return fn


def distribution_aware_method(model: ClusterModel, train_set: TraceSet,
                              policy: PolicyHandle, config: SamplerConfig):
    def fn(query: Query) -> np.ndarray:
        return distribution_aware_estimate(query.snapshot, query.state, policy,
                                           model, train_set, query.action, config)
    fn.method_id = "dist-aware"
    return fn


def evaluate_method(method_fn, queries: list[Query], spec: NormalizationSpec,
                    flavor: str) -> tuple[list[FidelityRecord], dict]:
    """Score a method on pre-collected queries; returns per-query fidelity
    records and per-component error quantiles."""
    if not queries:
        raise EvalError("no queries to evaluate")
    method_id = getattr(method_fn, "method_id", "method")
    records = []
    for q in queries:
        pred = method_fn(q)
        records.append(fidelity(pred, q.truth, spec, flavor=flavor,
                                method=method_id, trace_id=q.trace_id,
                                anchor=q.anchor, action=q.action))
    return records, summarize_records(records)


def summarize_records(records: list[FidelityRecord]) -> dict:
    errs = np.stack([r.sq_errors for r in records])
    included = records[0].included
    summary = {}
    n_components = errs.shape[1]
    for c in range(n_components):
        if not included[c]:
            summary[c] = None
            continue
        col = errs[:, c]
        summary[c] = {"p25": float(np.percentile(col, 25)),
                      "p50": float(np.percentile(col, 50)),
                      "p75": float(np.percentile(col, 75)),
                      "p95": float(np.percentile(col, 95)),
                      "mean": float(col.mean())}
    return summary


def latency_benchmark(fn, n_queries: int, warmup: int = 10) -> dict:
    """Wall-time stats for n_queries calls, excluding warmup calls."""
    if n_queries < 1:
        raise EvalError("n_queries must be >= 1")
    for _ in range(warmup):
        fn()
    times = []
    for _ in range(n_queries):
        t0 = time.perf_counter()
        fn()
        times.append((time.perf_counter() - t0) * 1000.0)
    arr = np.array(times)
    return {"p50": float(np.percentile(arr, 50)),
            "p95": float(np.percentile(arr, 95)),
            "mean": float(arr.mean()), "n": n_queries}


# --- reward-design sweep ---------------------------------------------------

@dataclass(frozen=True)
class SweepResult:
    stall_weight: float
    drop_favored: int              # states where dropping beats holding steady
    dominance: dict[str, int]      # among those, dominant component histogram


def reward_design_sweep(pairs: list[tuple[np.ndarray, np.ndarray]],
                        component_set: ComponentSet,
                        stall_weights: list[float]) -> list[SweepResult]:
    """For each stall weight, count the candidate states where the bitrate
    drop action's weighted return exceeds the steady action's, and tally the
    dominant component of those decisions (weighted differences)."""
    results = []
    names = component_set.names
    stall_idx = names.index("stalling")
    for w_s in stall_weights:
        weights = list(component_set.weights)
        weights[stall_idx] = w_s
        cs = ComponentSet(names, tuple(weights))
        favored = 0
        hist = {name: 0 for name in names}
        for drop_means, steady_means in pairs:
            if cs.total(drop_means) > cs.total(steady_means):
                favored += 1
                hist[dominant_component(drop_means, steady_means, cs,
                                        weighted=True)] += 1
        results.append(SweepResult(stall_weight=w_s, drop_favored=favored,
                                   dominance=hist))
    return results
