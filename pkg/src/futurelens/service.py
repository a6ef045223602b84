"""JSON-over-HTTP service for the operator UI: browse anchor states, query
per-action decomposed future return explanations, compare actions, and list
threshold alerts. The store is immutable once the app is built."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .envs import AbrState, CcState, ComponentSet
from .evalsuite import default_thresholds, detect_events
from .policies import PolicyHandle, featurize
from .predictor import PredictorModel, predict
from .rollouts import RolloutConfig, encode_action, make_env
from .sampling import (ClusterModel, SamplerConfig, distribution_aware_estimate,
                       naive_estimate)
from .traces import TraceSet

METHODS = ("predictor", "naive", "dist-aware")


@dataclass(frozen=True)
class StateRecord:
    id: str
    trace_id: str
    anchor: int
    anchor_time: float
    snapshot: object
    state: object
    features: np.ndarray
    policy_action: object
    history: dict


@dataclass
class SessionStore:
    kind: str
    policy: PolicyHandle
    model: PredictorModel
    holdout: TraceSet
    train_traces: TraceSet | None = None
    clusters: ClusterModel | None = None
    env_config: object = None
    rollout_config: RolloutConfig = field(default_factory=RolloutConfig)
    sampler_config: SamplerConfig = field(default_factory=SamplerConfig)
    thresholds: dict | None = None
    max_states: int = 200
    states: dict[str, StateRecord] = field(default_factory=dict)

    def __post_init__(self):
        if self.thresholds is None:
            self.thresholds = default_thresholds(self.kind)
        if not self.states:
            self._build_index()

    @property
    def component_set(self) -> ComponentSet:
        return self.model.component_set

    def _build_index(self):
        """Materialize browsable anchor states by walking the held-out traces
        on-policy, exactly like the evaluation does."""
        count = 0
        for trace in self.holdout:
            env = make_env(self.kind, self.env_config)
            env.reset(trace)
            step = 0
            done = False
            while not done and count < self.max_states:
                if step % self.rollout_config.spacing == 0:
                    snap = env.snapshot()
                    state = snap.state  # deep copy, safe to keep across steps
                    sid = f"s-{count:04d}"
                    self.states[sid] = StateRecord(
                        id=sid, trace_id=trace.id, anchor=step,
                        anchor_time=state.cursor,
                        snapshot=snap, state=state,
                        features=featurize(state, config=self.env_config).values,
                        policy_action=self.policy.evaluate(state),
                        history=_render_history(state),
                    )
                    count += 1
                done = env.step(self.policy.evaluate(env.state)).done
                step += 1
            if count >= self.max_states:
                break

    def actions_for(self, rec: StateRecord) -> list:
        if self.policy.is_discrete:
            return list(range(self.policy.discrete_size))
        return [-0.5, 0.0, 0.5]

    def explain(self, rec: StateRecord, action, method: str) -> dict:
        self._check_action(action)
        t0 = time.perf_counter()
        if method == "predictor":
            exp = predict(self.model, rec.features,
                          encode_action(self.policy, action), action=action)
            means, stds = exp.means, exp.stds
        elif method == "naive":
            self._require_sampler()
            means, ind = naive_estimate(rec.snapshot, self.policy, self.train_traces,
                                        action, self.sampler_config,
                                        return_individuals=True)
            stds = np.std(ind, axis=0)
        elif method == "dist-aware":
            self._require_sampler()
            if self.clusters is None:
                raise HTTPException(409, detail="no cluster model loaded")
            means, ind = distribution_aware_estimate(
                rec.snapshot, rec.state, self.policy, self.clusters,
                self.train_traces, action, self.sampler_config,
                return_individuals=True)
            stds = np.std(ind, axis=0)
        else:
            raise HTTPException(422, detail=f"unknown method {method!r}")
        latency_ms = (time.perf_counter() - t0) * 1000.0
        cs = self.component_set
        flags = detect_events(means, cs, self.thresholds)
        return {
            "state_id": rec.id,
            "action": action,
            "method": method,
            "components": list(cs.names),
            "means": [float(m) for m in means],
            "stds": [float(s) for s in stds],
            "total": float(np.dot(cs.weights, means)),
            "event_flags": {name: bool(f) for name, f in zip(cs.names, flags)},
            "latency_ms": latency_ms,
        }

    def _require_sampler(self):
        if self.train_traces is None or len(self.train_traces) == 0:
            raise HTTPException(409, detail="sampling methods need training traces")

    def _check_action(self, action):
        if self.policy.is_discrete:
            if not isinstance(action, int) or not 0 <= action < self.policy.discrete_size:
                raise HTTPException(
                    422, detail=f"action must be an integer in [0, {self.policy.discrete_size})")
        else:
            if not isinstance(action, (int, float)) or not -1.0 <= action <= 1.0:
                raise HTTPException(422, detail="action must be a number in [-1, 1]")


def _render_history(state) -> dict:
    if isinstance(state, AbrState):
        return {"chunk_mbits": list(state.chunk_history),
                "transmission_s": list(state.time_history),
                "buffer_s": state.buffer,
                "last_quality_index": state.last_quality_index}
    if isinstance(state, CcState):
        hist = np.array(state.history)
        return {"sent_mbps": hist[:, 0].tolist(),
                "delivered_mbps": hist[:, 1].tolist(),
                "latency_ratio": hist[:, 2].tolist(),
                "loss_fraction": hist[:, 3].tolist(),
                "rate_mbps": state.rate}
    return {}


class ExplainRequest(BaseModel):
    state_id: str
    action: int | float
    method: str = "predictor"


class CompareRequest(BaseModel):
    state_id: str
    actions: list[int | float]
    method: str = "predictor"


def build_app(store: SessionStore, static_dir=None) -> FastAPI:
    app = FastAPI(title="futurelens")

    def get_state(state_id: str) -> StateRecord:
        rec = store.states.get(state_id)
        if rec is None:
            raise HTTPException(404, detail=f"unknown state id {state_id!r}")
        return rec

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    @app.get("/api/components")
    def components():
        cs = store.component_set
        return {"kind": store.kind, "names": list(cs.names),
                "weights": list(cs.weights),
                "thresholds": store.thresholds,
                "methods": [m for m in METHODS
                            if m != "dist-aware" or store.clusters is not None]}

    @app.get("/api/states")
    def states(offset: int = 0, limit: int = 50):
        ids = sorted(store.states)
        page = ids[offset:offset + limit]
        return {"total": len(ids), "offset": offset,
                "states": [_state_summary(store.states[i], store) for i in page]}

    @app.get("/api/states/{state_id}")
    def state_detail(state_id: str):
        rec = get_state(state_id)
        out = _state_summary(rec, store)
        out["history"] = rec.history
        out["actions"] = store.actions_for(rec)
        return out

    @app.post("/api/explain")
    def explain(req: ExplainRequest):
        rec = get_state(req.state_id)
        action = _coerce_action(store, req.action)
        return store.explain(rec, action, req.method)

    @app.post("/api/compare")
    def compare(req: CompareRequest):
        rec = get_state(req.state_id)
        return {"state_id": rec.id,
                "responses": [store.explain(rec, _coerce_action(store, a), req.method)
                              for a in req.actions]}

    @app.get("/api/alerts")
    def alerts(method: str = "predictor"):
        out = []
        for sid in sorted(store.states):
            rec = store.states[sid]
            resp = store.explain(rec, rec.policy_action, method)
            flagged = [n for n, f in resp["event_flags"].items() if f]
            if flagged:
                out.append({"state_id": sid, "trace_id": rec.trace_id,
                            "anchor": rec.anchor, "flags": flagged})
        return {"method": method, "alerts": out}

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app


def _coerce_action(store: SessionStore, action):
    if store.policy.is_discrete and isinstance(action, float) and action.is_integer():
        return int(action)
    return action


def _state_summary(rec: StateRecord, store: SessionStore) -> dict:
    return {"id": rec.id, "trace_id": rec.trace_id, "anchor": rec.anchor,
            "anchor_time": rec.anchor_time, "policy_action": rec.policy_action}
