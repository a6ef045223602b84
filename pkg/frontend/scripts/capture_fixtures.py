"""Capture JSON fixtures for the UI tests from a real in-process service.

Builds a small deterministic SessionStore, spins up the app with the FastAPI
test client, and dumps the exact response bodies the UI would receive. Rerun
after changing the service contract:

    python3 frontend/scripts/capture_fixtures.py
"""

import json
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[2] / "src"))

from fastapi.testclient import TestClient

from futurelens.envs import abr_component_set
from futurelens.policies import abr_policy_handle
from futurelens.predictor import TrainConfig, train
from futurelens.rollouts import RolloutConfig, collect, normalize_returns
from futurelens.sampling import SamplerConfig, fit_clusters
from futurelens.service import SessionStore, build_app
from futurelens.traces import Trace, TraceSample, TraceSet

OUT_DIR = pathlib.Path(__file__).resolve().parents[1] / "test" / "fixtures"


def make_trace(bws, dt, trace_id):
    samples = tuple(TraceSample(t=i * dt, bw_mbps=bw) for i, bw in enumerate(bws))
    return Trace(id=trace_id, kind="abr", samples=samples)


def build_client():
    train_traces = TraceSet((make_trace([1.5] * 20, 5.0, "z0"),
                             make_trace([8.0] * 20, 5.0, "z1"),
                             make_trace([0.4] * 20, 5.0, "z2")), "abr")
    samples = collect(train_traces, abr_policy_handle(), RolloutConfig(seed=0))
    normed, spec = normalize_returns(samples)
    model = train(normed, spec, abr_component_set(),
                  TrainConfig(stage1_epochs=3, stage2_epochs=1, seed=2)).model
    holdout = TraceSet((make_trace([3.0, 0.3, 5.0] * 12, 5.0, "h0"),), "abr")
    store = SessionStore(kind="abr", policy=abr_policy_handle(), model=model,
                         holdout=holdout, train_traces=train_traces,
                         clusters=fit_clusters(train_traces, k=2, seed=0),
                         sampler_config=SamplerConfig(n_samples=3, seed=0),
                         max_states=6)
    return TestClient(build_app(store))


def dump(name, doc):
    path = OUT_DIR / f"{name}.json"
    path.write_text(json.dumps(doc, indent=2) + "\n")
    print(f"wrote {path}")


def main():
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    client = build_client()

    dump("components", client.get("/api/components").json())
    states = client.get("/api/states").json()
    dump("states", states)
    dump("state_detail", client.get("/api/states/s-0000").json())
    dump("compare", client.post("/api/compare",
                                json={"state_id": "s-0000",
                                      "actions": [0, 2, 4],
                                      "method": "predictor"}).json())

    # factual explanations of two states, for the side-by-side scaling rule
    pair = {}
    for key, sid in (("a", "s-0000"), ("b", "s-0001")):
        action = next(s["policy_action"] for s in states["states"]
                      if s["id"] == sid)
        pair[key] = client.post("/api/compare",
                                json={"state_id": sid, "actions": [action],
                                      "method": "predictor"}).json()
    dump("compare_pair", pair)

    dump("alerts", client.get("/api/alerts?method=naive").json())

    # alerts and factual flags for every state, to cross-check badge membership
    factual = {}
    for s in states["states"]:
        resp = client.post("/api/explain",
                           json={"state_id": s["id"],
                                 "action": s["policy_action"],
                                 "method": "naive"}).json()
        factual[s["id"]] = resp
    dump("factual_explains", factual)

    missing = client.get("/api/states/s-9999")
    dump("error_404", {"status": missing.status_code, "body": missing.json()})


if __name__ == "__main__":
    main()
