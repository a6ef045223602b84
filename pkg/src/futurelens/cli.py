"""Command-line driver for the whole pipeline: synthesize traces, split,
collect rollouts, train the predictor, evaluate fidelity, explain single
states, benchmark latency, and serve the operator UI."""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .envs import AbrConfig, CcConfig, abr_component_set, cc_component_set
from .evalsuite import (COUNTERFACTUAL, FACTUAL, collect_queries,
                        distribution_aware_method, evaluate_method,
                        latency_benchmark, naive_method, predictor_method,
                        summarize_records)
from .policies import get_policy
from .predictor import TrainConfig, load, predict, save, train
from .rollouts import (RolloutConfig, collect, encode_action, load_dataset,
                       normalize_returns, save_dataset)
from .sampling import SamplerConfig, fit_clusters
from .service import SessionStore, build_app
from .traces import (CcTraceSpec, generate_abr_traces, generate_cc_traces,
                     load_traces, save_traces, split_holdout)

EXIT_OK = 0
EXIT_USER_ERROR = 1
EXIT_INTERNAL = 2


def component_set_for(kind: str, stall_weight: float = 4.0):
    return abr_component_set(stall_weight) if kind == "abr" else cc_component_set()


def env_config_for(kind: str):
    return AbrConfig() if kind == "abr" else CcConfig()


def _emit(args, obj, human: str | None = None):
    if getattr(args, "json", False):
        print(json.dumps(obj))
    else:
        print(human if human is not None else json.dumps(obj, indent=2))


def cmd_gen_traces(args) -> int:
    spec = CcTraceSpec(duration=args.duration, segment_length=args.segment_length)
    gen = generate_cc_traces if args.kind == "cc" else generate_abr_traces
    ts = gen(spec, args.n, args.seed)
    save_traces(ts, args.out)
    _emit(args, {"traces": len(ts), "path": args.out},
          f"wrote {len(ts)} {args.kind} traces to {args.out}")
    return EXIT_OK


def cmd_split(args) -> int:
    ts = load_traces(args.traces, args.kind)
    train_set, holdout = split_holdout(ts, args.fraction, args.seed)
    save_traces(train_set, args.train_out)
    save_traces(holdout, args.holdout_out)
    _emit(args, {"train": len(train_set), "holdout": len(holdout)},
          f"split {len(ts)} traces into {len(train_set)} train / {len(holdout)} holdout")
    return EXIT_OK


def cmd_rollout(args) -> int:
    ts = load_traces(args.traces, args.kind)
    policy = get_policy(args.policy)
    config = RolloutConfig(gamma=args.gamma, t_max=args.t_max, spacing=args.spacing,
                           exploratory_fraction=args.exploratory_fraction,
                           seed=args.seed)
    samples = collect(ts, policy, config, env_config=env_config_for(args.kind))
    normed, spec = normalize_returns(samples)
    save_dataset(normed, spec, config, args.out)
    _emit(args, {"samples": len(normed), "path": args.out},
          f"collected {len(normed)} samples into {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    samples, spec, _ = load_dataset(args.data)
    config = TrainConfig(stage1_lr=args.lr, stage1_epochs=args.epochs,
                         stage2_lr=args.stage2_lr, stage2_epochs=args.stage2_epochs,
                         batch_size=args.batch_size, seed=args.seed)
    result = train(samples, spec, component_set_for(args.kind), config)
    save(result.model, args.out)
    _emit(args, {"path": args.out,
                 "stage1_final_loss": result.stage1_losses[-1],
                 "stage2_final_loss": (result.stage2_losses[-1]
                                       if result.stage2_losses else None)},
          f"trained predictor saved to {args.out} "
          f"(final stage-1 loss {result.stage1_losses[-1]:.4f})")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    holdout = load_traces(args.holdout, args.kind)
    policy = get_policy(args.policy)
    rcfg = RolloutConfig(gamma=args.gamma, t_max=args.t_max, spacing=args.spacing,
                         seed=args.seed)
    env_config = env_config_for(args.kind)
    queries = collect_queries(holdout, policy, args.flavor, rcfg,
                              env_config=env_config, max_anchors=args.max_anchors)
    model = load(args.model)
    if args.method == "predictor":
        fn = predictor_method(model, policy)
    else:
        train_set = load_traces(args.train_traces, args.kind)
        scfg = SamplerConfig(n_samples=args.n_samples, gamma=args.gamma,
                             t_max=args.t_max, seed=args.seed)
        if args.method == "naive":
            fn = naive_method(train_set, policy, scfg)
        else:
            clusters = fit_clusters(train_set, k=min(args.k, len(train_set)),
                                    seed=args.seed)
            fn = distribution_aware_method(clusters, train_set, policy, scfg)
    records, summary = evaluate_method(fn, queries, model.normalization, args.flavor)
    names = model.component_set.names
    if args.csv:
        with open(args.csv, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["method", "component", "flavor", "sq_error"])
            for r in records:
                for c, name in enumerate(names):
                    if r.included[c]:
                        w.writerow([r.method, name, r.flavor, r.sq_errors[c]])
    _emit(args, {"method": args.method, "flavor": args.flavor,
                 "queries": len(records),
                 "summary": {names[c]: s for c, s in summary.items()}},
          "\n".join(f"{names[c]:>16}: median sq_error "
                    f"{s['p50']:.6f} (p95 {s['p95']:.6f})"
                    for c, s in summary.items() if s))
    return EXIT_OK


def cmd_explain(args) -> int:
    model = load(args.model)
    holdout = load_traces(args.traces, args.kind)
    policy = get_policy(args.policy)
    store = SessionStore(kind=args.kind, policy=policy, model=model,
                         holdout=holdout, env_config=env_config_for(args.kind),
                         max_states=args.state_index + 1)
    sid = f"s-{args.state_index:04d}"
    rec = store.states.get(sid)
    if rec is None:
        print(f"error: no state at index {args.state_index}", file=sys.stderr)
        return EXIT_USER_ERROR
    action = int(args.action) if policy.is_discrete else float(args.action)
    resp = store.explain(rec, action, "predictor")
    _emit(args, resp,
          "\n".join([f"state {sid} (trace {rec.trace_id}, anchor {rec.anchor})"] +
                    [f"{n:>16}: {m:+.4f} (std {s:.4f})"
                     for n, m, s in zip(resp["components"], resp["means"],
                                        resp["stds"])] +
                    [f"{'total':>16}: {resp['total']:+.4f}"]))
    return EXIT_OK


def cmd_bench(args) -> int:
    model = load(args.model)
    policy = get_policy(args.policy)
    rng = np.random.default_rng(args.seed)
    feats = rng.uniform(0, 1, model.feature_dim)
    if policy.is_discrete:
        enc = encode_action(policy, 0)
    else:
        enc = encode_action(policy, 0.0)
    stats = latency_benchmark(lambda: predict(model, feats, enc), args.n)
    _emit(args, {"predictor": stats},
          f"predictor latency: p50 {stats['p50']:.3f} ms, "
          f"p95 {stats['p95']:.3f} ms over {args.n} queries")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    model = load(args.model)
    policy = get_policy(args.policy)
    holdout = load_traces(args.holdout, args.kind)
    train_set = load_traces(args.train_traces, args.kind) if args.train_traces else None
    clusters = None
    if train_set is not None and len(train_set) >= args.k:
        clusters = fit_clusters(train_set, k=args.k, seed=args.seed)
    store = SessionStore(kind=args.kind, policy=policy, model=model,
                         holdout=holdout, train_traces=train_set, clusters=clusters,
                         env_config=env_config_for(args.kind),
                         max_states=args.max_states)
    host, _, port = args.bind.partition(":")
    app = build_app(store, static_dir=args.static_dir)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="futurelens")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, kind=True, seed=True, as_json=True):
        if kind:
            sp.add_argument("--kind", choices=["abr", "cc"], required=True)
        if seed:
            sp.add_argument("--seed", type=int, default=0)
        if as_json:
            sp.add_argument("--json", action="store_true",
                            help="machine-readable output")

    sp = sub.add_parser("gen-traces", help="synthesize traces")
    common(sp)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--duration", type=float, default=60.0)
    sp.add_argument("--segment-length", type=float, default=5.0)
    sp.add_argument("-o", "--out", required=True)
    sp.set_defaults(fn=cmd_gen_traces)

    sp = sub.add_parser("split", help="train/holdout split")
    common(sp)
    sp.add_argument("--traces", required=True)
    sp.add_argument("--fraction", type=float, default=0.2)
    sp.add_argument("--train-out", required=True)
    sp.add_argument("--holdout-out", required=True)
    sp.set_defaults(fn=cmd_split)

    sp = sub.add_parser("rollout", help="collect decomposed-return samples")
    common(sp)
    sp.add_argument("--traces", required=True)
    sp.add_argument("--policy", default=None)
    sp.add_argument("--gamma", type=float, default=0.9)
    sp.add_argument("--t-max", type=int, default=5)
    sp.add_argument("--spacing", type=int, default=5)
    sp.add_argument("--exploratory-fraction", type=float, default=0.5)
    sp.add_argument("-o", "--out", required=True)
    sp.set_defaults(fn=cmd_rollout)

    sp = sub.add_parser("train", help="train the predictor")
    common(sp)
    sp.add_argument("--data", required=True)
    sp.add_argument("--lr", type=float, default=0.02)
    sp.add_argument("--epochs", type=int, default=60)
    sp.add_argument("--stage2-lr", type=float, default=1e-3)
    sp.add_argument("--stage2-epochs", type=int, default=10)
    sp.add_argument("--batch-size", type=int, default=64)
    sp.add_argument("-o", "--out", required=True)
    sp.set_defaults(fn=cmd_train)

    sp = sub.add_parser("evaluate", help="fidelity evaluation on held-out traces")
    common(sp)
    sp.add_argument("--method", choices=["predictor", "naive", "dist-aware"],
                    required=True)
    sp.add_argument("--holdout", required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--train-traces")
    sp.add_argument("--policy", default=None)
    sp.add_argument("--flavor", choices=[FACTUAL, COUNTERFACTUAL], default=FACTUAL)
    sp.add_argument("--gamma", type=float, default=0.9)
    sp.add_argument("--t-max", type=int, default=5)
    sp.add_argument("--spacing", type=int, default=5)
    sp.add_argument("--max-anchors", type=int, default=None)
    sp.add_argument("--n-samples", type=int, default=20)
    sp.add_argument("--k", type=int, default=8)
    sp.add_argument("--csv")
    sp.set_defaults(fn=cmd_evaluate)

    sp = sub.add_parser("explain", help="explain one browsable state")
    common(sp)
    sp.add_argument("--model", required=True)
    sp.add_argument("--traces", required=True)
    sp.add_argument("--policy", default=None)
    sp.add_argument("--state-index", type=int, default=0)
    sp.add_argument("--action", required=True)
    sp.set_defaults(fn=cmd_explain)

    sp = sub.add_parser("bench", help="predictor latency benchmark")
    common(sp, kind=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--policy", default=None)
    sp.add_argument("--n", type=int, default=200)
    sp.set_defaults(fn=cmd_bench)

    sp = sub.add_parser("serve", help="run the JSON service")
    common(sp)
    sp.add_argument("--model", required=True)
    sp.add_argument("--holdout", required=True)
    sp.add_argument("--train-traces")
    sp.add_argument("--policy", default=None)
    sp.add_argument("--k", type=int, default=8)
    sp.add_argument("--max-states", type=int, default=200)
    sp.add_argument("--static-dir", default=None)
    sp.add_argument("--bind", default="127.0.0.1:8000")
    sp.set_defaults(fn=cmd_serve)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USER_ERROR if e.code else EXIT_OK
    if getattr(args, "policy", "missing") is None:
        args.policy = "abr-bba" if args.kind == "abr" else "cc-aimd"
    try:
        return args.fn(args)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USER_ERROR
    except Exception as e:  # noqa: BLE001 - last-resort guard for exit code 2
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
