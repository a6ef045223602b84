"""Network condition traces: loading, synthesis, summary stats, and splits.

A trace is a piecewise-constant bandwidth time series. ABR traces carry only
the bandwidth samples; CC traces additionally carry link parameters
(base RTT, queue capacity, random loss rate).
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field

import numpy as np

ABR = "abr"
CC = "cc"


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class TraceSample:
    t: float          # seconds from trace start
    bw_mbps: float

    def __post_init__(self):
        if self.t < 0:
            raise TraceError(f"sample timestamp must be >= 0, got {self.t}")
        if self.bw_mbps <= 0:
            raise TraceError(f"bandwidth must be > 0, got {self.bw_mbps}")


@dataclass(frozen=True)
class Trace:
    id: str
    kind: str
    samples: tuple[TraceSample, ...]
    # cc-only link parameters
    base_rtt_ms: float | None = None
    queue_pkts: int | None = None
    loss_rate: float | None = None
    _times: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in (ABR, CC):
            raise TraceError(f"unknown trace kind {self.kind!r}")
        if not self.samples:
            raise TraceError(f"trace {self.id!r} has no samples")
        times = tuple(s.t for s in self.samples)
        for a, b in zip(times, times[1:]):
            if b <= a:
                raise TraceError(f"trace {self.id!r}: timestamps not strictly increasing")
        has_extras = self.base_rtt_ms is not None and self.queue_pkts is not None \
            and self.loss_rate is not None
        if self.kind == CC and not has_extras:
            raise TraceError(f"cc trace {self.id!r} missing base_rtt_ms/queue_pkts/loss_rate")
        if self.kind == ABR and (self.base_rtt_ms is not None or self.queue_pkts is not None
                                 or self.loss_rate is not None):
            raise TraceError(f"abr trace {self.id!r} must not carry cc extras")
        if self.loss_rate is not None and not 0 <= self.loss_rate <= 1:
            raise TraceError(f"trace {self.id!r}: loss_rate outside [0,1]")
        object.__setattr__(self, "_times", times)

    @property
    def duration(self) -> float:
        """End of trace. The last segment is as long as the one before it."""
        ts = self._times
        if len(ts) >= 2:
            return ts[-1] + (ts[-1] - ts[-2])
        return ts[-1] + 1.0

    def bandwidth_at(self, t: float) -> float:
        """Piecewise-constant lookup; the last sample extends past the end."""
        i = bisect.bisect_right(self._times, t) - 1
        return self.samples[max(i, 0)].bw_mbps

    def next_change_after(self, t: float) -> float:
        """Time of the next bandwidth change after t, or +inf."""
        i = bisect.bisect_right(self._times, t)
        return self._times[i] if i < len(self._times) else math.inf


@dataclass(frozen=True)
class TraceSet:
    traces: tuple[Trace, ...]
    kind: str
    provenance: str = "ingested"

    def __post_init__(self):
        ids = [t.id for t in self.traces]
        if len(set(ids)) != len(ids):
            raise TraceError("trace ids not unique")
        for t in self.traces:
            if t.kind != self.kind:
                raise TraceError(f"trace {t.id!r} kind {t.kind!r} != set kind {self.kind!r}")

    def __len__(self):
        return len(self.traces)

    def __iter__(self):
        return iter(self.traces)

    def by_id(self, trace_id: str) -> Trace:
        for t in self.traces:
            if t.id == trace_id:
                return t
        raise KeyError(trace_id)


@dataclass(frozen=True)
class TraceStats:
    mean_bw: float
    cov_bw: float      # population std / mean
    duration: float


@dataclass(frozen=True)
class CcTraceSpec:
    """Ranges for the four key link values plus bandwidth shape knobs."""
    mean_bw_mbps: tuple[float, float] = (1.0, 10.0)
    base_rtt_ms: tuple[float, float] = (20.0, 200.0)
    queue_pkts: tuple[int, int] = (10, 200)
    loss_rate: tuple[float, float] = (0.0, 0.02)
    segment_length: float = 5.0
    wander: float = 0.2
    duration: float = 60.0

    def __post_init__(self):
        for name in ("mean_bw_mbps", "base_rtt_ms", "queue_pkts", "loss_rate"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise TraceError(f"{name} range inverted: {lo} > {hi}")
            if lo < 0:
                raise TraceError(f"{name} min must be >= 0")
        if self.mean_bw_mbps[0] <= 0:
            raise TraceError("mean throughput min must be positive")
        if self.base_rtt_ms[0] <= 0:
            raise TraceError("base RTT min must be positive")
        if not 0 <= self.wander < 1:
            raise TraceError("wander must be in [0, 1)")
        if self.segment_length <= 0 or self.duration <= 0:
            raise TraceError("segment_length and duration must be positive")


def load_traces(path, kind: str) -> TraceSet:
    """Parse a JSONL trace file; one trace object per line."""
    traces = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise TraceError(f"{path}:{lineno}: malformed JSON ({e})") from e
            try:
                traces.append(_trace_from_obj(obj))
            except (TraceError, KeyError, TypeError) as e:
                raise TraceError(f"{path}:{lineno}: {e}") from e
            if traces[-1].kind != kind:
                raise TraceError(f"{path}:{lineno}: trace kind {traces[-1].kind!r}, expected {kind!r}")
    if not traces:
        raise TraceError(f"{path}: no traces")
    return TraceSet(traces=tuple(traces), kind=kind, provenance="ingested")


def save_traces(trace_set: TraceSet, path) -> None:
    with open(path, "w") as f:
        for t in trace_set:
            f.write(json.dumps(_trace_to_obj(t)) + "\n")


def _trace_from_obj(obj: dict) -> Trace:
    samples = tuple(TraceSample(t=float(s["t"]), bw_mbps=float(s["bw_mbps"]))
                    for s in obj["samples"])
    kwargs = {}
    if obj["kind"] == CC:
        kwargs = dict(base_rtt_ms=float(obj["base_rtt_ms"]),
                      queue_pkts=int(obj["queue_pkts"]),
                      loss_rate=float(obj["loss_rate"]))
    return Trace(id=str(obj["id"]), kind=str(obj["kind"]), samples=samples, **kwargs)


def _trace_to_obj(trace: Trace) -> dict:
    obj = {"id": trace.id, "kind": trace.kind,
           "samples": [{"t": s.t, "bw_mbps": s.bw_mbps} for s in trace.samples]}
    if trace.kind == CC:
        obj["base_rtt_ms"] = trace.base_rtt_ms
        obj["queue_pkts"] = trace.queue_pkts
        obj["loss_rate"] = trace.loss_rate
    return obj


def generate_cc_traces(spec: CcTraceSpec, n: int, seed: int) -> TraceSet:
    """Synthesize n traces, each defined by four key values drawn uniformly
    within the spec ranges, with piecewise-constant bandwidth segments that
    drift around the trace mean within the wander bound."""
    if n < 0:
        raise TraceError("n must be >= 0")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    traces = []
    n_segments = max(1, math.ceil(spec.duration / spec.segment_length))
    for i in range(n):
        mean_bw = rng.uniform(*spec.mean_bw_mbps)
        base_rtt = rng.uniform(*spec.base_rtt_ms)
        queue = int(rng.integers(spec.queue_pkts[0], spec.queue_pkts[1] + 1))
        loss = rng.uniform(*spec.loss_rate)
        drifts = rng.uniform(-spec.wander, spec.wander, size=n_segments)
        samples = tuple(
            TraceSample(t=j * spec.segment_length, bw_mbps=mean_bw * (1.0 + drifts[j]))
            for j in range(n_segments)
        )
        traces.append(Trace(id=f"cc-{seed}-{i:04d}", kind=CC, samples=samples,
                            base_rtt_ms=base_rtt, queue_pkts=queue, loss_rate=loss))
    return TraceSet(traces=tuple(traces), kind=CC, provenance="synthetic")


def generate_abr_traces(spec: CcTraceSpec, n: int, seed: int) -> TraceSet:
    """ABR variant of the synthetic generator: same bandwidth process, no
    link extras."""
    cc = generate_cc_traces(spec, n, seed)
    traces = tuple(
        Trace(id=f"abr-{seed}-{i:04d}", kind=ABR, samples=t.samples)
        for i, t in enumerate(cc)
    )
    return TraceSet(traces=traces, kind=ABR, provenance="synthetic")


def trace_stats(trace: Trace) -> TraceStats:
    bws = np.array([s.bw_mbps for s in trace.samples])
    mean = float(bws.mean())
    std = float(bws.std())  # population std: exact 0 for constant or single-sample
    return TraceStats(mean_bw=mean, cov_bw=std / mean, duration=trace.duration)


def split_holdout(trace_set: TraceSet, holdout_fraction: float, seed: int
                  ) -> tuple[TraceSet, TraceSet]:
    """Disjoint (train, holdout) partition, deterministic given seed."""
    if not 0 < holdout_fraction < 1:
        raise TraceError(f"holdout_fraction must be in (0, 1), got {holdout_fraction}")
    n = len(trace_set)
    if n < 2:
        raise TraceError("need at least 2 traces to split")
    n_holdout = min(max(round(holdout_fraction * n), 1), n - 1)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    order = rng.permutation(n)
    holdout_idx = set(order[:n_holdout].tolist())
    train = tuple(t for i, t in enumerate(trace_set) if i not in holdout_idx)
    holdout = tuple(t for i, t in enumerate(trace_set) if i in holdout_idx)
    return (TraceSet(train, trace_set.kind, trace_set.provenance),
            TraceSet(holdout, trace_set.kind, trace_set.provenance))
