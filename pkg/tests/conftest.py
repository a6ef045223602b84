import numpy as np
import pytest

from futurelens.traces import ABR, CC, Trace, TraceSample, TraceSet


def make_trace(bws, dt=1.0, kind=ABR, trace_id="t", **extras):
    """Trace from a list of (segment) bandwidths, one every dt seconds."""
    samples = tuple(TraceSample(t=i * dt, bw_mbps=bw) for i, bw in enumerate(bws))
    if kind == CC:
        extras.setdefault("base_rtt_ms", 100.0)
        extras.setdefault("queue_pkts", 100)
        extras.setdefault("loss_rate", 0.0)
    return Trace(id=trace_id, kind=kind, samples=samples, **extras)


def constant_trace(bw, duration=100.0, dt=5.0, kind=ABR, trace_id="t", **extras):
    n = max(int(duration / dt), 2)
    return make_trace([bw] * n, dt=dt, kind=kind, trace_id=trace_id, **extras)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
