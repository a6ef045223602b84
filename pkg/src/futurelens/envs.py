"""Trace-driven simulators with decomposed per-step rewards.

Two environments share one interface:
  * AbrEnv: chunked video streaming, discrete quality actions.
  * CcEnv:  rate control over monitor intervals, continuous rate-delta actions.

Both support snapshot/restore and future-trace grafting so that sampling
estimators can branch alternate futures from any reached state.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np

from .traces import ABR, CC, Trace

PACKET_MBITS = 1500 * 8 / 1e6   # 1500-byte packets


class EnvError(ValueError):
    pass


@dataclass(frozen=True)
class ComponentSet:
    names: tuple[str, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.names) != len(self.weights):
            raise EnvError("component names/weights length mismatch")

    def total(self, components) -> float:
        return float(sum(w * c for w, c in zip(self.weights, components)))


ABR_COMPONENTS = ("quality", "quality_change", "stalling")
CC_COMPONENTS = ("throughput", "latency", "loss")


def abr_component_set(stall_weight: float = 4.0) -> ComponentSet:
    return ComponentSet(ABR_COMPONENTS, (1.0, 1.0, stall_weight))


def cc_component_set() -> ComponentSet:
    return ComponentSet(CC_COMPONENTS, (1.0, 1.0, 1.0))


@dataclass(frozen=True)
class AbrConfig:
    chunk_mbits: tuple[float, ...] = (1.0, 2.5, 5.0, 8.0, 16.0)
    chunk_seconds: float = 4.0
    buffer_max: float = 15.0
    history_len: int = 8
    stall_weight: float = 4.0

    @property
    def n_actions(self) -> int:
        return len(self.chunk_mbits)

    def quality(self, index: int) -> float:
        return index / (self.n_actions - 1)

    def component_set(self) -> ComponentSet:
        return abr_component_set(self.stall_weight)


@dataclass(frozen=True)
class CcConfig:
    history_len: int = 8
    start_rate: float = 2.0
    rate_min: float = 0.1
    rate_max: float = 50.0
    bw_cap_ref: float = 10.0    # reference bandwidth for the throughput component

    def component_set(self) -> ComponentSet:
        return cc_component_set()


@dataclass
class StepOutcome:
    reward_components: np.ndarray
    reward_total: float
    done: bool


@dataclass
class AbrState:
    chunk_history: list[float]      # last k chunk sizes, Mb
    time_history: list[float]       # last k transmission times, s
    buffer: float
    last_quality_index: int
    cursor: float
    done: bool = False


@dataclass
class CcState:
    history: list[tuple[float, float, float, float]]  # (sent, delivered, lat ratio, loss)
    rate: float
    cursor: float
    queue_mbits: float = 0.0
    done: bool = False


@dataclass
class EnvSnapshot:
    """Opaque full copy of an environment, including its trace binding."""
    kind: str
    config: object
    trace: Trace
    state: object


class AbrEnv:
    kind = ABR

    def __init__(self, config: AbrConfig | None = None):
        self.config = config or AbrConfig()
        self.trace: Trace | None = None
        self.state: AbrState | None = None

    def reset(self, trace: Trace) -> AbrState:
        # cc traces are accepted; their link extras are simply unused
        cfg = self.config
        first_chunk = cfg.chunk_mbits[0] / trace.bandwidth_at(0.0)
        if trace.duration < first_chunk:
            raise EnvError(f"trace {trace.id!r} too short for a single chunk download")
        self.trace = trace
        self.state = AbrState(
            chunk_history=[0.0] * cfg.history_len,
            time_history=[0.0] * cfg.history_len,
            buffer=0.0,
            last_quality_index=0,
            cursor=0.0,
        )
        return self.state

    def step(self, action: int) -> StepOutcome:
        cfg, st, trace = self.config, self.state, self.trace
        if st is None:
            raise EnvError("step before reset")
        if st.done:
            raise EnvError("step after episode end")
        if not 0 <= action < cfg.n_actions:
            raise EnvError(f"action {action} out of range [0, {cfg.n_actions})")

        chunk = cfg.chunk_mbits[action]
        d = self._download_time(chunk, st.cursor)
        stall = max(0.0, d - st.buffer)
        new_buffer = min(cfg.buffer_max, max(st.buffer - d, 0.0) + cfg.chunk_seconds)

        q = cfg.quality(action)
        q_prev = cfg.quality(st.last_quality_index)
        components = np.array([q, -abs(q - q_prev), -stall])

        st.chunk_history = st.chunk_history[1:] + [chunk]
        st.time_history = st.time_history[1:] + [d]
        st.buffer = new_buffer
        st.last_quality_index = action
        st.cursor += d
        st.done = st.cursor >= trace.duration

        cs = cfg.component_set()
        return StepOutcome(components, cs.total(components), st.done)

    def _download_time(self, mbits: float, start: float) -> float:
        """Integrate the chunk against piecewise-constant bandwidth."""
        trace = self.trace
        remaining = mbits
        t = start
        while True:
            bw = trace.bandwidth_at(t)
            seg_end = trace.next_change_after(t)
            if seg_end == math.inf or remaining <= bw * (seg_end - t):
                return (t - start) + remaining / bw
            remaining -= bw * (seg_end - t)
            t = seg_end

    def snapshot(self) -> EnvSnapshot:
        if self.state is None:
            raise EnvError("snapshot before reset")
        return EnvSnapshot(self.kind, self.config, self.trace, copy.deepcopy(self.state))


class CcEnv:
    kind = CC

    def __init__(self, config: CcConfig | None = None):
        self.config = config or CcConfig()
        self.trace: Trace | None = None
        self.state: CcState | None = None

    def reset(self, trace: Trace) -> CcState:
        if trace.kind != CC:
            raise EnvError(f"cc env needs a cc trace, got kind {trace.kind!r}")
        if trace.duration <= 0:
            raise EnvError("empty trace")
        cfg = self.config
        self.trace = trace
        self.state = CcState(
            history=[(0.0, 0.0, 1.0, 0.0)] * cfg.history_len,
            rate=cfg.start_rate,
            cursor=0.0,
        )
        return self.state

    @property
    def monitor_interval(self) -> float:
        return self.trace.base_rtt_ms / 1000.0

    def step(self, action: float) -> StepOutcome:
        cfg, st, trace = self.config, self.state, self.trace
        if st is None:
            raise EnvError("step before reset")
        if st.done:
            raise EnvError("step after episode end")
        if not -1.0 <= action <= 1.0:
            raise EnvError(f"rate delta {action} outside [-1, 1]")

        mi = self.monitor_interval
        base_rtt = trace.base_rtt_ms / 1000.0
        rate = min(max(st.rate * (1.0 + action), cfg.rate_min), cfg.rate_max)
        bw = trace.bandwidth_at(st.cursor)
        delivered = min(rate, bw)

        # bottleneck queue in Mb: fills with excess arrivals, drains at line
        # rate, overflow beyond capacity is lost
        capacity = trace.queue_pkts * PACKET_MBITS
        queue = max(0.0, st.queue_mbits + (rate - bw) * mi)
        overflow = max(0.0, queue - capacity)
        queue = min(queue, capacity)

        sent = rate * mi
        loss_frac = overflow / sent if sent > 0 else 0.0
        loss_frac = min(1.0, loss_frac + trace.loss_rate)  # expected random loss
        latency = base_rtt * (1.0 + queue / (bw * mi))
        latency_ratio = latency / base_rtt

        components = np.array([
            delivered / cfg.bw_cap_ref,
            -(latency - base_rtt) / base_rtt,
            -loss_frac,
        ])

        st.queue_mbits = queue
        st.history = st.history[1:] + [(rate, delivered, latency_ratio, loss_frac)]
        st.rate = rate
        st.cursor += mi
        st.done = st.cursor >= trace.duration

        cs = cfg.component_set()
        return StepOutcome(components, cs.total(components), st.done)

    def snapshot(self) -> EnvSnapshot:
        if self.state is None:
            raise EnvError("snapshot before reset")
        return EnvSnapshot(self.kind, self.config, self.trace, copy.deepcopy(self.state))


def restore(snapshot: EnvSnapshot):
    """Rebuild an independent environment from a snapshot."""
    if snapshot.kind == ABR:
        env = AbrEnv(snapshot.config)
    elif snapshot.kind == CC:
        env = CcEnv(snapshot.config)
    else:
        raise EnvError(f"corrupted snapshot: kind {snapshot.kind!r}")
    env.trace = snapshot.trace
    env.state = copy.deepcopy(snapshot.state)
    return env


def graft_future(snapshot: EnvSnapshot, trace: Trace, offset: float):
    """Restore an environment whose future bandwidth lookups read `trace`
    starting at `offset`; all controller-side state is kept."""
    if snapshot.kind == CC and trace.kind != CC:
        raise EnvError("cannot graft a non-cc trace into a cc environment")
    if not 0 <= offset < trace.duration:
        raise EnvError(f"graft offset {offset} outside trace duration {trace.duration}")
    env = restore(snapshot)
    env.trace = trace
    env.state.cursor = offset
    return env
