"""Loader benchmarking: discrete-event simulation plus a wall-clock harness.

Both drive the real PrefetchBuffer policy through a sequential playback loop
(one request per frame period). The simulated run uses a virtual clock and a
deterministic background-lane model, so stall counts and blocked times are
exact; the wall run uses real threads and real sleeps and reports measured
times.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass

from .playback import LatencyStore, MemoryFrameStore, PrefetchBuffer, ThreadedLoader, _Pending


@dataclass
class LoaderReport:
    mode: str
    frames: int
    latency_ms: float
    period_ms: float
    stalls: int
    blocked_ms: float
    loads_issued: int
    elapsed_ms: float

    def to_dict(self) -> dict:
        return asdict(self)


class SimulatedClock:
    def __init__(self):
        self.now = 0.0

    def advance(self, dt: float):
        self.now += dt

    def advance_to(self, t: float):
        self.now = max(self.now, t)


class SimulatedLoader:
    """Discrete-event model of one background lane.

    A load issued at time T completes at max(T, lane_free) + latency; finishing
    an incomplete load advances the virtual clock by the remaining wait, and a
    synchronous load advances it by the full latency.
    """

    def __init__(self, load_fn, latency_s: float, clock: SimulatedClock):
        self._load = load_fn
        self.latency_s = latency_s
        self.clock = clock
        self._lane_free = 0.0

    def start(self, index: int) -> _Pending:
        ready_at = max(self.clock.now, self._lane_free) + self.latency_s
        self._lane_free = ready_at
        return _Pending(index, ready_at)

    def ready(self, pending: _Pending) -> bool:
        return self.clock.now >= pending.handle

    def finish(self, pending: _Pending):
        blocked = max(0.0, pending.handle - self.clock.now)
        self.clock.advance(blocked)
        return self._load(pending.index), blocked

    def load_now(self, index: int):
        self.clock.advance(self.latency_s)
        return self._load(index), self.latency_s


def _playback_loop(buffer: PrefetchBuffer, frames: int, period_s: float, wait_until) -> None:
    for i in range(frames):
        wait_until(i * period_s)
        buffer.request_frame(i)


def run_simulated(frames: int, latency_s: float, period_s: float, mode: str,
                  store=None) -> LoaderReport:
    """Deterministic discrete-event playback; mode is 'sync' or 'async'.

    Latency lives entirely in the virtual clock, so a real store can be passed
    without its I/O time affecting the reported numbers.
    """
    clock = SimulatedClock()
    load = store.load if store is not None else (lambda i: i)
    loader = SimulatedLoader(load, latency_s, clock)
    buffer = PrefetchBuffer(loader, frames, prefetch=(mode == "async"))
    start = clock.now
    _playback_loop(buffer, frames, period_s, wait_until=clock.advance_to)
    return LoaderReport(
        mode=mode,
        frames=frames,
        latency_ms=latency_s * 1000.0,
        period_ms=period_s * 1000.0,
        stalls=buffer.stall_count,
        blocked_ms=buffer.blocked_seconds * 1000.0,
        loads_issued=buffer.loads_issued,
        elapsed_ms=(clock.now - start) * 1000.0,
    )


def run_wall(frames: int, latency_s: float, period_s: float, mode: str,
             store=None) -> LoaderReport:
    """Wall-clock playback with a real background thread and real sleeps."""
    if store is None:
        store = MemoryFrameStore({i: b"#" for i in range(frames)})
    store = LatencyStore(store, latency_s)
    with ThreadedLoader(store.load) as loader:
        buffer = PrefetchBuffer(loader, frames, prefetch=(mode == "async"))
        t0 = time.monotonic()

        def wait_until(offset: float):
            dt = (t0 + offset) - time.monotonic()
            if dt > 0:
                time.sleep(dt)

        _playback_loop(buffer, frames, period_s, wait_until)
        elapsed = time.monotonic() - t0
    return LoaderReport(
        mode=mode,
        frames=frames,
        latency_ms=latency_s * 1000.0,
        period_ms=period_s * 1000.0,
        stalls=buffer.stall_count,
        blocked_ms=buffer.blocked_seconds * 1000.0,
        loads_issued=buffer.loads_issued,
        elapsed_ms=elapsed * 1000.0,
    )


def speedup(baseline: LoaderReport, candidate: LoaderReport) -> float:
    """Blocked-time ratio of a sync baseline over a candidate run."""
    if candidate.blocked_ms <= 0:
        return float("inf")
    return baseline.blocked_ms / candidate.blocked_ms
