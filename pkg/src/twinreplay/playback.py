"""Replay state machine and the two-slot asynchronous frame prefetcher.

The animation clock is decoupled from the render rate: media_time advances by
wall-clock deltas and maps to a frame index through frame_index_at, so a 90 Hz
display simply shows each 30 fps frame three times.

Prefetching keeps exactly two decoded frames around, the current one and the
next, filled by a single background lane. Under sequential playback whose
per-frame load latency stays below the frame period, only the very first
request blocks; a synchronous baseline blocks on every frame. The buffer
counts stalls (requests that blocked) and accumulated blocked seconds, which is
what benchmarks and acceptance checks assert on.

Concurrency: one consumer plus one background loader per session. The consumer
observes a pending load either unfinished or complete, never a partially
decoded frame (handoff is at future granularity). Everything also runs
single-threaded under the simulated loader in bench.py for deterministic
discrete-event tests.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

from .scene import SceneManifest


def frame_index_at(media_time, anim_fps, frame_count: int, loop_mode: bool) -> int:
    """Frame shown at a media time: floor(media_time * anim_fps), wrapped when
    looping, clamped to the last frame otherwise. Pure; exact for exact inputs
    (Fractions pass through without float rounding)."""
    raw = math.floor(media_time * anim_fps)
    if loop_mode:
        return raw % frame_count
    return min(max(raw, 0), frame_count - 1)


@dataclass(frozen=True)
class PlaybackState:
    """Immutable playback snapshot; state transitions return new values."""

    playing: bool
    media_time: float
    loop_mode: bool
    visibility: dict[str, bool]
    anim_fps: float
    frame_count: int

    @property
    def end_time(self) -> float:
        """Start time of the last frame; media_time clamps here when not looping."""
        return (self.frame_count - 1) / self.anim_fps


def initial_state(manifest: SceneManifest, *, loop_mode: bool = False,
                  playing: bool = False) -> PlaybackState:
    return PlaybackState(
        playing=playing,
        media_time=0.0,
        loop_mode=loop_mode,
        visibility={e.id: e.initially_visible for e in manifest.entities},
        anim_fps=manifest.anim_fps,
        frame_count=manifest.frame_count,
    )


def _bound_time(t, state: PlaybackState):
    if state.loop_mode:
        return t % (state.frame_count / state.anim_fps)
    return min(max(t, 0), state.end_time)


def advance(state: PlaybackState, wall_dt) -> PlaybackState:
    """Advance the media clock by a wall-clock delta; paused states are unchanged."""
    if wall_dt < 0:
        raise ValueError("wall_dt must be non-negative")
    if not state.playing:
        return state
    return replace(state, media_time=_bound_time(state.media_time + wall_dt, state))


def seek(state: PlaybackState, media_time) -> PlaybackState:
    return replace(state, media_time=_bound_time(media_time, state))


def set_playing(state: PlaybackState, playing: bool) -> PlaybackState:
    return replace(state, playing=playing)


def set_visibility(state: PlaybackState, entity_id: str, visible: bool) -> PlaybackState:
    """Toggle an entity; the renderer skips hidden ids. Idempotent."""
    if entity_id not in state.visibility:
        raise KeyError(f"unknown entity id '{entity_id}'")
    visibility = dict(state.visibility)
    visibility[entity_id] = visible
    return replace(state, visibility=visibility)


def current_frame_index(state: PlaybackState) -> int:
    return frame_index_at(state.media_time, state.anim_fps, state.frame_count, state.loop_mode)


def simulate_render_loop(frame_count: int, anim_fps: int, render_rate: int) -> list[int]:
    """Frame index displayed at each tick of a render loop driven at render_rate Hz
    over one full (non-looping) playback. Time is rational, so repeat counts are
    exact rather than at the mercy of float accumulation."""
    from fractions import Fraction

    fps = Fraction(anim_fps)
    state = PlaybackState(
        playing=True,
        media_time=Fraction(0),
        loop_mode=False,
        visibility={},
        anim_fps=fps,
        frame_count=frame_count,
    )
    dt = 1 / Fraction(render_rate)
    n_ticks = math.floor(Fraction(frame_count) / fps * render_rate)
    shown = []
    for _ in range(n_ticks):
        shown.append(current_frame_index(state))
        state = advance(state, dt)
    return shown


# ---------------------------------------------------------------------------
# Frame stores


class FrameLoadError(RuntimeError):
    """A store failed for one frame; carries the frame index."""

    def __init__(self, index: int, cause: BaseException):
        super().__init__(f"failed to load frame {index}: {cause}")
        self.index = index


class MemoryFrameStore:
    """In-memory store; same index always yields the identical payload."""

    def __init__(self, frames: dict[int, bytes]):
        self._frames = dict(frames)

    def load(self, index: int) -> bytes:
        return self._frames[index]


class DirectoryFrameStore:
    """Reads frame bytes from files named by a '{index:06}' pattern under a root."""

    def __init__(self, root: Path, uri_pattern: str):
        self.root = Path(root)
        self.uri_pattern = uri_pattern

    def path_for(self, index: int) -> Path:
        return self.root / self.uri_pattern.format(index=index)

    def load(self, index: int) -> bytes:
        return self.path_for(index).read_bytes()


class LatencyStore:
    """Wraps a store with a fixed wall-clock delay per load (test/bench plumbing)."""

    def __init__(self, inner, latency_s: float, sleep=time.sleep):
        self._inner = inner
        self.latency_s = latency_s
        self._sleep = sleep

    def load(self, index: int):
        if self.latency_s > 0:
            self._sleep(self.latency_s)
        return self._inner.load(index)


# ---------------------------------------------------------------------------
# Background loading


@dataclass
class _Pending:
    index: int
    handle: object


class ThreadedLoader:
    """One background lane backed by a worker thread; wall-clock blocking."""

    def __init__(self, load_fn: Callable[[int], object], clock=time.monotonic):
        self._load = load_fn
        self._clock = clock
        self._pool = ThreadPoolExecutor(max_workers=1)

    def start(self, index: int) -> _Pending:
        return _Pending(index, self._pool.submit(self._load, index))

    def ready(self, pending: _Pending) -> bool:
        future: Future = pending.handle
        return future.done()

    def finish(self, pending: _Pending):
        """Block until the load completes; returns (payload, blocked_seconds)."""
        t0 = self._clock()
        payload = pending.handle.result()
        return payload, self._clock() - t0

    def load_now(self, index: int):
        """Synchronous load on the calling thread; returns (payload, blocked_seconds)."""
        t0 = self._clock()
        payload = self._load(index)
        return payload, self._clock() - t0

    def close(self):
        self._pool.shutdown(wait=False, cancel_futures=True)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


@dataclass
class _Slot:
    index: int
    payload: object


class PrefetchBuffer:
    """Two decoded-frame slots (current + next) filled by a background loader.

    request_frame(i) serves from a slot without blocking when possible;
    otherwise it blocks (a stall) and reloads. After any request the load of
    i + 1 (wrapping only in loop mode) is in flight or resident, issued
    concurrently with a miss's synchronous load so a cold start costs exactly
    one stall. Non-adjacent requests (seeks) invalidate both slots.
    """

    def __init__(self, loader, frame_count: int, *, loop_mode: bool = False,
                 prefetch: bool = True):
        self._loader = loader
        self.frame_count = frame_count
        self.loop_mode = loop_mode
        self.prefetch = prefetch
        self.stall_count = 0
        self.loads_issued = 0
        self.blocked_seconds = 0.0
        self._current: _Slot | None = None
        self._next: _Slot | None = None
        self._pending: _Pending | None = None

    def _absorb_completed(self):
        if self._pending is not None and self._loader.ready(self._pending):
            payload, _ = self._loader.finish(self._pending)
            self._next = _Slot(self._pending.index, payload)
            self._pending = None

    def _resident_indices(self) -> set[int]:
        out = set()
        if self._current is not None:
            out.add(self._current.index)
        if self._next is not None:
            out.add(self._next.index)
        if self._pending is not None:
            out.add(self._pending.index)
        return out

    def _schedule_next(self, index: int):
        if not self.prefetch:
            return
        want = index + 1
        if want >= self.frame_count:
            if not self.loop_mode:
                return
            want %= self.frame_count
        if want in self._resident_indices():
            return
        self._pending = self._loader.start(want)
        self.loads_issued += 1

    def request_frame(self, index: int):
        """Return the decoded frame for index, maintaining the two-slot policy."""
        if not 0 <= index < self.frame_count:
            raise IndexError(f"frame index {index} out of range [0, {self.frame_count})")
        self._absorb_completed()

        if self._current is not None and self._current.index == index:
            self._schedule_next(index)
            return self._current.payload

        if self._next is not None and self._next.index == index:
            self._current = self._next
            self._next = None
            self._schedule_next(index)
            return self._current.payload

        if self._pending is not None and self._pending.index == index:
            # in flight but not done: wait for it (counts as a stall)
            pending, self._pending = self._pending, None
            try:
                payload, blocked = self._loader.finish(pending)
            except Exception as exc:
                raise FrameLoadError(index, exc) from exc
            self.stall_count += 1
            self.blocked_seconds += blocked
            self._current = _Slot(index, payload)
            self._next = None
            self._schedule_next(index)
            return payload

        # cold start or seek: drop everything, prefetch the successor in
        # parallel with the synchronous load so only this request stalls
        self._current = None
        self._next = None
        self._pending = None
        self._schedule_next(index)
        self.loads_issued += 1
        try:
            payload, blocked = self._loader.load_now(index)
        except Exception as exc:
            raise FrameLoadError(index, exc) from exc
        self.stall_count += 1
        self.blocked_seconds += blocked
        self._current = _Slot(index, payload)
        return payload
