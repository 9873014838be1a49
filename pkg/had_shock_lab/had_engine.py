"""
Event-driven simulation of the HAD process in the box [0, x] x [0, t].

Particles start at the sources S. At each point (y, s) of
the planar process P the closest particle strictly to the right of y jumps to y; if
there is none, a new particle enters through the right edge and lands at y. At each
sink time s in W the leftmost particle leaves through 0. A sink firing on an empty
system creates an inert particle at 0, which is only counted.
"""

import heapq
import math
from collections import defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import NamedTuple, Optional

from sortedcontainers import SortedList

from had_shock_lab.logger import log
from had_shock_lab.randgen import PlanarPoints, PointSet1D
from had_shock_lab.utils import ContractViolation, InvariantViolation, ParameterError, write_csv

TrajectoryRow = tuple[int, float, float]
TRAJECTORY_HEADER = ("particle_id", "time", "position")


class EventKind(IntEnum):
    """Event kinds; the value is the tie-break rank at equal times (sinks first)."""

    SINK = 0
    BULK = 1


class Event(NamedTuple):
    """
    One driving event. Tuple order is the processing order.

    Fields:
        time: Event time
        kind: Sink or bulk
        y: Landing position of a bulk event (0.0 for sinks)
        index: Position of the generating point in W or P

    """

    time: float
    kind: EventKind
    y: float
    index: int


@dataclass(frozen=True)
class BoxParams:
    """Simulation box [0, width] x [0, horizon]."""

    width: float
    horizon: float

    def __post_init__(self) -> None:
        """Reject empty or non-finite boxes."""
        for name, value in (("width", self.width), ("horizon", self.horizon)):
            if not math.isfinite(value) or value <= 0:
                raise ParameterError(f"box {name} must be a finite positive number, got {value}")


class TrajectoryRecorder:
    """Follows particle identities through jumps and collects polygonal path vertices."""

    def __init__(self, sources: Iterable[float]) -> None:
        """Give every source particle an id and a birth row at time 0."""
        self.rows: list[TrajectoryRow] = []
        self._owner: defaultdict[float, list[int]] = defaultdict(list)
        self._next_id = 0
        for position in sources:
            self._birth(position, 0.0)

    def _birth(self, position: float, time: float) -> None:
        pid = self._next_id
        self._next_id += 1
        self._owner[position].append(pid)
        self.rows.append((pid, time, position))

    def _release(self, position: float) -> int:
        owners = self._owner[position]
        pid = owners.pop()
        if not owners:
            del self._owner[position]
        return pid

    def jump(self, old: float, new: float, time: float) -> None:
        """The particle at `old` jumps left to `new`."""
        pid = self._release(old)
        self._owner[new].append(pid)
        self.rows.append((pid, time, new))

    def absorb(self, old: float, time: float) -> None:
        """The particle at `old` leaves through the sink at 0."""
        pid = self._release(old)
        self.rows.append((pid, time, 0.0))

    def enter(self, y: float, time: float, width: float) -> None:
        """A new particle enters through the right edge and lands at y."""
        self._birth(width, time)
        self.jump(width, y, time)

    def finish(self, horizon: float) -> tuple[TrajectoryRow, ...]:
        """Close live paths at the horizon and return rows grouped by particle, in time order."""
        for position, pids in self._owner.items():
            for pid in pids:
                self.rows.append((pid, horizon, position))
        return tuple(sorted(self.rows, key=lambda row: row[0]))


@dataclass
class EngineState:
    """
    Mutable state of one HAD run.

    `absorbed_count` counts sinks that removed a live particle, `created_count` (C)
    counts sinks that fired on an empty system.
    """

    live: SortedList = field(default_factory=SortedList)
    absorbed_count: int = 0
    created_count: int = 0
    entries: list[float] = field(default_factory=list)
    clock: float = 0.0
    source_count: int = 0
    recorder: Optional[TrajectoryRecorder] = None

    @classmethod
    def from_sources(cls, sources: PointSet1D, record: bool = False) -> "EngineState":
        """Initial state H_0 = S."""
        return cls(
            live=SortedList(sources),
            source_count=len(sources),
            recorder=TrajectoryRecorder(sources) if record else None,
        )

    @property
    def sink_events(self) -> int:
        """Sink events processed so far."""
        return self.absorbed_count + self.created_count

    def check_conservation(self) -> None:
        """|S| + |E| + C = |live| + sink events, exactly."""
        inflow = self.source_count + len(self.entries) + self.created_count
        outflow = len(self.live) + self.sink_events
        if inflow != outflow:
            raise InvariantViolation(
                f"conservation broken at time {self.clock}: |S|+|E|+C={inflow} but |live|+sinks={outflow}"
            )


@dataclass(frozen=True)
class SimOutcome:
    """
    Terminal state of one HAD run.

    Fields:
        live: N, the particle positions at the horizon
        sink_events: Number of sink events (W_events)
        created: C, sinks that fired on an empty system
        entries: E, times at which particles entered through the right edge
        source_count: |S|
        trajectories: (particle_id, time, position) rows when recording was requested

    """

    live: PointSet1D
    sink_events: int
    created: int
    entries: PointSet1D
    source_count: int
    trajectories: Optional[tuple[TrajectoryRow, ...]] = None

    @property
    def chi(self) -> int:
        """Particles counted by the run: |N| + W_events (sink escapes located at 0)."""
        return len(self.live) + self.sink_events

    @property
    def absorbed(self) -> int:
        """Sink events that removed a live particle."""
        return self.sink_events - self.created

    def check_conservation(self) -> None:
        """|S| + |E| + C = |N| + W_events, exactly."""
        inflow = self.source_count + len(self.entries) + self.created
        if inflow != self.chi:
            raise InvariantViolation(f"conservation broken: |S|+|E|+C={inflow} but |N|+W_events={self.chi}")


def build_event_queue(sinks: PointSet1D, bulk: PlanarPoints) -> list[Event]:
    """
    Merge sink times and planar points into one time-ordered queue.

    Ties at equal times put sinks first, then smaller y, then the earlier source index.

    Args:
        sinks: Sink times W
        bulk: Planar points P

    Returns:
        list[Event]: Events in processing order

    """
    sink_events = (Event(s, EventKind.SINK, 0.0, i) for i, s in enumerate(sinks))
    bulk_events = (Event(s, EventKind.BULK, y, j) for j, (y, s) in enumerate(bulk))
    return list(heapq.merge(sink_events, bulk_events))


def step(state: EngineState, event: Event, box: BoxParams) -> EngineState:
    """
    Apply one event to the state in place and return it.

    Args:
        state: Current state, owned by the caller
        event: Next event, not earlier than the state clock
        box: Simulation box

    Returns:
        EngineState: The updated state

    """
    if event.time > box.horizon:
        raise ContractViolation(f"event at time {event.time} is beyond the horizon {box.horizon}")
    if event.time < state.clock:
        raise ContractViolation(f"event at time {event.time} precedes the clock {state.clock}")
    state.clock = event.time
    live = state.live
    recorder = state.recorder

    if event.kind == EventKind.SINK:
        if live:
            leftmost = live.pop(0)
            state.absorbed_count += 1
            if recorder is not None:
                recorder.absorb(leftmost, event.time)
        else:
            state.created_count += 1
        return state

    y = event.y
    idx = live.bisect_right(y)
    if idx < len(live):
        jumper = live.pop(idx)
        live.add(y)
        if recorder is not None:
            recorder.jump(jumper, y, event.time)
    else:
        live.add(y)
        state.entries.append(event.time)
        if recorder is not None:
            recorder.enter(y, event.time, box.width)
    return state


def finish(state: EngineState, box: BoxParams) -> SimOutcome:
    """Freeze a state into an outcome."""
    trajectories = state.recorder.finish(box.horizon) if state.recorder is not None else None
    return SimOutcome(
        live=PointSet1D(list(state.live), box.width),
        sink_events=state.sink_events,
        created=state.created_count,
        entries=PointSet1D(state.entries, box.horizon),
        source_count=state.source_count,
        trajectories=trajectories,
    )


def check_inputs(sources: PointSet1D, sinks: PointSet1D, bulk: PlanarPoints, box: BoxParams) -> None:
    """Sources within [0, x], sinks within [0, t], planar points within the box."""
    if len(sources) and sources[-1] > box.width:
        raise ParameterError(f"source at {sources[-1]} lies outside [0, {box.width}]")
    if len(sinks) and sinks[-1] > box.horizon:
        raise ParameterError(f"sink at {sinks[-1]} lies outside [0, {box.horizon}]")
    if len(bulk) and (bulk.ys.max() > box.width or bulk.ss.max() > box.horizon):
        raise ParameterError(f"planar points must lie in [0, {box.width}] x [0, {box.horizon}]")


def replay(sources: PointSet1D, events: Sequence[Event], box: BoxParams, record: bool = False) -> SimOutcome:
    """Run the engine from H_0 = sources over a prebuilt event queue."""
    state = EngineState.from_sources(sources, record=record)
    for event in events:
        step(state, event, box)
    state.check_conservation()
    return finish(state, box)


def run(
    sources: PointSet1D,
    sinks: PointSet1D,
    bulk: PlanarPoints,
    box: BoxParams,
    record: bool = False,
) -> SimOutcome:
    """
    Simulate H(S, W, P) in the box.

    Args:
        sources: Initial particle positions S
        sinks: Sink times W
        bulk: Planar Poisson points P
        box: Simulation box
        record: Attach per-particle polygonal trajectories

    Returns:
        SimOutcome: Terminal configuration and counters

    """
    check_inputs(sources, sinks, bulk, box)
    outcome = replay(sources, build_event_queue(sinks, bulk), box, record=record)
    log.debug(
        f"HAD run: |S|={outcome.source_count} |W|={outcome.sink_events} |P|={len(bulk)} "
        f"-> |N|={len(outcome.live)} |E|={len(outcome.entries)} C={outcome.created}"
    )
    return outcome


def write_trajectories(path: Path, rows: Iterable[TrajectoryRow]) -> Path:
    """Dump trajectory rows as CSV (particle_id, time, position)."""
    return write_csv(path, TRAJECTORY_HEADER, rows)
