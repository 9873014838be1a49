"""Tests for had_engine.py module."""

from pathlib import Path

import numpy as np
import pytest

from had_shock_lab.had_engine import (
    TRAJECTORY_HEADER,
    BoxParams,
    EngineState,
    Event,
    EventKind,
    build_event_queue,
    finish,
    run,
    step,
    write_trajectories,
)
from had_shock_lab.lpp_oracle import longest_chain
from had_shock_lab.randgen import PlanarPoints, PointSet1D, poisson_1d, poisson_2d
from had_shock_lab.utils import ContractViolation, InvariantViolation, ParameterError


def _state(*positions: float) -> EngineState:
    return EngineState.from_sources(PointSet1D(positions, 1.0))


def test_box_params_validation() -> None:
    """Boxes must be positive and finite."""
    with pytest.raises(ParameterError):
        BoxParams(0.0, 1.0)
    with pytest.raises(ParameterError):
        BoxParams(1.0, float("inf"))


def test_event_queue_empty(empty_sinks: PointSet1D, empty_bulk: PlanarPoints) -> None:
    """No inputs, no events."""
    assert build_event_queue(empty_sinks, empty_bulk) == []


def test_event_queue_time_order() -> None:
    """Events come out by time."""
    queue = build_event_queue(PointSet1D([0.7], 1.0), PlanarPoints([(0.2, 0.3)], 1.0, 1.0))
    assert queue == [Event(0.3, EventKind.BULK, 0.2, 0), Event(0.7, EventKind.SINK, 0.0, 0)]


def test_event_queue_sink_first_on_ties() -> None:
    """At equal times the sink is processed first."""
    queue = build_event_queue(PointSet1D([0.3], 1.0), PlanarPoints([(0.5, 0.3)], 1.0, 1.0))
    assert [e.kind for e in queue] == [EventKind.SINK, EventKind.BULK]


def test_step_bulk_jump(unit_box: BoxParams) -> None:
    """The closest particle right of y jumps to y."""
    state = step(_state(0.5), Event(0.1, EventKind.BULK, 0.2, 0), unit_box)
    assert list(state.live) == [0.2]
    assert state.entries == []


def test_step_sink_absorbs(unit_box: BoxParams) -> None:
    """A sink removes the leftmost particle."""
    state = step(_state(0.2), Event(0.1, EventKind.SINK, 0.0, 0), unit_box)
    assert list(state.live) == []
    assert state.absorbed_count == 1


def test_step_sink_on_empty_system(unit_box: BoxParams) -> None:
    """A sink on an empty system only increments C."""
    state = step(_state(), Event(0.1, EventKind.SINK, 0.0, 0), unit_box)
    assert list(state.live) == []
    assert state.created_count == 1
    assert state.sink_events == 1
    state.check_conservation()


def test_step_entry(unit_box: BoxParams) -> None:
    """With nothing to the right, a particle enters and lands at y."""
    state = step(_state(0.1), Event(0.4, EventKind.BULK, 0.5, 0), unit_box)
    assert list(state.live) == [0.1, 0.5]
    assert state.entries == [0.4]


def test_step_strictly_right(unit_box: BoxParams) -> None:
    """A particle exactly at y is not selected."""
    state = step(_state(0.5), Event(0.4, EventKind.BULK, 0.5, 0), unit_box)
    assert list(state.live) == [0.5, 0.5]
    assert state.entries == [0.4]


def test_step_contract(unit_box: BoxParams) -> None:
    """Events past the horizon or before the clock are contract violations."""
    with pytest.raises(ContractViolation):
        step(_state(0.5), Event(1.5, EventKind.SINK, 0.0, 0), unit_box)
    state = step(_state(0.5), Event(0.6, EventKind.SINK, 0.0, 0), unit_box)
    with pytest.raises(ContractViolation):
        step(state, Event(0.2, EventKind.SINK, 0.0, 1), unit_box)


def test_conservation_check_detects_tampering(unit_box: BoxParams) -> None:
    """A state whose counters disagree fails the conservation check."""
    state = _state(0.5)
    state.absorbed_count = 3
    with pytest.raises(InvariantViolation):
        state.check_conservation()
    with pytest.raises(InvariantViolation):
        finish(state, unit_box).check_conservation()


def test_run_pull_then_absorb(unit_box: BoxParams) -> None:
    """The bulk point pulls 0.5 to 0.2, then the sink absorbs it."""
    outcome = run(PointSet1D([0.5], 1.0), PointSet1D([0.7], 1.0), PlanarPoints([(0.2, 0.3)], 1.0, 1.0), unit_box)
    assert len(outcome.live) == 0
    assert outcome.sink_events == 1
    assert outcome.created == 0
    assert len(outcome.entries) == 0
    assert outcome.chi == 1


def test_run_entry(unit_box: BoxParams, empty_sinks: PointSet1D) -> None:
    """An empty system receives an entry at the bulk point."""
    outcome = run(PointSet1D((), 1.0), empty_sinks, PlanarPoints([(0.5, 0.5)], 1.0, 1.0), unit_box)
    assert list(outcome.live) == [0.5]
    assert list(outcome.entries) == [0.5]


def test_run_nearest_right(unit_box: BoxParams, empty_sinks: PointSet1D) -> None:
    """The nearest particle right of 0.4 is 0.6."""
    outcome = run(PointSet1D([0.3, 0.6], 1.0), empty_sinks, PlanarPoints([(0.4, 0.5)], 1.0, 1.0), unit_box)
    assert list(outcome.live) == [0.3, 0.4]


def test_run_without_events(unit_box: BoxParams, empty_sinks: PointSet1D, empty_bulk: PlanarPoints) -> None:
    """No events leave the sources in place."""
    sources = PointSet1D([0.1, 0.9], 1.0)
    assert run(sources, empty_sinks, empty_bulk, unit_box).live == sources


def test_run_rejects_points_outside_box(unit_box: BoxParams, empty_sinks: PointSet1D, empty_bulk: PlanarPoints) -> None:
    """Inputs must lie inside the box."""
    with pytest.raises(ParameterError):
        run(PointSet1D([1.5], 2.0), empty_sinks, empty_bulk, unit_box)
    with pytest.raises(ParameterError):
        run(PointSet1D((), 1.0), PointSet1D([1.5], 2.0), empty_bulk, unit_box)


def test_trajectories_pull_then_absorb(unit_box: BoxParams) -> None:
    """Birth, jump and absorption rows of one particle."""
    outcome = run(
        PointSet1D([0.5], 1.0), PointSet1D([0.7], 1.0), PlanarPoints([(0.2, 0.3)], 1.0, 1.0), unit_box, record=True
    )
    assert outcome.trajectories == ((0, 0.0, 0.5), (0, 0.3, 0.2), (0, 0.7, 0.0))


def test_trajectories_entry(unit_box: BoxParams, empty_sinks: PointSet1D) -> None:
    """An entering particle is born at the right edge."""
    outcome = run(PointSet1D((), 1.0), empty_sinks, PlanarPoints([(0.5, 0.5)], 1.0, 1.0), unit_box, record=True)
    assert outcome.trajectories == ((0, 0.5, 1.0), (0, 0.5, 0.5), (0, 1.0, 0.5))


def test_random_runs_conserve_and_match_oracle(stream: np.random.Generator) -> None:
    """Conservation always; |N| + W_events equals the longest chain when C = 0."""
    for _ in range(100):
        box = BoxParams(3.0, 3.0)
        sources = poisson_1d(2.0, box.width, stream)
        sinks = poisson_1d(1.5, box.horizon, stream)
        bulk = poisson_2d(1.0, box.width, box.horizon, stream)
        outcome = run(sources, sinks, bulk, box)
        outcome.check_conservation()
        assert all(0 <= e < box.horizon for e in outcome.entries)
        if outcome.created == 0:
            assert outcome.chi == longest_chain(sources, sinks, bulk)


def test_particles_only_jump_left(stream: np.random.Generator) -> None:
    """Each recorded trajectory is nonincreasing in space."""
    box = BoxParams(5.0, 5.0)
    outcome = run(
        poisson_1d(2.0, 5.0, stream), poisson_1d(1.0, 5.0, stream), poisson_2d(1.0, 5.0, 5.0, stream), box, record=True
    )
    by_particle: dict[int, list[float]] = {}
    for pid, _, position in outcome.trajectories or ():
        by_particle.setdefault(pid, []).append(position)
    assert by_particle
    for positions in by_particle.values():
        assert all(b <= a for a, b in zip(positions, positions[1:]))


def test_write_trajectories(tmp_path: Path) -> None:
    """Trajectory CSV has the documented header and repr floats."""
    path = write_trajectories(tmp_path / "traj.csv", [(0, 0.0, 0.5), (0, 0.3, 0.2)])
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == ",".join(TRAJECTORY_HEADER)
    assert lines[1:] == ["0,0.0,0.5", "0,0.3,0.2"]
