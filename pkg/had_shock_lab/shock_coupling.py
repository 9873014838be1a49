"""
Coupled HAD runs: the second-class particle Z(t), the N(t) functional and the flux xi(x, t).

Two coupled processes A and B see the same sinks and planar points and differ in one
particle; that discrepancy is the second-class particle. Three processes sharing P
with nested boundaries (the basic coupling) give the flux of discrepancies between
two stationary processes.
"""

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from sortedcontainers import SortedList

from had_shock_lab.had_engine import (
    BoxParams,
    EngineState,
    Event,
    EventKind,
    SimOutcome,
    build_event_queue,
    check_inputs,
    finish,
    replay,
    step,
)
from had_shock_lab.logger import log
from had_shock_lab.randgen import PlanarPoints, PointSet1D, poisson_1d
from had_shock_lab.utils import ContractViolation, InvariantViolation, ParameterError

DEFAULT_AUDIT_EVERY = 256


class Variant(str, Enum):
    """How the extra particle of A is introduced."""

    ORIGIN = "origin"
    DROP_FIRST_SOURCE = "drop_first_source"
    DROP_FIRST_SINK = "drop_first_sink"


def check_shock_regime(lam: float, rho: float) -> None:
    """Require lambda * rho > 1."""
    if not (math.isfinite(lam) and math.isfinite(rho)) or lam <= 0 or rho <= 0 or lam * rho <= 1:
        raise ParameterError(f"shock regime requires lambda * rho > 1, got lambda={lam}, rho={rho}")


def shock_speed(lam: float, rho: float) -> float:
    """Mean velocity rho / lambda of the second-class particle."""
    return rho / lam


def diffusion_constant(lam: float, rho: float) -> float:
    """D = 2 (rho - 1/lambda) / (lambda - 1/rho)^2, so that Var Z(t) = D t."""
    check_shock_regime(lam, rho)
    return 2 * (rho - 1 / lam) / (lam - 1 / rho) ** 2


def margin_width(lam: float, rho: float, t: float) -> float:
    """Box width that keeps Z(t) away from the right edge: (rho/lambda) t + 10 sqrt(D t) + 5/lambda."""
    return shock_speed(lam, rho) * t + 10 * math.sqrt(diffusion_constant(lam, rho) * t) + 5 / lam


def flux_mean_target(lam: float, rho: float, x: float, t: float) -> float:
    """E xi(x, t) = (lambda - 1/rho) x - (rho - 1/lambda) t."""
    return (lam - 1 / rho) * x - (rho - 1 / lam) * t


def flux_variance_target(lam: float, rho: float, x: float, t: float) -> float:
    """Var xi(x, t) = (lambda - 1/rho) x + (rho - 1/lambda) t."""
    return (lam - 1 / rho) * x + (rho - 1 / lam) * t


@dataclass(frozen=True)
class ZPath:
    """
    Right-continuous, piecewise-constant trajectory of the second-class particle.

    `jumps` holds (time, new position) pairs in time order. After `corruption_time`
    the discrepancy no longer exists and the path must not be read.
    """

    jumps: tuple[tuple[float, float], ...] = ()
    corrupted: bool = False
    corruption_time: Optional[float] = None
    start: float = 0.0

    def _check_readable(self, u: float) -> None:
        if u < 0:
            raise ContractViolation(f"cannot read Z at negative time {u}")
        if self.corrupted and self.corruption_time is not None and u >= self.corruption_time:
            raise ContractViolation(f"Z read at time {u}, past its corruption at {self.corruption_time}")

    def corrupted_by(self, u: float) -> bool:
        """Whether the discrepancy was lost at or before time u."""
        return self.corrupted and self.corruption_time is not None and self.corruption_time <= u

    def occupation_below(self, x: float, t: float) -> float:
        """Exact Lebesgue measure of {u in [0, t] : Z(u) <= x}."""
        self._check_readable(t)
        if self.start > x:
            return 0.0
        # Z is nondecreasing: it stays below x until its first jump past x
        for time, position in self.jumps:
            if time > t:
                break
            if position > x:
                return time
        return t


def z_at(path: ZPath, u: float) -> float:
    """
    Position of the second-class particle at time u.

    Args:
        path: Trajectory
        u: Time, before any corruption

    Returns:
        float: Position after the last jump at or before u, or the start position

    """
    path._check_readable(u)
    idx = bisect_right([time for time, _ in path.jumps], u)
    return path.start if idx == 0 else path.jumps[idx - 1][1]


@dataclass
class CoupledPair:
    """Process A (with the extra particle) and reference B under identical events."""

    state_a: EngineState
    state_b: EngineState
    discrepancy: Optional[float] = None
    corrupted: bool = False

    def check(self) -> None:
        """A = B plus the discrepancy, as multisets."""
        if self.corrupted:
            return
        if self.discrepancy is None:
            same = list(self.state_a.live) == list(self.state_b.live)
            if not same:
                raise InvariantViolation(f"A and B differ at time {self.state_a.clock} without a discrepancy")
            return
        expected = SortedList(self.state_b.live)
        expected.add(self.discrepancy)
        if list(expected) != list(self.state_a.live):
            raise InvariantViolation(
                f"single-discrepancy invariant broken at time {self.state_a.clock} (Z={self.discrepancy})"
            )


def _move_discrepancy(live_b: SortedList, z: float, event: Event) -> Optional[float]:
    """New discrepancy position after `event`, or None when it is annihilated."""
    if event.kind == EventKind.SINK:
        if not live_b:
            return None
        first = live_b[0]
        return first if z < first else z
    y = event.y
    if y >= z:
        return z
    idx = live_b.bisect_right(y)
    if idx == len(live_b):
        # A moves Z onto y while B receives an entry at y
        return None
    closest = live_b[idx]
    return z if closest < z else closest


def run_coupled_pair(
    sources: PointSet1D,
    sinks: PointSet1D,
    bulk: PlanarPoints,
    box: BoxParams,
    variant: Variant = Variant.ORIGIN,
    audit_every: int = DEFAULT_AUDIT_EVERY,
) -> tuple[ZPath, CoupledPair]:
    """
    Simulate the coupled pair and record the second-class particle.

    Args:
        sources: Sources S (intensity lambda)
        sinks: Sinks W (intensity rho)
        bulk: Planar points P
        box: Simulation box
        variant: How the extra particle is introduced
        audit_every: Check A = B + {Z} every this many events (0 checks only at the end)

    Returns:
        tuple[ZPath, CoupledPair]: The trajectory and the terminal pair

    """
    check_inputs(sources, sinks, bulk, box)
    events = build_event_queue(sinks, bulk)
    extra_sink: Optional[int] = None
    z: Optional[float]

    if variant is Variant.ORIGIN:
        sources_a, sources_b, z = sources.union(PointSet1D([0.0], box.width)), sources, 0.0
    elif variant is Variant.DROP_FIRST_SOURCE:
        sources_a, sources_b = sources, sources.without_first()
        z = sources[0] if len(sources) else None
    else:
        sources_a, sources_b, z = sources, sources, None
        extra_sink = 0 if len(sinks) else None

    pair = CoupledPair(EngineState.from_sources(sources_a), EngineState.from_sources(sources_b), z)
    start = z if z is not None else 0.0
    jumps: list[tuple[float, float]] = []
    corruption_time: Optional[float] = None
    if z is None and extra_sink is None:
        pair.corrupted, corruption_time = True, 0.0

    for count, event in enumerate(events, start=1):
        if extra_sink is not None and event.kind == EventKind.SINK and event.index == extra_sink:
            # the sink that A does not see creates the discrepancy
            if pair.state_b.live:
                z = pair.state_b.live[0]
                jumps.append((event.time, z))
            else:
                pair.corrupted, corruption_time = True, event.time
            step(pair.state_b, event, box)
            pair.discrepancy = z
            continue

        if not pair.corrupted and z is not None:
            moved = _move_discrepancy(pair.state_b.live, z, event)
            if moved is None:
                pair.corrupted, corruption_time, z = True, event.time, None
                log.debug(f"Discrepancy annihilated at time {event.time}")
            elif moved != z:
                if moved < z:
                    raise InvariantViolation(f"Z moved left from {z} to {moved} at time {event.time}")
                z = moved
                jumps.append((event.time, z))

        step(pair.state_a, event, box)
        step(pair.state_b, event, box)
        pair.discrepancy = z
        if audit_every and count % audit_every == 0:
            pair.check()

    pair.check()
    pair.state_a.check_conservation()
    pair.state_b.check_conservation()
    path = ZPath(tuple(jumps), pair.corrupted, corruption_time, start)
    return path, pair


def run_second_class(
    sources: PointSet1D,
    sinks: PointSet1D,
    bulk: PlanarPoints,
    box: BoxParams,
    variant: Variant = Variant.ORIGIN,
) -> ZPath:
    """Trajectory of the second-class particle; see `run_coupled_pair`."""
    path, _ = run_coupled_pair(sources, sinks, bulk, box, variant=variant)
    return path


def n_windows(lam: float, rho: float, t: float) -> tuple[float, float]:
    """Counting windows t R(S) on the space axis and t R(W) on the time axis."""
    excess = rho - 1 / lam
    return t * excess / lam, t * excess / rho


def n_functional_value(source_count: float, sink_count: float, lam: float, rho: float, t: float) -> float:
    """(lambda - 1/rho)^{-1} [3 (rho - 1/lambda) t - (source_count + sink_count)]."""
    return (3 * (rho - 1 / lam) * t - (source_count + sink_count)) / (lam - 1 / rho)


def n_functional(sources: PointSet1D, sinks: PointSet1D, lam: float, rho: float, t: float) -> float:
    """
    The functional N(t) of the boundary data that matches Z(t) on the sqrt(t) scale.

    Args:
        sources: Sources S used by the coupled run
        sinks: Sinks W used by the coupled run
        lam: Source intensity
        rho: Sink intensity
        t: Time

    Returns:
        float: N(t)

    """
    check_shock_regime(lam, rho)
    if t < 0:
        raise ParameterError(f"t must be nonnegative, got {t}")
    source_window, sink_window = n_windows(lam, rho, t)
    if source_window > sources.length or sink_window > sinks.length:
        raise ParameterError(
            f"counting windows ({source_window}, {sink_window}) exceed the sampled lengths "
            f"({sources.length}, {sinks.length})"
        )
    counts = sources.count_in(0.0, source_window) + sinks.count_in(0.0, sink_window)
    return n_functional_value(counts, 0, lam, rho, t)


def boundary_intensities(lam: float, rho: float) -> tuple[float, float, float, float]:
    """Intensities of (S_eta, I, W_sigma, J): 1/rho, lambda - 1/rho, 1/lambda, rho - 1/lambda."""
    check_shock_regime(lam, rho)
    return 1 / rho, lam - 1 / rho, 1 / lam, rho - 1 / lam


@dataclass(frozen=True)
class BoundaryQuadruple:
    """Independent boundary processes of the basic coupling."""

    s_eta: PointSet1D
    i: PointSet1D
    w_sigma: PointSet1D
    j: PointSet1D
    s_sigma: PointSet1D = field(init=False, repr=False, compare=False)
    w_eta: PointSet1D = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        """S_sigma = S_eta + I (intensity lambda) and W_eta = W_sigma + J (intensity rho)."""
        object.__setattr__(self, "s_sigma", self.s_eta.union(self.i))
        object.__setattr__(self, "w_eta", self.w_sigma.union(self.j))


def make_coupled_boundaries(lam: float, rho: float, box: BoxParams, stream: np.random.Generator) -> BoundaryQuadruple:
    """
    Sample S_eta, I on [0, x] and W_sigma, J on [0, t], in that order from one stream.

    Args:
        lam: Left density lambda
        rho: Right density rho
        box: Simulation box
        stream: Random stream

    Returns:
        BoundaryQuadruple: The four independent processes

    """
    s_eta_rate, i_rate, w_sigma_rate, j_rate = boundary_intensities(lam, rho)
    return BoundaryQuadruple(
        s_eta=poisson_1d(s_eta_rate, box.width, stream),
        i=poisson_1d(i_rate, box.width, stream),
        w_sigma=poisson_1d(w_sigma_rate, box.horizon, stream),
        j=poisson_1d(j_rate, box.horizon, stream),
    )


@dataclass(frozen=True)
class FluxOutcome:
    """Flux xi = chi(sigma) - chi(eta) and both terminal outcomes."""

    xi: int
    sigma_outcome: SimOutcome
    eta_outcome: SimOutcome


def _shared_key(event: Event) -> tuple[float, int, float, int]:
    # sink indices refer to different W processes; bulk indices must agree
    return event.time, int(event.kind), event.y, event.index if event.kind == EventKind.BULK else -1


def check_shared_queue(sigma_queue: list[Event], eta_queue: list[Event], extra_sinks: PointSet1D) -> None:
    """The eta queue is the sigma queue plus the J sinks, and nothing else."""
    extra = set(extra_sinks)
    stripped = [_shared_key(e) for e in eta_queue if not (e.kind == EventKind.SINK and e.time in extra)]
    if stripped != [_shared_key(e) for e in sigma_queue]:
        raise InvariantViolation("sigma and eta event queues differ beyond the J sinks")


def run_flux(bq: BoundaryQuadruple, bulk: PlanarPoints, box: BoxParams) -> FluxOutcome:
    """
    Run sigma = H(S_sigma, W_sigma, P) and eta = H(S_eta, W_eta, P) on the same P.

    Args:
        bq: Boundary processes
        bulk: Shared planar points
        box: Simulation box

    Returns:
        FluxOutcome: xi(x, t) with both outcomes

    """
    check_inputs(bq.s_sigma, bq.w_eta, bulk, box)
    sigma_queue = build_event_queue(bq.w_sigma, bulk)
    eta_queue = build_event_queue(bq.w_eta, bulk)
    check_shared_queue(sigma_queue, eta_queue, bq.j)
    sigma = replay(bq.s_sigma, sigma_queue, box)
    eta = replay(bq.s_eta, eta_queue, box)
    return FluxOutcome(xi=sigma.chi - eta.chi, sigma_outcome=sigma, eta_outcome=eta)


def final_outcomes(pair: CoupledPair, box: BoxParams) -> tuple[SimOutcome, SimOutcome]:
    """Terminal outcomes of A and B."""
    return finish(pair.state_a, box), finish(pair.state_b, box)
