"""Self-test of the exact invariants for had-shock-lab."""

from collections import defaultdict
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from itertools import permutations

import numpy as np
from rich.panel import Panel
from rich.progress import BarColumn, Progress, TextColumn
from rich.table import Table

from had_shock_lab.had_engine import BoxParams, TrajectoryRow, run
from had_shock_lab.logger import console, err_console, log
from had_shock_lab.lpp_oracle import DecoratedPoint, decorate, lis_interior, longest_chain, precedes
from had_shock_lab.randgen import PlanarPoints, PointSet1D, StreamKey, derive_stream, poisson_1d, poisson_2d
from had_shock_lab.shock_coupling import ZPath, make_coupled_boundaries, run_coupled_pair, run_flux
from had_shock_lab.utils import InvariantViolation, LabError

SELFTEST_INSTANCES = 1000
MAX_TRIPLES = 200


@dataclass(frozen=True)
class SelftestFailure:
    """One failed check on one instance."""

    instance: int
    check: str
    message: str


def check_oracle(sources: PointSet1D, sinks: PointSet1D, bulk: PlanarPoints, box: BoxParams) -> None:
    """Conservation, and chi = longest chain whenever no sink fired on an empty system."""
    outcome = run(sources, sinks, bulk, box)
    outcome.check_conservation()
    if outcome.created == 0:
        chain = longest_chain(sources, sinks, bulk)
        if chain != outcome.chi:
            raise InvariantViolation(f"|N| + W_events = {outcome.chi} but the longest chain is {chain}")


def check_lis(bulk: PlanarPoints) -> None:
    """Patience sorting agrees with the chain DP on interior points."""
    empty_s = PointSet1D((), bulk.width)
    empty_w = PointSet1D((), bulk.height)
    fast, slow = lis_interior(bulk), longest_chain(empty_s, empty_w, bulk)
    if fast != slow:
        raise InvariantViolation(f"patience sorting gives {fast}, chain DP gives {slow}")


def check_trajectories(rows: Iterable[TrajectoryRow]) -> None:
    """Every particle only ever jumps left."""
    paths: defaultdict[int, list[tuple[float, float]]] = defaultdict(list)
    for pid, time, position in rows:
        paths[pid].append((time, position))
    for pid, path in paths.items():
        positions = [position for _, position in sorted(path, key=lambda p: p[0])]
        if any(b > a for a, b in zip(positions, positions[1:])):
            raise InvariantViolation(f"particle {pid} moved right: {positions}")


def check_z_path(path: ZPath) -> None:
    """Jump times nondecreasing and positions strictly increasing."""
    times = [time for time, _ in path.jumps]
    positions = [path.start] + [position for _, position in path.jumps]
    if any(b < a for a, b in zip(times, times[1:])):
        raise InvariantViolation(f"Z jump times out of order: {times}")
    if any(b <= a for a, b in zip(positions[1:], positions[2:])) or (path.jumps and positions[1] < positions[0]):
        raise InvariantViolation(f"Z not increasing across jumps: {positions}")


def check_chain_order(points: Sequence[DecoratedPoint], stream: np.random.Generator) -> None:
    """Irreflexivity on all points, transitivity on sampled triples."""
    for p in points:
        if precedes(p, p):
            raise InvariantViolation(f"chain order is reflexive at {p}")
    if len(points) < 3:
        return
    for _ in range(MAX_TRIPLES):
        picks = stream.choice(len(points), size=3, replace=False)
        for a, b, c in permutations([points[int(k)] for k in picks]):
            if precedes(a, b) and precedes(b, c) and not precedes(a, c):
                raise InvariantViolation(f"chain order not transitive on {a}, {b}, {c}")


def _instance(master_seed: int, index: int, failures: list[SelftestFailure]) -> None:
    stream = derive_stream(StreamKey(master_seed).child("selftest", index, "instance"))
    x, t = (float(v) for v in stream.uniform(0.5, 4.0, size=2))
    lam = float(stream.uniform(0.5, 3.0))
    # rho chosen so that lambda * rho > 1 for the coupled checks
    rho = float(stream.uniform(1.05 / lam, 1.05 / lam + 3.0))
    box = BoxParams(x, t)
    sources = poisson_1d(lam, x, stream)
    sinks = poisson_1d(rho, t, stream)
    bulk = poisson_2d(1.0, x, t, stream)

    def attempt(check: str, action: Callable[[], object]) -> None:
        try:
            action()
        except LabError as e:
            failures.append(SelftestFailure(index, check, str(e)))

    attempt("conservation+oracle", lambda: check_oracle(sources, sinks, bulk, box))
    attempt("lis=chain", lambda: check_lis(bulk))
    attempt("monotone particles", lambda: check_trajectories(run(sources, sinks, bulk, box, record=True).trajectories))
    attempt("chain order", lambda: check_chain_order(decorate(sources, sinks, bulk), stream))
    attempt("coupled pair", lambda: check_z_path(run_coupled_pair(sources, sinks, bulk, box, audit_every=1)[0]))
    attempt("shared queue", lambda: run_flux(make_coupled_boundaries(lam, rho, box, stream), bulk, box))


def run_selftest(instances: int = SELFTEST_INSTANCES, master_seed: int = 0) -> list[SelftestFailure]:
    """
    Check every exact invariant on small random instances.

    Args:
        instances: Number of random instances
        master_seed: Seed of the instance streams

    Returns:
        list[SelftestFailure]: Failed checks; empty when everything holds

    """
    failures: list[SelftestFailure] = []
    with Progress(
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TextColumn("[progress.percentage]{task.percentage:>3.0f}%"),
        console=err_console,
        transient=True,
    ) as progress:
        task = progress.add_task("Checking invariants...", total=instances)
        for index in range(instances):
            _instance(master_seed, index, failures)
            progress.advance(task)

    if failures:
        display_selftest_failures(failures)
        return failures

    log.info(f"✅ All invariants hold on {instances} instances")
    return failures


def display_selftest_failures(failures: Sequence[SelftestFailure]) -> None:
    """Display failed checks in a formatted table."""
    error_table = Table()
    error_table.add_column("Instance", style="red")
    error_table.add_column("Check", style="red")
    error_table.add_column("Error", style="yellow")

    for failure in failures:
        error_table.add_row(str(failure.instance), failure.check, failure.message)

    error_panel = Panel.fit(error_table, title="Failed Invariants", title_align="left")
    console.print(error_panel)
