"""Exact last-passage (longest up-right chain) computations used as oracles for the engine."""

import csv
import math
from bisect import bisect_left
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from had_shock_lab.logger import log
from had_shock_lab.randgen import PlanarPoints, PointSet1D, uniform_points
from had_shock_lab.stats import MomentAccumulator
from had_shock_lab.utils import DataError, ParameterError

DECORATED_HEADER = ("kind", "y", "s")


class PointKind(str, Enum):
    """Where a decorated point lives: the space axis, the time axis, or the open quadrant."""

    SOURCE = "source"
    SINK = "sink"
    INTERIOR = "interior"


_KIND_CODE = {PointKind.SOURCE: 0, PointKind.SINK: 1, PointKind.INTERIOR: 2}


@dataclass(frozen=True)
class DecoratedPoint:
    """A point of S (on the y axis), W (on the s axis) or P (interior)."""

    y: float
    s: float
    kind: PointKind

    def __post_init__(self) -> None:
        """Sources sit at s = 0, sinks at y = 0, interior points strictly inside."""
        if self.kind is PointKind.SOURCE and self.s != 0:
            raise DataError(f"source must have s = 0, got ({self.y}, {self.s})")
        if self.kind is PointKind.SINK and self.y != 0:
            raise DataError(f"sink must have y = 0, got ({self.y}, {self.s})")
        if self.kind is PointKind.INTERIOR and not (self.y > 0 and self.s > 0):
            raise DataError(f"interior point must have y > 0 and s > 0, got ({self.y}, {self.s})")


def precedes(a: DecoratedPoint, b: DecoratedPoint) -> bool:
    """
    Chain order: can an up-right path from the origin pick `a` and then `b`.

    Sources chain along the space axis, sinks along the time axis, and either may be
    followed by an interior point further right (source) or later (sink). A path that
    leaves one axis can never reach the other, and interior points precede only
    interior points.
    """
    if a.kind is PointKind.INTERIOR:
        return b.kind is PointKind.INTERIOR and a.y < b.y and a.s < b.s
    if a.kind is PointKind.SOURCE:
        return b.kind is not PointKind.SINK and a.y < b.y
    return b.kind is not PointKind.SOURCE and a.s < b.s


def decorate(sources: PointSet1D, sinks: PointSet1D, bulk: PlanarPoints) -> list[DecoratedPoint]:
    """All boundary and interior points as decorated points."""
    points = [DecoratedPoint(y, 0.0, PointKind.SOURCE) for y in sources]
    points += [DecoratedPoint(0.0, s, PointKind.SINK) for s in sinks]
    points += [DecoratedPoint(y, s, PointKind.INTERIOR) for y, s in bulk]
    return points


def _topological(points: Sequence[DecoratedPoint]) -> list[DecoratedPoint]:
    # sources, then sinks, then interior points by time: every predecessor comes first
    return sorted(points, key=lambda p: (_KIND_CODE[p.kind], p.s, p.y))


def chain_length(points: Sequence[DecoratedPoint]) -> int:
    """
    Maximum cardinality of a chain of decorated points, by an O(n^2) dynamic program.

    Args:
        points: Decorated points in any order

    Returns:
        int: Length of the longest chain

    """
    ordered = _topological(points)
    n = len(ordered)
    if n == 0:
        return 0
    ys = np.array([p.y for p in ordered])
    ss = np.array([p.s for p in ordered])
    kinds = np.array([_KIND_CODE[p.kind] for p in ordered])
    is_source = kinds == _KIND_CODE[PointKind.SOURCE]
    is_sink = kinds == _KIND_CODE[PointKind.SINK]
    is_interior = kinds == _KIND_CODE[PointKind.INTERIOR]

    best = np.zeros(n, dtype=np.int64)
    for i in range(n):
        y, s = ys[i], ss[i]
        if is_source[i]:
            before = is_source[:i] & (ys[:i] < y)
        elif is_sink[i]:
            before = is_sink[:i] & (ss[:i] < s)
        else:
            before = (
                (is_source[:i] & (ys[:i] < y))
                | (is_sink[:i] & (ss[:i] < s))
                | (is_interior[:i] & (ys[:i] < y) & (ss[:i] < s))
            )
        best[i] = 1 + (int(best[:i][before].max()) if before.any() else 0)
    return int(best.max())


def longest_chain(sources: PointSet1D, sinks: PointSet1D, bulk: PlanarPoints) -> int:
    """
    Last-passage value M(x, t): the most decorated points on one up-right path.

    Args:
        sources: Points of S on the space axis
        sinks: Points of W on the time axis
        bulk: Interior points P

    Returns:
        int: M(x, t), which equals |N| + W_events of the HAD run on the same data

    """
    return chain_length(decorate(sources, sinks, bulk))


def lis_interior(bulk: PlanarPoints) -> int:
    """Longest chain increasing in both coordinates among interior points, by patience sorting."""
    if not len(bulk):
        return 0
    # by time, and by decreasing y on equal times so that those never chain
    order = np.lexsort((-bulk.ys, bulk.ss))
    tails: list[float] = []
    for y in bulk.ys[order].tolist():
        pile = bisect_left(tails, y)
        if pile == len(tails):
            tails.append(y)
        else:
            tails[pile] = y
    return len(tails)


def superadditivity_gap(bulk: PlanarPoints, x: float, t: float) -> int:
    """
    M over [0,2x]x[0,2t] minus the sum of M over [0,x]x[0,t] and [x,2x]x[t,2t].

    Nonnegative, since two chains from the corner boxes concatenate.
    """
    lower = bulk.restrict(0.0, x, 0.0, t)
    upper = bulk.restrict(x, 2 * x, t, 2 * t)
    whole = bulk.restrict(0.0, 2 * x, 0.0, 2 * t)
    return lis_interior(whole) - lis_interior(lower) - lis_interior(upper)


@dataclass(frozen=True)
class UlamEstimate:
    """Sample mean of L_n / sqrt(n) with a normal-approximation confidence interval."""

    n: int
    replicas: int
    mean: float
    ci_low: float
    ci_high: float


def ulam_ratio(n: int, replicas: int, stream: np.random.Generator, confidence: float = 0.95) -> UlamEstimate:
    """
    Estimate the Ulam constant from longest increasing subsequences of uniform point sets.

    Args:
        n: Points per replica
        replicas: Number of independent point sets
        stream: Random stream
        confidence: Confidence level of the interval

    Returns:
        UlamEstimate: Mean ratio and its interval

    """
    if n < 1 or replicas < 1:
        raise ParameterError(f"n and replicas must be positive, got n={n}, replicas={replicas}")
    acc = MomentAccumulator()
    root = math.sqrt(n)
    for _ in range(replicas):
        acc.push(lis_interior(uniform_points(n, 1.0, 1.0, stream)) / root)
    low, high = acc.mean_ci(confidence) if acc.n > 1 else (acc.mean, acc.mean)
    log.debug(f"Ulam ratio n={n}: {acc.mean:.4f} [{low:.4f}, {high:.4f}] over {replicas} replicas")
    return UlamEstimate(n=n, replicas=replicas, mean=acc.mean, ci_low=low, ci_high=high)


def load_decorated_points(path: Path) -> list[DecoratedPoint]:
    """
    Load a decorated point file: CSV with columns kind, y, s.

    Args:
        path: CSV file

    Returns:
        list[DecoratedPoint]: Validated points

    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != DECORATED_HEADER:
            raise DataError(f"{path}: expected header {','.join(DECORATED_HEADER)}, got {reader.fieldnames}")
        return [_parse_row(row, line) for line, row in enumerate(reader, start=2)]


def _parse_row(row: dict[str, str], line: int) -> DecoratedPoint:
    try:
        kind = PointKind(row["kind"].strip())
        y, s = float(row["y"]), float(row["s"])
    except (ValueError, TypeError, AttributeError) as e:
        raise DataError(f"line {line}: cannot parse {row}: {e}") from e
    if not (math.isfinite(y) and math.isfinite(s)) or y < 0 or s < 0:
        raise DataError(f"line {line}: coordinates must be finite and nonnegative, got ({y}, {s})")
    try:
        return DecoratedPoint(y, s, kind)
    except DataError as e:
        raise DataError(f"line {line}: {e}") from e


def write_decorated_points(path: Path, points: Iterable[DecoratedPoint]) -> Path:
    """Write decorated points in the format read by `load_decorated_points`."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DECORATED_HEADER)
        for p in points:
            writer.writerow([p.kind.value, repr(p.y), repr(p.s)])
    return path
