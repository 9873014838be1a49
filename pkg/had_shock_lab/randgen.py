"""Deterministic random streams and homogeneous Poisson point-process sampling."""

import hashlib
import json
import math
from collections.abc import Iterable, Iterator
from dataclasses import dataclass
from typing import Union

import numpy as np

from had_shock_lab.utils import ParameterError

Label = tuple[str, int, str]
ArrayLike = Union[Iterable[float], np.ndarray]

SEED_BITS = 64


@dataclass(frozen=True)
class StreamKey:
    """Address of a random stream: a master seed plus a path of (experiment, replica, role) labels."""

    master_seed: int
    labels: tuple[Label, ...] = ()

    def __post_init__(self) -> None:
        """Check the seed range and label shapes."""
        if not 0 <= self.master_seed < 2**SEED_BITS:
            raise ParameterError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}")
        for experiment, replica, role in self.labels:
            if replica < 0:
                raise ParameterError(f"replica index must be nonnegative, got {replica} for {experiment}/{role}")

    def child(self, experiment: str, replica: int, role: str) -> "StreamKey":
        """Extend the label path by one level."""
        return StreamKey(self.master_seed, (*self.labels, (experiment, int(replica), role)))

    @property
    def label(self) -> str:
        """Human-readable label path, as written to raw CSV files."""
        return "/".join(f"{experiment}:{replica}:{role}" for experiment, replica, role in self.labels)


def derive_stream(key: StreamKey) -> np.random.Generator:
    """
    Derive the generator addressed by a stream key.

    The label path is hashed with BLAKE2b keyed by the master seed, so every replica's
    stream is available directly, in any order and from any worker.

    Args:
        key: Stream address

    Returns:
        np.random.Generator: A PCG64 generator, identical for equal keys

    """
    path = json.dumps([list(label) for label in key.labels], separators=(",", ":")).encode("utf-8")
    digest = hashlib.blake2b(path, key=key.master_seed.to_bytes(8, "little"), digest_size=32).digest()
    entropy = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, len(digest), 4)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def _check_nonnegative(**params: float) -> None:
    for name, value in params.items():
        if not math.isfinite(value) or value < 0:
            raise ParameterError(f"{name} must be a finite nonnegative number, got {value}")


class PointSet1D:
    """Sorted finite multiset of points in [0, length]: positions (sources) or times (sinks, entries)."""

    __slots__ = ("_points", "length")

    def __init__(self, points: ArrayLike = (), length: float = 0.0) -> None:
        """
        Build a point set, sorting the points (stable, so ties keep insertion order).

        Args:
            points: Point coordinates
            length: Length of the window the points live in

        """
        _check_nonnegative(length=length)
        raw = points if isinstance(points, np.ndarray) else list(points)
        arr = np.sort(np.asarray(raw, dtype=np.float64).ravel(), kind="stable")
        if arr.size and (arr[0] < 0.0 or arr[-1] > length):
            raise ParameterError(f"points must lie in [0, {length}], got range [{arr[0]}, {arr[-1]}]")
        arr.setflags(write=False)
        self._points = arr
        self.length = float(length)

    @property
    def points(self) -> np.ndarray:
        """Read-only sorted coordinates."""
        return self._points

    def __len__(self) -> int:
        return int(self._points.size)

    def __iter__(self) -> Iterator[float]:
        return iter(self._points.tolist())

    def __getitem__(self, index: int) -> float:
        return float(self._points[index])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PointSet1D):
            return NotImplemented
        return self.length == other.length and np.array_equal(self._points, other._points)

    def __hash__(self) -> int:
        return hash((self.length, self._points.tobytes()))

    def __repr__(self) -> str:
        return f"PointSet1D({self._points.tolist()}, length={self.length})"

    def count_in(self, low: float, high: float) -> int:
        """Number of points in the closed interval [low, high]."""
        if high < low:
            return 0
        left = np.searchsorted(self._points, low, side="left")
        right = np.searchsorted(self._points, high, side="right")
        return int(right - left)

    def union(self, other: "PointSet1D") -> "PointSet1D":
        """Superposition of two point sets on the longer of the two windows."""
        return PointSet1D(np.concatenate([self._points, other._points]), max(self.length, other.length))

    def without_first(self) -> "PointSet1D":
        """The same set with its smallest point removed (empty stays empty)."""
        return PointSet1D(self._points[1:], self.length)

    def first_gap(self) -> float:
        """Distance from 0 to the first point."""
        if not len(self):
            raise ParameterError("empty point set has no first gap")
        return float(self._points[0])


class PlanarPoints:
    """Finite set of (y, s) points in [0, width] x [0, height], sorted by time s, then y, then insertion order."""

    __slots__ = ("_ys", "_ss", "width", "height")

    def __init__(self, points: Iterable[tuple[float, float]] = (), width: float = 0.0, height: float = 0.0) -> None:
        """
        Build a planar point set from (y, s) pairs.

        Args:
            points: (space, time) pairs
            width: Space extent of the box
            height: Time extent of the box

        """
        pairs = np.asarray(list(points), dtype=np.float64).reshape(-1, 2)
        self._init_arrays(pairs[:, 0], pairs[:, 1], width, height)

    @classmethod
    def from_arrays(cls, ys: np.ndarray, ss: np.ndarray, width: float, height: float) -> "PlanarPoints":
        """Build from separate coordinate arrays of equal size."""
        obj = cls.__new__(cls)
        obj._init_arrays(np.asarray(ys, dtype=np.float64), np.asarray(ss, dtype=np.float64), width, height)
        return obj

    def _init_arrays(self, ys: np.ndarray, ss: np.ndarray, width: float, height: float) -> None:
        _check_nonnegative(width=width, height=height)
        if ys.shape != ss.shape:
            raise ParameterError("coordinate arrays must have equal size")
        if ys.size and (ys.min() < 0 or ys.max() > width or ss.min() < 0 or ss.max() > height):
            raise ParameterError(f"points must lie in the box [0, {width}] x [0, {height}]")
        order = np.lexsort((np.arange(ys.size), ys, ss))
        self._ys = ys[order].copy()
        self._ss = ss[order].copy()
        self._ys.setflags(write=False)
        self._ss.setflags(write=False)
        self.width = float(width)
        self.height = float(height)

    @property
    def ys(self) -> np.ndarray:
        """Space coordinates, in time order."""
        return self._ys

    @property
    def ss(self) -> np.ndarray:
        """Time coordinates, ascending."""
        return self._ss

    def __len__(self) -> int:
        return int(self._ys.size)

    def __iter__(self) -> Iterator[tuple[float, float]]:
        return iter(zip(self._ys.tolist(), self._ss.tolist()))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PlanarPoints):
            return NotImplemented
        return (
            (self.width, self.height) == (other.width, other.height)
            and np.array_equal(self._ys, other._ys)
            and np.array_equal(self._ss, other._ss)
        )

    def __hash__(self) -> int:
        return hash((self.width, self.height, self._ys.tobytes(), self._ss.tobytes()))

    def __repr__(self) -> str:
        return f"PlanarPoints({list(self)}, width={self.width}, height={self.height})"

    def restrict(self, y_low: float, y_high: float, s_low: float, s_high: float) -> "PlanarPoints":
        """Points of the half-open box (y_low, y_high] x (s_low, s_high], translated to start at the origin."""
        mask = (self._ys > y_low) & (self._ys <= y_high) & (self._ss > s_low) & (self._ss <= s_high)
        return PlanarPoints.from_arrays(self._ys[mask] - y_low, self._ss[mask] - s_low, y_high - y_low, s_high - s_low)

    def with_point(self, y: float, s: float) -> "PlanarPoints":
        """A copy with one extra point."""
        return PlanarPoints.from_arrays(np.append(self._ys, y), np.append(self._ss, s), self.width, self.height)


def poisson_1d(rate: float, length: float, stream: np.random.Generator) -> PointSet1D:
    """
    Sample a homogeneous Poisson process on [0, length].

    Args:
        rate: Intensity per unit length
        length: Window length
        stream: Random stream

    Returns:
        PointSet1D: Poisson(rate * length) many i.i.d. uniform points, sorted

    """
    _check_nonnegative(rate=rate, length=length)
    count = int(stream.poisson(rate * length))
    return PointSet1D(stream.uniform(0.0, length, size=count), length)


def poisson_2d(rate: float, width: float, height: float, stream: np.random.Generator) -> PlanarPoints:
    """
    Sample a homogeneous planar Poisson process on [0, width] x [0, height].

    Args:
        rate: Intensity per unit area
        width: Space extent
        height: Time extent
        stream: Random stream

    Returns:
        PlanarPoints: Poisson(rate * width * height) many i.i.d. uniform points, sorted by time

    """
    _check_nonnegative(rate=rate, width=width, height=height)
    count = int(stream.poisson(rate * width * height))
    ys = stream.uniform(0.0, width, size=count)
    ss = stream.uniform(0.0, height, size=count)
    return PlanarPoints.from_arrays(ys, ss, width, height)


def uniform_points(count: int, width: float, height: float, stream: np.random.Generator) -> PlanarPoints:
    """Exactly `count` i.i.d. uniform points in the box (a uniform random permutation in Hammersley's picture)."""
    if count < 0:
        raise ParameterError(f"count must be nonnegative, got {count}")
    _check_nonnegative(width=width, height=height)
    ys = stream.uniform(0.0, width, size=count)
    ss = stream.uniform(0.0, height, size=count)
    return PlanarPoints.from_arrays(ys, ss, width, height)
