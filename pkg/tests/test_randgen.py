"""Tests for randgen.py module."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats as sps

from had_shock_lab.randgen import (
    PlanarPoints,
    PointSet1D,
    StreamKey,
    derive_stream,
    poisson_1d,
    poisson_2d,
    uniform_points,
)
from had_shock_lab.utils import ParameterError


def test_same_key_gives_identical_draws() -> None:
    """Equal keys produce bit-identical streams."""
    key = StreamKey(1).child("mean_var_z", 3, "replica")
    first = derive_stream(key).random(1000)
    second = derive_stream(StreamKey(1).child("mean_var_z", 3, "replica")).random(1000)
    assert np.array_equal(first, second)


def test_replica_streams_are_uncorrelated() -> None:
    """Keys differing only in the replica index give uncorrelated draws."""
    base = StreamKey(42)
    a = derive_stream(base.child("exp", 0, "replica")).random(10_000)
    b = derive_stream(base.child("exp", 1, "replica")).random(10_000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.05


def test_master_seed_changes_stream() -> None:
    """A different master seed changes the first draw."""
    a = derive_stream(StreamKey(1).child("exp", 0, "replica")).random()
    b = derive_stream(StreamKey(2).child("exp", 0, "replica")).random()
    assert a != b


def test_stream_key_validation() -> None:
    """Seeds must be 64-bit and replica indices nonnegative."""
    with pytest.raises(ParameterError):
        StreamKey(-1)
    with pytest.raises(ParameterError):
        StreamKey(2**64)
    with pytest.raises(ParameterError):
        StreamKey(0).child("exp", -1, "replica")


def test_stream_key_label() -> None:
    """Labels render the whole path."""
    key = StreamKey(0).child("exp", 2, "replica").child("inner", 0, "bulk")
    assert key.label == "exp:2:replica/inner:0:bulk"


def test_poisson_1d_zero_rate(stream: np.random.Generator) -> None:
    """Zero intensity gives an empty set."""
    points = poisson_1d(0.0, 10.0, stream)
    assert len(points) == 0
    assert points.length == 10.0


def test_poisson_1d_rejects_negative(stream: np.random.Generator) -> None:
    """Negative rate or length is a parameter error."""
    with pytest.raises(ParameterError):
        poisson_1d(-1.0, 10.0, stream)
    with pytest.raises(ParameterError):
        poisson_1d(1.0, -10.0, stream)


def test_poisson_1d_count_moments(stream: np.random.Generator) -> None:
    """Counts of rate 2 on [0, 10] have mean 20 and dispersion index 1."""
    counts = np.array([len(poisson_1d(2.0, 10.0, stream)) for _ in range(10_000)])
    assert abs(counts.mean() - 20.0) < 0.15
    assert abs(counts.var(ddof=1) / counts.mean() - 1.0) < 0.05


def test_poisson_1d_sorted_within_window(stream: np.random.Generator) -> None:
    """Points are sorted and inside the window."""
    points = poisson_1d(5.0, 3.0, stream).points
    assert np.all(np.diff(points) >= 0)
    assert points.min() >= 0 and points.max() <= 3.0


def test_poisson_1d_disjoint_counts_uncorrelated(stream: np.random.Generator) -> None:
    """Counts in disjoint halves of one sample are uncorrelated."""
    n = 10_000
    left, right = np.empty(n), np.empty(n)
    for i in range(n):
        points = poisson_1d(2.0, 10.0, stream)
        left[i] = points.count_in(0.0, 5.0)
        right[i] = points.count_in(5.0 + 1e-12, 10.0)
    assert abs(np.corrcoef(left, right)[0, 1]) < 4 / np.sqrt(n)


def test_poisson_1d_superposition(stream: np.random.Generator) -> None:
    """A superposition of rates 1.5 and 0.5 has Poisson(2 L) counts."""
    length = 5.0
    counts = np.array(
        [len(poisson_1d(1.5, length, stream).union(poisson_1d(0.5, length, stream))) for _ in range(10_000)]
    )
    mean = 2.0 * length
    edges = np.arange(4, 17)
    observed = np.array([np.sum(counts <= edges[0])] + [np.sum(counts == k) for k in edges[1:-1]])
    observed = np.append(observed, np.sum(counts >= edges[-1]))
    probs = np.array([sps.poisson.cdf(edges[0], mean)] + [sps.poisson.pmf(k, mean) for k in edges[1:-1]])
    probs = np.append(probs, sps.poisson.sf(edges[-1] - 1, mean))
    result = sps.chisquare(observed, probs * counts.size)
    assert result.pvalue > 0.01


def test_poisson_2d_zero_area(stream: np.random.Generator) -> None:
    """Zero width gives an empty set."""
    assert len(poisson_2d(1.0, 0.0, 5.0, stream)) == 0


def test_poisson_2d_rejects_negative(stream: np.random.Generator) -> None:
    """Negative parameters are parameter errors."""
    with pytest.raises(ParameterError):
        poisson_2d(1.0, 1.0, -1.0, stream)


def test_poisson_2d_mean_count(stream: np.random.Generator) -> None:
    """Rate 1 on a 10 x 20 box gives 200 points on average."""
    counts = np.array([len(poisson_2d(1.0, 10.0, 20.0, stream)) for _ in range(10_000)])
    assert abs(counts.mean() - 200.0) < 0.45


def test_poisson_2d_sorted_by_time(stream: np.random.Generator) -> None:
    """Output times are strictly increasing."""
    bulk = poisson_2d(1.0, 10.0, 20.0, stream)
    assert np.all(np.diff(bulk.ss) > 0)
    assert bulk.ys.min() >= 0 and bulk.ys.max() <= 10.0


def test_planar_ties_break_by_space_then_insertion() -> None:
    """Equal times order by y, then by insertion index."""
    bulk = PlanarPoints([(0.7, 0.5), (0.2, 0.5), (0.4, 0.1)], 1.0, 1.0)
    assert list(bulk) == [(0.4, 0.1), (0.2, 0.5), (0.7, 0.5)]


def test_planar_points_outside_box() -> None:
    """Points outside the box are rejected."""
    with pytest.raises(ParameterError):
        PlanarPoints([(1.5, 0.5)], 1.0, 1.0)


def test_planar_restrict_translates() -> None:
    """Restriction keeps the half-open box and moves it to the origin."""
    bulk = PlanarPoints([(0.5, 0.5), (1.5, 1.5), (1.5, 0.5)], 2.0, 2.0)
    upper = bulk.restrict(1.0, 2.0, 1.0, 2.0)
    assert list(upper) == [(0.5, 0.5)]
    assert (upper.width, upper.height) == (1.0, 1.0)


def test_planar_with_point() -> None:
    """Adding a point keeps time order."""
    bulk = PlanarPoints([(0.5, 0.5)], 1.0, 1.0).with_point(0.1, 0.2)
    assert list(bulk) == [(0.1, 0.2), (0.5, 0.5)]


def test_uniform_points_count(stream: np.random.Generator) -> None:
    """Exactly the requested number of points."""
    assert len(uniform_points(17, 1.0, 1.0, stream)) == 17
    with pytest.raises(ParameterError):
        uniform_points(-1, 1.0, 1.0, stream)


def test_point_set_operations() -> None:
    """Counting, union, dropping the first point and the first gap."""
    points = PointSet1D([0.6, 0.2, 0.4], 1.0)
    assert list(points) == [0.2, 0.4, 0.6]
    assert points.count_in(0.2, 0.4) == 2
    assert points.count_in(0.5, 0.1) == 0
    assert list(points.without_first()) == [0.4, 0.6]
    assert points.first_gap() == 0.2
    assert list(points.union(PointSet1D([0.3], 2.0))) == [0.2, 0.3, 0.4, 0.6]
    assert points.union(PointSet1D([0.3], 2.0)).length == 2.0
    with pytest.raises(ParameterError):
        PointSet1D((), 1.0).first_gap()


def test_point_set_bounds() -> None:
    """Points outside [0, length] are rejected."""
    with pytest.raises(ParameterError):
        PointSet1D([1.5], 1.0)
    with pytest.raises(ParameterError):
        PointSet1D([-0.1], 1.0)


def test_point_set_is_read_only() -> None:
    """The coordinate array cannot be modified."""
    points = PointSet1D([0.1], 1.0)
    with pytest.raises(ValueError):
        points.points[0] = 0.5


@given(st.lists(st.floats(min_value=0.0, max_value=10.0, allow_nan=False), max_size=50))
def test_point_set_sorted_property(values: list[float]) -> None:
    """Any admissible input comes out sorted with the same multiset."""
    points = PointSet1D(values, 10.0)
    assert list(points) == sorted(values)
    assert points == PointSet1D(list(reversed(values)), 10.0)
