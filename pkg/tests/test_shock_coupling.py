"""Tests for shock_coupling.py module."""

import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from had_shock_lab.had_engine import BoxParams, Event, EventKind, run
from had_shock_lab.randgen import PlanarPoints, PointSet1D, poisson_1d, poisson_2d
from had_shock_lab.shock_coupling import (
    BoundaryQuadruple,
    Variant,
    ZPath,
    boundary_intensities,
    check_shared_queue,
    diffusion_constant,
    final_outcomes,
    flux_mean_target,
    flux_variance_target,
    make_coupled_boundaries,
    margin_width,
    n_functional,
    n_functional_value,
    n_windows,
    run_coupled_pair,
    run_flux,
    run_second_class,
    shock_speed,
    z_at,
)
from had_shock_lab.utils import ContractViolation, InvariantViolation, ParameterError


def _empty(length: float = 1.0) -> PointSet1D:
    return PointSet1D((), length)


def test_no_events_no_jumps(unit_box: BoxParams, empty_bulk: PlanarPoints) -> None:
    """Without sinks or planar points Z stays at the origin."""
    path = run_second_class(PointSet1D([0.4], 1.0), _empty(), empty_bulk, unit_box)
    assert path.jumps == ()
    assert not path.corrupted
    assert z_at(path, 1.0) == 0.0


def test_sink_pushes_discrepancy(unit_box: BoxParams, empty_bulk: PlanarPoints) -> None:
    """B loses 0.4 while A loses the origin particle: Z moves to 0.4."""
    path, pair = run_coupled_pair(PointSet1D([0.4], 1.0), PointSet1D([0.3], 1.0), empty_bulk, unit_box)
    assert path.jumps == ((0.3, 0.4),)
    assert list(pair.state_a.live) == [0.4]
    assert list(pair.state_b.live) == []
    assert z_at(path, 0.2) == 0.0
    assert z_at(path, 0.3) == 0.4


def test_sink_on_empty_reference_corrupts(unit_box: BoxParams, empty_bulk: PlanarPoints) -> None:
    """B creates while A absorbs: the discrepancy is lost at the sink time."""
    path = run_second_class(_empty(), PointSet1D([0.3], 1.0), empty_bulk, unit_box)
    assert path.corrupted
    assert path.corruption_time == 0.3
    assert path.corrupted_by(0.3) and not path.corrupted_by(0.2)


def test_bulk_left_of_z_keeps_it(unit_box: BoxParams) -> None:
    """A planar point right of Z moves a B particle in both copies."""
    bulk = PlanarPoints([(0.2, 0.5)], 1.0, 1.0)
    path, pair = run_coupled_pair(PointSet1D([0.4], 1.0), _empty(), bulk, unit_box)
    assert path.jumps == ()
    assert list(pair.state_a.live) == [0.0, 0.2]
    assert list(pair.state_b.live) == [0.2]


def test_bulk_pulls_discrepancy_right() -> None:
    """Z at 0.2 hands its role to the closest B particle right of y."""
    box = BoxParams(1.0, 1.0)
    bulk = PlanarPoints([(0.1, 0.5)], 1.0, 1.0)
    path = run_second_class(PointSet1D([0.2, 0.6], 1.0), _empty(), bulk, box, variant=Variant.DROP_FIRST_SOURCE)
    assert path.start == 0.2
    assert path.jumps == ((0.5, 0.6),)


def test_drop_first_source_starts_at_first_source(unit_box: BoxParams, empty_bulk: PlanarPoints) -> None:
    """A is H(S), B is H(S without its first point)."""
    path, pair = run_coupled_pair(
        PointSet1D([0.2, 0.6], 1.0), _empty(), empty_bulk, unit_box, variant=Variant.DROP_FIRST_SOURCE
    )
    assert path.start == 0.2
    assert z_at(path, 0.9) == 0.2
    assert list(pair.state_b.live) == [0.6]


def test_drop_first_source_without_sources(unit_box: BoxParams, empty_bulk: PlanarPoints) -> None:
    """No sources means no discrepancy from the start."""
    path = run_second_class(_empty(), _empty(), empty_bulk, unit_box, variant=Variant.DROP_FIRST_SOURCE)
    assert path.corrupted
    assert path.corruption_time == 0.0


def test_drop_first_sink_creates_discrepancy(unit_box: BoxParams, empty_bulk: PlanarPoints) -> None:
    """Only B sees the first sink, which removes 0.4 from B alone."""
    path, pair = run_coupled_pair(
        PointSet1D([0.4], 1.0), PointSet1D([0.3], 1.0), empty_bulk, unit_box, variant=Variant.DROP_FIRST_SINK
    )
    assert path.jumps == ((0.3, 0.4),)
    assert list(pair.state_a.live) == [0.4]
    assert list(pair.state_b.live) == []


def test_z_path_reads() -> None:
    """Right-continuous reads and the corruption contract."""
    path = ZPath(jumps=((1.0, 2.0), (3.0, 5.0)))
    assert z_at(path, 0.5) == 0.0
    assert z_at(path, 1.0) == 2.0
    assert z_at(path, 4.0) == 5.0
    with pytest.raises(ContractViolation):
        z_at(path, -1.0)

    lost = ZPath(corrupted=True, corruption_time=2.0)
    assert z_at(lost, 1.0) == 0.0
    with pytest.raises(ContractViolation):
        z_at(lost, 2.0)


def test_occupation_below() -> None:
    """Time spent at or left of x up to t."""
    path = ZPath(jumps=((1.0, 2.0), (3.0, 5.0)))
    assert path.occupation_below(4.0, 10.0) == 3.0
    assert path.occupation_below(10.0, 10.0) == 10.0
    assert path.occupation_below(1.0, 10.0) == 1.0
    assert ZPath(start=2.0).occupation_below(1.0, 5.0) == 0.0


@pytest.mark.parametrize("variant", list(Variant))
def test_random_coupling_audited_every_event(variant: Variant, stream: np.random.Generator) -> None:
    """A = B + {Z} after every event, Z never moves left, B matches an uncoupled run."""
    lam, rho, t = 2.0, 1.0, 4.0
    box = BoxParams(margin_width(lam, rho, t), t)
    for _ in range(20):
        sources = poisson_1d(lam, box.width, stream)
        sinks = poisson_1d(rho, box.horizon, stream)
        bulk = poisson_2d(1.0, box.width, box.horizon, stream)
        path, pair = run_coupled_pair(sources, sinks, bulk, box, variant=variant, audit_every=1)
        positions = [path.start] + [position for _, position in path.jumps]
        assert all(b > a for a, b in zip(positions, positions[1:]))
        outcome_a, outcome_b = final_outcomes(pair, box)
        outcome_a.check_conservation()
        if variant is Variant.ORIGIN:
            assert outcome_b.live == run(sources, sinks, bulk, box).live
        if variant is Variant.DROP_FIRST_SINK:
            assert outcome_a.live == run(sources, sinks.without_first(), bulk, box).live


def test_margin_width() -> None:
    """lambda = 2, rho = 1, t = 10 gives D = 1 and a margin of 5 + 10 sqrt(10) + 2.5."""
    assert diffusion_constant(2.0, 1.0) == pytest.approx(1.0)
    assert margin_width(2.0, 1.0, 10.0) == pytest.approx(39.123, abs=1e-3)


def test_shock_regime_required() -> None:
    """lambda * rho must exceed 1."""
    with pytest.raises(ParameterError):
        diffusion_constant(1.0, 1.0)
    with pytest.raises(ParameterError):
        boundary_intensities(0.5, 2.0)


def test_shock_speed() -> None:
    """The second-class particle drifts at rho / lambda."""
    assert shock_speed(2.0, 1.0) == pytest.approx(0.5)
    assert shock_speed(4.0, 3.0) == pytest.approx(0.75)


def test_flux_targets() -> None:
    """lambda = 2, rho = 1, x = 10, t = 5 gives mean 7.5 and variance 12.5."""
    assert flux_mean_target(2.0, 1.0, 10.0, 5.0) == pytest.approx(7.5)
    assert flux_variance_target(2.0, 1.0, 10.0, 5.0) == pytest.approx(12.5)


def test_n_windows() -> None:
    """Windows t R(S) and t R(W)."""
    assert n_windows(2.0, 1.0, 8.0) == (2.0, 4.0)


def test_n_functional_value() -> None:
    """(3 * 0.5 * 8 - 9) / 1 = 3."""
    assert n_functional_value(4, 5, 2.0, 1.0, 8.0) == pytest.approx(3.0)


def test_n_functional_counts_windows() -> None:
    """Three sources in [0, 2] and two sinks in [0, 4] give (12 - 5) / 1."""
    sources = PointSet1D([0.5, 1.0, 1.5, 3.0], 10.0)
    sinks = PointSet1D([1.0, 2.5, 5.0], 10.0)
    assert n_functional(sources, sinks, 2.0, 1.0, 8.0) == pytest.approx(7.0)


def test_n_functional_at_time_zero() -> None:
    """Empty windows at t = 0."""
    assert n_functional(PointSet1D([0.5], 1.0), PointSet1D([0.5], 1.0), 2.0, 1.0, 0.0) == 0.0


def test_n_functional_errors() -> None:
    """Subcritical densities and windows longer than the data are parameter errors."""
    with pytest.raises(ParameterError):
        n_functional(_empty(10.0), _empty(10.0), 1.0, 1.0, 1.0)
    with pytest.raises(ParameterError):
        n_functional(_empty(1.0), _empty(10.0), 2.0, 1.0, 8.0)
    with pytest.raises(ParameterError):
        n_functional(_empty(10.0), _empty(10.0), 2.0, 1.0, -1.0)


@given(
    st.integers(min_value=0, max_value=500),
    st.integers(min_value=0, max_value=500),
    st.floats(min_value=0.5, max_value=4.0),
    st.floats(min_value=0.5, max_value=4.0),
    st.floats(min_value=0.0, max_value=200.0),
)
def test_n_functional_value_inverts(sources: int, sinks: int, lam: float, rho: float, t: float) -> None:
    """Scaling back by (lambda - 1/rho) recovers 3 (rho - 1/lambda) t minus the counts."""
    assume(lam * rho > 1.05)
    value = n_functional_value(sources, sinks, lam, rho, t)
    assert value * (lam - 1 / rho) + sources + sinks == pytest.approx(3 * (rho - 1 / lam) * t, abs=1e-6)


def test_boundary_intensities() -> None:
    """S_eta, I, W_sigma, J for lambda = 2, rho = 1."""
    assert boundary_intensities(2.0, 1.0) == pytest.approx((1.0, 1.0, 0.5, 0.5))


def test_boundary_quadruple_superposes() -> None:
    """S_sigma = S_eta + I and W_eta = W_sigma + J."""
    bq = BoundaryQuadruple(
        s_eta=PointSet1D([0.5], 2.0), i=PointSet1D([1.5], 2.0), w_sigma=PointSet1D([0.2], 2.0), j=_empty(2.0)
    )
    assert list(bq.s_sigma) == [0.5, 1.5]
    assert list(bq.w_eta) == [0.2]


def test_flux_identical_boundaries(stream: np.random.Generator) -> None:
    """With I and J empty both processes coincide."""
    box = BoxParams(5.0, 5.0)
    bq = BoundaryQuadruple(
        s_eta=poisson_1d(1.0, 5.0, stream), i=_empty(5.0), w_sigma=poisson_1d(0.5, 5.0, stream), j=_empty(5.0)
    )
    assert run_flux(bq, poisson_2d(1.0, 5.0, 5.0, stream), box).xi == 0


def test_flux_without_events_counts_i() -> None:
    """No sinks and no planar points: xi is the number of extra sources."""
    box = BoxParams(2.0, 2.0)
    bq = BoundaryQuadruple(
        s_eta=PointSet1D([0.5], 2.0), i=PointSet1D([0.7, 1.2, 1.9], 2.0), w_sigma=_empty(2.0), j=_empty(2.0)
    )
    assert run_flux(bq, PlanarPoints((), 2.0, 2.0), box).xi == 3


def test_flux_random_runs_conserve(stream: np.random.Generator) -> None:
    """Both coupled runs conserve particles and share the planar points."""
    box = BoxParams(6.0, 4.0)
    for _ in range(20):
        bq = make_coupled_boundaries(2.0, 1.0, box, stream)
        outcome = run_flux(bq, poisson_2d(1.0, box.width, box.horizon, stream), box)
        outcome.sigma_outcome.check_conservation()
        outcome.eta_outcome.check_conservation()
        assert outcome.xi == outcome.sigma_outcome.chi - outcome.eta_outcome.chi


def test_check_shared_queue_mismatch() -> None:
    """An eta queue with a foreign planar point is rejected."""
    sigma_queue = [Event(0.3, EventKind.BULK, 0.2, 0)]
    with pytest.raises(InvariantViolation):
        check_shared_queue(sigma_queue, [], _empty())
    eta_queue = [Event(0.1, EventKind.SINK, 0.0, 0), *sigma_queue]
    check_shared_queue(sigma_queue, eta_queue, PointSet1D([0.1], 1.0))


def test_margin_is_finite_for_shock_regime() -> None:
    """The margin grows like the shock speed times t."""
    small, large = margin_width(2.0, 1.0, 10.0), margin_width(2.0, 1.0, 1000.0)
    assert math.isfinite(large) and large > small


def test_short_time_variance_follows_first_jump(stream: np.random.Generator) -> None:
    """Up to the first sink Z sits at 0, then jumps an Exp(lambda) distance: Var Z(t) / t -> 2 rho / lambda^2."""
    lam, rho, t = 2.0, 1.0, 0.05
    box = BoxParams(margin_width(lam, rho, t), t)
    zs = []
    for _ in range(20_000):
        sources = poisson_1d(lam, box.width, stream)
        sinks = poisson_1d(rho, box.horizon, stream)
        path = run_second_class(sources, sinks, poisson_2d(1.0, box.width, box.horizon, stream), box)
        if not path.corrupted_by(t):
            zs.append(z_at(path, t))
    slope = float(np.var(zs, ddof=1)) / t
    assert 0.35 <= slope <= 0.65
    assert diffusion_constant(lam, rho) == pytest.approx(1.0)
