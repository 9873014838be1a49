"""
Named, reproducible experiments: replica loops, estimates, verdicts and output files.

Every replica draws from its own stream, derived from (master seed, experiment, replica
index), so results do not depend on execution order or on the number of workers.
"""

import hashlib
import math
import time
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np
from rich.panel import Panel
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn
from rich.table import Table

from had_shock_lab import __version__
from had_shock_lab.config import ExperimentConfig
from had_shock_lab.had_engine import BoxParams, run
from had_shock_lab.logger import console, err_console, log
from had_shock_lab.lpp_oracle import lis_interior, longest_chain
from had_shock_lab.randgen import StreamKey, derive_stream, poisson_1d, poisson_2d, uniform_points
from had_shock_lab.schema import MANIFEST_SCHEMA, SUMMARY_SCHEMA, validate_document
from had_shock_lab.shock_coupling import (
    Variant,
    ZPath,
    diffusion_constant,
    final_outcomes,
    flux_mean_target,
    flux_variance_target,
    make_coupled_boundaries,
    n_functional,
    run_coupled_pair,
    run_flux,
    shock_speed,
    z_at,
)
from had_shock_lab.stats import (
    MomentAccumulator,
    TestReport,
    cross_correlation,
    dispersion_index,
    estimate_moments,
    identity_a47_check,
    ks_exponential,
    normality_test,
)
from had_shock_lab.utils import ContractViolation, UndefinedError, write_csv, write_json

CORRUPTION_LIMIT = 0.001
ULAM_BAND = (1.80, 2.00)
ULAM_CALIBRATED_POINTS = 10_000

Z_HEADER = ("replica", "seed_label", "Z_t", "N_t_functional", "corrupted", "C_A", "C_B")
CLT_HEADER = ("replica", "seed_label", "horizon", "Z_t", "N_t_functional", "corrupted", "C_A", "C_B")
FLUX_HEADER = ("replica", "xi", "N_sigma", "W_sigma", "N_eta", "W_eta", "S_sigma", "E_sigma")
BURKE_HEADER = ("replica", "seed_label", "N_count", "E_count", "N_first_gap", "E_first_gap", "C")
LPP_HEADER = ("replica", "seed_label", "S_count", "W_count", "P_count", "chi", "longest_chain", "C", "agree")
ULAM_HEADER = ("replica", "seed_label", "n", "lis", "ratio")

Row = tuple[Any, ...]


@dataclass(frozen=True)
class ReplicaResult:
    """Raw output of one replica."""

    index: int
    seed_label: str
    rows: tuple[Row, ...]
    corrupted: bool = False
    payload: Optional[ZPath] = None


@dataclass(frozen=True)
class Verdict:
    """
    An estimate checked against an acceptance band.

    Reference verdicts compare against a published closed form that the simulated
    process does not reproduce; they are reported but do not decide `Summary.passed`.
    """

    quantity: str
    estimate: float
    low: float
    high: float
    target: Optional[float] = None
    open_high: bool = False
    reference: bool = False

    @property
    def passed(self) -> bool:
        """Estimate inside the band (NaN never passes)."""
        if not math.isfinite(self.estimate):
            return False
        below = self.estimate < self.high if self.open_high else self.estimate <= self.high
        return self.low <= self.estimate and below

    def to_row(self) -> dict[str, Any]:
        """JSON row."""
        return {
            "quantity": self.quantity,
            "estimate": _clean(self.estimate),
            "target": _clean(self.target),
            "low": _clean(self.low),
            "high": _clean(self.high),
            "passed": self.passed,
            "reference": self.reference,
        }


@dataclass
class Summary:
    """Estimates, test reports, targets and verdicts of one experiment."""

    estimates: dict[str, Any] = field(default_factory=dict)
    tests: list[dict[str, Any]] = field(default_factory=list)
    targets: dict[str, Any] = field(default_factory=dict)
    verdicts: list[Verdict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        """Every gating verdict passed and no gating test rejected."""
        verdicts_ok = all(v.passed for v in self.verdicts if not v.reference)
        return verdicts_ok and all(row["verdict"] != "fail" for row in self.tests if not row.get("reference"))

    def to_document(self, config: ExperimentConfig) -> dict[str, Any]:
        """Summary JSON document."""
        return _clean(
            {
                "experiment": config.name,
                "params": config.params(),
                "estimates": self.estimates,
                "tests": self.tests,
                "paper_targets": self.targets,
                "verdicts": [v.to_row() for v in self.verdicts],
                "passed": self.passed,
            }
        )


@dataclass(frozen=True)
class RunManifest:
    """
    Record of one experiment run.

    Re-running the echoed config reproduces `rows` and the raw CSV digest exactly;
    only `wall_clock_seconds` varies.
    """

    config: dict[str, Any]
    version: str
    replicas: int
    seed_labels: tuple[str, ...]
    corrupted_replicas: int
    wall_clock_seconds: float
    raw_csv: Path
    raw_csv_sha256: str
    rows: tuple[dict[str, Any], ...]
    passed: bool
    summary: dict[str, Any] = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict[str, Any]:
        """Manifest JSON document."""
        return _clean(
            {
                "config": self.config,
                "version": self.version,
                "replicas": self.replicas,
                "seed_labels": list(self.seed_labels),
                "corrupted_replicas": self.corrupted_replicas,
                "wall_clock_seconds": self.wall_clock_seconds,
                "raw_csv": str(self.raw_csv),
                "raw_csv_sha256": self.raw_csv_sha256,
                "rows": list(self.rows),
                "passed": self.passed,
            }
        )


def _clean(value: Any) -> Any:
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


# ---------------------------------------------------------------------------
# replicas


def replica_stream(config: ExperimentConfig, index: int) -> tuple[str, np.random.Generator]:
    """Label and generator of replica `index`."""
    key = StreamKey(config.master_seed).child(config.name, index, "replica")
    return key.label, derive_stream(key)


def _shock_inputs(config: ExperimentConfig, box: BoxParams, stream: np.random.Generator):
    sources = poisson_1d(config.lam, box.width, stream)
    sinks = poisson_1d(config.rho, box.horizon, stream)
    bulk = poisson_2d(1.0, box.width, box.horizon, stream)
    return sources, sinks, bulk


def z_replica(config: ExperimentConfig, box: BoxParams, index: int) -> ReplicaResult:
    """Coupled second-class run; one row per horizon (one horizon unless clt_dependence)."""
    label, stream = replica_stream(config, index)
    sources, sinks, bulk = _shock_inputs(config, box, stream)
    path, pair = run_coupled_pair(sources, sinks, bulk, box, variant=Variant(config.variant))
    outcome_a, outcome_b = final_outcomes(pair, box)
    ladder = config.horizons if config.name == "clt_dependence" else (config.t,)

    rows = []
    for h in ladder:
        lost = path.corrupted_by(h)
        z = "" if lost else z_at(path, h)
        n = n_functional(sources, sinks, config.lam, config.rho, h)
        prefix = (index, label, h) if config.name == "clt_dependence" else (index, label)
        rows.append((*prefix, z, n, int(lost), outcome_a.created, outcome_b.created))

    corrupted = path.corrupted_by(box.horizon)
    if corrupted:
        log.debug(f"Replica {label} corrupted at time {path.corruption_time}")
    payload = path if config.name == "identity_a47" and not corrupted else None
    return ReplicaResult(index, label, tuple(rows), corrupted, payload)


def flux_replica(config: ExperimentConfig, box: BoxParams, index: int) -> ReplicaResult:
    """Basic-coupling run; one row with the flux and the boundary counts."""
    label, stream = replica_stream(config, index)
    quadruple = make_coupled_boundaries(config.lam, config.rho, box, stream)
    bulk = poisson_2d(1.0, box.width, box.horizon, stream)
    flux = run_flux(quadruple, bulk, box)
    sigma, eta = flux.sigma_outcome, flux.eta_outcome
    row = (
        index,
        flux.xi,
        len(sigma.live),
        sigma.sink_events,
        len(eta.live),
        eta.sink_events,
        sigma.source_count,
        len(sigma.entries),
    )
    return ReplicaResult(index, label, (row,))


def burke_replica(config: ExperimentConfig, box: BoxParams, index: int) -> ReplicaResult:
    """Stationary run with sources at density gamma and sinks at 1/gamma."""
    label, stream = replica_stream(config, index)
    sources = poisson_1d(config.gamma, box.width, stream)
    sinks = poisson_1d(1 / config.gamma, box.horizon, stream)
    bulk = poisson_2d(1.0, box.width, box.horizon, stream)
    outcome = run(sources, sinks, bulk, box)
    n_gap = outcome.live.first_gap() if len(outcome.live) else ""
    e_gap = outcome.entries.first_gap() if len(outcome.entries) else ""
    row = (index, label, len(outcome.live), len(outcome.entries), n_gap, e_gap, outcome.created)
    return ReplicaResult(index, label, (row,))


def lpp_replica(config: ExperimentConfig, box: BoxParams, index: int) -> ReplicaResult:
    """Engine run compared with the last-passage oracle on the same points."""
    label, stream = replica_stream(config, index)
    sources = poisson_1d(config.lam, box.width, stream)
    sinks = poisson_1d(config.rho, box.horizon, stream)
    bulk = poisson_2d(1.0, box.width, box.horizon, stream)
    outcome = run(sources, sinks, bulk, box)
    chain = longest_chain(sources, sinks, bulk)
    agree = "" if outcome.created else int(chain == outcome.chi)
    row = (index, label, len(sources), len(sinks), len(bulk), outcome.chi, chain, outcome.created, agree)
    return ReplicaResult(index, label, (row,))


def ulam_replica(config: ExperimentConfig, box: BoxParams, index: int) -> ReplicaResult:
    """Longest increasing subsequence of `ulam_points` uniform points."""
    label, stream = replica_stream(config, index)
    n = config.ulam_points
    lis = lis_interior(uniform_points(n, box.width, box.horizon, stream))
    return ReplicaResult(index, label, ((index, label, n, lis, lis / math.sqrt(n)),))


# ---------------------------------------------------------------------------
# summaries


def _records(results: Sequence[ReplicaResult], header: Sequence[str]) -> list[dict[str, Any]]:
    return [dict(zip(header, row)) for result in results for row in result.rows]


def _describe(acc: MomentAccumulator) -> dict[str, Any]:
    if acc.n < 2:
        return {"n": acc.n, "mean": acc.mean if acc.n else None}
    return acc.summary()


def _variance_or_nan(acc: MomentAccumulator) -> float:
    return acc.variance if acc.n >= 2 else math.nan


def mean_verdict(quantity: str, acc: MomentAccumulator, target: float, variance: float) -> Verdict:
    """Sample mean within target +- 3 sqrt(variance / n)."""
    half = 3 * math.sqrt(variance / acc.n) if acc.n else math.inf
    return Verdict(quantity, acc.mean if acc.n else math.nan, target - half, target + half, target)


def sampled_mean_verdict(quantity: str, acc: MomentAccumulator, target: float) -> Verdict:
    """Sample mean within target +- 3 standard errors estimated from the sample itself."""
    if acc.n < 2:
        return Verdict(quantity, math.nan, -math.inf, math.inf, target)
    half = 3 * acc.std_error
    return Verdict(quantity, acc.mean, target - half, target + half, target)


def variance_verdict(quantity: str, acc: MomentAccumulator, target: float, reference: bool = False) -> Verdict:
    """Sample variance within target +- 3 target sqrt(2 / n)."""
    half = 3 * target * math.sqrt(2 / acc.n) if acc.n else math.inf
    return Verdict(quantity, _variance_or_nan(acc), target - half, target + half, target, reference=reference)


def corruption_verdict(results: Sequence[ReplicaResult]) -> Verdict:
    """Corrupted fraction strictly below 0.1%."""
    fraction = sum(r.corrupted for r in results) / len(results)
    if fraction >= CORRUPTION_LIMIT:
        log.error(f"❌ Corrupted fraction {fraction:.4%} reaches the {CORRUPTION_LIMIT:.1%} limit")
    return Verdict("corrupted_fraction", fraction, 0.0, CORRUPTION_LIMIT, 0.0, open_high=True)


def run_test(
    test: Callable[..., TestReport],
    *args: Any,
    parameters: Optional[dict[str, Any]] = None,
    reference: bool = False,
) -> tuple[Optional[TestReport], dict[str, Any]]:
    """Run one test; too little or degenerate data gives a skipped row instead of an error."""
    try:
        report = test(*args)
    except (ContractViolation, UndefinedError) as e:
        log.warning(f"Skipping {test.__name__}: {e}")
        row = {
            "test": test.__name__,
            "parameters": dict(parameters or {}),
            "statistic": None,
            "p_value": None,
            "n": len(args[0]) if args and hasattr(args[0], "__len__") else 0,
            "verdict": "skipped",
            "details": {"reason": str(e)},
            "reference": reference,
        }
        return None, row
    return report, {**report.to_row(parameters), "reference": reference}


def summarize_mean_var_z(config: ExperimentConfig, box: BoxParams, results: Sequence[ReplicaResult]) -> Summary:
    """Mean and variance of Z(t) and N(t) against rho/lambda t and D t."""
    records = [r for r in _records(results, Z_HEADER) if not r["corrupted"]]
    zs = [r["Z_t"] for r in records]
    ns = [r["N_t_functional"] for r in records]
    z_acc, n_acc = estimate_moments(zs), estimate_moments(ns)
    mean_target = shock_speed(config.lam, config.rho) * config.t
    var_target = diffusion_constant(config.lam, config.rho) * config.t

    summary = Summary(
        estimates={
            "Z_t": _describe(z_acc),
            "N_t": _describe(n_acc),
            "var_Z_over_Dt": _variance_or_nan(z_acc) / var_target,
            "box_width": box.width,
        },
        targets={"mean_Z": mean_target, "var_Z": var_target, "mean_N": mean_target, "var_N": var_target},
    )
    if Variant(config.variant) is Variant.ORIGIN:
        summary.verdicts += [
            mean_verdict("mean_Z", z_acc, mean_target, var_target),
            variance_verdict("var_Z", z_acc, var_target, reference=True),
        ]
    else:
        log.warning(f"Variant {Variant(config.variant).value}: Z moments are reported without verdicts")
    summary.verdicts += [
        mean_verdict("mean_N", n_acc, mean_target, var_target),
        variance_verdict("var_N", n_acc, var_target),
        corruption_verdict(results),
    ]
    return summary


def summarize_identity(config: ExperimentConfig, box: BoxParams, results: Sequence[ReplicaResult]) -> Summary:
    """
    Integral identity at the configured x and at the box width.

    At the box width both sides reduce to the mean of Z(t), which gates the run; below it
    the identity needs translation invariance of the basic coupling and is a reference test.
    """
    paths = [r.payload for r in results if r.payload is not None]
    summary = Summary(
        estimates={"Z_t": _describe(estimate_moments(z_at(p, config.t) for p in paths)), "box_width": box.width},
        targets={"identity_difference": 0.0, "mean_Z": shock_speed(config.lam, config.rho) * config.t},
    )
    for level in (float(config.x or box.width), box.width):
        report, row = run_test(
            identity_a47_check,
            paths,
            level,
            config.t,
            config.lam,
            config.rho,
            parameters={"x": level, "t": config.t},
            reference=level < box.width,
        )
        summary.tests.append(row)
        if report is not None:
            summary.estimates[f"identity_x={level:g}"] = dict(report.details)
    summary.verdicts.append(corruption_verdict(results))
    return summary


def summarize_clt(config: ExperimentConfig, box: BoxParams, results: Sequence[ReplicaResult]) -> Summary:
    """Mean-square distance of Z and N along the horizon ladder, covariance ratio and normality."""
    records = _records(results, CLT_HEADER)
    d = diffusion_constant(config.lam, config.rho)
    rungs = []
    for h in config.horizons:
        rung = [r for r in records if r["horizon"] == h and not r["corrupted"]]
        zs = [r["Z_t"] for r in rung]
        ns = [r["N_t_functional"] for r in rung]
        paired = estimate_moments(zs, ns)
        squared = estimate_moments((z - n) ** 2 for z, n in zip(zs, ns))
        rungs.append(
            {
                "horizon": h,
                "n": paired.n,
                "mean_Z": paired.mean,
                "var_Z": _variance_or_nan(paired),
                "mean_N": paired.mean_y,
                "mse_over_Dt": squared.mean / (d * h) if squared.n else math.nan,
                "mse_over_Dt_std_error": squared.std_error / (d * h) if squared.n >= 2 else math.nan,
                "cov_over_t": paired.covariance / h if paired.n >= 2 else math.nan,
                "zs": zs,
            }
        )

    ratios = [rung["mse_over_Dt"] for rung in rungs]
    decreasing = sum(b < a for a, b in zip(ratios, ratios[1:])) / (len(ratios) - 1)
    last = rungs[-1]
    summary = Summary(
        estimates={"ladder": [{k: v for k, v in rung.items() if k != "zs"} for rung in rungs], "box_width": box.width},
        targets={"D": d, "cov_over_t": d, "mse_over_Dt_limit": 0.0},
        verdicts=[
            Verdict("mse_over_Dt_decreasing", decreasing, 1.0, 1.0, 1.0),
            Verdict(f"cov_over_t_at_{last['horizon']:g}", last["cov_over_t"], 0.8 * d, 1.2 * d, d, reference=True),
            corruption_verdict(results),
        ],
    )
    h = last["horizon"]
    scale = math.sqrt(d * h)
    standardized = [(z - shock_speed(config.lam, config.rho) * h) / scale for z in last["zs"]]
    _, row = run_test(normality_test, standardized, parameters={"horizon": h, "series": "standardized Z"})
    summary.tests.append(row)
    return summary


def flux_variance_terms(records: Sequence[dict[str, Any]]) -> MomentAccumulator:
    """
    Per-replica terms whose mean estimates Var xi + 2 Cov(E_sigma, N_eta).

    Burke's theorem for sigma and for eta alone makes this sum equal to
    (lambda - 1/rho) x + (rho - 1/lambda) t. The covariance of the sigma entries with the
    final eta count does not vanish in the basic coupling, so Var xi alone falls short of
    that value.
    """
    if len(records) < 2:
        return estimate_moments(())
    xi = np.array([float(r["xi"]) for r in records])
    entries = np.array([float(r["E_sigma"]) for r in records])
    final = np.array([float(r["N_eta"]) for r in records])
    scale = xi.size / (xi.size - 1)
    terms = scale * ((xi - xi.mean()) ** 2 + 2 * (entries - entries.mean()) * (final - final.mean()))
    return estimate_moments(terms.tolist())


def summarize_flux(config: ExperimentConfig, box: BoxParams, results: Sequence[ReplicaResult]) -> Summary:
    """Flux moments, the Burke variance identity and the boundary covariances of the basic coupling."""
    records = _records(results, FLUX_HEADER)
    xi_acc = estimate_moments(r["xi"] for r in records)
    identity_acc = flux_variance_terms(records)
    x, t = box.width, box.horizon
    mean_target = flux_mean_target(config.lam, config.rho, x, t)
    var_target = flux_variance_target(config.lam, config.rho, x, t)
    summary = Summary(
        estimates={"xi": _describe(xi_acc), "var_xi_plus_2cov_E_sigma_N_eta": _describe(identity_acc)},
        targets={
            "mean_xi": mean_target,
            "var_xi": var_target,
            "var_xi_plus_2cov_E_sigma_N_eta": var_target,
            "cov_S_sigma_W_eta": 0.0,
            "cov_E_sigma_N_eta": 0.0,
        },
        verdicts=[
            mean_verdict("mean_xi", xi_acc, mean_target, var_target),
            variance_verdict("var_xi", xi_acc, var_target, reference=True),
            sampled_mean_verdict("var_xi_plus_2cov_E_sigma_N_eta", identity_acc, var_target),
        ],
    )
    # S_sigma and W_eta are independent by construction; E_sigma and N_eta are not
    for first, second, reference in (("S_sigma", "W_eta", False), ("E_sigma", "N_eta", True)):
        a = [float(r[first]) for r in records]
        b = [float(r[second]) for r in records]
        if len(a) >= 2:
            summary.estimates[f"cov_{first}_{second}"] = estimate_moments(a, b).covariance
        _, row = run_test(cross_correlation, a, b, parameters={"series": f"{first},{second}"}, reference=reference)
        summary.tests.append(row)
    return summary


def summarize_burke(config: ExperimentConfig, box: BoxParams, results: Sequence[ReplicaResult]) -> Summary:
    """Poisson counts, exponential first gaps and independence of N and E."""
    records = _records(results, BURKE_HEADER)
    n_counts = [float(r["N_count"]) for r in records]
    e_counts = [float(r["E_count"]) for r in records]
    n_gaps = [r["N_first_gap"] for r in records if r["N_first_gap"] != ""]
    e_gaps = [r["E_first_gap"] for r in records if r["E_first_gap"] != ""]
    gamma = config.gamma
    replicas = len(records)

    summary = Summary(
        estimates={"N_count": _describe(estimate_moments(n_counts)), "E_count": _describe(estimate_moments(e_counts))},
        targets={"mean_N": gamma * box.width, "mean_E": box.horizon / gamma, "dispersion": 1.0, "correlation": 0.0},
    )
    spread = max(0.1, 3 * math.sqrt(2 / replicas))
    for series, counts in (("N", n_counts), ("E", e_counts)):
        report, row = run_test(dispersion_index, counts, parameters={"series": series})
        summary.tests.append(row)
        if report is not None:
            summary.verdicts.append(Verdict(f"dispersion_{series}", report.statistic, 1 - spread, 1 + spread, 1.0))
    # a first gap is only seen when it falls inside the window, so the law is truncated there
    for series, gaps, rate, window in (("N", n_gaps, gamma, box.width), ("E", e_gaps, 1 / gamma, box.horizon)):
        parameters = {"series": f"{series} first gap", "rate": rate, "window": window}
        _, row = run_test(ks_exponential, gaps, rate, window, parameters=parameters)
        summary.tests.append(row)
    report, row = run_test(cross_correlation, n_counts, e_counts, parameters={"series": "N,E"})
    summary.tests.append(row)
    if report is not None:
        bound = 4 / math.sqrt(replicas)
        summary.verdicts.append(Verdict("correlation_N_E", report.statistic, -bound, bound, 0.0, open_high=True))
    return summary


def summarize_lpp(config: ExperimentConfig, box: BoxParams, results: Sequence[ReplicaResult]) -> Summary:
    """Exact agreement of engine counts and longest chains."""
    records = _records(results, LPP_HEADER)
    checked = [r for r in records if r["agree"] != ""]
    mismatches = sum(1 for r in checked if not r["agree"])
    if mismatches:
        log.error(f"❌ {mismatches} replicas disagree with the last-passage oracle")
    return Summary(
        estimates={
            "checked": len(checked),
            "skipped_with_created": len(records) - len(checked),
            "chi": _describe(estimate_moments(r["chi"] for r in records)),
        },
        targets={"oracle_mismatches": 0},
        verdicts=[Verdict("oracle_mismatches", float(mismatches), 0.0, 0.0, 0.0)],
    )


def summarize_ulam(config: ExperimentConfig, box: BoxParams, results: Sequence[ReplicaResult]) -> Summary:
    """Mean of L_n / sqrt(n); the band is calibrated at n = 10^4, smaller n only checks convergence from below."""
    acc = estimate_moments(r["ratio"] for r in _records(results, ULAM_HEADER))
    low, high = ULAM_BAND if config.ulam_points >= ULAM_CALIBRATED_POINTS else (0.0, ULAM_BAND[1])
    return Summary(
        estimates={"ratio": _describe(acc), "n": config.ulam_points},
        targets={"ulam_constant": 2.0},
        verdicts=[Verdict("mean_ratio", acc.mean, low, high, 2.0)],
    )


@dataclass(frozen=True)
class ExperimentDefinition:
    """How to run one replica of an experiment and how to summarize all of them."""

    header: tuple[str, ...]
    replica: Callable[[ExperimentConfig, BoxParams, int], ReplicaResult]
    summarize: Callable[[ExperimentConfig, BoxParams, Sequence[ReplicaResult]], Summary]


EXPERIMENTS: dict[str, ExperimentDefinition] = {
    "mean_var_z": ExperimentDefinition(Z_HEADER, z_replica, summarize_mean_var_z),
    "identity_a47": ExperimentDefinition(Z_HEADER, z_replica, summarize_identity),
    "clt_dependence": ExperimentDefinition(CLT_HEADER, z_replica, summarize_clt),
    "flux_moments": ExperimentDefinition(FLUX_HEADER, flux_replica, summarize_flux),
    "burke_test": ExperimentDefinition(BURKE_HEADER, burke_replica, summarize_burke),
    "lpp_check": ExperimentDefinition(LPP_HEADER, lpp_replica, summarize_lpp),
    "ulam": ExperimentDefinition(ULAM_HEADER, ulam_replica, summarize_ulam),
}


# ---------------------------------------------------------------------------
# orchestration


def run_replicas(config: ExperimentConfig, box: BoxParams, definition: ExperimentDefinition) -> list[ReplicaResult]:
    """
    Run all replicas, in parallel when `workers` > 1, returning results ordered by replica index.

    Args:
        config: Validated configuration
        box: Simulation box
        definition: Experiment definition

    Returns:
        list[ReplicaResult]: One result per replica, by index

    """
    task_fn = partial(definition.replica, config, box)
    results: list[ReplicaResult] = []
    with Progress(
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        console=err_console,
        transient=True,
    ) as progress:
        task = progress.add_task(f"Running {config.name}...", total=config.replicas)
        if config.workers == 1:
            for index in range(config.replicas):
                results.append(task_fn(index))
                progress.advance(task)
        else:
            chunksize = max(1, config.replicas // (config.workers * 8))
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                for result in pool.map(task_fn, range(config.replicas), chunksize=chunksize):
                    results.append(result)
                    progress.advance(task)
    return results


def _sha256(path: Path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def run_experiment(config: ExperimentConfig) -> RunManifest:
    """
    Run a named experiment and write its raw CSV, summary JSON and manifest JSON.

    Args:
        config: Experiment configuration, validated here before any sampling

    Returns:
        RunManifest: What was run and what it produced

    """
    config.validate()
    definition = EXPERIMENTS[config.name]
    box = config.box()
    log.info(
        f"Running {config.name}: {config.replicas} replicas, seed {config.master_seed}, "
        f"box {box.width:.6g} x {box.horizon:.6g}"
    )

    started = time.perf_counter()
    results = run_replicas(config, box, definition)
    summary = definition.summarize(config, box, results)
    elapsed = time.perf_counter() - started

    out_dir = config.out_dir
    raw_path = write_csv(out_dir / f"{config.name}_raw.csv", definition.header, (row for r in results for row in r.rows))
    document = summary.to_document(config)
    validate_document(document, SUMMARY_SCHEMA)
    write_json(out_dir / f"{config.name}_summary.json", document)

    corrupted = sum(r.corrupted for r in results)
    if corrupted:
        log.warning(f"{corrupted} of {config.replicas} replicas corrupted and excluded")
    manifest = RunManifest(
        config=config.to_dict(),
        version=__version__,
        replicas=config.replicas,
        seed_labels=tuple(r.seed_label for r in results),
        corrupted_replicas=corrupted,
        wall_clock_seconds=elapsed,
        raw_csv=raw_path,
        raw_csv_sha256=_sha256(raw_path),
        rows=tuple(document["verdicts"] + document["tests"]),
        passed=summary.passed,
        summary=document,
    )
    manifest_doc = manifest.to_dict()
    validate_document(manifest_doc, MANIFEST_SCHEMA)
    write_json(out_dir / f"{config.name}_manifest.json", manifest_doc)

    for verdict in summary.verdicts:
        marker = "✅" if verdict.passed else "❌"
        level = log.info if verdict.passed else log.error
        level(f"{marker} {verdict.quantity}: {verdict.estimate:.6g} in [{verdict.low:.6g}, {verdict.high:.6g}]")
    log.info(f"Results written to {out_dir} in {elapsed:.1f}s")
    return manifest


def display_summary(manifest: RunManifest) -> None:
    """Print verdicts and test reports as a table."""
    table = Table()
    table.add_column("Check", style="cyan")
    table.add_column("Estimate", justify="right")
    table.add_column("Band / p", justify="right")
    table.add_column("Result")

    for row in manifest.rows:
        if "quantity" in row:
            band = f"[{_fmt(row['low'])}, {_fmt(row['high'])}]"
            result = _result_text("pass" if row["passed"] else "fail", row.get("reference", False))
            table.add_row(row["quantity"], _fmt(row["estimate"]), band, result)
        else:
            label = f"{row['test']} {_parameter_text(row['parameters'])}".strip()
            result = _result_text(row["verdict"], row.get("reference", False))
            table.add_row(label, _fmt(row["statistic"]), f"p={_fmt(row['p_value'])}", result)

    title = f"{manifest.config['name']} ({'passed' if manifest.passed else 'failed'})"
    console.print(Panel.fit(table, title=title, title_align="left"))


def _fmt(value: Any) -> str:
    return "n/a" if value is None else f"{value:.6g}"


def _parameter_text(parameters: dict[str, Any]) -> str:
    return ", ".join(f"{k}={v}" for k, v in parameters.items())


def _result_text(verdict: str, reference: bool) -> str:
    if reference:
        return f"[yellow]{verdict} (reference)[/]"
    colour = {"pass": "green", "fail": "red"}.get(verdict, "yellow")
    return f"[{colour}]{verdict}[/]"
