"""Mergeable moment estimators and the hypothesis tests that turn replica outputs into verdicts."""

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from typing import Any, Optional

import numpy as np
from scipy import stats as sps

from had_shock_lab.shock_coupling import ZPath, z_at
from had_shock_lab.utils import ContractViolation, DataError, ParameterError, UndefinedError

ALPHA = 0.01
# two-sided tail mass beyond 3 standard deviations
THREE_SIGMA_ALPHA = float(2 * sps.norm.sf(3.0))

MIN_KS_SAMPLES = 30
MIN_REPLICAS = 100
MIN_NORMALITY_SAMPLES = 500


@dataclass
class MomentAccumulator:
    """
    Streaming mean, variance and (for paired series) covariance, mergeable across workers.

    `m2` and `m2_y` are sums of squared deviations, `co_moment` the sum of cross deviations.
    """

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0
    paired: bool = False
    mean_y: float = 0.0
    m2_y: float = 0.0
    co_moment: float = 0.0

    def push(self, x: float, y: Optional[float] = None) -> "MomentAccumulator":
        """Add one observation (or one pair)."""
        if self.n == 0 and y is not None:
            self.paired = True
        if self.paired != (y is not None):
            raise DataError("cannot mix paired and unpaired observations in one accumulator")
        n = self.n + 1
        dx = x - self.mean
        self.mean += dx / n
        self.m2 += dx * (x - self.mean)
        if y is not None:
            dy = y - self.mean_y
            self.mean_y += dy / n
            self.m2_y += dy * (y - self.mean_y)
            self.co_moment += dx * (y - self.mean_y)
        self.n = n
        return self

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        """Accumulator of the concatenated data (Chan's pairwise update); neither input is modified."""
        if other.n == 0:
            return replace(self)
        if self.n == 0:
            return replace(other)
        if self.paired != other.paired:
            raise DataError("cannot merge paired and unpaired accumulators")
        n = self.n + other.n
        weight = self.n * other.n / n
        dx = other.mean - self.mean
        merged = MomentAccumulator(
            n=n,
            mean=self.mean + dx * other.n / n,
            m2=self.m2 + other.m2 + dx * dx * weight,
            paired=self.paired,
        )
        if self.paired:
            dy = other.mean_y - self.mean_y
            merged.mean_y = self.mean_y + dy * other.n / n
            merged.m2_y = self.m2_y + other.m2_y + dy * dy * weight
            merged.co_moment = self.co_moment + other.co_moment + dx * dy * weight
        return merged

    def _require(self, minimum: int, what: str) -> None:
        if self.n < minimum:
            raise UndefinedError(f"{what} needs at least {minimum} observations, have {self.n}")

    @property
    def variance(self) -> float:
        """Unbiased sample variance."""
        self._require(2, "variance")
        return self.m2 / (self.n - 1)

    @property
    def variance_y(self) -> float:
        """Unbiased sample variance of the paired series."""
        self._require(2, "variance")
        return self.m2_y / (self.n - 1)

    @property
    def covariance(self) -> float:
        """Unbiased sample covariance of the pairs."""
        if not self.paired:
            raise UndefinedError("covariance needs paired observations")
        self._require(2, "covariance")
        return self.co_moment / (self.n - 1)

    @property
    def std_error(self) -> float:
        """Standard error of the mean."""
        return math.sqrt(self.variance / self.n)

    def mean_ci(self, confidence: float = 0.95) -> tuple[float, float]:
        """Normal-approximation confidence interval for the mean."""
        half = _z_quantile(confidence) * self.std_error
        return self.mean - half, self.mean + half

    def variance_ci(self, confidence: float = 0.95) -> tuple[float, float]:
        """Confidence interval for the variance with relative standard error sqrt(2/n)."""
        half = _z_quantile(confidence) * self.variance * math.sqrt(2 / self.n)
        return self.variance - half, self.variance + half

    def summary(self, confidence: float = 0.95) -> dict[str, float]:
        """Plain dict for JSON summaries."""
        low, high = self.mean_ci(confidence)
        var_low, var_high = self.variance_ci(confidence)
        return {
            "n": self.n,
            "mean": self.mean,
            "mean_ci_low": low,
            "mean_ci_high": high,
            "variance": self.variance,
            "variance_ci_low": var_low,
            "variance_ci_high": var_high,
        }


def _z_quantile(confidence: float) -> float:
    if not 0 < confidence < 1:
        raise ParameterError(f"confidence must lie in (0, 1), got {confidence}")
    return float(sps.norm.ppf(0.5 + confidence / 2))


def estimate_moments(samples: Iterable[float], paired: Optional[Iterable[float]] = None) -> MomentAccumulator:
    """Accumulate a sample, or a paired sample when `paired` is given."""
    acc = MomentAccumulator()
    if paired is None:
        for x in samples:
            acc.push(float(x))
        return acc
    xs, ys = list(samples), list(paired)
    if len(xs) != len(ys):
        raise DataError(f"paired samples differ in length: {len(xs)} vs {len(ys)}")
    for x, y in zip(xs, ys):
        acc.push(float(x), float(y))
    return acc


def merge(a: MomentAccumulator, b: MomentAccumulator) -> MomentAccumulator:
    """Merged accumulator of two blocks."""
    return a.merge(b)


def merge_all(blocks: Sequence[MomentAccumulator]) -> MomentAccumulator:
    """Left-to-right merge, so that results depend only on the block order."""
    total = MomentAccumulator()
    for block in blocks:
        total = total.merge(block)
    return total


@dataclass(frozen=True)
class TestReport:
    """Outcome of one hypothesis test at level alpha."""

    __test__ = False  # not a pytest test class

    name: str
    statistic: float
    p_value: float
    n: int
    alpha: float = ALPHA
    details: Mapping[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        """The null hypothesis is not rejected."""
        return self.p_value >= self.alpha

    @property
    def verdict(self) -> str:
        """'pass' or 'fail'."""
        return "pass" if self.passed else "fail"

    def to_row(self, parameters: Optional[Mapping[str, Any]] = None) -> dict[str, Any]:
        """JSON row: test name, parameters, statistic, p, verdict."""
        return {
            "test": self.name,
            "parameters": dict(parameters or {}),
            "statistic": _finite_or_none(self.statistic),
            "p_value": self.p_value,
            "n": self.n,
            "alpha": self.alpha,
            "verdict": self.verdict,
            "details": {k: _finite_or_none(v) if isinstance(v, float) else v for k, v in self.details.items()},
        }


def _finite_or_none(value: float) -> Optional[float]:
    return float(value) if math.isfinite(value) else None


def _as_array(samples: Iterable[float]) -> np.ndarray:
    return np.asarray(list(samples) if not isinstance(samples, np.ndarray) else samples, dtype=np.float64)


def ks_exponential(
    gaps: Iterable[float], rate: float, upper: Optional[float] = None, alpha: float = ALPHA
) -> TestReport:
    """
    Kolmogorov-Smirnov test of gaps against Exponential(rate), truncated at `upper` when given.

    A first gap observed inside a window of length `upper` follows the truncated law.

    Args:
        gaps: Positive gaps
        rate: Exponential rate
        upper: Window length the gaps were conditioned to fall in
        alpha: Test level

    Returns:
        TestReport: KS statistic and p-value

    """
    arr = _as_array(gaps)
    if rate <= 0:
        raise ParameterError(f"rate must be positive, got {rate}")
    if arr.size < MIN_KS_SAMPLES:
        raise ContractViolation(f"KS test needs at least {MIN_KS_SAMPLES} gaps, got {arr.size}")
    if np.any(arr <= 0):
        raise DataError("gaps must be positive")
    if upper is None:
        result = sps.kstest(arr, "expon", args=(0.0, 1.0 / rate))
    else:
        if upper <= 0:
            raise ParameterError(f"upper must be positive, got {upper}")
        if np.any(arr > upper):
            raise DataError(f"gaps exceed the window length {upper}")
        result = sps.kstest(arr, "truncexpon", args=(upper * rate, 0.0, 1.0 / rate))
    return TestReport("ks_exponential", float(result.statistic), float(result.pvalue), int(arr.size), alpha)


def dispersion_index(counts: Iterable[float], alpha: float = ALPHA) -> TestReport:
    """
    Variance-to-mean ratio of counts with a two-sided chi-square reference (Poisson gives 1).

    Args:
        counts: One count per replica
        alpha: Test level

    Returns:
        TestReport: statistic is the dispersion index

    """
    arr = _as_array(counts)
    if arr.size < MIN_REPLICAS:
        raise ContractViolation(f"dispersion test needs at least {MIN_REPLICAS} replicas, got {arr.size}")
    mean = float(arr.mean())
    variance = float(arr.var(ddof=1))
    if variance == 0 or mean == 0:
        raise UndefinedError("dispersion index is undefined for zero-variance counts")
    index = variance / mean
    dof = arr.size - 1
    cdf = float(sps.chi2.cdf(dof * index, dof))
    p_value = min(1.0, 2 * min(cdf, 1 - cdf))
    return TestReport("dispersion_index", index, p_value, int(arr.size), alpha, {"mean": mean, "variance": variance})


def cross_correlation(a: Iterable[float], b: Iterable[float], alpha: float = ALPHA) -> TestReport:
    """
    Pearson correlation of two replica series with a Fisher-z reference for independence.

    Args:
        a: First series
        b: Second series, same length
        alpha: Test level

    Returns:
        TestReport: statistic is the correlation r

    """
    xs, ys = _as_array(a), _as_array(b)
    if xs.size != ys.size:
        raise DataError(f"series differ in length: {xs.size} vs {ys.size}")
    if xs.size < MIN_REPLICAS:
        raise ContractViolation(f"correlation test needs at least {MIN_REPLICAS} replicas, got {xs.size}")
    if xs.std() == 0 or ys.std() == 0:
        raise UndefinedError("correlation is undefined for a zero-variance series")
    r = float(np.clip(np.corrcoef(xs, ys)[0, 1], -1.0, 1.0))
    with np.errstate(divide="ignore"):
        z = float(np.arctanh(r)) * math.sqrt(xs.size - 3)
    p_value = float(2 * sps.norm.sf(abs(z)))
    return TestReport("cross_correlation", r, p_value, int(xs.size), alpha, {"fisher_z": z})


def _anderson_normal_pvalue(a2: float, n: int) -> float:
    """Stephens' approximation for the p-value of A^2 when mean and variance are estimated."""
    adjusted = a2 * (1 + 0.75 / n + 2.25 / n**2)
    if adjusted >= 0.6:
        p = math.exp(1.2937 - 5.709 * adjusted + 0.0186 * adjusted**2)
    elif adjusted >= 0.34:
        p = math.exp(0.9177 - 4.279 * adjusted - 1.38 * adjusted**2)
    elif adjusted >= 0.2:
        p = 1 - math.exp(-8.318 + 42.796 * adjusted - 59.938 * adjusted**2)
    else:
        p = 1 - math.exp(-13.436 + 101.14 * adjusted - 223.73 * adjusted**2)
    return min(1.0, max(0.0, p))


def normality_test(samples: Iterable[float], alpha: float = ALPHA) -> TestReport:
    """
    Anderson-Darling test (primary) and KS (secondary) against a fitted normal.

    Args:
        samples: At least 500 observations
        alpha: Test level

    Returns:
        TestReport: A^2 statistic and its p-value; KS results in details

    """
    arr = _as_array(samples)
    if arr.size < MIN_NORMALITY_SAMPLES:
        raise ContractViolation(f"normality test needs at least {MIN_NORMALITY_SAMPLES} samples, got {arr.size}")
    std = float(arr.std(ddof=1))
    if std == 0:
        raise DataError("normality test is degenerate for constant samples")
    a2 = float(sps.anderson(arr, dist="norm").statistic)
    ks = sps.kstest((arr - arr.mean()) / std, "norm")
    return TestReport(
        "normality_anderson_darling",
        a2,
        _anderson_normal_pvalue(a2, int(arr.size)),
        int(arr.size),
        alpha,
        {"ks_statistic": float(ks.statistic), "ks_p_value": float(ks.pvalue)},
    )


def _grid_occupation(path: ZPath, x: float, t: float, steps: int) -> float:
    """Trapezoid estimate of the time Z spends at or below x on a uniform grid over [0, t]."""
    grid = np.linspace(0.0, t, steps + 1)
    values = np.array([1.0 if z_at(path, u) <= x else 0.0 for u in grid])
    return float(np.sum((values[1:] + values[:-1]) / 2) * (t / steps))


def identity_a47_check(
    z_paths: Sequence[ZPath],
    x: float,
    t: float,
    lam: float,
    rho: float,
    grid_steps: Optional[int] = None,
    alpha: float = THREE_SIGMA_ALPHA,
) -> TestReport:
    """
    Check  int_0^x P(Z(t) > z) dz = (rho/lambda) int_0^t P(Z(u) <= x) du  on an ensemble.

    The left side is E[min(Z(t), x)]; the right side integrates u -> 1{Z(u) <= x} exactly
    from the jump records (or on a uniform grid when `grid_steps` is given). The report's
    statistic is the standardized paired difference.

    Args:
        z_paths: Uncorrupted trajectories
        x: Space level
        t: Time
        lam: Source intensity
        rho: Sink intensity
        grid_steps: Use the grid estimator with this many steps
        alpha: Test level, three sigma by default

    Returns:
        TestReport: z-score of left minus right

    """
    if not z_paths:
        raise ContractViolation("identity check needs at least one path")
    if t < 0 or x < 0:
        raise ParameterError(f"x and t must be nonnegative, got x={x}, t={t}")
    speed = rho / lam
    acc = MomentAccumulator()
    for path in z_paths:
        if path.corrupted_by(t):
            raise ContractViolation(f"corrupted path supplied (corruption at {path.corruption_time})")
        left = min(z_at(path, t), x)
        if grid_steps is None:
            occupation = path.occupation_below(x, t)
        else:
            occupation = _grid_occupation(path, x, t, grid_steps) if t > 0 else 0.0
        acc.push(left, speed * occupation)

    difference = acc.mean - acc.mean_y
    if acc.n > 1:
        var_diff = max(acc.variance + acc.variance_y - 2 * acc.covariance, 0.0)
        se = math.sqrt(var_diff / acc.n)
    else:
        se = 0.0
    if se == 0:
        statistic = 0.0 if difference == 0 else math.copysign(math.inf, difference)
    else:
        statistic = difference / se
    p_value = float(2 * sps.norm.sf(abs(statistic)))
    details = {
        "left": acc.mean,
        "right": acc.mean_y,
        "difference": difference,
        "std_error": se,
        "x": x,
        "t": t,
        "method": "exact" if grid_steps is None else f"grid:{grid_steps}",
    }
    return TestReport("identity_a47", statistic, p_value, acc.n, alpha, details)
