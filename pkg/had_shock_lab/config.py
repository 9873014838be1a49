"""Configuration handling for had-shock-lab."""

import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

from had_shock_lab.had_engine import BoxParams
from had_shock_lab.logger import log
from had_shock_lab.schema import CONFIG_SCHEMA, EXPERIMENT_NAMES, load_config_file, validate_document
from had_shock_lab.shock_coupling import Variant, diffusion_constant, margin_width
from had_shock_lab.utils import ConfigError, ParameterError

DEFAULT_SEED = 0
DEFAULT_HORIZONS = (10.0, 40.0, 160.0)
DEFAULT_ULAM_POINTS = 10_000

SECOND_CLASS_EXPERIMENTS = frozenset({"mean_var_z", "identity_a47", "clt_dependence"})
SHOCK_EXPERIMENTS = SECOND_CLASS_EXPERIMENTS | {"flux_moments"}
NEEDS_X = frozenset({"flux_moments", "burke_test", "lpp_check", "identity_a47"})

# file keys that differ from field names
_FILE_KEYS = {"lambda": "lam"}

__all__ = [
    "DEFAULT_SEED",
    "EXPERIMENT_NAMES",
    "ExperimentConfig",
    "diffusion_constant",
    "margin_width",
]


def _finite_positive(name: str, value: Optional[float]) -> None:
    if value is None or isinstance(value, bool) or not math.isfinite(value) or value <= 0:
        raise ConfigError(f"{name} must be a finite positive number, got {value}")


@dataclass
class ExperimentConfig:
    """
    One named experiment with its parameters.

    For second-class experiments the box width is derived from the margin rule at the
    largest horizon; a configured `x` above the margin widens the box, and for
    identity_a47 `x` is also the observation level.
    """

    name: str
    lam: float = 2.0
    rho: float = 1.0
    gamma: float = 1.0
    t: float = 10.0
    x: Optional[float] = None
    replicas: int = 1000
    master_seed: int = DEFAULT_SEED
    out_dir: Path = field(default_factory=lambda: Path("results"))
    horizons: tuple[float, ...] = DEFAULT_HORIZONS
    ulam_points: int = DEFAULT_ULAM_POINTS
    variant: Union[Variant, str] = Variant.ORIGIN
    workers: int = 1

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        """Create a validated configuration from a parsed config file."""
        validate_document(dict(data), CONFIG_SCHEMA, error=ConfigError)
        kwargs = {_FILE_KEYS.get(key, key): value for key, value in data.items()}
        if "out_dir" in kwargs:
            kwargs["out_dir"] = Path(kwargs["out_dir"])
        if "horizons" in kwargs:
            kwargs["horizons"] = tuple(float(h) for h in kwargs["horizons"])
        return cls(**kwargs).validate()

    @classmethod
    def from_file(cls, path: Path) -> "ExperimentConfig":
        """Create a validated configuration from a YAML or JSON file."""
        config = cls.from_mapping(load_config_file(path))
        log.debug(f"Loaded configuration {config.name} from {path}")
        return config

    def validate(self) -> "ExperimentConfig":
        """
        Check every invariant before any sampling happens.

        Returns:
            ExperimentConfig: self, with `variant` normalized to a Variant

        """
        if self.name not in EXPERIMENT_NAMES:
            raise ConfigError(f"unknown experiment {self.name!r}; choose one of {', '.join(EXPERIMENT_NAMES)}")
        for label, count in (("replicas", self.replicas), ("workers", self.workers), ("ulam_points", self.ulam_points)):
            if isinstance(count, bool) or not isinstance(count, int) or count < 1:
                raise ConfigError(f"{label} must be a positive integer, got {count}")
        if isinstance(self.master_seed, bool) or not 0 <= self.master_seed < 2**64:
            raise ConfigError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}")
        _finite_positive("t", self.t)
        if self.x is not None or self.name in NEEDS_X:
            _finite_positive("x", self.x)

        if self.name in SHOCK_EXPERIMENTS:
            _finite_positive("lambda", self.lam)
            _finite_positive("rho", self.rho)
            if self.lam * self.rho <= 1:
                raise ConfigError(f"{self.name} requires lambda * rho > 1, got lambda={self.lam}, rho={self.rho}")
        elif self.name == "burke_test":
            _finite_positive("gamma", self.gamma)
        elif self.name == "lpp_check":
            _finite_positive("lambda", self.lam)
            _finite_positive("rho", self.rho)

        if self.name == "clt_dependence":
            if len(self.horizons) < 2:
                raise ConfigError("clt_dependence needs a ladder of at least two horizons")
            for h in self.horizons:
                _finite_positive("horizon", h)
            if any(b <= a for a, b in zip(self.horizons, self.horizons[1:])):
                raise ConfigError(f"horizons must be strictly increasing, got {list(self.horizons)}")

        try:
            self.variant = Variant(self.variant)
        except ValueError as e:
            raise ConfigError(f"unknown variant {self.variant!r}") from e
        return self

    @property
    def horizon(self) -> float:
        """Time horizon of each replica run."""
        return max(self.horizons) if self.name == "clt_dependence" else self.t

    @property
    def diffusion(self) -> float:
        """D for the configured densities."""
        return diffusion_constant(self.lam, self.rho)

    def box(self) -> BoxParams:
        """Simulation box for this experiment."""
        try:
            if self.name in SECOND_CLASS_EXPERIMENTS:
                width = max(self.x or 0.0, margin_width(self.lam, self.rho, self.horizon))
                return BoxParams(width, self.horizon)
            if self.name == "ulam":
                return BoxParams(1.0, 1.0)
            return BoxParams(float(self.x or 0.0), self.t)
        except ParameterError as e:
            raise ConfigError(str(e)) from e

    def params(self) -> dict[str, Any]:
        """Parameters that determine results; summaries echo these."""
        return {
            "name": self.name,
            "lambda": self.lam,
            "rho": self.rho,
            "gamma": self.gamma,
            "t": self.t,
            "x": self.x,
            "replicas": self.replicas,
            "master_seed": self.master_seed,
            "horizons": list(self.horizons),
            "ulam_points": self.ulam_points,
            "variant": Variant(self.variant).value,
        }

    def to_dict(self) -> dict[str, Any]:
        """Full echo in config-file form, including execution settings."""
        return {**self.params(), "out_dir": str(self.out_dir), "workers": self.workers}
