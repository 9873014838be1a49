"""Utility functions for had-shock-lab."""

import csv
import json
from collections.abc import Iterable, Sequence
from functools import wraps
from pathlib import Path
from typing import Any, Callable, TypeVar

import typer

from had_shock_lab.logger import log

# Type definitions
T = TypeVar("T")
Row = Sequence[Any]

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


class LabError(Exception):
    """Base class for all had-shock-lab errors."""


class ParameterError(LabError, ValueError):
    """A sampling or simulation parameter is out of range."""


class ConfigError(LabError, ValueError):
    """An experiment configuration violates its invariants."""


class ContractViolation(LabError, RuntimeError):
    """A caller broke an operation's precondition."""


class DataError(LabError, ValueError):
    """Input data is malformed for the requested operation."""


class UndefinedError(LabError, ArithmeticError):
    """A statistic is undefined for the given input."""


class InvariantViolation(LabError, AssertionError):
    """An exact identity of the simulation failed."""


def handle_lab_errors(func: Callable[..., T]) -> Callable[..., T]:
    """Map lab errors onto CLI exit codes with this decorator."""

    @wraps(func)
    def wrapper(*args: object, **kwargs: object) -> T:
        try:
            return func(*args, **kwargs)
        except typer.Exit:
            raise
        except (ConfigError, ParameterError) as e:
            log.error(f"❌ Invalid configuration: {e}")
            raise typer.Exit(EXIT_USAGE) from e
        except InvariantViolation as e:
            log.error(f"❌ Invariant violated: {e}")
            raise typer.Exit(EXIT_FAIL) from e
        except LabError as e:
            log.error(f"❌ Error: {e}")
            raise typer.Exit(EXIT_FAIL) from e
        except FileNotFoundError as e:
            log.error(f"❌ File not found: {e}")
            raise typer.Exit(EXIT_USAGE) from e
        except Exception as e:
            log.error(f"❌ Unexpected error: {e!r}")
            raise typer.Exit(EXIT_FAIL) from e

    return wrapper


def format_float(value: float) -> str:
    """Render a float independently of locale, shortest round-trip form."""
    return repr(float(value))


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Row]) -> Path:
    """Write rows as UTF-8 CSV with '.' decimals and '\\n' line endings."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) if isinstance(v, float) else v for v in row])
    log.debug(f"Wrote {path}")
    return path


def write_json(path: Path, document: Any) -> Path:
    """Write a JSON document with sorted keys so reruns produce identical bytes."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(document, fh, indent=2, sort_keys=True)
        fh.write("\n")
    log.debug(f"Wrote {path}")
    return path
