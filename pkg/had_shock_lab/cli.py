"""Command-line interface for had-shock-lab."""

from pathlib import Path
from typing import Annotated, Any, Optional

import typer
from rich.table import Table

from had_shock_lab.config import DEFAULT_SEED, ExperimentConfig
from had_shock_lab.experiments import display_summary, run_experiment
from had_shock_lab.had_engine import BoxParams, run, write_trajectories
from had_shock_lab.logger import console, log, set_debug
from had_shock_lab.lpp_oracle import chain_length, load_decorated_points, ulam_ratio
from had_shock_lab.randgen import StreamKey, derive_stream, poisson_1d, poisson_2d
from had_shock_lab.schema import EXPERIMENT_NAMES, load_config_file
from had_shock_lab.shock_coupling import Variant, check_shock_regime, run_coupled_pair, z_at
from had_shock_lab.utils import EXIT_FAIL, ConfigError, handle_lab_errors
from had_shock_lab.validation import SELFTEST_INSTANCES, run_selftest

app = typer.Typer(
    name="had-shock-lab",
    help="Simulate the HAD process and check its shock results by exact oracles and Monte Carlo",
    add_completion=True,
    no_args_is_help=True,
)

SECOND_CLASS_ID = -1

DebugOption = Annotated[bool, typer.Option("--debug", "-d", help="Enable debug logging")]
SeedOption = Annotated[Optional[int], typer.Option("--seed", "-s", min=0, help=f"Master seed (default {DEFAULT_SEED})")]


def resolve_seed(seed: Optional[int]) -> int:
    """The given seed, or the documented default with a notice."""
    if seed is None:
        log.warning(f"No --seed given; using the default seed {DEFAULT_SEED}")
        return DEFAULT_SEED
    return seed


def _outcome_table(rows: list[tuple[str, Any]]) -> Table:
    table = Table(show_header=False)
    table.add_column("Quantity", style="cyan")
    table.add_column("Value", justify="right")
    for name, value in rows:
        table.add_row(name, str(value))
    return table


@app.command("run")
@handle_lab_errors
def run_once(
    lam: Annotated[float, typer.Option("--lambda", help="Source intensity")] = 2.0,
    rho: Annotated[float, typer.Option("--rho", help="Sink intensity")] = 1.0,
    t: Annotated[float, typer.Option("--t", help="Time horizon")] = 10.0,
    x: Annotated[float, typer.Option("--x", help="Box width")] = 40.0,
    seed: SeedOption = None,
    trajectories: Annotated[
        Optional[Path], typer.Option("--trajectories", help="Write particle trajectories to this CSV file")
    ] = None,
    second_class: Annotated[
        bool, typer.Option("--second-class", help="Also track the second-class particle (needs lambda * rho > 1)")
    ] = False,
    debug: DebugOption = False,
) -> None:
    """Run the HAD process once in the box [0, x] x [0, t] and print the outcome."""
    set_debug(debug)
    key = StreamKey(resolve_seed(seed)).child("run", 0, "replica")
    stream = derive_stream(key)
    box = BoxParams(x, t)
    sources = poisson_1d(lam, x, stream)
    sinks = poisson_1d(rho, t, stream)
    bulk = poisson_2d(1.0, x, t, stream)
    outcome = run(sources, sinks, bulk, box, record=trajectories is not None)

    rows: list[tuple[str, Any]] = [
        ("seed label", key.label),
        ("|S|", outcome.source_count),
        ("|W|", outcome.sink_events),
        ("|P|", len(bulk)),
        ("|N|", len(outcome.live)),
        ("absorbed", outcome.absorbed),
        ("C", outcome.created),
        ("|E|", len(outcome.entries)),
        ("|N| + W_events", outcome.chi),
    ]
    trajectory_rows = list(outcome.trajectories or ())
    if second_class:
        check_shock_regime(lam, rho)
        path, _ = run_coupled_pair(sources, sinks, bulk, box)
        z_rows = [(SECOND_CLASS_ID, 0.0, path.start)] + [(SECOND_CLASS_ID, u, z) for u, z in path.jumps]
        if path.corrupted_by(t):
            rows.append(("Z(t)", f"corrupted at {path.corruption_time}"))
        else:
            rows.append(("Z(t)", z_at(path, t)))
            z_rows.append((SECOND_CLASS_ID, t, z_at(path, t)))
        trajectory_rows = z_rows + trajectory_rows

    console.print(_outcome_table(rows))
    if trajectories is not None:
        write_trajectories(trajectories, trajectory_rows)
        log.info(f"✅ Trajectories written to {trajectories}")


def _overrides(options: dict[str, Any]) -> dict[str, Any]:
    return {key: value for key, value in options.items() if value is not None}


@app.command()
@handle_lab_errors
def experiment(
    name: Annotated[
        Optional[str], typer.Option("--name", "-n", help=f"Experiment: {', '.join(EXPERIMENT_NAMES)}")
    ] = None,
    config_file: Annotated[
        Optional[Path],
        typer.Option("--config", "-c", help="YAML or JSON configuration file", exists=True, dir_okay=False),
    ] = None,
    lam: Annotated[Optional[float], typer.Option("--lambda", help="Source intensity")] = None,
    rho: Annotated[Optional[float], typer.Option("--rho", help="Sink intensity")] = None,
    gamma: Annotated[Optional[float], typer.Option("--gamma", help="Stationary density (burke_test)")] = None,
    t: Annotated[Optional[float], typer.Option("--t", help="Time horizon")] = None,
    x: Annotated[Optional[float], typer.Option("--x", help="Box width or observation level")] = None,
    replicas: Annotated[Optional[int], typer.Option("--replicas", "-r", min=1, help="Number of replicas")] = None,
    seed: SeedOption = None,
    out: Annotated[Optional[Path], typer.Option("--out", "-o", help="Output directory")] = None,
    horizons: Annotated[
        Optional[list[float]], typer.Option("--horizon", help="Horizon ladder for clt_dependence (repeat)")
    ] = None,
    ulam_points: Annotated[Optional[int], typer.Option("--ulam-points", min=1, help="Points per Ulam replica")] = None,
    variant: Annotated[Optional[Variant], typer.Option("--variant", help="Second-class particle variant")] = None,
    workers: Annotated[Optional[int], typer.Option("--workers", "-w", min=1, help="Worker processes")] = None,
    debug: DebugOption = False,
) -> None:
    """Run a named experiment and write raw CSV, summary and manifest."""
    set_debug(debug)
    raw = load_config_file(config_file) if config_file is not None else {}
    if seed is None and "master_seed" not in raw:
        seed = resolve_seed(seed)
    overrides = _overrides(
        {
            "name": name,
            "lambda": lam,
            "rho": rho,
            "gamma": gamma,
            "t": t,
            "x": x,
            "replicas": replicas,
            "master_seed": seed,
            "out_dir": str(out) if out is not None else None,
            "horizons": list(horizons) if horizons else None,
            "ulam_points": ulam_points,
            "variant": variant.value if variant is not None else None,
            "workers": workers,
        }
    )
    settings = {**raw, **overrides}
    if "name" not in settings:
        raise ConfigError("an experiment name is required (--name or a config file)")
    config = ExperimentConfig.from_mapping(settings)

    manifest = run_experiment(config)
    display_summary(manifest)
    if not manifest.passed:
        log.error(f"❌ {config.name} failed its verdicts")
        raise typer.Exit(EXIT_FAIL)
    log.info(f"✅ {config.name} passed")


@app.command()
@handle_lab_errors
def lpp(
    points: Annotated[Path, typer.Option("--points", "-p", help="Decorated point CSV (kind,y,s)", dir_okay=False)],
    debug: DebugOption = False,
) -> None:
    """Print the longest chain of a decorated point file."""
    set_debug(debug)
    decorated = load_decorated_points(points)
    log.debug(f"Loaded {len(decorated)} points from {points}")
    console.print(chain_length(decorated))


@app.command()
@handle_lab_errors
def ulam(
    n: Annotated[int, typer.Option("--n", min=1, help="Points per replica")] = 10_000,
    replicas: Annotated[int, typer.Option("--replicas", "-r", min=1, help="Number of replicas")] = 200,
    seed: SeedOption = None,
    debug: DebugOption = False,
) -> None:
    """Estimate the Ulam constant from longest increasing subsequences."""
    set_debug(debug)
    stream = derive_stream(StreamKey(resolve_seed(seed)).child("ulam", 0, "replica"))
    estimate = ulam_ratio(n, replicas, stream)
    console.print(
        _outcome_table(
            [
                ("n", estimate.n),
                ("replicas", estimate.replicas),
                ("mean L_n / sqrt(n)", f"{estimate.mean:.6f}"),
                ("95% CI", f"[{estimate.ci_low:.6f}, {estimate.ci_high:.6f}]"),
            ]
        )
    )


@app.command()
@handle_lab_errors
def selftest(
    instances: Annotated[int, typer.Option("--instances", min=1, help="Random instances")] = SELFTEST_INSTANCES,
    seed: Annotated[int, typer.Option("--seed", "-s", min=0, help="Instance seed")] = 0,
    debug: DebugOption = False,
) -> None:
    """Check every exact invariant on small random instances."""
    set_debug(debug)
    failures = run_selftest(instances, seed)
    if failures:
        log.error(f"❌ {len(failures)} invariant checks failed")
        raise typer.Exit(EXIT_FAIL)


if __name__ == "__main__":
    app()
