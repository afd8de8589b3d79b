"""CLI entry point for the ride-through boundary pipeline."""

import contextlib
import json
import logging
import os
import shutil
import tempfile
from collections.abc import Callable, Iterator
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd
import typer

from lvrt_pinn.analysis import (
    build_query_problem,
    compare_curves,
    ground_truth_curve,
    plot_table,
    read_curve,
    sweep,
    write_curve,
)
from lvrt_pinn.analysis.models import BoundaryCurve
from lvrt_pinn.config import RunConfig, load_config
from lvrt_pinn.dataset import generate_training_set, read_set, write_set
from lvrt_pinn.dynamics import (
    Criterion,
    DisturbanceSpec,
    find_equilibrium,
    integrate,
    read_trajectory_csv,
)
from lvrt_pinn.dynamics.integrate import write_trajectory_csv
from lvrt_pinn.errors import (
    ConfigError,
    DatasetFormatError,
    LvrtPinnError,
    ManifestMismatchError,
    ModelFormatError,
)
from lvrt_pinn.milp import (
    MilpProblem,
    NeuronBounds,
    encode,
    export_lp_file,
    interval_bounds,
    read_bounds,
    tighten_bounds_lp,
    write_bounds,
)
from lvrt_pinn.pinn import MlpModel, labeled_mse, load_model, model_hash, predict, save_model, train

logger = logging.getLogger(__name__)

app = typer.Typer(
    help="Ride-through boundaries of a grid-following converter from a physics-informed ReLU net."
)

EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

ConfigOption = typer.Option(None, "--config", "-c", help="Path to TOML configuration file")
ProgressOption = typer.Option(False, "--progress", help="Show progress bars")


def _setup_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )
    # Suppress verbose logging from numeric libraries
    logging.getLogger("torch").setLevel(logging.WARNING)
    logging.getLogger("numexpr").setLevel(logging.WARNING)


def _load(config: Path | None) -> RunConfig:
    try:
        cfg = load_config(config)
    except ConfigError as e:
        typer.echo(f"Error in {e.operation}: {e}", err=True)
        raise typer.Exit(code=EXIT_USAGE) from e
    except FileNotFoundError as e:
        typer.echo(f"Error: {e}", err=True)
        raise typer.Exit(code=EXIT_IO) from e
    _setup_logging(cfg.logging.level)
    logger.debug(f"Configuration loaded from {config or 'defaults'}")
    return cfg


@contextlib.contextmanager
def _failures(operation: str) -> Iterator[None]:
    """Map package and builtin errors onto the CLI exit codes."""
    try:
        yield
    except (typer.Exit, typer.BadParameter):
        raise
    except ConfigError as e:
        typer.echo(f"Error in {e.operation or operation}: {e}", err=True)
        raise typer.Exit(code=EXIT_USAGE) from e
    except (DatasetFormatError, ManifestMismatchError, ModelFormatError) as e:
        typer.echo(f"Error in {e.operation or operation}: {e}", err=True)
        raise typer.Exit(code=EXIT_IO) from e
    except LvrtPinnError as e:
        typer.echo(f"Error in {e.operation or operation}: {e}", err=True)
        logger.debug("Numeric failure", exc_info=True)
        raise typer.Exit(code=EXIT_NUMERIC) from e
    except OSError as e:
        typer.echo(f"Error in {operation}: {e}", err=True)
        raise typer.Exit(code=EXIT_IO) from e
    except (ValueError, KeyError) as e:
        typer.echo(f"Error in {operation}: {e}", err=True)
        raise typer.Exit(code=EXIT_USAGE) from e
    except ArithmeticError as e:
        typer.echo(f"Error in {operation}: {e}", err=True)
        raise typer.Exit(code=EXIT_NUMERIC) from e


def _summary(**values) -> None:
    """Print one machine-parsable line of key=value pairs."""
    parts = []
    for key, value in values.items():
        if isinstance(value, float):
            value = f"{value:.6g}"
        parts.append(f"{key}={value}")
    typer.echo(" ".join(parts))


def _atomic_write(dest: Path, writer: Callable[[Path], None], sidecar: bool = False) -> None:
    """Run ``writer`` on a temporary sibling of ``dest`` and rename it into place.

    With ``sidecar`` the JSON file written next to the temporary path is
    moved to ``dest.with_suffix(".json")`` as well.
    """
    dest.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=dest.parent, prefix=f".{dest.stem}-", suffix=dest.suffix)
    os.close(fd)
    tmp = Path(tmp_name)
    try:
        writer(tmp)
        if sidecar:
            os.replace(tmp.with_suffix(".json"), dest.with_suffix(".json"))
        os.replace(tmp, dest)
    finally:
        tmp.unlink(missing_ok=True)
        if sidecar:
            tmp.with_suffix(".json").unlink(missing_ok=True)


def _atomic_write_dir(dest: Path, writer: Callable[[Path], None]) -> None:
    dest.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(dir=dest.parent, prefix=f".{dest.name}-"))
    try:
        writer(tmp)
        if dest.exists():
            shutil.rmtree(dest)
        os.replace(tmp, dest)
    finally:
        if tmp.exists():
            shutil.rmtree(tmp)


def _write_json(dest: Path, data: dict) -> None:
    _atomic_write(dest, lambda p: p.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n"))


def _load_bounds(
    cfg: RunConfig, model: MlpModel, path: Path, show_progress: bool = False
) -> NeuronBounds:
    """Read the bounds cache of ``model``, computing and caching it when absent."""
    digest = model_hash(model)
    if path.exists():
        bounds = read_bounds(path)
        if bounds.model_hash and bounds.model_hash != digest:
            raise ManifestMismatchError(
                f"Bounds file {path} belongs to another model", operation="milp.read_bounds"
            )
        return bounds
    logger.info(f"No bounds cache at {path}; computing {cfg.milp.bounds_source} bounds")
    bounds = _compute_bounds(cfg, model, cfg.milp.bounds_source, show_progress)
    _atomic_write(path, lambda p: write_bounds(bounds, p), sidecar=True)
    return bounds


def _compute_bounds(
    cfg: RunConfig, model: MlpModel, source: str, show_progress: bool
) -> NeuronBounds:
    bounds = interval_bounds(model)
    if source == "lp-tightened":
        bounds = tighten_bounds_lp(
            model, bounds=bounds, max_passes=cfg.milp.tightening_passes, show_progress=show_progress
        )
    bounds.model_hash = model_hash(model)
    return bounds


def _curve_metadata(cfg: RunConfig, curve: BoundaryCurve) -> BoundaryCurve:
    curve.metadata = {**curve.metadata, "config": cfg.snapshot()}
    return curve


def _strip_timing(curve: BoundaryCurve, record_timing: bool) -> BoundaryCurve:
    if not record_timing:
        for point in curve.points:
            point.solve_ms = 0.0
    return curve


@app.command()
def simulate(
    dv: float = typer.Option(..., "--dv", help="Dip magnitude delta_V [pu]"),
    dt_dist: float = typer.Option(..., "--dt-dist", help="Dip duration delta_T [s]"),
    output: Path = typer.Option(
        Path("results/trajectory.csv"), "--output", "-o", help="Trajectory CSV"
    ),
    config: Path | None = ConfigOption,
) -> None:
    """Simulate the converter response to one voltage dip.

    Examples:

      # Shallow short dip
      lvrt simulate --dv 0.2 --dt-dist 0.1
    """
    cfg = _load(config)
    with _failures("dynamics.integrate"):
        disturbance = DisturbanceSpec(dv, dt_dist)
        x0 = find_equilibrium(cfg.converter)
        trajectory = integrate(
            x0, disturbance, cfg.converter, dt=cfg.grid.dt, horizon=cfg.grid.horizon
        )
        _atomic_write(output, lambda p: write_trajectory_csv(trajectory, p))
    _summary(
        command="simulate",
        delta_V=dv,
        delta_T=dt_dist,
        min_V_meas=trajectory.min_v_meas,
        final_P_total=trajectory.final("P_total"),
        final_f=trajectory.final("f_latched"),
        lvrt_entered=trajectory.min_v_meas < cfg.converter.V_int,
        rows=len(trajectory),
        output=output,
    )


@app.command("gen-data")
def gen_data(
    output: Path | None = typer.Option(
        None, "--output", "-o", help="Dataset directory (default: paths.data_dir)"
    ),
    progress: bool = ProgressOption,
    config: Path | None = ConfigOption,
) -> None:
    """Simulate the disturbance grid and sample collocation points."""
    cfg = _load(config)
    output = output or Path(cfg.paths.data_dir)
    with _failures("dataset.generate_training_set"):
        training_set = generate_training_set(
            cfg.grid,
            cfg.converter,
            n_collocation=cfg.collocation.n_points,
            seed=cfg.seed,
            show_progress=progress,
        )
        _atomic_write_dir(output, lambda p: write_set(training_set, p))
    _summary(
        command="gen-data",
        trajectories=cfg.grid.n_trajectories,
        N=training_set.N,
        N_c=training_set.N_c,
        output=output,
    )


@app.command("train")
def train_command(
    data: Path | None = typer.Option(
        None, "--data", help="Dataset directory (default: paths.data_dir)"
    ),
    output: Path | None = typer.Option(
        None, "--output", "-o", help="Model file (default: paths.model)"
    ),
    epochs: int | None = typer.Option(None, "--epochs", min=1, help="Override training.epochs"),
    progress: bool = ProgressOption,
    config: Path | None = ConfigOption,
) -> None:
    """Train the physics-informed network on a generated dataset."""
    cfg = _load(config)
    data = data or Path(cfg.paths.data_dir)
    output = output or Path(cfg.paths.model)
    settings = replace(cfg.training, show_progress=progress or cfg.training.show_progress)
    if epochs is not None:
        settings = replace(settings, epochs=epochs)
    with _failures("pinn.train"):
        training_set = read_set(data)
        model, history = train(training_set, settings, cfg.converter)
        mse = labeled_mse(model, training_set)
        metadata = {
            "config": cfg.snapshot(),
            "dataset": training_set.manifest(),
            "best_epoch": history.best_epoch,
            "final_train": history.train[-1].to_dict(),
            "labeled_mse": mse,
        }
        _atomic_write(output, lambda p: save_model(model, p, metadata))
        history_path = output.with_name(f"{output.stem}_history.csv")
        _atomic_write(
            history_path, lambda p: pd.DataFrame(history.to_rows()).to_csv(p, index=False)
        )
    _summary(
        command="train",
        epochs=len(history),
        best_epoch=history.best_epoch,
        train_total=history.train[-1].total,
        V_meas_mse=mse["V_meas"],
        model_hash=model_hash(model)[:12],
        output=output,
    )


@app.command()
def bounds(
    model_path: Path | None = typer.Option(
        None, "--model", help="Model file (default: paths.model)"
    ),
    output: Path | None = typer.Option(
        None, "--output", "-o", help="Bounds CSV (default: paths.bounds)"
    ),
    source: str | None = typer.Option(
        None, "--source", help="interval or lp-tightened (default: milp.bounds_source)"
    ),
    progress: bool = ProgressOption,
    config: Path | None = ConfigOption,
) -> None:
    """Compute and cache pre-activation bounds of a trained model."""
    cfg = _load(config)
    source = source or cfg.milp.bounds_source
    if source not in ("interval", "lp-tightened"):
        raise typer.BadParameter(f"--source must be 'interval' or 'lp-tightened', got {source!r}")
    output = output or Path(cfg.paths.bounds)
    with _failures("milp.tighten_bounds_lp"):
        model = load_model(model_path or cfg.paths.model)
        result = _compute_bounds(cfg, model, source, progress)
        _atomic_write(output, lambda p: write_bounds(result, p), sidecar=True)
    active, inactive, unstable = result.stable_counts()
    _summary(
        command="bounds",
        source=result.source,
        layers=result.n_layers,
        unstable=unstable,
        active=active,
        inactive=inactive,
        total_width=result.total_width(),
        output=output,
    )


def _encoded(
    cfg: RunConfig, model_path: Path | None, bounds_path: Path | None, relax: bool = False
):
    model = load_model(model_path or cfg.paths.model)
    neuron_bounds = _load_bounds(cfg, model, bounds_path or Path(cfg.paths.bounds))
    return model, neuron_bounds, encode(model, None, neuron_bounds, relax=relax)


def _problem_summary(command: str, problem: MilpProblem, output: Path, **extra) -> None:
    _summary(
        command=command,
        variables=problem.n_vars,
        rows=problem.n_rows,
        binaries=len(problem.binary_indices),
        **extra,
        output=output,
    )


@app.command("encode")
def encode_command(
    model_path: Path | None = typer.Option(
        None, "--model", help="Model file (default: paths.model)"
    ),
    bounds_path: Path | None = typer.Option(
        None, "--bounds", help="Bounds CSV (default: paths.bounds)"
    ),
    output: Path = typer.Option(
        Path("results/milp.json"), "--output", "-o", help="JSON problem file"
    ),
    relax: bool = typer.Option(
        False, "--relax", help="Encode binaries as continuous [0, 1] variables"
    ),
    config: Path | None = ConfigOption,
) -> None:
    """Encode a trained model as a MILP and write it as JSON."""
    cfg = _load(config)
    with _failures("milp.encode"):
        model, neuron_bounds, problem = _encoded(cfg, model_path, bounds_path, relax)
        data = problem.to_dict()
        data["metadata"] = {"model_hash": model_hash(model), "bounds_source": neuron_bounds.source}
        _write_json(output, data)
    _problem_summary("encode", problem, output, bounds_source=neuron_bounds.source)


@app.command("export-lp")
def export_lp(
    model_path: Path | None = typer.Option(
        None, "--model", help="Model file (default: paths.model)"
    ),
    bounds_path: Path | None = typer.Option(
        None, "--bounds", help="Bounds CSV (default: paths.bounds)"
    ),
    output: Path = typer.Option(Path("results/milp.lp"), "--output", "-o", help="CPLEX LP file"),
    kind: str = typer.Option(
        "none", "--kind", help="Boundary query to export: none, lvrt or power"
    ),
    dv: float | None = typer.Option(None, "--dv", help="Dip magnitude of the query [pu]"),
    param: float = typer.Option(0.0, "--param", help="epsilon (lvrt) or mu (power)"),
    config: Path | None = ConfigOption,
) -> None:
    """Export the encoded network, optionally with a boundary query, as an LP file."""
    cfg = _load(config)
    if kind not in ("none", "lvrt", "power"):
        raise typer.BadParameter(f"--kind must be none, lvrt or power, got {kind!r}")
    if kind != "none" and dv is None:
        raise typer.BadParameter("--dv is required with --kind lvrt or power")
    with _failures("milp.export_lp_file"):
        _, neuron_bounds, problem = _encoded(cfg, model_path, bounds_path)
        if kind != "none":
            problem, _ = build_query_problem(problem, kind, param, dv, cfg.converter)
        _atomic_write(output, lambda p: export_lp_file(problem, p))
    _problem_summary("export-lp", problem, output, kind=kind, bounds_source=neuron_bounds.source)


def _sweep_command(
    command: str,
    kind: str,
    values: list[float],
    cfg: RunConfig,
    model_path: Path | None,
    bounds_path: Path | None,
    output: Path | None,
    progress: bool,
) -> None:
    if output is not None and len(values) > 1:
        raise typer.BadParameter("--output needs exactly one sweep parameter")
    label = "eps" if kind == "lvrt" else "mu"
    written, counts = [], {"optimal": 0, "never-critical": 0, "infeasible": 0, "failed": 0}
    with _failures(f"analysis.solve_{kind}"):
        model = load_model(model_path or cfg.paths.model)
        neuron_bounds = _load_bounds(cfg, model, bounds_path or Path(cfg.paths.bounds), progress)
        grid = cfg.analysis.delta_V_grid()
        for value in values:
            curve = sweep(
                model,
                neuron_bounds,
                kind,
                value,
                grid,
                params=cfg.converter,
                node_limit=cfg.milp.node_limit,
                workers=cfg.analysis.workers,
                show_progress=progress,
            )
            curve = _strip_timing(_curve_metadata(cfg, curve), cfg.analysis.record_timing)
            dest = output or Path(cfg.paths.output_dir) / f"{kind}_{label}_{value:g}.csv"
            _atomic_write(dest, lambda p, c=curve: write_curve(c, p), sidecar=True)
            written.append(str(dest))
            for status in curve.statuses:
                counts[status] += 1
    _summary(
        command=command,
        curves=len(written),
        points=sum(counts.values()),
        optimal=counts["optimal"],
        never_critical=counts["never-critical"],
        infeasible=counts["infeasible"],
        failed=counts["failed"],
        bounds_source=neuron_bounds.source,
        output=",".join(written),
    )


@app.command()
def boundary(
    eps: list[float] | None = typer.Option(
        None, "--eps", help="LVRT margin [pu]; repeatable (default: analysis.epsilons)"
    ),
    model_path: Path | None = typer.Option(
        None, "--model", help="Model file (default: paths.model)"
    ),
    bounds_path: Path | None = typer.Option(
        None, "--bounds", help="Bounds CSV (default: paths.bounds)"
    ),
    output: Path | None = typer.Option(None, "--output", "-o", help="Curve CSV for a single --eps"),
    progress: bool = ProgressOption,
    config: Path | None = ConfigOption,
) -> None:
    """Sweep the LVRT boundary of the trained model over dip magnitudes."""
    cfg = _load(config)
    values = list(eps) if eps else list(cfg.analysis.epsilons)
    if any(v < 0 for v in values):
        raise typer.BadParameter("--eps must be non-negative")
    _sweep_command("boundary", "lvrt", values, cfg, model_path, bounds_path, output, progress)


@app.command("power-boundary")
def power_boundary(
    mu: list[float] | None = typer.Option(
        None, "--mu", help="Power fraction; repeatable (default: analysis.mus)"
    ),
    model_path: Path | None = typer.Option(
        None, "--model", help="Model file (default: paths.model)"
    ),
    bounds_path: Path | None = typer.Option(
        None, "--bounds", help="Bounds CSV (default: paths.bounds)"
    ),
    output: Path | None = typer.Option(None, "--output", "-o", help="Curve CSV for a single --mu"),
    progress: bool = ProgressOption,
    config: Path | None = ConfigOption,
) -> None:
    """Sweep the post-fault power boundary of the trained model."""
    cfg = _load(config)
    values = list(mu) if mu else list(cfg.analysis.mus)
    if any(not 0 <= v <= 1 for v in values):
        raise typer.BadParameter("--mu must lie in [0, 1]")
    _sweep_command(
        "power-boundary", "power", values, cfg, model_path, bounds_path, output, progress
    )


@app.command("ground-truth")
def ground_truth(
    criterion: str = typer.Option("lvrt", "--criterion", help="lvrt or power"),
    mu: float = typer.Option(0.6, "--mu", help="Power fraction for --criterion power"),
    output: Path | None = typer.Option(None, "--output", "-o", help="Curve CSV"),
    progress: bool = ProgressOption,
    config: Path | None = ConfigOption,
) -> None:
    """Critical durations of the simulated converter over the sweep grid."""
    cfg = _load(config)
    if criterion not in ("lvrt", "power"):
        raise typer.BadParameter(f"--criterion must be lvrt or power, got {criterion!r}")
    with _failures("dynamics.critical_duration"):
        crit = Criterion.lvrt_entry() if criterion == "lvrt" else Criterion.power_fraction(mu)
        box = cfg.grid.box()
        curve = ground_truth_curve(
            cfg.analysis.delta_V_grid(),
            crit,
            cfg.converter,
            dt=cfg.grid.dt,
            horizon=cfg.grid.horizon,
            bracket=box.delta_T,
            tol=cfg.analysis.ground_truth_tol,
            show_progress=progress,
        )
        curve = _strip_timing(_curve_metadata(cfg, curve), cfg.analysis.record_timing)
        suffix = "" if criterion == "lvrt" else f"_mu_{mu:g}"
        dest = output or Path(cfg.paths.output_dir) / f"ground_truth_{criterion}{suffix}.csv"
        _atomic_write(dest, lambda p: write_curve(curve, p), sidecar=True)
    counts = {s: curve.statuses.count(s) for s in ("optimal", "never-critical", "infeasible")}
    _summary(
        command="ground-truth",
        criterion=criterion,
        points=len(curve),
        optimal=counts["optimal"],
        never_critical=counts["never-critical"],
        infeasible=counts["infeasible"],
        output=dest,
    )


@app.command()
def compare(
    predicted: Path = typer.Option(..., "--predicted", help="Curve CSV under test"),
    reference: Path = typer.Option(..., "--reference", help="Reference curve CSV"),
    output: Path | None = typer.Option(None, "--output", "-o", help="JSON report"),
    config: Path | None = ConfigOption,
) -> None:
    """Compare a predicted boundary curve with a reference curve."""
    _load(config)
    with _failures("analysis.compare_curves"):
        report = compare_curves(read_curve(predicted), read_curve(reference))
        if output is not None:
            _write_json(
                output,
                {"predicted": str(predicted), "reference": str(reference), **report.to_dict()},
            )
    _summary(
        command="compare",
        n_common=len(report.delta_V),
        max_abs=report.max_abs,
        mean_abs=report.mean_abs,
        non_conservative=len(report.non_conservative),
        signs=report.signs or "-",
    )


def _parse_labeled(entries: list[str]) -> list[tuple[str, Path]]:
    labeled = []
    for entry in entries:
        label, sep, path = entry.partition("=")
        if not sep or not label or not path:
            raise typer.BadParameter(f"Expected LABEL=PATH, got {entry!r}")
        labeled.append((label, Path(path)))
    return labeled


@app.command("plot-data")
def plot_data(
    curve: list[str] | None = typer.Option(
        None, "--curve", help="LABEL=PATH of a curve CSV; repeatable"
    ),
    trajectory: Path | None = typer.Option(None, "--trajectory", help="Trajectory CSV"),
    model_path: Path | None = typer.Option(
        None, "--model", help="Add network predictions to --trajectory"
    ),
    output: Path = typer.Option(Path("results/plot_data.csv"), "--output", "-o", help="Plain CSV"),
    config: Path | None = ConfigOption,
) -> None:
    """Merge curves, or a trajectory with predictions, into one plot-ready CSV."""
    _load(config)
    if bool(curve) == (trajectory is not None):
        raise typer.BadParameter("Give either --curve entries or one --trajectory")
    with _failures("analysis.plot_table"):
        if curve:
            table = plot_table([(label, read_curve(path)) for label, path in _parse_labeled(curve)])
        else:
            traj = read_trajectory_csv(trajectory)
            table = traj.to_frame()
            if model_path is not None:
                model = load_model(model_path)
                n = len(traj)
                inputs = np.column_stack(
                    [
                        traj.times,
                        np.full(n, traj.disturbance.delta_V),
                        np.full(n, traj.disturbance.delta_T),
                    ]
                )
                for name, values in predict(model, inputs).items():
                    table[f"pred_{name}"] = values
        _atomic_write(output, lambda p: table.to_csv(p, index=False, float_format="%.17g"))
    _summary(command="plot-data", rows=len(table), columns=len(table.columns), output=output)


def main() -> None:
    app()


if __name__ == "__main__":
    main()
