"""Command-line interface for tonellilab."""

import json
from collections.abc import Callable
from pathlib import Path
from typing import Annotated, Any

import numpy as np
import typer
from rich.console import Console
from rich.progress import (
    BarColumn,
    Progress,
    SpinnerColumn,
    TaskID,
    TaskProgressColumn,
    TextColumn,
    TimeRemainingColumn,
)
from rich.table import Table

from .config import Scenario, load_scenario
from .debug import debug_print, set_debug_level
from .dynamics import integrate, invariance_defect_measure, measure_energy, occupation_measure
from .geometry import grid_nodes
from .graphs import (
    LagrangianGraph,
    calibration_check,
    compare_graphs,
    invariance_defect,
    kam_conjugacy_check,
    subcritical_report,
)
from .mather import (
    PENDULUM_C0,
    AlphaTable,
    alpha_table,
    beta_from_alpha,
    class_grid,
    critical_value,
    grid_modulus,
    mather_measure_lp,
    pendulum_alpha_oracle,
    pendulum_beta_oracle,
    pendulum_momentum_oracle,
    pendulum_period,
)
from .schwartzman import (
    cycle_from_trajectory,
    detect_equilibria,
    diameter_report,
    flow_ensemble,
    flow_orbit,
    hamiltonian_ensemble,
    linear_flow,
    rotation_vector,
    stratified_starts,
)
from .tonelli import Model
from .types import (
    EXIT_NUMERICAL,
    EXIT_OK,
    InvalidInput,
    ScenarioError,
    TheoremViolation,
    TonelliError,
)
from .utils import format_float, write_csv_result, write_json_result
from .verify import Level, summary_rows, verify_suite

# Diagnostics and progress on stderr; stdout carries oracle values only
console = Console(stderr=True)
app = typer.Typer(help="Numerical laboratory for Tonelli Hamiltonians on tori.")

ADJUSTMENT_LIMIT = 2e-3
FENCHEL_TOL = 1e-3
SUBCRITICAL_TOL = 5e-2

ConfigOption = Annotated[Path | None, typer.Option("--config", help="Scenario JSON file")]
OutOption = Annotated[Path | None, typer.Option("--out", help="Result file path")]
SeedOption = Annotated[int | None, typer.Option("--seed", help="Seed for randomized tasks")]
ModelOption = Annotated[str | None, typer.Option("--model", help="Model name (overrides the scenario)")]
NoCacheOption = Annotated[bool, typer.Option("--no-cache", help="Recompute instead of reading cached tables")]
VerboseOption = Annotated[int, typer.Option("-v", "--verbose", count=True, help="Show diagnostics (-vv for more)")]


def _progress() -> Progress:
    return Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TaskProgressColumn(),
        TimeRemainingColumn(),
        console=console,
    )


def _vector(value: Any, dim: int) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        return np.full(dim, float(arr[0]))
    if arr.shape != (dim,):
        raise InvalidInput(f"Expected a vector of dimension {dim}, got {arr.tolist()}")
    return arr


def _output(scenario: Scenario, out: Path | None, extension: str) -> Path:
    if out is not None:
        return out
    if scenario.output is not None:
        return Path(scenario.output)
    return Path(f"{scenario.task}.{extension}")


def _alpha_table(scenario: Scenario, model: Model, use_cache: bool, progress: Progress) -> AlphaTable:
    N, dt, v_max = scenario.value_iteration()
    grid, shape = class_grid(
        _vector(scenario.c_min, model.dim), _vector(scenario.c_max, model.dim), scenario.steps
    )
    task_id = progress.add_task(f"alpha ({model.name})", total=len(grid))
    return alpha_table(
        model.lagrangian,
        grid,
        N,
        dt,
        tol=scenario.tol,
        v_max=v_max,
        relaxation=scenario.relaxation,
        max_sweeps=scenario.max_sweeps,
        grid_shape=shape,
        cached=use_cache,
        progress=progress,
        task_id=task_id,
    )


def _table_status(at: AlphaTable) -> int:
    invalid = int(np.sum(~at.valid))
    if invalid:
        console.print(f"[yellow]{invalid} class(es) did not converge and are marked invalid[/]")
        return EXIT_NUMERICAL
    if at.adjustment > ADJUSTMENT_LIMIT:
        console.print(f"[yellow]Convexification moved alpha by {at.adjustment:.3g} (limit {ADJUSTMENT_LIMIT})[/]")
        return EXIT_NUMERICAL
    return EXIT_OK


def run_alpha(scenario: Scenario, out: Path, use_cache: bool, progress: Progress) -> int:
    at = _alpha_table(scenario, scenario.build_model(), use_cache, progress)
    header, rows = at.table()
    meta = {**at.meta, "adjustment": at.adjustment, "invalid": int(np.sum(~at.valid))}
    write_csv_result(out, header, rows, scenario.echo(), meta)
    console.print(f"[green]Wrote alpha table:[/] {out} ({len(rows)} rows)")
    return _table_status(at)


def run_beta(scenario: Scenario, out: Path, use_cache: bool, progress: Progress) -> int:
    model = scenario.build_model()
    at = _alpha_table(scenario, model, use_cache, progress)
    h_grid, shape = class_grid(
        _vector(scenario.h_min, model.dim), _vector(scenario.h_max, model.dim), scenario.h_steps
    )
    bt = beta_from_alpha(at, h_grid, shape)
    ok = at.valid & np.isfinite(at.alpha)
    gap = float(np.min(at.alpha[ok][:, None] + bt.beta[None, :] - at.c_grid[ok] @ bt.h_grid.T))
    modulus = grid_modulus(at.c_grid, bt.h_grid)
    header, rows = bt.table()
    meta = {**bt.meta, "fenchel_young_gap": gap, "grid_modulus": modulus, "extrapolated": int(bt.extrapolated.sum())}
    write_csv_result(out, header, rows, scenario.echo(), meta)
    console.print(f"[green]Wrote beta table:[/] {out} ({len(rows)} rows)")
    if gap < -(FENCHEL_TOL + modulus):
        raise TheoremViolation(f"Fenchel-Young gap {gap:.3g} is below -{FENCHEL_TOL + modulus:.3g}")
    return _table_status(at)


def _orbit_start(scenario: Scenario, model: Model) -> tuple[np.ndarray, np.ndarray]:
    return _vector(scenario.x0, model.dim), _vector(scenario.p0, model.dim)


def run_rotvec(scenario: Scenario, out: Path, use_cache: bool, progress: Progress) -> int:
    model = scenario.build_model()
    H = model.hamiltonian
    x0, p0 = _orbit_start(scenario, model)
    task_id = progress.add_task("orbit", total=100)
    traj = integrate(H, x0, p0, scenario.T, scenario.orbit_dt, progress, task_id)
    mu = occupation_measure(traj, scenario.burn_in)
    energy, spread = measure_energy(H, mu)
    result = {
        "rotation_vector": rotation_vector(mu.to_tangent(H)),
        "trajectory_cycle": cycle_from_trajectory(traj, scenario.window),
        "energy_mean": energy,
        "energy_spread": spread,
        "energy_drift": traj.energy_drift,
        "invariance_defect": invariance_defect_measure(H, mu, scenario.orbit_dt),
        "support_size": mu.size,
    }
    write_json_result(out, scenario.echo(), result)
    console.print(f"[green]Wrote rotation vector:[/] {out}")
    return EXIT_OK


def run_cycle(scenario: Scenario, out: Path, use_cache: bool, progress: Progress) -> int:
    if scenario.flow is not None:
        flow = linear_flow(scenario.flow)
        path = flow_orbit(flow, _vector(scenario.x0, flow.dim), scenario.T, scenario.orbit_dt)
        result: dict[str, Any] = {"source": flow.name, "cycle": cycle_from_trajectory(path, scenario.window)}
    else:
        model = scenario.build_model()
        x0, p0 = _orbit_start(scenario, model)
        task_id = progress.add_task("orbit", total=100)
        traj = integrate(model.hamiltonian, x0, p0, scenario.T, scenario.orbit_dt, progress, task_id)
        result = {"source": model.name, "cycle": cycle_from_trajectory(traj, scenario.window)}
    write_json_result(out, scenario.echo(), result)
    console.print(f"[green]Wrote asymptotic cycle:[/] {out}")
    return EXIT_OK


def run_diameter(scenario: Scenario, out: Path, use_cache: bool, progress: Progress) -> int:
    rng = np.random.default_rng(scenario.seed)
    window = scenario.window or scenario.T
    if scenario.flow is not None:
        flow = linear_flow(scenario.flow)
        starts = scenario.starts if scenario.starts is not None else rng.random((scenario.ensemble_size, flow.dim))
        cycles = flow_ensemble(flow, starts, window, scenario.orbit_dt)
    else:
        model = scenario.build_model()
        H = model.hamiltonian
        if scenario.starts is not None:
            states = np.asarray(scenario.starts, dtype=float)
            xs, ps = states[:, : model.dim], states[:, model.dim :]
        elif scenario.energies is not None:
            xs, ps = stratified_starts(H, scenario.energies)
        else:
            xs = rng.random((scenario.ensemble_size, model.dim))
            ps = rng.uniform(-2.0, 2.0, (scenario.ensemble_size, model.dim))
        cycles = hamiltonian_ensemble(H, xs, ps, window, scenario.orbit_dt)
        cycles += [rotation_vector(eq.dirac().to_tangent(H)) for eq in detect_equilibria(H)]
    report = diameter_report(cycles)
    write_json_result(out, scenario.echo(), {"report": report, "cycles": cycles})
    console.print(f"[green]Wrote diameter report:[/] {out} (diameter {report.diameter:.6g})")
    return EXIT_OK


def _load_graph(path: str) -> LagrangianGraph:
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise InvalidInput(f"Cannot read graph file {path}: {e}") from e
    try:
        return LagrangianGraph.from_json(data)
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidInput(f"Graph file {path} is malformed: {e}") from e


def run_verify_graph(scenario: Scenario, out: Path, use_cache: bool, progress: Progress) -> int:
    model = scenario.build_model()
    H = model.hamiltonian
    N, dt, v_max = scenario.value_iteration()
    task_id = progress.add_task("graph checks", total=4)
    if scenario.graph is not None:
        loaded = _load_graph(scenario.graph)
        graph = LagrangianGraph(loaded.c, loaded.u, loaded.method, scenario.smoothing)
        fixed = critical_value(
            model.lagrangian,
            graph.cohomology,
            graph.N,
            dt,
            tol=scenario.tol,
            v_max=v_max,
            relaxation=scenario.relaxation,
            max_sweeps=scenario.max_sweeps,
        )
    else:
        fixed = critical_value(
            model.lagrangian,
            _vector(scenario.c, model.dim),
            N,
            dt,
            tol=scenario.tol,
            v_max=v_max,
            relaxation=scenario.relaxation,
            max_sweeps=scenario.max_sweeps,
        )
        graph = LagrangianGraph.from_potential(fixed.c, fixed.u, smoothing=scenario.smoothing)
    progress.advance(task_id)
    result: dict[str, Any] = {
        "c": list(graph.c),
        "alpha": fixed.alpha,
        "residual": fixed.residual,
        "lipschitz_estimate": graph.lipschitz_estimate,
        "invariance_defect": invariance_defect(H, graph),
        "subcritical": subcritical_report(H, graph, fixed.alpha, SUBCRITICAL_TOL),
    }
    progress.advance(task_id)
    result["calibration"] = calibration_check(
        graph, model.lagrangian, fixed.alpha, T=min(scenario.T, 5.0), seed=scenario.seed or 0, curves=scenario.curves
    )
    progress.advance(task_id)
    violation = None
    c_value = float(graph.c[0])
    if model.name == "pendulum" and abs(c_value) >= PENDULUM_C0:
        nodes = grid_nodes(1, graph.N)[:, 0]
        oracle = LagrangianGraph.from_momentum(c_value, pendulum_momentum_oracle(c_value, nodes))
        comparison = compare_graphs(graph, oracle, 5.0 / graph.N)
        result["oracle_comparison"] = comparison
        if comparison.theorem_violation:
            violation = "Invariant graphs of the same class overlap without coinciding"
    if model.name in ("integrable", "magnetic") or (model.name == "pendulum" and abs(c_value) > PENDULUM_C0):
        result["kam"] = kam_conjugacy_check(H, graph, T=min(scenario.T, 1000.0))
    progress.advance(task_id)
    result["graph"] = graph.to_json()
    write_json_result(out, scenario.echo(), result)
    console.print(f"[green]Wrote graph report:[/] {out}")
    if violation is not None:
        raise TheoremViolation(violation)
    return EXIT_OK


def run_lp_measure(scenario: Scenario, out: Path, use_cache: bool, progress: Progress) -> int:
    model = scenario.build_model()
    h = _vector(scenario.h, model.dim)
    result = mather_measure_lp(
        model.lagrangian, float(h[0]), N_x=scenario.N_x, N_v=scenario.N_v, v_max=scenario.lp_v_max, dt=scenario.lp_dt
    )
    write_json_result(
        out,
        scenario.echo(),
        {"h": result.h, "beta_lp": result.beta_lp, "status": result.status, "measure": result.measure.to_json()},
    )
    console.print(f"[green]Wrote minimizing measure:[/] {out} (beta_lp {result.beta_lp:.6g})")
    return EXIT_OK


def oracle_value(scenario: Scenario) -> Any:
    """Value of the requested closed-form oracle."""
    if scenario.model != "pendulum":
        raise ScenarioError(f"Oracles are defined for the pendulum, not {scenario.model!r}")
    match scenario.oracle:
        case "pendulum_alpha":
            return pendulum_alpha_oracle(float(_vector(scenario.c, 1)[0]))
        case "pendulum_beta":
            return pendulum_beta_oracle(float(_vector(scenario.h, 1)[0]))
        case "pendulum_period":
            assert scenario.E is not None
            return pendulum_period(scenario.E)
        case "pendulum_momentum":
            return float(pendulum_momentum_oracle(float(_vector(scenario.c, 1)[0]), scenario.x))
    raise ScenarioError(f"Unknown oracle {scenario.oracle!r}")


def run_oracle(scenario: Scenario, out: Path | None) -> int:
    value = oracle_value(scenario)
    typer.echo(format_float(value))
    if out is not None:
        write_json_result(out, scenario.echo(), {"oracle": scenario.oracle, "value": value})
    return EXIT_OK


Runner = Callable[[Scenario, Path, bool, Progress], int]

RUNNERS: dict[str, tuple[Runner, str]] = {
    "alpha": (run_alpha, "csv"),
    "beta": (run_beta, "csv"),
    "rotvec": (run_rotvec, "json"),
    "cycle": (run_cycle, "json"),
    "diameter": (run_diameter, "json"),
    "verify-graph": (run_verify_graph, "json"),
    "lp-measure": (run_lp_measure, "json"),
}


def run_scenario(scenario: Scenario, out: Path | None = None, use_cache: bool = True) -> int:
    """Run one scenario, write its result file and return the exit code.

    Raises:
        TonelliError: For invalid input (exit 2), numerical failures (exit 3) and theorem violations (exit 4)
    """
    debug_print("Running task {} on model {}", scenario.task, scenario.model)
    if scenario.task == "oracle":
        return run_oracle(scenario, out or (Path(scenario.output) if scenario.output else None))
    runner, extension = RUNNERS[scenario.task]
    with _progress() as progress:
        return runner(scenario, _output(scenario, out, extension), use_cache, progress)


def _execute(task: str, config: Path | None, verbose: int, **overrides: Any) -> None:
    set_debug_level(verbose)
    out = overrides.pop("out", None)
    use_cache = not overrides.pop("no_cache", False)
    try:
        if config is not None:
            declared = _declared_task(config)
            if declared is not None and declared != task:
                raise ScenarioError(f"Scenario {config} declares task {declared!r}, not {task!r}")
        scenario = load_scenario(config, task=task, **overrides)
        code = run_scenario(scenario, out, use_cache)
    except TonelliError as e:
        e.show()
        raise typer.Exit(e.exit_code) from e
    raise typer.Exit(code)


def _declared_task(config: Path) -> str | None:
    try:
        with open(config, encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError):
        return None
    return data.get("task") if isinstance(data, dict) else None


@app.command()
def alpha(
    config: ConfigOption = None,
    out: OutOption = None,
    seed: SeedOption = None,
    model: ModelOption = None,
    no_cache: NoCacheOption = False,
    verbose: VerboseOption = 0,
) -> None:
    """Tabulate Mather's alpha function by value iteration (CSV: c1[,c2],alpha,residual)."""
    _execute("alpha", config, verbose, out=out, seed=seed, model=model, no_cache=no_cache)


@app.command()
def beta(
    config: ConfigOption = None,
    out: OutOption = None,
    seed: SeedOption = None,
    model: ModelOption = None,
    no_cache: NoCacheOption = False,
    verbose: VerboseOption = 0,
) -> None:
    """Tabulate Mather's beta function as the discrete conjugate of alpha (CSV: h1[,h2],beta,extrapolated)."""
    _execute("beta", config, verbose, out=out, seed=seed, model=model, no_cache=no_cache)


@app.command()
def rotvec(
    config: ConfigOption = None,
    out: OutOption = None,
    seed: SeedOption = None,
    model: ModelOption = None,
    verbose: VerboseOption = 0,
) -> None:
    """Rotation vector of the occupation measure of one orbit."""
    _execute("rotvec", config, verbose, out=out, seed=seed, model=model)


@app.command()
def cycle(
    config: ConfigOption = None,
    out: OutOption = None,
    seed: SeedOption = None,
    model: ModelOption = None,
    verbose: VerboseOption = 0,
) -> None:
    """Schwartzman asymptotic cycle of an orbit of a Hamiltonian or linear flow."""
    _execute("cycle", config, verbose, out=out, seed=seed, model=model)


@app.command()
def diameter(
    config: ConfigOption = None,
    out: OutOption = None,
    seed: SeedOption = None,
    model: ModelOption = None,
    verbose: VerboseOption = 0,
) -> None:
    """Schwartzman diameter of an ensemble of orbits and rest points."""
    _execute("diameter", config, verbose, out=out, seed=seed, model=model)


@app.command("verify-graph")
def verify_graph(
    config: ConfigOption = None,
    out: OutOption = None,
    seed: SeedOption = None,
    model: ModelOption = None,
    verbose: VerboseOption = 0,
) -> None:
    """Invariance, subcriticality, calibration and uniqueness checks of a Lagrangian graph."""
    _execute("verify-graph", config, verbose, out=out, seed=seed, model=model)


@app.command("lp-measure")
def lp_measure(
    config: ConfigOption = None,
    out: OutOption = None,
    seed: SeedOption = None,
    model: ModelOption = None,
    verbose: VerboseOption = 0,
) -> None:
    """Minimizing measure of prescribed rotation vector by linear programming (n = 1)."""
    _execute("lp-measure", config, verbose, out=out, seed=seed, model=model)


@app.command()
def oracle(
    config: ConfigOption = None,
    out: OutOption = None,
    model: ModelOption = None,
    name: Annotated[str | None, typer.Option("--oracle", help="Oracle name, e.g. pendulum_alpha")] = None,
    c: Annotated[float | None, typer.Option("--c", help="Cohomology class")] = None,
    h: Annotated[float | None, typer.Option("--h", help="Rotation number")] = None,
    energy: Annotated[float | None, typer.Option("--E", help="Energy level")] = None,
    x: Annotated[float | None, typer.Option("--x", help="Base point")] = None,
    verbose: VerboseOption = 0,
) -> None:
    """Print a closed-form pendulum oracle value on standard output."""
    if config is None and model is None:
        model = "pendulum"
    _execute("oracle", config, verbose, out=out, model=model, oracle=name, c=c, h=h, E=energy, x=x)


@app.command("verify-suite")
def verify_suite_command(
    quick: Annotated[bool, typer.Option("--quick/--full", help="Run the quick subset or every criterion")] = True,
    out: Annotated[Path, typer.Option("--out", help="Summary JSON path")] = Path("verify-suite.json"),
    no_cache: NoCacheOption = False,
    verbose: VerboseOption = 0,
) -> None:
    """Run the acceptance criteria and write a JSON summary; exits 1 if any criterion fails."""
    set_debug_level(verbose)
    level: Level = "quick" if quick else "full"
    try:
        with _progress() as progress:
            task_id: TaskID = progress.add_task("Acceptance suite", total=4 if quick else 11)
            report = verify_suite(level, not no_cache, progress, task_id)
    except TonelliError as e:
        e.show()
        raise typer.Exit(e.exit_code) from e
    write_json_result(out, {"level": level, "cache": not no_cache}, report)

    table = Table(title=f"Acceptance suite ({level})")
    for column in ("#", "criterion", "measured", "tolerance", "result", "time (s)"):
        table.add_column(column)
    for number, name, measured, tolerance, passed, runtime in summary_rows(report):
        table.add_row(
            str(number),
            name,
            f"{measured:.4g}",
            f"{tolerance:.4g}",
            "[green]pass[/]" if passed else "[red]FAIL[/]",
            f"{runtime:.1f}",
        )
    console.print(table)
    console.print(f"Summary written to {out}")
    raise typer.Exit(EXIT_OK if report.passed else 1)


if __name__ == "__main__":
    app()
