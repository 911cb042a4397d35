"""Acceptance suite: analytic and quadrature oracles checked at desk scale."""

import time
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel
from rich.progress import Progress, TaskID

from .debug import debug_print
from .dynamics import WeightedMeasure, integrate, occupation_measure
from .geometry import GridPotential, grid_nodes
from .graphs import LagrangianGraph, calibration_check, compare_graphs
from .mather import (
    PENDULUM_C0,
    AlphaTable,
    BetaTable,
    alpha_from_beta,
    alpha_table,
    beta_from_alpha,
    class_grid,
    critical_value,
    flat_interval,
    grid_modulus,
    mather_measure_lp,
    pendulum_alpha_oracle,
    pendulum_momentum_oracle,
    subderivative_interval,
)
from .schwartzman import (
    TorusMap,
    cycle_from_trajectory,
    detect_equilibria,
    flow_ensemble,
    flow_orbit,
    hamiltonian_ensemble,
    linear_flow,
    pair_with_form,
    periodic_orbit_cycle,
    pushforward_cycle,
    rotation_vector,
    schwartzman_diameter,
    stratified_starts,
)
from .tonelli import ClosedOneForm, Model, build_model

Level = Literal["quick", "full"]

QUICK_CRITERIA = (1, 3, 5, 8)
SQRT2_FLOW = (1.0, float(np.sqrt(2.0) - 1.0))
H_GRID = np.linspace(-1.5, 1.5, 121)


class CheckResult(BaseModel):
    measured: float
    tolerance: float
    passed: bool


class CriterionResult(BaseModel):
    """Outcome of one acceptance criterion; `measured` and `tolerance` are its headline check."""

    id: int
    name: str
    measured: float
    tolerance: float
    passed: bool
    runtime_s: float
    checks: dict[str, CheckResult]


class SuiteReport(BaseModel):
    level: Level
    passed: bool
    runtime_s: float
    criteria: list[CriterionResult]


def at_most(measured: float, tolerance: float) -> CheckResult:
    return CheckResult(measured=measured, tolerance=tolerance, passed=bool(measured <= tolerance))


def at_least(measured: float, bound: float) -> CheckResult:
    return CheckResult(measured=measured, tolerance=bound, passed=bool(measured >= bound))


@dataclass
class SuiteContext:
    """Models and alpha tables shared between criteria of one run."""

    level: Level
    use_cache: bool = True
    _models: dict[str, Model] = field(default_factory=dict)
    _alpha: dict[str, AlphaTable] = field(default_factory=dict)
    _beta: dict[str, BetaTable] = field(default_factory=dict)

    def model(self, name: str) -> Model:
        if name not in self._models:
            self._models[name] = build_model(name)
        return self._models[name]

    def alpha(self, name: str) -> AlphaTable:
        """Alpha on c in [-2, 2]: step 1/64, or 1/128 for the pendulum in a full run."""
        if name not in self._alpha:
            steps = 513 if name == "pendulum" and self.level == "full" else 257
            N, dt, v_max = (256, 0.05, 3.0) if name == "pendulum" else (256, 0.2, 2.4)
            grid, shape = class_grid(-2.0, 2.0, steps)
            self._alpha[name] = alpha_table(
                self.model(name).lagrangian, grid, N, dt, v_max=v_max, grid_shape=shape, cached=self.use_cache
            )
        return self._alpha[name]

    def beta(self, name: str) -> BetaTable:
        if name not in self._beta:
            self._beta[name] = beta_from_alpha(self.alpha(name), H_GRID)
        return self._beta[name]


def integrable_alpha(ctx: SuiteContext) -> dict[str, CheckResult]:
    at = ctx.alpha("integrable")
    error = float(np.nanmax(np.abs(at.alpha - 0.5 * at.c_grid[:, 0] ** 2)))
    return {"max_alpha_error": at_most(error, 5e-3), "invalid_entries": at_most(float(np.sum(~at.valid)), 0)}


def pendulum_flat_piece(ctx: SuiteContext) -> dict[str, CheckResult]:
    at = ctx.alpha("pendulum")
    c = at.c_grid[:, 0]
    flat = np.abs(c) <= PENDULUM_C0 * (1 - 1e-3)
    flat_error = float(np.nanmax(np.abs(at.alpha[flat] - 1.0)))
    at_two = int(np.argmin(np.abs(c - 2.0)))
    oracle_error = abs(float(at.alpha[at_two]) - pendulum_alpha_oracle(2.0))
    lower, upper = flat_interval(at)
    endpoint_error = max(abs(upper - PENDULUM_C0), abs(lower + PENDULUM_C0))
    return {
        "flat_piece_error": at_most(flat_error, 1e-2),
        "alpha_2_error": at_most(oracle_error, 1e-2),
        "flat_endpoint_error": at_most(endpoint_error, 2e-2),
    }


def fenchel_duality(ctx: SuiteContext) -> dict[str, CheckResult]:
    checks = {}
    for name in ("integrable", "pendulum"):
        at = ctx.alpha(name)
        bt = ctx.beta(name)
        modulus = grid_modulus(at.c_grid, bt.h_grid)
        recovered = alpha_from_beta(bt, at.c_grid)
        resolved = recovered.valid & at.valid
        error = float(np.max(np.abs(recovered.alpha[resolved] - at.alpha[resolved])))
        gap = at.alpha[at.valid][:, None] + bt.beta[None, :] - at.c_grid[at.valid] @ bt.h_grid.T
        checks[f"{name}_double_conjugation"] = at_most(error, 2 * modulus)
        checks[f"{name}_fenchel_young_gap"] = at_least(float(np.min(gap)), -1e-3)
    return checks


def beta_corner(ctx: SuiteContext) -> dict[str, CheckResult]:
    interval = subderivative_interval(ctx.beta("pendulum"), 0.0)
    error = max(abs(interval.lower[0] + PENDULUM_C0), abs(interval.upper[0] - PENDULUM_C0))
    return {"corner_error": at_most(error, 2e-2), "not_differentiable": at_most(float(interval.differentiable), 0)}


def linear_flow_cycle(ctx: SuiteContext) -> dict[str, CheckResult]:
    flow = linear_flow(SQRT2_FLOW)
    cycle = cycle_from_trajectory(flow_orbit(flow, [0.1, 0.2], 1000.0, 0.1))
    pendulum = ctx.model("pendulum").hamiltonian
    fixed = max(
        float(np.max(np.abs(rotation_vector(eq.dirac().to_tangent(pendulum)).vector)))
        for eq in detect_equilibria(pendulum)
    )
    closed = linear_flow([0.5, 0.25])
    measured = cycle_from_trajectory(flow_orbit(closed, [0.3, 0.7], 4.0, 0.01))
    expected = periodic_orbit_cycle([2, 1], 4.0)
    return {
        "linear_cycle_error": at_most(float(np.max(np.abs(cycle.vector - np.array(SQRT2_FLOW)))), 5e-3),
        "fixed_point_cycle": at_most(fixed, 0.0),
        "closed_orbit_error": at_most(float(np.max(np.abs(measured.vector - expected.vector))), 1e-8),
    }


def semiconjugacy(ctx: SuiteContext) -> dict[str, CheckResult]:
    psi = TorusMap([[1, 1], [0, 1]])
    alpha = np.array(SQRT2_FLOW)
    flow1 = linear_flow(alpha)
    flow2 = linear_flow(psi.homology @ alpha)
    path = flow_orbit(flow1, [0.05, 0.4], 100.0, 0.1)
    mu = WeightedMeasure.uniform(path.wrapped()[:-1], space="M")
    left, right = pushforward_cycle(psi, mu, flow1, flow2)
    return {"pushforward_error": at_most(float(np.max(np.abs(left.vector - right.vector))), 1e-3)}


def exact_form_annihilation(ctx: SuiteContext) -> dict[str, CheckResult]:
    exact = GridPotential.from_function(lambda x: np.sin(2 * np.pi * x[..., 0]) / (2 * np.pi), 1, 1024)
    eta = ClosedOneForm((0.0,), exact)
    worst = 0.0
    for name, x0, p0 in (("pendulum", 0.5, np.sqrt(5.0)), ("integrable", 0.1, (np.sqrt(5.0) - 1) / 2)):
        H = ctx.model(name).hamiltonian
        mu = occupation_measure(integrate(H, [x0], [p0], 1000.0, 0.05)).to_tangent(H)
        worst = max(worst, abs(pair_with_form(mu, eta)))
    return {"exact_pairing": at_most(worst, 1e-2)}


def pendulum_graphs(N: int = 256) -> tuple[LagrangianGraph, LagrangianGraph, float]:
    """Value-iteration and oracle graphs of the pendulum at c = 2, and the computed alpha."""
    L = build_model("pendulum").lagrangian
    result = critical_value(L, 2.0, N, 0.05, v_max=3.0)
    computed = LagrangianGraph.from_potential(2.0, result.u, smoothing=9)
    nodes = grid_nodes(1, N)[:, 0]
    oracle = LagrangianGraph.from_momentum(2.0, pendulum_momentum_oracle(2.0, nodes))
    return computed, oracle, result.alpha


def graph_uniqueness(ctx: SuiteContext) -> dict[str, CheckResult]:
    N = 256
    computed, oracle, _ = pendulum_graphs(N)
    same = compare_graphs(computed, oracle, 5.0 / N)
    L = ctx.model("integrable").lagrangian
    low, high = (LagrangianGraph.from_potential(c, critical_value(L, c, N, 0.2, v_max=2.4).u) for c in (0.3, 0.7))
    apart = compare_graphs(low, high, 5.0 / N)
    return {
        "pendulum_vertical_distance": at_most(same.hausdorff_vertical, 5.0 / N),
        "integrable_min_gap": at_least(apart.min_gap, 5.0 / N),
        "integrable_disjoint": at_least(float(apart.verdict == "disjoint"), 1.0),
    }


def calibration(ctx: SuiteContext) -> dict[str, CheckResult]:
    computed, _, alpha = pendulum_graphs()
    pendulum = calibration_check(computed, ctx.model("pendulum").lagrangian, alpha, dt=1e-3, T=5.0, curves=0)
    flat = LagrangianGraph.from_potential(0.8, GridPotential.zeros(1, 256))
    integrable = calibration_check(flat, ctx.model("integrable").lagrangian, 0.32, dt=1e-3, T=5.0, curves=100)
    return {
        "equality_defect": at_most(pendulum.equality_defect, 5e-2),
        "comparison_violations": at_most(float(integrable.inequality_violations), 0),
    }


def lp_cross_check(ctx: SuiteContext) -> dict[str, CheckResult]:
    checks = {}
    for name, h, expected, tol in (("integrable", 0.5, 0.125, 1e-2), ("pendulum", 0.0, -1.0, 2e-2)):
        result = mather_measure_lp(ctx.model(name).lagrangian, h)
        at = ctx.alpha(name)
        dual = float(np.nanmax(h * at.c_grid[:, 0] - at.alpha))
        checks[f"{name}_beta_lp_error"] = at_most(abs(result.beta_lp - expected), tol)
        checks[f"{name}_weak_duality"] = at_least(result.beta_lp - dual, -2e-2)
    return checks


def diameter(ctx: SuiteContext) -> dict[str, CheckResult]:
    rng = np.random.default_rng(0)
    linear = flow_ensemble(linear_flow(SQRT2_FLOW), rng.random((8, 2)), 200.0, 0.1)
    H = ctx.model("pendulum").hamiltonian
    xs, ps = stratified_starts(H, [1.5, 2.0])
    cycles = hamiltonian_ensemble(H, xs, ps, 200.0, 0.05)
    rest = [rotation_vector(eq.dirac().to_tangent(H)) for eq in detect_equilibria(H)]
    return {
        "linear_diameter": at_most(schwartzman_diameter(linear), 1e-2),
        "pendulum_diameter": at_least(schwartzman_diameter([*cycles, *rest]), 0.5),
    }


Criterion = Callable[[SuiteContext], dict[str, CheckResult]]

CRITERIA: dict[int, tuple[str, Criterion]] = {
    1: ("integrable alpha", integrable_alpha),
    2: ("pendulum flat piece", pendulum_flat_piece),
    3: ("Fenchel duality", fenchel_duality),
    4: ("beta corner", beta_corner),
    5: ("linear-flow cycle", linear_flow_cycle),
    6: ("semi-conjugacy identity", semiconjugacy),
    7: ("exact-form annihilation", exact_form_annihilation),
    8: ("graph uniqueness", graph_uniqueness),
    9: ("calibration", calibration),
    10: ("LP cross-check", lp_cross_check),
    11: ("Schwartzman diameter", diameter),
}


def run_criterion(number: int, ctx: SuiteContext) -> CriterionResult:
    name, check = CRITERIA[number]
    start = time.perf_counter()
    checks = check(ctx)
    runtime = time.perf_counter() - start
    headline = next(iter(checks.values()))
    passed = all(c.passed for c in checks.values())
    debug_print("Criterion {} ({}): {} in {:.1f}s", number, name, "pass" if passed else "FAIL", runtime)
    return CriterionResult(
        id=number,
        name=name,
        measured=headline.measured,
        tolerance=headline.tolerance,
        passed=passed,
        runtime_s=runtime,
        checks=checks,
    )


def verify_suite(
    level: Level = "quick",
    use_cache: bool = True,
    progress: Progress | None = None,
    task_id: TaskID | None = None,
) -> SuiteReport:
    """Run the quick (criteria 1, 3, 5, 8) or full acceptance suite."""
    numbers = QUICK_CRITERIA if level == "quick" else tuple(CRITERIA)
    ctx = SuiteContext(level, use_cache)
    start = time.perf_counter()
    results = []
    for number in numbers:
        if progress is not None and task_id is not None:
            progress.update(task_id, description=f"Criterion {number}: {CRITERIA[number][0]}")
        results.append(run_criterion(number, ctx))
        if progress is not None and task_id is not None:
            progress.advance(task_id)
    return SuiteReport(
        level=level,
        passed=all(r.passed for r in results),
        runtime_s=time.perf_counter() - start,
        criteria=results,
    )


def summary_rows(report: SuiteReport) -> list[tuple[Any, ...]]:
    return [(r.id, r.name, r.measured, r.tolerance, r.passed, r.runtime_s) for r in report.criteria]
