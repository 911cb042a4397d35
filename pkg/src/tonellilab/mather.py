"""Mather's alpha and beta functions, minimizing measures and the pendulum oracles.

alpha(c) is computed as the additive eigenvalue of a discrete Lax-Oleinik
operator on a periodic grid (value iteration); beta is its discrete
Legendre-Fenchel conjugate. Minimizing measures of prescribed rotation vector
come from a linear program over grid measures on T^1 x R.
"""

import itertools
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Protocol

import numpy as np
import scipy.sparse as sparse
from pydantic import BaseModel, model_validator
from rich.progress import Progress, TaskID
from scipy.integrate import simpson
from scipy.optimize import OptimizeResult, brentq, linprog
from scipy.sparse.csgraph import connected_components
from scipy.spatial import ConvexHull, QhullError

from .cache import cached
from .debug import debug_print, debug_timer
from .dynamics import WeightedMeasure
from .geometry import GridPotential, grid_nodes
from .tonelli import ClosedOneForm, TonelliLagrangian
from .types import (
    Extrapolation,
    FloatArray,
    Infeasible,
    InvalidInput,
    InvalidStep,
    LPError,
    NoConvergence,
)
from .utils import csv_text, thread_count

DEFAULT_V_MAX = 3.0
DEFAULT_TOL = 1e-4
DEFAULT_RELAXATION = 0.5
DEFAULT_MAX_SWEEPS = 50_000
MIN_RESOLUTION = 16
LP_MAX_VARIABLES = 4096
SUPPORT_CUTOFF = 1e-12


def _as_form(eta: ClosedOneForm | Sequence[float] | float | FloatArray, dim: int) -> ClosedOneForm:
    form = eta if isinstance(eta, ClosedOneForm) else ClosedOneForm.constant(eta)
    if form.dim != dim:
        raise InvalidInput(f"Cohomology class has dimension {form.dim}, Lagrangian has dimension {dim}")
    return form


class LaxOleinikStencil:
    """One-step discrete Lax-Oleinik operator on the uniform grid of T^n.

    (Tu)(x) = min over grid points x' with |x - x'| <= v_max * dt (minimal lift) of
    u(x') + dt * L_eta(midpoint, (x - x') / dt), where L_eta(x, v) = L(x, v) - <eta(x), v>.
    Ties go to the lowest source index.
    """

    def __init__(self, L: TonelliLagrangian, eta: Any, N: int, dt: float, v_max: float = DEFAULT_V_MAX):
        if N < MIN_RESOLUTION:
            raise InvalidInput(f"Grid resolution must be at least {MIN_RESOLUTION}, got {N}")
        if not dt > 0 or not v_max > 0:
            raise InvalidStep(f"Need dt > 0 and v_max > 0, got dt={dt}, v_max={v_max}")
        self.L = L
        self.eta = _as_form(eta, L.dim)
        self.dim = L.dim
        self.N = N
        self.dt = dt
        self.v_max = v_max

        reach = v_max * dt * N
        K = int(np.floor(reach + 1e-9))
        if 2 * K >= N:
            raise InvalidStep(
                f"Stencil reach v_max*dt = {v_max * dt:.6g} spans {K} cells, more than half of the {N}-cell torus"
            )
        span = np.arange(-K, K + 1)
        offsets = np.array(list(itertools.product(span, repeat=self.dim)), dtype=int)
        offsets = offsets[np.linalg.norm(offsets, axis=1) <= reach + 1e-9]
        self.offsets = offsets

        nodes = grid_nodes(self.dim, N).reshape(-1, self.dim)
        index = np.indices((N,) * self.dim).reshape(self.dim, -1).T
        # Source of offset k at target i is i - k
        source = (index[:, None, :] - offsets[None, :, :]) % N
        self.source = np.ravel_multi_index(tuple(source[..., a] for a in range(self.dim)), (N,) * self.dim)

        displacement = offsets / N
        velocity = displacement / dt
        midpoint = nodes[:, None, :] - 0.5 * displacement[None, :, :]
        v = np.broadcast_to(velocity[None, :, :], midpoint.shape)
        action = L.L(midpoint, v) - np.sum(self.eta(midpoint) * v, axis=-1)
        self.cost = dt * action
        debug_print(
            "Lax-Oleinik stencil: N={} dim={} dt={} offsets={}", N, self.dim, dt, len(offsets), level=2
        )

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.dim

    def apply(self, u: FloatArray) -> FloatArray:
        """Tu for grid values of shape (N,) * dim."""
        flat = np.asarray(u, dtype=float).ravel()
        return np.min(flat[self.source] + self.cost, axis=1).reshape(self.shape)

    def candidates(self, u: FloatArray) -> FloatArray:
        """All one-step values u(x') + cost, shape (nodes, offsets)."""
        return np.asarray(u, dtype=float).ravel()[self.source] + self.cost

    def minimizers(self, u: FloatArray) -> np.ndarray:
        """Flat source index of the minimizer at each node (lowest index on ties)."""
        values = self.candidates(u)
        best = np.min(values, axis=1, keepdims=True)
        masked = np.where(values <= best, self.source, np.iinfo(np.int64).max)
        return np.min(masked, axis=1).reshape(self.shape)


def lax_oleinik_apply(
    u: GridPotential, L: TonelliLagrangian, eta: Any, dt: float, v_max: float = DEFAULT_V_MAX
) -> GridPotential:
    """One application of the discrete Lax-Oleinik operator.

    Raises:
        InvalidStep: If v_max * dt reaches half the torus
    """
    if u.dim != L.dim:
        raise InvalidInput(f"Potential has dimension {u.dim}, Lagrangian has dimension {L.dim}")
    stencil = LaxOleinikStencil(L, eta, u.N, dt, v_max)
    return GridPotential(stencil.apply(u.values))


@dataclass
class CriticalValue:
    """Result of value iteration: alpha(c), the fixed potential and the final residual."""

    c: FloatArray
    alpha: float
    u: GridPotential
    residual: float
    sweeps: int


def critical_value(
    L: TonelliLagrangian,
    c: Any,
    N: int,
    dt: float,
    tol: float = DEFAULT_TOL,
    v_max: float = DEFAULT_V_MAX,
    relaxation: float = DEFAULT_RELAXATION,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    u0: GridPotential | None = None,
    stencil: LaxOleinikStencil | None = None,
) -> CriticalValue:
    """Mather's alpha(c) as the additive eigenvalue of the Lax-Oleinik operator.

    Iterates u <- (1 - relaxation) u + relaxation Tu, normalized by subtracting its
    maximum, until the oscillation of (Tu - u) / dt drops below `tol`; then
    alpha = -mean(Tu - u) / dt.

    Raises:
        NoConvergence: If `max_sweeps` sweeps do not reach `tol` (carries the last residual)
    """
    if not 0 < relaxation <= 1:
        raise InvalidInput(f"Relaxation must lie in (0, 1], got {relaxation}")
    c_vec = np.atleast_1d(np.asarray(c, dtype=float))
    stencil = stencil or LaxOleinikStencil(L, c_vec, N, dt, v_max)
    u = np.zeros(stencil.shape) if u0 is None else np.array(u0.values, dtype=float)
    residual = np.inf
    for sweep in range(1, max_sweeps + 1):
        Tu = stencil.apply(u)
        diff = Tu - u
        residual = float(np.max(diff) - np.min(diff)) / dt
        if residual <= tol:
            alpha = -float(np.mean(diff)) / dt
            debug_print("alpha({}) = {:.10g} after {} sweeps (residual {:.3g})", c_vec.tolist(), alpha, sweep, residual)
            return CriticalValue(c_vec, alpha, GridPotential(u - np.max(u)), residual, sweep)
        u = (1.0 - relaxation) * u + relaxation * Tu
        u -= np.max(u)
        if sweep % 500 == 0:
            debug_print("c={} sweep {}: residual {:.3g}", c_vec.tolist(), sweep, residual, level=2)
    raise NoConvergence(f"Value iteration at c={c_vec.tolist()}", max_sweeps, residual)


def lower_convex_envelope(points: FloatArray, values: FloatArray) -> FloatArray:
    """Values of the lower convex envelope of (points, values) at the points themselves.

    One-dimensional points use the lower hull by monotone chain; two-dimensional
    points use the lower facets of the Qhull convex hull.
    """
    pts = np.asarray(points, dtype=float)
    vals = np.asarray(values, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if len(vals) < 3:
        return vals.copy()
    if pts.shape[1] == 1:
        return _lower_hull_1d(pts[:, 0], vals)
    return _lower_hull_2d(pts, vals)


def _lower_hull_1d(x: FloatArray, y: FloatArray) -> FloatArray:
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    hull: list[int] = []
    for i in range(len(xs)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # Drop b if it lies on or above the chord from a to i
            if (ys[b] - ys[a]) * (xs[i] - xs[a]) >= (ys[i] - ys[a]) * (xs[b] - xs[a]):
                hull.pop()
            else:
                break
        hull.append(i)
    envelope = np.interp(xs, xs[hull], ys[hull])
    out = np.empty_like(envelope)
    out[order] = np.minimum(envelope, ys)
    return out


def _lower_hull_2d(pts: FloatArray, vals: FloatArray) -> FloatArray:
    lifted = np.column_stack([pts, vals])
    hull = None
    for options in (None, "QJ"):
        try:
            hull = ConvexHull(lifted, qhull_options=options)
            break
        except QhullError:
            continue
    if hull is None:
        return vals.copy()
    lower = hull.equations[hull.equations[:, 2] < -1e-12]
    if len(lower) == 0:
        return vals.copy()
    # Each lower facet a.c + b.z + d = 0 with b < 0 gives z = -(a.c + d) / b
    planes = -(pts @ lower[:, :2].T + lower[:, 3]) / lower[:, 2]
    return np.minimum(np.max(planes, axis=1), vals)


@dataclass
class AlphaTable:
    """Tabulated alpha(c) on a grid of cohomology classes.

    `c_grid` has shape (K, n); for n = 2 the classes form a tensor grid of shape
    `grid_shape` in row-major order.
    """

    c_grid: FloatArray
    alpha: FloatArray
    residual: FloatArray
    valid: np.ndarray
    raw_alpha: FloatArray
    convexified: bool = False
    adjustment: float = 0.0
    grid_shape: tuple[int, ...] = ()
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return int(self.c_grid.shape[1])

    def convexify(self) -> "AlphaTable":
        """Replace values by the lower convex envelope of the valid entries."""
        ok = self.valid & np.isfinite(self.raw_alpha)
        alpha = np.full(len(self.raw_alpha), np.nan)
        adjustment = 0.0
        if np.any(ok):
            envelope = lower_convex_envelope(self.c_grid[ok], self.raw_alpha[ok])
            adjustment = float(np.max(np.abs(self.raw_alpha[ok] - envelope)))
            alpha[ok] = envelope
        debug_print("Convexification adjustment {:.3g}", adjustment)
        return AlphaTable(
            self.c_grid, alpha, self.residual, self.valid, self.raw_alpha, True, adjustment, self.grid_shape, self.meta
        )

    def table(self) -> tuple[list[str], list[list[Any]]]:
        """CSV header and rows: c1[,c2],alpha,residual."""
        header = [f"c{i + 1}" for i in range(self.dim)] + ["alpha", "residual"]
        rows = [[*c, a, r] for c, a, r in zip(self.c_grid, self.alpha, self.residual, strict=True)]
        return header, rows

    def to_csv(self) -> str:
        return csv_text(*self.table())

    def to_dict(self) -> dict[str, Any]:
        return {
            "c_grid": self.c_grid.tolist(),
            "alpha": self.alpha.tolist(),
            "residual": self.residual.tolist(),
            "valid": self.valid.tolist(),
            "raw_alpha": self.raw_alpha.tolist(),
            "convexified": self.convexified,
            "adjustment": self.adjustment,
            "grid_shape": list(self.grid_shape),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "AlphaTable":
        def floats(key: str) -> FloatArray:
            return np.array([np.nan if v is None else v for v in data[key]], dtype=float)

        return cls(
            c_grid=np.array(data["c_grid"], dtype=float),
            alpha=floats("alpha"),
            residual=np.array([np.inf if v is None else v for v in data["residual"]], dtype=float),
            valid=np.array(data["valid"], dtype=bool),
            raw_alpha=floats("raw_alpha"),
            convexified=bool(data["convexified"]),
            adjustment=float(data["adjustment"]),
            grid_shape=tuple(data["grid_shape"]),
            meta=dict(data["meta"]),
        )


class AlphaTableEntry(BaseModel):
    """Layout of a cached alpha table; non-finite values are stored as null."""

    c_grid: list[list[float]]
    alpha: list[float | None]
    residual: list[float | None]
    valid: list[bool]
    raw_alpha: list[float | None]
    convexified: bool
    adjustment: float
    grid_shape: list[int]
    meta: dict[str, Any]

    @model_validator(mode="after")
    def _one_entry_per_class(self) -> "AlphaTableEntry":
        K = len(self.c_grid)
        if any(len(column) != K for column in (self.alpha, self.residual, self.valid, self.raw_alpha)):
            raise ValueError(f"Columns do not all have one entry per class ({K})")
        if self.grid_shape and int(np.prod(self.grid_shape)) != K:
            raise ValueError(f"Grid shape {self.grid_shape} does not hold {K} classes")
        return self


def class_grid(c_min: Any, c_max: Any, steps: int) -> tuple[FloatArray, tuple[int, ...]]:
    """Uniform grid of cohomology classes: a segment for n = 1, a tensor grid for n = 2."""
    lo = np.atleast_1d(np.asarray(c_min, dtype=float))
    hi = np.atleast_1d(np.asarray(c_max, dtype=float))
    if lo.shape != hi.shape or steps < 2 or np.any(hi <= lo):
        raise InvalidInput(f"Invalid class grid [{lo.tolist()}, {hi.tolist()}] with {steps} steps")
    axes = [np.linspace(a, b, steps) for a, b in zip(lo, hi, strict=True)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1), (steps,) * len(lo)


@cached("alpha_table", dumper=AlphaTable.to_dict, loader=AlphaTable.from_dict, cache_schema=AlphaTableEntry)
def alpha_table(
    L: TonelliLagrangian,
    c_grid: FloatArray,
    N: int,
    dt: float,
    tol: float = DEFAULT_TOL,
    v_max: float = DEFAULT_V_MAX,
    relaxation: float = DEFAULT_RELAXATION,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    convexify: bool = True,
    grid_shape: tuple[int, ...] = (),
    cached: bool = True,
    progress: Progress | None = None,
    task_id: TaskID | None = None,
) -> AlphaTable:
    """alpha(c) for every class of `c_grid` (shape (K,) or (K, n)), computed in parallel.

    Entries whose value iteration does not converge are marked invalid (NaN).
    Results are cached on disk unless `cached` is False.
    """
    grid = np.asarray(c_grid, dtype=float)
    grid = grid[:, None] if grid.ndim == 1 else grid
    if len(grid) == 0:
        raise InvalidInput("The class grid must not be empty")
    if grid.shape[1] != L.dim:
        raise InvalidInput(f"Classes have dimension {grid.shape[1]}, Lagrangian has dimension {L.dim}")
    # Validates the step once before spawning workers
    LaxOleinikStencil(L, grid[0], N, dt, v_max)

    def solve(c: FloatArray) -> tuple[float, float, bool]:
        try:
            result = critical_value(L, c, N, dt, tol, v_max, relaxation, max_sweeps)
        except NoConvergence as exc:
            debug_print("Entry c={} marked invalid: {}", c.tolist(), exc.format_message())
            return np.nan, exc.last_residual, False
        finally:
            if progress is not None and task_id is not None:
                progress.advance(task_id)
        return result.alpha, result.residual, True

    workers = min(thread_count(), len(grid))
    debug_print("Tabulating alpha at {} classes with {} worker(s)", len(grid), workers)
    with debug_timer(f"Alpha table ({len(grid)} classes)"), ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(solve, grid))

    raw = np.array([r[0] for r in results])
    table = AlphaTable(
        c_grid=grid,
        alpha=raw.copy(),
        residual=np.array([r[1] for r in results]),
        valid=np.array([r[2] for r in results], dtype=bool),
        raw_alpha=raw,
        grid_shape=tuple(grid_shape) or (len(grid),),
        meta={"N": N, "dt": dt, "tol": tol, "v_max": v_max, "relaxation": relaxation, "model": L.name},
    )
    return table.convexify() if convexify else table


@dataclass
class BetaTable:
    """Tabulated beta(h) = max_c <c, h> - alpha(c) with maximizing classes."""

    h_grid: FloatArray
    beta: FloatArray
    argmax_c: FloatArray
    extrapolated: np.ndarray
    convex: bool = True
    grid_shape: tuple[int, ...] = ()
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return int(self.h_grid.shape[1])

    def table(self) -> tuple[list[str], list[list[Any]]]:
        """CSV header and rows: h1[,h2],beta,extrapolated."""
        header = [f"h{i + 1}" for i in range(self.dim)] + ["beta", "extrapolated"]
        rows = [[*h, b, bool(e)] for h, b, e in zip(self.h_grid, self.beta, self.extrapolated, strict=True)]
        return header, rows

    def to_csv(self) -> str:
        return csv_text(*self.table())

    def to_dict(self) -> dict[str, Any]:
        return {
            "h_grid": self.h_grid.tolist(),
            "beta": self.beta.tolist(),
            "argmax_c": self.argmax_c.tolist(),
            "extrapolated": self.extrapolated.tolist(),
            "convex": self.convex,
            "grid_shape": list(self.grid_shape),
            "meta": self.meta,
        }


def _boundary_mask(points: FloatArray) -> np.ndarray:
    """Points on the boundary of the bounding box of a tensor grid."""
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    return np.any(np.isclose(points, lo) | np.isclose(points, hi), axis=1)


def _conjugate(
    source_points: FloatArray, source_values: FloatArray, target_points: FloatArray
) -> tuple[FloatArray, np.ndarray]:
    """Discrete Legendre-Fenchel transform: max_k <s_k, t> - f_k for every target t."""
    scores = target_points @ source_points.T - source_values[None, :]
    best = np.argmax(scores, axis=1)
    return scores[np.arange(len(target_points)), best], best


def beta_from_alpha(at: AlphaTable, h_grid: Any, grid_shape: tuple[int, ...] = ()) -> BetaTable:
    """beta(h) = max over tabulated c of <c, h> - alpha(c).

    Entries whose maximizer sits on the boundary of the class grid are flagged
    as extrapolated: h lies outside the range of subgradients the table resolves.
    """
    if not at.convexified:
        raise InvalidInput("beta_from_alpha needs a convexified alpha table")
    h = np.asarray(h_grid, dtype=float)
    h = h[:, None] if h.ndim == 1 else h
    if h.shape[1] != at.dim:
        raise InvalidInput(f"h has dimension {h.shape[1]}, table has dimension {at.dim}")
    ok = at.valid & np.isfinite(at.alpha)
    if not np.any(ok):
        raise InvalidInput("The alpha table has no valid entries")
    c_ok = at.c_grid[ok]
    beta, best = _conjugate(c_ok, at.alpha[ok], h)
    on_boundary = _boundary_mask(at.c_grid)[ok]
    return BetaTable(
        h_grid=h,
        beta=beta,
        argmax_c=c_ok[best],
        extrapolated=on_boundary[best],
        grid_shape=tuple(grid_shape) or (len(h),),
        meta={**at.meta, "c_min": at.c_grid.min(axis=0).tolist(), "c_max": at.c_grid.max(axis=0).tolist()},
    )


def alpha_from_beta(bt: BetaTable, c_grid: Any) -> AlphaTable:
    """Re-conjugation alpha(c) = max over non-extrapolated h of <c, h> - beta(h).

    Entries whose maximizer sits on the boundary of the h grid are only lower
    bounds and are marked invalid.
    """
    c = np.asarray(c_grid, dtype=float)
    c = c[:, None] if c.ndim == 1 else c
    use = ~bt.extrapolated if np.any(~bt.extrapolated) else np.ones(len(bt.beta), dtype=bool)
    h_used = bt.h_grid[use]
    alpha, best = _conjugate(h_used, bt.beta[use], c)
    resolved = ~_boundary_mask(h_used)[best]
    return AlphaTable(
        c_grid=c,
        alpha=alpha,
        residual=np.zeros(len(c)),
        valid=resolved,
        raw_alpha=alpha.copy(),
        convexified=True,
        grid_shape=(len(c),),
        meta=dict(bt.meta),
    )


def _max_spacing(points: FloatArray) -> float:
    spacing = 0.0
    for axis in range(points.shape[1]):
        values = np.unique(points[:, axis])
        if len(values) > 1:
            spacing = max(spacing, float(np.max(np.diff(values))))
    return spacing


def grid_modulus(c_grid: Any, h_grid: Any) -> float:
    """Product of the largest class spacing and the largest rotation-vector spacing."""
    c = np.asarray(c_grid, dtype=float)
    h = np.asarray(h_grid, dtype=float)
    return _max_spacing(c[:, None] if c.ndim == 1 else c) * _max_spacing(h[:, None] if h.ndim == 1 else h)


class SubderivativeInterval(BaseModel):
    """Range of one-sided secant slopes of a convex tabulation at a point."""

    point: list[float]
    lower: list[float]
    upper: list[float]
    width: float
    differentiable: bool
    vertices: list[list[float]]


def _table_arrays(table: AlphaTable | BetaTable) -> tuple[FloatArray, FloatArray, tuple[int, ...]]:
    if isinstance(table, AlphaTable):
        if not table.convexified:
            raise InvalidInput("Subderivatives need a convexified table")
        return table.c_grid, table.alpha, table.grid_shape
    return table.h_grid, table.beta, table.grid_shape


def _axis_slopes(coords: FloatArray, values: FloatArray, i: int) -> tuple[float, float]:
    left = (values[i] - values[i - 1]) / (coords[i] - coords[i - 1])
    right = (values[i + 1] - values[i]) / (coords[i + 1] - coords[i])
    return float(left), float(right)


def _node_width(coords: FloatArray, values: FloatArray, i: int) -> float:
    left, right = _axis_slopes(coords, values, i)
    return right - left


def _axis_interval(coords: FloatArray, values: FloatArray, point: float) -> tuple[float, float, bool]:
    """One-sided slope range along one axis and the differentiability diagnostic."""
    K = len(coords)
    scale = max(1.0, float(np.max(np.abs(coords))))
    i = int(np.argmin(np.abs(coords - point)))
    on_node = abs(coords[i] - point) <= 1e-12 * scale
    if point <= coords[0] or point >= coords[-1] or (on_node and (i == 0 or i == K - 1)):
        raise Extrapolation(f"Point {point} is on or outside the boundary [{coords[0]}, {coords[-1]}] of the table")
    if not on_node:
        j = int(np.searchsorted(coords, point)) - 1
        slope = float((values[j + 1] - values[j]) / (coords[j + 1] - coords[j]))
        return slope, slope, True
    lower, upper = _axis_slopes(coords, values, i)
    neighbour_width = max((_node_width(coords, values, k) for k in (i - 1, i + 1) if 0 < k < K - 1), default=0.0)
    return lower, upper, upper - lower <= 2 * neighbour_width + 1e-9


def subderivative_interval(table: AlphaTable | BetaTable, point: Any) -> SubderivativeInterval:
    """Subderivative of a convex tabulation from neighbouring secant slopes.

    For n = 1 the result is an interval; for n = 2 it is the box spanned by the
    axis secant slopes (4 vertices). The point is diagnosed differentiable when the
    width is at most twice the largest width at the neighbouring nodes.

    Raises:
        Extrapolation: If the point is on or outside the boundary of the table
    """
    grid, values, shape = _table_arrays(table)
    p = np.atleast_1d(np.asarray(point, dtype=float))
    if len(p) != grid.shape[1]:
        raise InvalidInput(f"Point has dimension {len(p)}, table has dimension {grid.shape[1]}")
    if np.any(~np.isfinite(values)):
        raise InvalidInput("Subderivatives need a table without invalid entries")

    if grid.shape[1] == 1:
        order = np.argsort(grid[:, 0])
        lower, upper, smooth = _axis_interval(grid[order, 0], values[order], float(p[0]))
        return SubderivativeInterval(
            point=p.tolist(),
            lower=[lower],
            upper=[upper],
            width=upper - lower,
            differentiable=smooth,
            vertices=[[lower], [upper]],
        )

    steps = shape if len(shape) == 2 else (int(round(np.sqrt(len(values)))),) * 2
    axes = [np.unique(grid[:, a]) for a in range(2)]
    surface = values.reshape(steps)
    i = int(np.argmin(np.abs(axes[0] - p[0])))
    j = int(np.argmin(np.abs(axes[1] - p[1])))
    lo1, hi1, smooth1 = _axis_interval(axes[0], surface[:, j], float(p[0]))
    lo2, hi2, smooth2 = _axis_interval(axes[1], surface[i, :], float(p[1]))
    vertices = [[a, b] for a in (lo1, hi1) for b in (lo2, hi2)]
    return SubderivativeInterval(
        point=p.tolist(),
        lower=[lo1, lo2],
        upper=[hi1, hi2],
        width=max(hi1 - lo1, hi2 - lo2),
        differentiable=smooth1 and smooth2,
        vertices=vertices,
    )


def flat_interval(at: AlphaTable, slope_tol: float = 0.05) -> tuple[float, float]:
    """Endpoints of the flat piece of a one-dimensional alpha table around its minimum.

    Walking outward from the minimizing node, the flat piece extends over cells
    whose secant slope stays within `slope_tol` of zero; each endpoint is the
    midpoint of the first steeper cell.
    """
    if at.dim != 1:
        raise InvalidInput("flat_interval is defined for one-dimensional tables")
    order = np.argsort(at.c_grid[:, 0])
    c = at.c_grid[order, 0]
    a = at.alpha[order]
    slopes = np.diff(a) / np.diff(c)
    start = int(np.nanargmin(a))
    right = start
    while right < len(slopes) and abs(slopes[right]) <= slope_tol:
        right += 1
    left = start
    while left > 0 and abs(slopes[left - 1]) <= slope_tol:
        left -= 1
    if right >= len(slopes) or left <= 0:
        raise Extrapolation("The flat piece reaches the boundary of the table")
    return float(0.5 * (c[left - 1] + c[left])), float(0.5 * (c[right] + c[right + 1]))


def action_defect(L: TonelliLagrangian, mu: WeightedMeasure, c: Any, alpha_c: float) -> float:
    """Integral of L - <c, v> against a TM measure plus alpha(c); zero for c-minimizing measures."""
    if mu.space != "TM":
        raise InvalidInput(f"action_defect needs a measure on TM, got {mu.space}")
    assert mu.vectors is not None
    c_vec = np.atleast_1d(np.asarray(c, dtype=float))
    lagrangian = L.L(mu.points, mu.vectors) - mu.vectors @ c_vec
    return mu.integrate(lagrangian) + alpha_c


@dataclass
class LPSolution:
    """Backend-neutral result of a linear program."""

    x: FloatArray | None
    fun: float
    status: int
    message: str


class LPBackend(Protocol):
    """Solves min c.x subject to A_eq x = b_eq, x >= 0.

    Status codes follow scipy: 0 optimal, 2 infeasible, anything else a failure.
    """

    def solve(self, c: FloatArray, A_eq: sparse.spmatrix, b_eq: FloatArray) -> LPSolution: ...


class HighsBackend:
    """LP backend on scipy's HiGHS solvers."""

    def __init__(self, method: str = "highs"):
        self.method = method

    def solve(self, c: FloatArray, A_eq: sparse.spmatrix, b_eq: FloatArray) -> LPSolution:
        res: OptimizeResult = linprog(c, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method=self.method)
        return LPSolution(res.x, float(res.fun) if res.x is not None else np.nan, int(res.status), str(res.message))


@dataclass
class LPMeasureResult:
    """A minimizing measure of prescribed rotation vector and its average action."""

    measure: WeightedMeasure
    beta_lp: float
    h: float
    status: str


def holonomy_matrix(nodes: FloatArray, velocities: FloatArray, dt: float) -> sparse.csr_matrix:
    """Rows f_m(x + v dt) - f_m(x) for the hat functions f_m of a periodic grid.

    Columns enumerate (x_i, v_j) in row-major order.
    """
    N = len(nodes)
    ii, jj = np.meshgrid(np.arange(N), np.arange(len(velocities)), indexing="ij")
    target = (nodes[ii] + velocities[jj] * dt) * N
    base = np.floor(target).astype(int)
    frac = target - base
    col = (ii * len(velocities) + jj).ravel()
    rows = np.concatenate([(base % N).ravel(), ((base + 1) % N).ravel(), ii.ravel()])
    cols = np.concatenate([col, col, col])
    data = np.concatenate([(1 - frac).ravel(), frac.ravel(), -np.ones(col.size)])
    return sparse.coo_matrix((data, (rows, cols)), shape=(N, col.size)).tocsr()


def mather_measure_lp(
    L: TonelliLagrangian,
    h: float,
    N_x: int = 64,
    N_v: int = 33,
    v_max: float = 2.0,
    dt: float = 0.05,
    backend: LPBackend | None = None,
) -> LPMeasureResult:
    """Minimize the average action over grid measures on T^1 x R with rotation vector h.

    Constraints: total mass 1, mean velocity h, and invariance of every grid hat
    function under the one-step transition x -> x + v dt.

    Raises:
        InvalidInput: For n != 1 or more than 4096 variables
        Infeasible: If no grid measure has rotation vector h
        LPError: If the backend fails otherwise
    """
    if L.dim != 1:
        raise InvalidInput("The minimizing-measure linear program is restricted to n = 1")
    if N_x * N_v > LP_MAX_VARIABLES:
        raise InvalidInput(f"N_x * N_v = {N_x * N_v} exceeds the {LP_MAX_VARIABLES}-variable limit")
    if N_x < 2 or N_v < 2 or not v_max > 0 or not dt > 0:
        raise InvalidInput(f"Invalid state grid N_x={N_x}, N_v={N_v}, v_max={v_max}, dt={dt}")
    h = float(np.asarray(h, dtype=float).ravel()[0])
    nodes = np.arange(N_x) / N_x
    velocities = np.linspace(-v_max, v_max, N_v)
    X, V = np.meshgrid(nodes, velocities, indexing="ij")
    cost = L.L(X.reshape(-1, 1), V.reshape(-1, 1))

    A_eq = sparse.vstack(
        [
            sparse.csr_matrix(np.ones((1, cost.size))),
            sparse.csr_matrix(V.reshape(1, -1)),
            holonomy_matrix(nodes, velocities, dt),
        ]
    ).tocsr()
    b_eq = np.concatenate([[1.0, h], np.zeros(N_x)])

    debug_print("Mather LP: {} variables, {} constraints, h={}", cost.size, A_eq.shape[0], h)
    with debug_timer("Mather LP solve"):
        solution = (backend or HighsBackend()).solve(cost, A_eq, b_eq)
    if solution.status == 2:
        raise Infeasible(f"No grid measure has rotation vector {h} (velocities span [-{v_max}, {v_max}])")
    if solution.status != 0 or solution.x is None:
        raise LPError(f"Linear program failed with status {solution.status}: {solution.message}")

    weights = np.clip(solution.x, 0.0, None)
    keep = weights > SUPPORT_CUTOFF
    weights = weights[keep] / np.sum(weights[keep])
    measure = WeightedMeasure(X.ravel()[keep][:, None], weights, V.ravel()[keep][:, None], "TM")
    return LPMeasureResult(measure=measure, beta_lp=float(solution.fun), h=h, status=solution.message)


@dataclass
class AubryEstimate:
    """Grid points on cycles of near-calibrated Lax-Oleinik transitions."""

    nodes: list[tuple[int, ...]]
    points: FloatArray
    N: int

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, node: object) -> bool:
        return node in set(self.nodes)

    @property
    def fraction(self) -> float:
        return len(self.nodes) / self.N ** self.points.shape[1]


def aubry_estimate(
    u_fixed: GridPotential,
    L: TonelliLagrangian,
    eta: Any,
    dt: float,
    tol_cal: float = 1e-3,
    v_max: float = DEFAULT_V_MAX,
    alpha: float | None = None,
) -> AubryEstimate:
    """Calibration-based superset of the projected Mather set.

    A transition x' -> x is calibrated when u(x') + dt L_eta + dt alpha exceeds u(x)
    by at most tol_cal * dt. Points lying on a cycle of calibrated transitions
    (a strongly connected component with an internal edge) are returned.
    """
    stencil = LaxOleinikStencil(L, eta, u_fixed.N, dt, v_max)
    u = u_fixed.values
    if alpha is None:
        alpha = -float(np.mean(stencil.apply(u) - u)) / dt
    values = stencil.candidates(u)
    excess = values + dt * alpha - u.ravel()[:, None]
    target, offset = np.nonzero(excess <= tol_cal * dt)
    source = stencil.source[target, offset]
    size = u.size
    graph = sparse.coo_matrix((np.ones(len(target)), (source, target)), shape=(size, size)).tocsr()
    _, labels = connected_components(graph, directed=True, connection="strong")
    component_size = np.bincount(labels, minlength=labels.max() + 1)
    on_cycle = component_size[labels] > 1
    on_cycle[source[source == target]] = True
    flat = np.flatnonzero(on_cycle)
    nodes = [tuple(int(i) for i in np.unravel_index(k, u.shape)) for k in flat]
    points = grid_nodes(u_fixed.dim, u_fixed.N).reshape(-1, u_fixed.dim)[flat]
    debug_print("Aubry estimate: {} of {} grid points calibrated", len(nodes), size)
    return AubryEstimate(nodes, points, u_fixed.N)


# Pendulum oracles for H = p^2 / 2 + cos(2 pi x)

PENDULUM_C0 = 4 / np.pi
QUADRATURE_POINTS = 10_001
_QUAD_X = np.linspace(0.0, 1.0, QUADRATURE_POINTS)


def pendulum_class_of_energy(E: float) -> float:
    """c(E) = integral over [0, 1] of sqrt(2 (E - cos 2 pi x)) for E >= 1."""
    if E < 1:
        raise InvalidInput(f"Rotating pendulum orbits need E >= 1, got {E}")
    return float(simpson(np.sqrt(np.maximum(2 * (E - np.cos(2 * np.pi * _QUAD_X)), 0.0)), x=_QUAD_X))


def pendulum_alpha_oracle(c: float) -> float:
    """alpha(c) = 1 on the flat piece |c| <= 4/pi, else the energy E with c(E) = |c|."""
    c_abs = abs(float(c))
    if c_abs <= PENDULUM_C0:
        return 1.0
    upper = 2.0 + 0.5 * c_abs**2
    return float(brentq(lambda E: pendulum_class_of_energy(E) - c_abs, 1.0, upper, xtol=1e-14, rtol=1e-15))


def pendulum_period(E: float) -> float:
    """Period T(E) = integral over [0, 1] of dx / sqrt(2 (E - cos 2 pi x)) of a rotating orbit."""
    if E < 1:
        raise InvalidInput(f"Rotating pendulum orbits need E >= 1, got {E}")
    if E == 1:
        return float("inf")
    return float(simpson(1.0 / np.sqrt(2 * (E - np.cos(2 * np.pi * _QUAD_X))), x=_QUAD_X))


def pendulum_energy_of_rotation(h: float) -> float:
    """Energy of the rotating orbit with rotation number |h| = 1 / T(E)."""
    h_abs = abs(float(h))
    if h_abs == 0:
        return 1.0
    lower = 1.0 + 1e-12
    if 1.0 / pendulum_period(lower) >= h_abs:
        return lower
    upper = 2.0 + h_abs**2
    return float(brentq(lambda E: 1.0 / pendulum_period(E) - h_abs, lower, upper, xtol=1e-14, rtol=1e-15))


def pendulum_beta_oracle(h: float) -> float:
    """beta(h) = c(E) |h| - E on rotating orbits; beta(0) = -max V = -1."""
    if h == 0:
        return -1.0
    E = pendulum_energy_of_rotation(h)
    return pendulum_class_of_energy(E) * abs(float(h)) - E


def pendulum_momentum_oracle(c: float, x: Any) -> FloatArray:
    """p(x) = sign(c) sqrt(2 (alpha(c) - cos 2 pi x)) on the invariant circle of class c, |c| >= 4/pi."""
    if abs(c) < PENDULUM_C0:
        raise InvalidInput(f"No rotating invariant circle of class {c}: |c| must be at least 4/pi")
    E = pendulum_alpha_oracle(c)
    return np.sign(c) * np.sqrt(np.maximum(2 * (E - np.cos(2 * np.pi * np.asarray(x, dtype=float))), 0.0))
