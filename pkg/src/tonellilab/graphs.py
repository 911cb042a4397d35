"""Lagrangian graphs over T^n and the checks run against them.

A graph is {(x, c + du(x))} for a cohomology class c and a periodic grid
potential u. The checks compare it with the Hamiltonian flow: invariance,
subcriticality, calibration of orbits, uniqueness against other graphs and
conjugacy of the restricted flow to a rotation.
"""

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel
from scipy.integrate import cumulative_trapezoid
from scipy.signal import savgol_filter
from scipy.stats import kstest

from .debug import debug_print
from .dynamics import integrate_many, midpoint_step
from .geometry import GridPotential, grid_nodes, wrap_array
from .schwartzman import cycle_from_trajectory
from .tonelli import MechanicalLagrangian, TonelliHamiltonian, TonelliLagrangian, hamiltonian_from_lagrangian
from .types import FloatArray, InvalidInput, InvalidStep

Verdict = Literal["equal", "disjoint", "overlapping"]

SAVGOL_ORDER = 3
BOX_COUNT = 8
RATIONAL_DENOMINATOR = 20
RATIONAL_TOL = 1e-3


@dataclass
class LagrangianGraph:
    """The graph of p(x) = c + Du(x) over the torus.

    `method` picks the discrete gradient ("centered" or "spectral"); a positive odd
    `smoothing` applies a periodic Savitzky-Golay filter of that window length to
    the momentum field.
    """

    c: tuple[float, ...]
    u: GridPotential
    method: str = "centered"
    smoothing: int = 0

    def __post_init__(self) -> None:
        self.c = tuple(float(ci) for ci in np.atleast_1d(np.asarray(self.c, dtype=float)))
        if len(self.c) != self.u.dim:
            raise InvalidInput(f"Class has dimension {len(self.c)}, potential has dimension {self.u.dim}")
        if self.smoothing and (self.smoothing % 2 == 0 or self.smoothing <= SAVGOL_ORDER):
            raise InvalidInput(f"Smoothing window must be odd and larger than {SAVGOL_ORDER}, got {self.smoothing}")
        self._momentum = self._momentum_grid()

    @property
    def dim(self) -> int:
        return self.u.dim

    @property
    def N(self) -> int:
        return self.u.N

    @property
    def cohomology(self) -> FloatArray:
        return np.asarray(self.c, dtype=float)

    def _momentum_grid(self) -> FloatArray:
        gradient = self.u.gradient(self.method)
        if self.smoothing:
            for axis in range(self.dim):
                gradient = savgol_filter(gradient, self.smoothing, SAVGOL_ORDER, axis=axis, mode="wrap")
        return self.cohomology + gradient

    @property
    def momentum_grid(self) -> FloatArray:
        """Momentum at the grid nodes, shape (N,) * n + (n,)."""
        return self._momentum

    def momentum(self, x: Any) -> FloatArray:
        """Interpolated momentum at points of shape (..., n)."""
        xa = np.asarray(x, dtype=float)
        if self.dim == 1 and (xa.ndim == 0 or xa.shape[-1] != 1):
            xa = xa[..., None]
        return np.stack([GridPotential(self._momentum[..., a]).interpolate(xa) for a in range(self.dim)], axis=-1)

    @property
    def lipschitz_estimate(self) -> float:
        return self.u.lipschitz_estimate()

    @classmethod
    def from_potential(
        cls, c: Any, u: GridPotential, method: str = "centered", smoothing: int = 0
    ) -> "LagrangianGraph":
        return cls(tuple(np.atleast_1d(np.asarray(c, dtype=float))), u, method, smoothing)

    @classmethod
    def from_momentum(cls, c: Any, momentum: Any, method: str = "centered") -> "LagrangianGraph":
        """Graph of a momentum field given at the grid nodes, shape (N,) for n = 1 or (N, N, 2).

        The potential inverts the graph's own discrete gradient in Fourier space
        (least squares for n = 2), so `momentum_grid` reproduces the field up to
        its Nyquist mode. A field whose mean differs from c is not exact and is rejected.
        """
        c_vec = np.atleast_1d(np.asarray(c, dtype=float))
        p = np.asarray(momentum, dtype=float)
        if len(c_vec) == 1:
            q = p.reshape(-1) - c_vec[0]
            drift = float(np.mean(q))
            if abs(drift) > 1e-3 * max(1.0, float(np.max(np.abs(p)))):
                raise InvalidInput(f"Momentum field has mean {np.mean(p):.6g}, not the class {c_vec[0]:.6g}")
            symbol = _gradient_symbol(len(q), method)
            spectrum = np.fft.fft(q - drift) * _safe_inverse(symbol)
            u = np.real(np.fft.ifft(spectrum))
            return cls(tuple(c_vec), GridPotential(u - np.mean(u)), method)
        if p.ndim != 3 or p.shape[-1] != 2:
            raise InvalidInput(f"Two-dimensional momentum fields have shape (N, N, 2), got {p.shape}")
        q = p - c_vec
        symbol = _gradient_symbol(p.shape[0], method)
        s1, s2 = np.meshgrid(symbol, symbol, indexing="ij")
        weight = _safe_inverse(np.abs(s1) ** 2 + np.abs(s2) ** 2)
        spectrum = (np.conj(s1) * np.fft.fft2(q[..., 0]) + np.conj(s2) * np.fft.fft2(q[..., 1])) * weight
        return cls(tuple(c_vec), GridPotential(np.real(np.fft.ifft2(spectrum))), method)

    def resample(self, N: int) -> "LagrangianGraph":
        """The same graph on an N-point grid (multilinear interpolation of u)."""
        if N == self.N:
            return self
        values = self.u.interpolate(grid_nodes(self.dim, N)).reshape((N,) * self.dim)
        return LagrangianGraph(self.c, GridPotential(values), self.method, self.smoothing)

    def energy(self, H: TonelliHamiltonian) -> FloatArray:
        """H(x, p(x)) at the grid nodes."""
        return H.H(grid_nodes(self.dim, self.N), self._momentum)

    def to_json(self) -> dict[str, Any]:
        return {"n": self.dim, "N": self.N, "c": list(self.c), "u": self.u.values.tolist()}

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "LagrangianGraph":
        u = GridPotential(np.asarray(data["u"], dtype=float))
        if u.dim != int(data["n"]) or u.N != int(data["N"]):
            raise InvalidInput(f"Graph file declares n={data['n']}, N={data['N']} but u has shape {u.values.shape}")
        return cls(tuple(data["c"]), u)


def _gradient_symbol(N: int, method: str) -> np.ndarray:
    """Fourier multiplier of the discrete derivative on an N-point periodic grid."""
    k = np.fft.fftfreq(N, d=1.0 / N)
    if method == "centered":
        symbol = 1j * N * np.sin(2 * np.pi * k / N)
    elif method == "spectral":
        symbol = 2j * np.pi * k
    else:
        raise InvalidInput(f"Unknown gradient method {method!r}; use 'centered' or 'spectral'")
    if N % 2 == 0:
        symbol[N // 2] = 0.0
    return symbol


def _safe_inverse(values: np.ndarray) -> np.ndarray:
    """1 / values, with 0 on the modes the derivative annihilates."""
    out = np.zeros_like(values)
    nonzero = np.abs(values) > 1e-12
    out[nonzero] = 1.0 / values[nonzero]
    return out


def _sample_points(dim: int, count: int | None, N: int) -> FloatArray:
    """Evenly spaced sample points: the grid nodes, or `count` points per whole torus."""
    if count is None:
        return grid_nodes(dim, N).reshape(-1, dim)
    per_axis = max(1, int(round(count ** (1.0 / dim))))
    axis = (np.arange(per_axis) + 0.5) / per_axis
    return np.array(list(itertools.product(axis, repeat=dim)), dtype=float)


def invariance_defect(
    H: TonelliHamiltonian, graph: LagrangianGraph, dt: float = 0.01, sample_count: int | None = None
) -> float:
    """Largest vertical distance |p_graph(x') - p'| after one flow step from points of the graph.

    Raises:
        InvalidStep: If a step moves a position by half the torus or more
    """
    x = _sample_points(graph.dim, sample_count, graph.N)
    p = graph.momentum(x)
    x1, p1 = midpoint_step(H, x, p, dt)
    jump = float(np.max(np.abs(x1 - x)))
    if jump >= 0.5:
        raise InvalidStep(f"Time step {dt} moves points by {jump:.3g}; reduce dt")
    defect = float(np.max(np.linalg.norm(graph.momentum(wrap_array(x1)) - p1, axis=-1)))
    debug_print("Invariance defect of graph c={} at dt={}: {:.6g}", list(graph.c), dt, defect)
    return defect


class SubcriticalReport(BaseModel):
    """Position of a graph relative to the energy level alpha(c)."""

    subcritical: bool
    alpha: float
    tol: float
    max_excess: float
    min_energy: float
    max_energy: float
    critical_part: list[list[int]]
    critical_fraction: float


def subcritical_report(H: TonelliHamiltonian, graph: LagrangianGraph, alpha_c: float, tol: float) -> SubcriticalReport:
    """Check that the graph lies in {H <= alpha(c)} and locate its critical part {H = alpha(c)}."""
    energy = graph.energy(H)
    excess = float(np.max(energy)) - alpha_c
    critical = np.argwhere(np.abs(energy - alpha_c) <= tol)
    return SubcriticalReport(
        subcritical=excess <= tol,
        alpha=alpha_c,
        tol=tol,
        max_excess=excess,
        min_energy=float(np.min(energy)),
        max_energy=float(np.max(energy)),
        critical_part=critical.tolist(),
        critical_fraction=len(critical) / energy.size,
    )


class CalibrationReport(BaseModel):
    """Calibration of graph orbits and the subsolution inequality on comparison curves."""

    equality_defect: float
    inequality_violations: int
    curves: int
    min_margin: float
    orbits: int
    T: float
    dt: float


def _hamiltonian_of(L: TonelliLagrangian) -> TonelliHamiltonian:
    return L.hamiltonian() if isinstance(L, MechanicalLagrangian) else hamiltonian_from_lagrangian(L)


def _path_action(L: TonelliLagrangian, c: FloatArray, path: FloatArray, dt: float) -> float:
    """Midpoint-rule action of L - <c, v> along a lifted polygon sampled every dt."""
    v = np.diff(path, axis=0) / dt
    mid = 0.5 * (path[1:] + path[:-1])
    return float(dt * np.sum(L.L(mid, v) - v @ c))


def _comparison_curve(rng: np.random.Generator, start: FloatArray, end: FloatArray, T: float, dt: float) -> FloatArray:
    """Random piecewise-linear lifted curve from start to end, sampled every dt over [0, T]."""
    knots = 10
    knot_times = np.linspace(0.0, T, knots + 1)
    knot_points = start + np.outer(knot_times / T, end - start)
    knot_points[1:-1] += rng.normal(scale=0.1, size=knot_points[1:-1].shape)
    times = np.linspace(0.0, T, int(round(T / dt)) + 1)
    return np.stack([np.interp(times, knot_times, knot_points[:, a]) for a in range(len(start))], axis=-1)


def calibration_check(
    graph: LagrangianGraph,
    L: TonelliLagrangian,
    alpha: float,
    dt: float = 1e-3,
    T: float = 5.0,
    x0_samples: int = 8,
    seed: int = 0,
    curves: int = 100,
    tol: float = 1e-3,
) -> CalibrationReport:
    """Calibration identities of a weak KAM potential along and against graph orbits.

    Orbits started on the graph satisfy the action of L - <c, v> plus alpha * T
    equal to u(end) - u(start). Any other curve gives at least that value; random
    piecewise-linear curves with the orbits' endpoints count as violations when
    they fall short by more than `tol`.
    """
    H = _hamiltonian_of(L)
    c = graph.cohomology
    x0 = _sample_points(graph.dim, x0_samples, graph.N)
    orbits = integrate_many(H, x0, graph.momentum(x0), T, dt)
    u = graph.u

    def potential_change(path: FloatArray) -> float:
        return float(u.interpolate(wrap_array(path[-1])) - u.interpolate(wrap_array(path[0])))

    equality = 0.0
    for orbit in orbits:
        defect = _path_action(L, c, orbit.x, dt) + alpha * orbit.duration - potential_change(orbit.x)
        equality = max(equality, abs(defect))

    rng = np.random.default_rng(seed)
    violations = 0
    min_margin = np.inf
    for k in range(curves):
        orbit = orbits[k % len(orbits)]
        path = _comparison_curve(rng, orbit.x[0], orbit.x[-1], orbit.duration, dt)
        margin = _path_action(L, c, path, dt) + alpha * orbit.duration - potential_change(path)
        min_margin = min(min_margin, margin)
        violations += int(margin < -tol)
    debug_print("Calibration: equality defect {:.3g}, {} of {} comparison violations", equality, violations, curves)
    return CalibrationReport(
        equality_defect=equality,
        inequality_violations=violations,
        curves=curves,
        min_margin=float(min_margin) if curves else 0.0,
        orbits=len(orbits),
        T=T,
        dt=dt,
    )


class GraphComparison(BaseModel):
    """Verdict of comparing two graphs fiberwise."""

    verdict: Verdict
    hausdorff_vertical: float
    min_gap: float
    N: int
    tol: float

    @property
    def theorem_violation(self) -> bool:
        """Overlapping invariant graphs of one class contradict uniqueness."""
        return self.verdict == "overlapping"


def compare_graphs(first: LagrangianGraph, second: LagrangianGraph, tol: float) -> GraphComparison:
    """Vertical sup-distance between two graphs, resampled to the finer grid.

    Verdicts: "equal" when the distance is within tol, "disjoint" when the
    graphs stay at least tol apart everywhere, "overlapping" otherwise.
    """
    if first.dim != second.dim:
        raise InvalidInput(f"Cannot compare graphs of dimensions {first.dim} and {second.dim}")
    N = max(first.N, second.N)
    nodes = grid_nodes(first.dim, N)
    gap = np.linalg.norm(first.momentum(nodes) - second.momentum(nodes), axis=-1)
    distance = float(np.max(gap))
    min_gap = float(np.min(gap))
    if distance <= tol:
        verdict: Verdict = "equal"
    elif min_gap >= tol:
        verdict = "disjoint"
    else:
        verdict = "overlapping"
    debug_print("Graph comparison at N={}: {} (distance {:.3g}, min gap {:.3g})", N, verdict, distance, min_gap)
    return GraphComparison(verdict=verdict, hausdorff_vertical=distance, min_gap=min_gap, N=N, tol=tol)


class KamReport(BaseModel):
    """Rotation vector of the flow on a graph and its equidistribution diagnostics."""

    rho: list[float]
    rho_error: float
    equidistribution_defect: float
    rational_approximation: str | None
    resonant: bool
    verdict: str
    orbits: int


def _conjugating_coordinate(H: TonelliHamiltonian, graph: LagrangianGraph) -> FloatArray | None:
    """Grid values of theta(x) = (integral from 0 to x of dy / v(y)) / period, or None if v vanishes."""
    nodes = grid_nodes(1, graph.N)
    speed = H.gradient_p(nodes, graph.momentum_grid)[:, 0]
    if np.any(speed == 0) or np.min(speed) * np.max(speed) <= 0:
        return None
    closed = np.append(1.0 / speed, 1.0 / speed[0])
    theta = cumulative_trapezoid(closed, dx=1.0 / graph.N, initial=0.0)
    return theta / theta[-1]


def _ks_defect(theta_grid: FloatArray, positions: FloatArray) -> float:
    N = len(theta_grid) - 1
    knots = np.arange(N + 1) / N
    theta = np.interp(positions, knots, theta_grid)
    return float(kstest(theta, "uniform").statistic)


def _box_discrepancy(positions: FloatArray) -> float:
    """Total variation distance between box counts and the uniform measure."""
    boxes = np.minimum((positions * BOX_COUNT).astype(int), BOX_COUNT - 1)
    flat = boxes[:, 0] * BOX_COUNT + boxes[:, 1]
    counts = np.bincount(flat, minlength=BOX_COUNT**2) / len(flat)
    return float(0.5 * np.sum(np.abs(counts - 1.0 / BOX_COUNT**2)))


def _rational(value: float) -> Fraction | None:
    frac = Fraction(value).limit_denominator(RATIONAL_DENOMINATOR)
    return frac if abs(float(frac) - value) <= RATIONAL_TOL else None


def kam_conjugacy_check(
    H: TonelliHamiltonian,
    graph: LagrangianGraph,
    T: float = 1000.0,
    x0_samples: int = 4,
    dt: float = 0.05,
    defect_tol: float = 5e-2,
) -> KamReport:
    """Rotation vector of orbits on the graph and whether they equidistribute.

    For n = 1 the samples are mapped to the conjugating coordinate of the flow on
    the graph and compared with the uniform law (Kolmogorov-Smirnov statistic);
    for n = 2 box counts of the positions are compared with Lebesgue measure.
    Finite orbits can only be consistent with strict ergodicity, never certify it.
    """
    x0 = _sample_points(graph.dim, x0_samples, graph.N)
    orbits = integrate_many(H, x0, graph.momentum(x0), T, dt)
    cycles = np.array([cycle_from_trajectory(orbit).vector for orbit in orbits])
    rho = cycles.mean(axis=0)
    rho_error = float(np.max(np.abs(cycles - rho))) if len(cycles) > 1 else 0.0

    resonant = False
    approximation: Fraction | None = None
    if graph.dim == 1:
        theta_grid = _conjugating_coordinate(H, graph)
        if theta_grid is None:
            defect = float("nan")
        else:
            defect = max(_ks_defect(theta_grid, orbit.positions[:-1, 0]) for orbit in orbits)
        approximation = _rational(float(rho[0]))
        resonant = bool(np.isclose(rho[0], 0.0, atol=RATIONAL_TOL))
    else:
        defect = max(_box_discrepancy(orbit.positions[:-1]) for orbit in orbits)
        if abs(rho[1]) > RATIONAL_TOL:
            approximation = _rational(float(rho[0] / rho[1]))
        resonant = approximation is not None or abs(rho[1]) <= RATIONAL_TOL or abs(rho[0]) <= RATIONAL_TOL

    if np.isfinite(defect) and defect <= defect_tol and not resonant:
        verdict = "consistent with Schwartzman strict ergodicity"
    elif resonant:
        verdict = "resonant (periodic orbits)"
    else:
        verdict = "inconclusive"
    debug_print("KAM check: rho={} defect={:.3g} verdict {}", rho.tolist(), defect, verdict)
    return KamReport(
        rho=rho.tolist(),
        rho_error=rho_error,
        equidistribution_defect=defect,
        rational_approximation=None if approximation is None else str(approximation),
        resonant=resonant,
        verdict=verdict,
        orbits=len(orbits),
    )
