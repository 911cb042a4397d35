"""Rotation vectors and Schwartzman asymptotic cycles of measures and orbits.

Homology of T^n is identified with R^n through the constant forms dx_i, so an
asymptotic cycle is a vector. Cycles come from three sources: the measure
formula (integrating the flow field or the velocity), the long-time winding of
an orbit, and closed orbits (homology class divided by period).
"""

import itertools
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, field_validator
from scipy.integrate import solve_ivp
from scipy.optimize import root
from scipy.spatial.distance import pdist

from .debug import debug_print
from .dynamics import Trajectory, WeightedMeasure, integrate_many
from .geometry import LiftedPath, TorusPoint, torus_distance, winding_estimate, wrap, wrap_array
from .tonelli import ClosedOneForm, MechanicalHamiltonian
from .types import FloatArray, InvalidInput, NumericalFailure, SemiconjugacyViolated

CycleMethod = Literal["measure_formula", "trajectory_limit", "closed_orbit", "pushforward"]

SEMICONJUGACY_TOL = 1e-6
FLOW_RTOL = 1e-10
FLOW_ATOL = 1e-12


class AsymptoticCycle(BaseModel):
    """An element of H_1(T^n; R) = R^n with its provenance.

    `error_bar` is a heuristic (half-window disagreement for trajectory limits),
    not a rigorous bound.
    """

    value: list[float]
    method: CycleMethod
    error_bar: float = 0.0
    window: float | None = None

    @field_validator("value")
    @classmethod
    def _finite(cls, value: list[float]) -> list[float]:
        if not all(np.isfinite(value)):
            raise ValueError(f"cycle entries must be finite, got {value}")
        return value

    @property
    def vector(self) -> FloatArray:
        return np.asarray(self.value, dtype=float)


def _cycle(value: Any, method: CycleMethod, error_bar: float = 0.0, window: float | None = None) -> AsymptoticCycle:
    return AsymptoticCycle(
        value=[float(v) for v in np.atleast_1d(value)], method=method, error_bar=float(error_bar), window=window
    )


@dataclass
class FlowField:
    """A continuous vector field X on T^n, vectorized over points of shape (..., n)."""

    dim: int
    vector_field: Callable[[FloatArray], FloatArray]
    name: str = "flow"

    def __call__(self, x: Any) -> FloatArray:
        xa = np.asarray(x, dtype=float)
        if self.dim == 1 and (xa.ndim == 0 or xa.shape[-1] != 1):
            xa = xa[..., None]
        return np.broadcast_to(np.asarray(self.vector_field(xa), dtype=float), xa.shape)


def linear_flow(alpha: Any) -> FlowField:
    """The constant field X = alpha (a translation flow on T^n)."""
    a = np.atleast_1d(np.asarray(alpha, dtype=float))
    return FlowField(len(a), lambda x: np.broadcast_to(a, np.shape(x)).copy(), name=f"linear{a.tolist()}")


def flow_map(X: FlowField, points: Any, t: float) -> FloatArray:
    """Lifted time-t images of a batch of points, shape (K, n)."""
    starts = np.asarray(points, dtype=float).reshape(-1, X.dim)
    if t == 0:
        return starts.copy()

    def rhs(_: float, y: FloatArray) -> FloatArray:
        return X(y.reshape(-1, X.dim)).ravel()

    sol = solve_ivp(rhs, (0.0, t), starts.ravel(), method="DOP853", rtol=FLOW_RTOL, atol=FLOW_ATOL)
    if not sol.success:
        raise NumericalFailure(f"Flow integration failed: {sol.message}")
    return sol.y[:, -1].reshape(-1, X.dim)


def flow_orbit(X: FlowField, x0: Any, T: float, dt: float) -> LiftedPath:
    """Lifted orbit of X from x0 sampled every dt on [0, T]."""
    if not dt > 0 or not T >= dt:
        raise InvalidInput(f"Need dt > 0 and T >= dt, got dt={dt}, T={T}")
    start = np.atleast_1d(x0.as_array() if isinstance(x0, TorusPoint) else np.asarray(x0, dtype=float))
    times = np.arange(int(round(T / dt)) + 1) * dt

    def rhs(_: float, y: FloatArray) -> FloatArray:
        return X(y[None, :])[0]

    sol = solve_ivp(
        rhs, (0.0, times[-1]), start, method="DOP853", t_eval=times, rtol=FLOW_RTOL, atol=FLOW_ATOL
    )
    if not sol.success:
        raise NumericalFailure(f"Flow integration failed: {sol.message}")
    return LiftedPath(times, sol.y.T)


def rotation_vector(mu: WeightedMeasure) -> AsymptoticCycle:
    """rho(mu) = sum_k w_k v_k for a measure on TM."""
    if mu.space != "TM":
        raise InvalidInput(f"rotation_vector needs a measure on TM, got {mu.space}")
    assert mu.vectors is not None
    return _cycle(mu.weights @ mu.vectors, "measure_formula")


def cycle_from_flow_measure(X: FlowField, mu: WeightedMeasure, forms: Any = None) -> AsymptoticCycle:
    """Asymptotic cycle of a flow-invariant measure on the base: sum_k w_k X(x_k).

    With `forms` (rows are constant 1-forms) the result holds the pairings with
    each form instead of the standard basis dx_i.
    """
    if mu.dim != X.dim:
        raise InvalidInput(f"Measure dimension {mu.dim} does not match flow dimension {X.dim}")
    value = mu.weights @ X(mu.points)
    if forms is not None:
        value = np.atleast_2d(np.asarray(forms, dtype=float)) @ value
    return _cycle(value, "measure_formula")


def cycle_from_trajectory(traj: Trajectory | LiftedPath, window: float | None = None) -> AsymptoticCycle:
    """Winding estimate over the trailing window of an orbit.

    The error bar is the largest componentwise disagreement between the
    estimates of the two half-windows.
    """
    path = traj.lifted_x if isinstance(traj, Trajectory) else traj
    window = path.duration if window is None else window
    sub = path.window(window)
    value = winding_estimate(sub)
    mid = int(np.searchsorted(sub.times, sub.times[0] + 0.5 * sub.duration))
    error_bar = 0.0
    if 0 < mid < len(sub.times) - 1:
        first = LiftedPath(sub.times[: mid + 1], sub.points[: mid + 1])
        second = LiftedPath(sub.times[mid:], sub.points[mid:])
        error_bar = float(np.max(np.abs(winding_estimate(first) - winding_estimate(second))))
    return _cycle(value, "trajectory_limit", error_bar, float(sub.duration))


def pair_with_form(mu: WeightedMeasure, eta: ClosedOneForm) -> float:
    """Integral of <eta(x), v> against a TM measure."""
    if mu.space != "TM":
        raise InvalidInput(f"pair_with_form needs a measure on TM, got {mu.space}")
    assert mu.vectors is not None
    return mu.integrate(np.sum(eta(mu.points) * mu.vectors, axis=-1))


def periodic_orbit_cycle(homology: Sequence[int], period: float) -> AsymptoticCycle:
    """Asymptotic cycle of the uniform measure on a closed orbit: [gamma] / period."""
    if not period > 0:
        raise InvalidInput(f"Period must be positive, got {period}")
    return _cycle(np.asarray(homology, dtype=float) / period, "closed_orbit", window=float(period))


@dataclass
class TorusMap:
    """Affine torus map psi(x) = M x + b with integer M; H_1(psi) = M."""

    matrix: Any
    shift: Any = None

    def __post_init__(self) -> None:
        M = np.atleast_2d(np.asarray(self.matrix))
        if not np.all(M == np.round(M)):
            raise InvalidInput(f"A torus map needs an integer matrix, got {M.tolist()}")
        self.matrix = M.astype(int)
        n = self.matrix.shape[0]
        self.shift = np.zeros(n) if self.shift is None else np.atleast_1d(np.asarray(self.shift, dtype=float))

    @classmethod
    def identity(cls, dim: int) -> "TorusMap":
        return cls(np.eye(dim, dtype=int))

    @classmethod
    def constant(cls, point: Any) -> "TorusMap":
        b = np.atleast_1d(np.asarray(point, dtype=float))
        return cls(np.zeros((len(b), len(b)), dtype=int), b)

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def homology(self) -> FloatArray:
        return self.matrix.astype(float)

    def __call__(self, x: Any) -> FloatArray:
        """Image of lifted points of shape (..., n), itself a lift."""
        return np.asarray(x, dtype=float) @ self.matrix.T + self.shift

    def pushforward(self, mu: WeightedMeasure) -> WeightedMeasure:
        """psi_* mu on the base torus."""
        return WeightedMeasure(self(mu.points), mu.weights, None, "M")


def semiconjugacy_defect(
    psi: TorusMap, flow1: FlowField, flow2: FlowField, points: Any, times: Sequence[float] = (0.5, 1.0)
) -> float:
    """Largest torus distance between psi(phi1_t(x)) and phi2_t(psi(x)) at sampled points and times."""
    pts = np.asarray(points, dtype=float).reshape(-1, flow1.dim)
    worst = 0.0
    for t in times:
        left = psi(flow_map(flow1, pts, t))
        right = flow_map(flow2, psi(pts), t)
        worst = max(worst, float(np.max(np.atleast_1d(torus_distance(left, right)))))
    return worst


def pushforward_cycle(
    psi: TorusMap,
    mu: WeightedMeasure,
    flow1: FlowField,
    flow2: FlowField,
    tol: float = SEMICONJUGACY_TOL,
    check_points: int = 16,
) -> tuple[AsymptoticCycle, AsymptoticCycle]:
    """Both sides of S(psi_* mu, phi2) = H_1(psi) S(mu, phi1).

    The semi-conjugacy psi phi1_t = phi2_t psi is checked at up to `check_points`
    support points of mu.

    Raises:
        SemiconjugacyViolated: If the sampled identity fails beyond `tol`
    """
    sample = mu.points[np.linspace(0, mu.size - 1, min(check_points, mu.size)).astype(int)]
    defect = semiconjugacy_defect(psi, flow1, flow2, sample)
    if defect > tol:
        raise SemiconjugacyViolated(defect, tol)
    left = cycle_from_flow_measure(flow2, psi.pushforward(mu.base()))
    right = psi.homology @ cycle_from_flow_measure(flow1, mu.base()).vector
    return _cycle(left.vector, "pushforward"), _cycle(right, "pushforward")


def conjugate_cycle_set(psi: TorusMap, cycles: Sequence[AsymptoticCycle]) -> list[AsymptoticCycle]:
    """Image of a set of cycles under H_1(psi)."""
    return [
        _cycle(psi.homology @ c.vector, c.method, float(np.abs(psi.homology).sum(axis=1).max()) * c.error_bar, c.window)
        for c in cycles
    ]


class ClosedOrbitReport(BaseModel):
    """Rigidity check of closed orbits under Schwartzman unique ergodicity."""

    verdict: str
    consistent: bool
    null_homologous_required: bool
    cycles: list[list[float]]
    spread: float


def closed_orbit_report(
    orbits: Sequence[tuple[Sequence[int], float]], fixed_points: int = 0, tol: float = 1e-9
) -> ClosedOrbitReport:
    """Check closed orbits against the rigidity of a Schwartzman uniquely ergodic flow.

    With a fixed point or a null-homologous closed orbit, every closed orbit must
    be null-homologous; otherwise all the cycles [C]/tau must coincide.
    """
    homologies = [np.asarray(h, dtype=float) for h, _ in orbits]
    cycles = [h / tau for h, (_, tau) in zip(homologies, orbits, strict=True)]
    null_required = fixed_points > 0 or any(np.all(h == 0) for h in homologies)
    if null_required:
        spread = max((float(np.max(np.abs(h))) for h in homologies), default=0.0)
    elif len(cycles) > 1:
        spread = float(np.max(pdist(np.array(cycles))))
    else:
        spread = 0.0
    consistent = spread <= tol
    verdict = "consistent with Schwartzman unique ergodicity" if consistent else "not Schwartzman uniquely ergodic"
    return ClosedOrbitReport(
        verdict=verdict,
        consistent=consistent,
        null_homologous_required=null_required,
        cycles=[c.tolist() for c in cycles],
        spread=spread,
    )


def period_ratio(tau1: float, tau2: float, max_denominator: int = 1000) -> Fraction:
    """Best rational approximation of tau1 / tau2 (coinciding cycles force a rational ratio)."""
    return Fraction(tau1 / tau2).limit_denominator(max_denominator)


@dataclass
class Equilibrium:
    """A rest point (x, p) of a mechanical Hamiltonian flow."""

    x: TorusPoint
    p: FloatArray

    def dirac(self) -> WeightedMeasure:
        return WeightedMeasure.dirac(self.x, self.p, "T*M")


def detect_equilibria(H: MechanicalHamiltonian, seeds_per_axis: int = 16, tol: float = 1e-10) -> list[Equilibrium]:
    """Rest points of H: critical points x of V with momentum p = W(x).

    Critical points are refined from a grid of seeds with scipy.optimize.root and
    deduplicated on the torus.
    """
    n = H.dim
    axis = (np.arange(seeds_per_axis) + 0.5) / seeds_per_axis
    found: list[FloatArray] = []
    for seed in itertools.product(axis, repeat=n):
        sol = root(
            lambda y: H.potential.gradient(np.asarray(y)),
            np.array(seed),
            jac=lambda y: H.potential.hessian(np.asarray(y)),
            tol=tol,
        )
        if not sol.success or np.max(np.abs(H.potential.gradient(sol.x))) > 1e-8:
            continue
        point = wrap_array(sol.x)
        if all(torus_distance(point, other) > 1e-6 for other in found):
            found.append(point)
    found.sort(key=lambda pt: tuple(pt))
    debug_print("Detected {} equilibria of {}", len(found), H.name)
    return [Equilibrium(wrap(pt), H.magnetic.value(pt)) for pt in found]


def stratified_starts(H: MechanicalHamiltonian, energies: Sequence[float]) -> tuple[FloatArray, FloatArray]:
    """Initial conditions at the minimum of V, one per energy and momentum sign (n = 1).

    Each start (x_min, p) satisfies H(x_min, p) = E; energies below min V are rejected.
    """
    if H.dim != 1:
        raise InvalidInput("Energy-stratified starts are defined for one degree of freedom")
    grid = np.arange(4096) / 4096
    x_min = float(grid[np.argmin(H.potential.value(grid[:, None]))])
    v_min = float(H.potential.value(np.array([x_min])))
    w_min = float(H.magnetic.value(np.array([x_min]))[0])
    xs, ps = [], []
    for E in energies:
        if E < v_min:
            raise InvalidInput(f"Energy {E} is below the minimum {v_min} of the potential")
        speed = float(np.sqrt(2 * H.A[0, 0] * (E - v_min)))
        for sign in (1.0, -1.0):
            xs.append([x_min])
            ps.append([w_min + sign * speed])
    return np.array(xs), np.array(ps)


def hamiltonian_ensemble(
    H: MechanicalHamiltonian, x0: Any, p0: Any, window: float, dt: float
) -> list[AsymptoticCycle]:
    """Trajectory-limit cycles of a batch of Hamiltonian orbits over a common window."""
    return [cycle_from_trajectory(traj, window) for traj in integrate_many(H, x0, p0, window, dt)]


def flow_ensemble(X: FlowField, starts: Any, window: float, dt: float) -> list[AsymptoticCycle]:
    """Trajectory-limit cycles of a flow from several starting points."""
    pts = np.asarray(starts, dtype=float).reshape(-1, X.dim)
    return [cycle_from_trajectory(flow_orbit(X, x, window, dt)) for x in pts]


def schwartzman_diameter(
    ensemble: Sequence[AsymptoticCycle | WeightedMeasure], flow: FlowField | None = None
) -> float:
    """Largest pairwise distance between the asymptotic cycles of an ensemble.

    Measures are converted with the flow formula (base measures, needs `flow`)
    or as rotation vectors (TM measures).
    """
    if not ensemble:
        raise InvalidInput("The ensemble must not be empty")
    vectors = []
    for member in ensemble:
        if isinstance(member, AsymptoticCycle):
            vectors.append(member.vector)
        elif member.space == "TM":
            vectors.append(rotation_vector(member).vector)
        elif flow is not None:
            vectors.append(cycle_from_flow_measure(flow, member).vector)
        else:
            raise InvalidInput(f"A measure on {member.space} needs a flow to define its cycle")
    if len(vectors) == 1:
        return 0.0
    return float(np.max(pdist(np.array(vectors))))


class DiameterReport(BaseModel):
    """Schwartzman diameter of an ensemble with its sampled unique-ergodicity verdict."""

    diameter: float
    members: int
    max_error_bar: float
    uniquely_ergodic: bool
    verdict: str


def diameter_report(cycles: Sequence[AsymptoticCycle], tol: float = 1e-2) -> DiameterReport:
    """Diameter together with the verdict "uniquely ergodic (sampled)" when it is within error bars."""
    diameter = schwartzman_diameter(cycles)
    max_error = max(c.error_bar for c in cycles)
    unique = diameter <= 2 * max_error + tol
    verdict = "Schwartzman uniquely ergodic (sampled)" if unique else "not Schwartzman uniquely ergodic"
    return DiameterReport(
        diameter=diameter, members=len(cycles), max_error_bar=max_error, uniquely_ergodic=unique, verdict=verdict
    )
