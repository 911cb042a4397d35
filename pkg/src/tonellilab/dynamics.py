"""Hamiltonian flow integration and occupation measures.

The flow is integrated with the implicit midpoint rule on lifted coordinates
(x in R^n, p in R^n); the torus position is the wrap of the lifted x. Several
initial conditions can be integrated together as one batch.
"""

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any, Literal

import numpy as np
from rich.progress import Progress, TaskID
from scipy.spatial import cKDTree

from .debug import debug_print
from .geometry import LiftedPath, TorusPoint, wrap, wrap_array
from .tonelli import TonelliHamiltonian, TonelliLagrangian
from .types import FloatArray, InvalidInput, InvalidStep, LiftViolation, NoConvergence
from .utils import csv_text

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 50
DEFAULT_BURN_IN_FRACTION = 0.1
WEIGHT_TOL = 1e-12

Space = Literal["TM", "T*M", "M"]


def _phase_jacobian(H: TonelliHamiltonian, x: FloatArray, p: FloatArray) -> FloatArray:
    """Jacobian of (dH/dp, -dH/dx) with respect to (x, p), shape (B, 2n, 2n)."""
    n = H.dim
    H_px = H.mixed_xp(x, p)
    H_pp = H.hessian_p(x, p)
    H_xx = H.hessian_x(x, p)
    J = np.empty((*x.shape[:-1], 2 * n, 2 * n))
    J[..., :n, :n] = H_px
    J[..., :n, n:] = H_pp
    J[..., n:, :n] = -H_xx
    J[..., n:, n:] = -np.swapaxes(H_px, -1, -2)
    return J


def midpoint_step(
    H: TonelliHamiltonian,
    x: FloatArray,
    p: FloatArray,
    dt: float,
    tol: float = NEWTON_TOL,
    max_iter: int = NEWTON_MAX_ITER,
) -> tuple[FloatArray, FloatArray]:
    """One implicit midpoint step for a batch of lifted states of shape (B, n).

    Solves z1 = z0 + dt * f((z0 + z1) / 2) by Newton iteration started from the
    explicit Euler guess.

    Raises:
        NoConvergence: If the Newton solve does not reach `tol` in `max_iter` iterations
    """
    n = H.dim
    x0 = np.asarray(x, dtype=float)
    p0 = np.asarray(p, dtype=float)
    z0 = np.concatenate([x0, p0], axis=-1)
    z1 = z0 + dt * np.concatenate([H.gradient_p(x0, p0), -H.gradient_x(x0, p0)], axis=-1)
    eye = np.eye(2 * n)
    for _ in range(max_iter):
        mid = 0.5 * (z0 + z1)
        xm, pm = mid[..., :n], mid[..., n:]
        field = np.concatenate([H.gradient_p(xm, pm), -H.gradient_x(xm, pm)], axis=-1)
        residual = z1 - z0 - dt * field
        norm = float(np.max(np.abs(residual)))
        if norm <= tol * (1.0 + float(np.max(np.abs(z1)))):
            return z1[..., :n], z1[..., n:]
        J = eye - 0.5 * dt * _phase_jacobian(H, xm, pm)
        z1 = z1 - np.linalg.solve(J, residual[..., None])[..., 0]
    mid = 0.5 * (z0 + z1)
    field = np.concatenate([H.gradient_p(mid[..., :n], mid[..., n:]), -H.gradient_x(mid[..., :n], mid[..., n:])], -1)
    norm = float(np.max(np.abs(z1 - z0 - dt * field)))
    if norm <= tol * (1.0 + float(np.max(np.abs(z1)))):
        return z1[..., :n], z1[..., n:]
    raise NoConvergence("Implicit midpoint step", max_iter, norm)


@dataclass
class Trajectory:
    """One integrated orbit: lifted positions, momenta and energies at times k * dt."""

    times: FloatArray
    x: FloatArray
    p: FloatArray
    energy: FloatArray
    dt: float

    @property
    def dim(self) -> int:
        return int(self.x.shape[1])

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def lifted_x(self) -> LiftedPath:
        return LiftedPath(self.times, self.x)

    @property
    def positions(self) -> FloatArray:
        """Torus positions in [0, 1)."""
        return wrap_array(self.x)

    def state(self, k: int) -> tuple[TorusPoint, FloatArray]:
        return wrap(self.x[k]), self.p[k].copy()

    @property
    def energy_drift(self) -> float:
        return float(abs(self.energy[-1] - self.energy[0]))

    @property
    def max_energy_error(self) -> float:
        return float(np.max(np.abs(self.energy - self.energy[0])))

    def to_csv(self) -> str:
        n = self.dim
        header = ["t", *(f"x{i + 1}" for i in range(n)), *(f"p{i + 1}" for i in range(n)), "H"]
        rows = ([t, *xk, *pk, e] for t, xk, pk, e in zip(self.times, self.x, self.p, self.energy, strict=True))
        return csv_text(header, rows)


def _batch(values: Any, dim: int) -> FloatArray:
    if isinstance(values, TorusPoint):
        return values.as_array()[None, :]
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr[None, :] if arr.shape[0] == dim else arr[:, None]
    if arr.shape[-1] != dim:
        raise InvalidInput(f"Initial conditions must have dimension {dim}, got shape {arr.shape}")
    return arr


def integrate_many(
    H: TonelliHamiltonian,
    x0: Any,
    p0: Any,
    T: float,
    dt: float,
    progress: Progress | None = None,
    task_id: TaskID | None = None,
) -> list[Trajectory]:
    """Integrate a batch of initial conditions together; one Trajectory per start.

    Raises:
        InvalidStep: If dt <= 0 or T < dt
        LiftViolation: If some step moves a position by 0.5 or more in one coordinate
        NoConvergence: If an implicit step fails
    """
    if not dt > 0 or not T >= dt:
        raise InvalidStep(f"Need dt > 0 and T >= dt, got dt={dt}, T={T}")
    n = H.dim
    xs = _batch(x0, n)
    ps = _batch(p0, n)
    if len(xs) != len(ps):
        xs, ps = np.broadcast_arrays(xs, ps)
    steps = int(round(T / dt))
    B = len(xs)
    X = np.empty((steps + 1, B, n))
    P = np.empty((steps + 1, B, n))
    X[0], P[0] = xs, ps
    report_every = max(1, steps // 100)
    debug_print("Integrating {} orbit(s): {} steps of dt={}", B, steps, dt)
    for k in range(steps):
        x_next, p_next = midpoint_step(H, X[k], P[k], dt)
        jump = np.max(np.abs(x_next - X[k]))
        if jump >= 0.5:
            raise LiftViolation(f"Step {k + 1} moved a coordinate by {jump:.6g}; reduce dt (currently {dt})")
        X[k + 1], P[k + 1] = x_next, p_next
        if progress is not None and task_id is not None and (k + 1) % report_every == 0:
            progress.update(task_id, completed=100 * (k + 1) / steps)
    times = np.arange(steps + 1) * dt
    energies = H.H(X, P)
    return [Trajectory(times, X[:, b].copy(), P[:, b].copy(), energies[:, b].copy(), dt) for b in range(B)]


def integrate(
    H: TonelliHamiltonian,
    x0: Any,
    p0: Any,
    T: float,
    dt: float,
    progress: Progress | None = None,
    task_id: TaskID | None = None,
) -> Trajectory:
    """Integrate the Hamiltonian flow from (x0, p0) for duration T with step dt."""
    trajectories = integrate_many(H, x0, p0, T, dt, progress, task_id)
    if len(trajectories) != 1:
        raise InvalidInput("integrate takes a single initial condition; use integrate_many for batches")
    return trajectories[0]


def reverse_momentum(traj: Trajectory) -> tuple[FloatArray, FloatArray]:
    """Final state with momentum reversed, the start of a time-reversed run."""
    return traj.x[-1].copy(), -traj.p[-1]


@dataclass
class WeightedMeasure:
    """A finitely supported probability measure on TM, T*M, or the base torus.

    `points` are torus positions (K, n); `vectors` are velocities (TM) or momenta
    (T*M) and are None on the base.
    """

    points: FloatArray
    weights: FloatArray
    vectors: FloatArray | None = None
    space: Space = "T*M"

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        self.points = wrap_array(pts[:, None] if pts.ndim == 1 else pts)
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if len(self.weights) != len(self.points) or len(self.points) == 0:
            raise InvalidInput("A measure needs one weight per support point and a nonempty support")
        if np.any(self.weights < 0) or abs(float(np.sum(self.weights)) - 1.0) > WEIGHT_TOL:
            raise InvalidInput(f"Weights must be nonnegative and sum to 1, got sum {np.sum(self.weights)!r}")
        if self.space == "M":
            self.vectors = None
        else:
            if self.vectors is None:
                raise InvalidInput(f"A measure on {self.space} needs fiber vectors")
            vec = np.asarray(self.vectors, dtype=float)
            self.vectors = vec[:, None] if vec.ndim == 1 else vec
            if self.vectors.shape != self.points.shape:
                raise InvalidInput(f"Fiber vectors {self.vectors.shape} do not match points {self.points.shape}")

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    @property
    def size(self) -> int:
        return len(self.weights)

    @classmethod
    def uniform(cls, points: Any, vectors: Any = None, space: Space = "T*M") -> "WeightedMeasure":
        pts = np.asarray(points, dtype=float)
        count = len(pts)
        return cls(pts, np.full(count, 1.0 / count), vectors, space)

    @classmethod
    def dirac(cls, x: Any, vector: Any = None, space: Space = "T*M") -> "WeightedMeasure":
        """Point mass at (x, vector)."""
        point = x.as_array() if isinstance(x, TorusPoint) else np.atleast_1d(np.asarray(x, dtype=float))
        vec = None if vector is None else np.atleast_1d(np.asarray(vector, dtype=float))[None, :]
        return cls(point[None, :], np.ones(1), vec, space)

    @classmethod
    def mixture(cls, measures: Sequence["WeightedMeasure"], coefficients: Sequence[float]) -> "WeightedMeasure":
        """Convex combination sum_i a_i mu_i of measures on the same space."""
        coeffs = np.asarray(coefficients, dtype=float)
        if len(coeffs) != len(measures) or np.any(coeffs < 0) or abs(float(np.sum(coeffs)) - 1.0) > WEIGHT_TOL:
            raise InvalidInput("Mixture coefficients must be nonnegative, sum to 1 and match the measures")
        spaces = {m.space for m in measures}
        if len(spaces) != 1:
            raise InvalidInput(f"Cannot mix measures on different spaces: {sorted(spaces)}")
        space = measures[0].space
        points = np.concatenate([m.points for m in measures])
        weights = np.concatenate([a * m.weights for a, m in zip(coeffs, measures, strict=True)])
        vectors = None if space == "M" else np.concatenate([m.vectors for m in measures])  # type: ignore[misc]
        return cls(points, weights / np.sum(weights), vectors, space)

    def base(self) -> "WeightedMeasure":
        """Projection to the base torus."""
        return WeightedMeasure(self.points, self.weights, None, "M")

    def to_tangent(self, H: TonelliHamiltonian) -> "WeightedMeasure":
        """Pull a T*M measure back to TM by the inverse Legendre transform v = dH/dp."""
        if self.space != "T*M":
            raise InvalidInput(f"to_tangent needs a measure on T*M, got {self.space}")
        return WeightedMeasure(self.points, self.weights, H.gradient_p(self.points, self.vectors), "TM")

    def to_cotangent(self, L: TonelliLagrangian) -> "WeightedMeasure":
        """Push a TM measure forward to T*M by the Legendre transform p = dL/dv."""
        if self.space != "TM":
            raise InvalidInput(f"to_cotangent needs a measure on TM, got {self.space}")
        return WeightedMeasure(self.points, self.weights, L.gradient_v(self.points, self.vectors), "T*M")

    def integrate(self, values: FloatArray) -> float:
        """Weighted sum of per-support-point values."""
        return float(np.dot(self.weights, np.asarray(values, dtype=float)))

    def to_json(self) -> list[dict[str, Any]]:
        """Support as a list of {x, v_or_p, w}."""
        vecs = self.vectors if self.vectors is not None else [None] * self.size
        return [
            {"x": x.tolist(), "v_or_p": None if v is None else v.tolist(), "w": float(w)}
            for x, v, w in zip(self.points, vecs, self.weights, strict=True)
        ]


def occupation_measure(traj: Trajectory, burn_in: float | None = None) -> WeightedMeasure:
    """Uniform measure on the samples of an orbit after the burn-in period.

    The final sample is excluded so that an orbit spanning whole periods of a
    closed orbit is weighted exactly once per period. The default burn-in is 10%
    of the duration. The result lives on T*M; use `to_tangent` for TM.
    """
    if burn_in is None:
        burn_in = DEFAULT_BURN_IN_FRACTION * traj.duration
    if burn_in < 0 or not traj.duration - burn_in > 0:
        raise InvalidInput(f"Burn-in {burn_in} leaves no samples of a trajectory of duration {traj.duration}")
    first = int(np.searchsorted(traj.times, traj.times[0] + burn_in - 1e-9 * traj.dt))
    last = max(first + 1, len(traj.times) - 1)
    return WeightedMeasure.uniform(traj.x[first:last], traj.p[first:last], "T*M")


def measure_energy(H: TonelliHamiltonian, mu: WeightedMeasure) -> tuple[float, float]:
    """Weighted mean and standard deviation of H over a T*M measure."""
    if mu.space != "T*M":
        raise InvalidInput(f"measure_energy needs a measure on T*M, got {mu.space}")
    energies = H.H(mu.points, mu.vectors)
    mean = mu.integrate(energies)
    return mean, float(np.sqrt(max(mu.integrate((energies - mean) ** 2), 0.0)))


def _phase_tree(points: FloatArray, momenta: FloatArray) -> tuple[cKDTree, float, float]:
    """KD-tree on T^n x R^n: periodic in x, effectively aperiodic in p."""
    lo = float(np.min(momenta))
    span = float(np.max(momenta)) - lo + 1.0
    shift = lo - span
    period = 3.0 * span
    n = points.shape[1]
    data = np.concatenate([points, momenta - shift], axis=1)
    boxsize = np.array([1.0] * n + [period] * n)
    return cKDTree(data, boxsize=boxsize), shift, period


def invariance_defect_measure(H: TonelliHamiltonian, mu: WeightedMeasure, dt: float) -> float:
    """Weighted mean distance from the time-dt image of each support point to the support.

    Distances use the flat torus metric in x and the Euclidean metric in p.
    """
    if mu.space != "T*M":
        raise InvalidInput(f"Invariance defect needs a measure on T*M, got {mu.space}")
    assert mu.vectors is not None
    x1, p1 = midpoint_step(H, mu.points, mu.vectors, dt)
    tree, shift, period = _phase_tree(mu.points, mu.vectors)
    query = np.concatenate([wrap_array(x1), np.clip(p1 - shift, 0.0, np.nextafter(period, 0.0))], axis=1)
    distances, _ = tree.query(query)
    defect = mu.integrate(distances)
    debug_print("Invariance defect over {} support points at dt={}: {:.6g}", mu.size, dt, defect)
    return defect
