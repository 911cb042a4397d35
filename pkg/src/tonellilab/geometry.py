"""Torus arithmetic, continuous lifting of torus- and circle-valued paths, and grid potentials.

Points of the torus R^n/Z^n are represented by coordinates in [0, 1). A sampled
path on the torus is lifted to R^n by connecting consecutive samples with the
minimal jump, which is unique as long as every jump stays below the declared
step bound (at most 0.5 per coordinate).
"""

import itertools
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from .types import AmbiguousLift, FloatArray, InvalidInput
from .utils import csv_text

SUPPORTED_DIMS = (1, 2)
DEFAULT_MAX_STEP = 0.5


def wrap_array(x: np.ndarray | Sequence[float] | float) -> FloatArray:
    """Componentwise fractional part in [0, 1) of an array of any shape."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidInput("Cannot wrap non-finite coordinates onto the torus")
    r = arr - np.floor(arr)
    # x slightly below an integer can round up to exactly 1.0
    r = np.where(r >= 1.0, 0.0, r)
    return r + 0.0


@dataclass(frozen=True)
class TorusPoint:
    """A point of T^n with canonical coordinates in [0, 1)."""

    coords: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.coords) not in SUPPORTED_DIMS:
            raise InvalidInput(f"Torus dimension must be 1 or 2, got {len(self.coords)}")
        if not all(0.0 <= c < 1.0 for c in self.coords):
            raise InvalidInput(f"Torus coordinates must lie in [0, 1): {self.coords}")

    @property
    def dim(self) -> int:
        return len(self.coords)

    def as_array(self) -> FloatArray:
        return np.array(self.coords, dtype=float)


def wrap(x: np.ndarray | Sequence[float] | float) -> TorusPoint:
    """Project a vector of R^n to its canonical torus representative."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise InvalidInput(f"wrap expects a single vector, got shape {arr.shape}")
    return TorusPoint(tuple(float(c) for c in wrap_array(arr)))


def torus_displacement(a: np.ndarray, b: np.ndarray) -> FloatArray:
    """Minimal-lift displacement from a to b, componentwise in [-0.5, 0.5]."""
    d = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    return d - np.round(d)


def torus_distance(a: np.ndarray, b: np.ndarray) -> FloatArray | float:
    """Flat torus distance (Euclidean norm of the minimal displacement), over the last axis."""
    dist = np.linalg.norm(np.atleast_1d(torus_displacement(a, b)), axis=-1)
    return float(dist) if np.ndim(dist) == 0 else dist


def _as_time_array(times: Sequence[float] | np.ndarray, count: int) -> FloatArray:
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or len(t) != count:
        raise InvalidInput(f"Expected {count} sample times, got shape {t.shape}")
    if not np.all(np.isfinite(t)):
        raise InvalidInput("Sample times must be finite")
    if count > 1 and not np.all(np.diff(t) > 0):
        raise InvalidInput("Sample times must be strictly increasing")
    return t


@dataclass
class LiftedPath:
    """Continuous lift to R^n of a sampled torus path."""

    times: FloatArray
    points: FloatArray

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim == 1:
            self.points = self.points[:, None]
        self.times = _as_time_array(self.times, len(self.points))

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def window(self, duration: float) -> "LiftedPath":
        """The trailing sub-path covering the last `duration` time units."""
        if duration <= 0:
            raise InvalidInput("Window duration must be positive")
        if duration > self.duration * (1 + 1e-12):
            raise InvalidInput(f"Window {duration} exceeds path duration {self.duration}")
        start = self.times[-1] - duration
        first = int(np.searchsorted(self.times, start - 1e-9 * max(1.0, abs(start))))
        return LiftedPath(self.times[first:].copy(), self.points[first:].copy())

    def wrapped(self) -> FloatArray:
        return wrap_array(self.points)

    def to_csv(self) -> str:
        header = ["t"] + [f"x{i + 1}" for i in range(self.dim)]
        rows = ([t, *p] for t, p in zip(self.times, self.points, strict=True))
        return csv_text(header, rows)


@dataclass
class CircleSeries:
    """Values of a circle-valued observable sampled along an orbit."""

    times: FloatArray
    values: FloatArray

    def __post_init__(self) -> None:
        self.values = wrap_array(np.asarray(self.values, dtype=float).ravel())
        self.times = _as_time_array(self.times, len(self.values))

    @classmethod
    def uniform(cls, values: Sequence[float], dt: float = 1.0) -> "CircleSeries":
        """Series sampled at times 0, dt, 2dt, ..."""
        return cls(np.arange(len(values)) * dt, np.asarray(values, dtype=float))


def lift_increments(samples: np.ndarray, max_step: float = DEFAULT_MAX_STEP) -> FloatArray:
    """Minimal-jump increments between consecutive rows of a (K, n) sample array."""
    if not 0 < max_step <= 0.5:
        raise InvalidInput(f"Step bound must lie in (0, 0.5], got {max_step}")
    jumps = torus_displacement(samples[:-1], samples[1:])
    bad = np.abs(jumps) >= max_step
    if np.any(bad):
        k, axis = np.argwhere(bad)[0]
        raise AmbiguousLift(int(k) + 1, float(jumps[k, axis]), max_step)
    return jumps


def lift_array(samples: np.ndarray, max_step: float = DEFAULT_MAX_STEP) -> FloatArray:
    """Lift a (K, n) array of torus samples, starting at the given representative of row 0."""
    arr = np.asarray(samples, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if len(arr) == 0:
        raise InvalidInput("Cannot lift an empty path")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput("Cannot lift non-finite samples")
    lifted = arr.copy()
    if len(arr) > 1:
        drift = arr[0] + np.cumsum(lift_increments(arr, max_step), axis=0)
        # Each lifted point is its own sample plus an integer, so no round-off accumulates
        lifted[1:] = arr[1:] + np.round(drift - arr[1:])
    return lifted


def lift_path(
    samples: Sequence[TorusPoint] | np.ndarray,
    times: Sequence[float] | np.ndarray,
    max_step: float = DEFAULT_MAX_STEP,
) -> LiftedPath:
    """Lift sampled torus points to the unique continuous path starting at samples[0].

    Args:
        samples: Torus points (or an array of coordinates) in time order
        times: Strictly increasing sample times
        max_step: Declared bound on the per-coordinate jump between samples

    Raises:
        AmbiguousLift: If some jump is not below `max_step`
    """
    if len(samples) > 0 and isinstance(samples[0], TorusPoint):
        arr = np.array([p.coords for p in samples], dtype=float)  # type: ignore[union-attr]
    else:
        arr = np.asarray(samples, dtype=float)
    return LiftedPath(np.asarray(times, dtype=float), lift_array(arr, max_step))


def winding_estimate(path: LiftedPath) -> FloatArray:
    """Average winding velocity (points.last - points.first) / duration."""
    duration = path.duration
    if not duration > 0:
        raise InvalidInput("Winding estimate needs a path of positive duration")
    return (path.points[-1] - path.points[0]) / duration


def circle_increment(series: CircleSeries, max_step: float = DEFAULT_MAX_STEP) -> float:
    """Total continuous increment of a circle-valued observable along the series."""
    if len(series.values) < 2:
        return 0.0
    return float(np.sum(lift_increments(series.values[:, None], max_step)))


def cocycle_defect(series: CircleSeries, split: int, max_step: float = DEFAULT_MAX_STEP) -> float:
    """Defect of the additive cocycle identity at a split index.

    The increment over the whole series must equal the increment up to `split`
    plus the increment from `split` on.
    """
    if not 0 <= split < len(series.values):
        raise InvalidInput(f"Split index {split} outside series of length {len(series.values)}")
    head = CircleSeries(series.times[: split + 1], series.values[: split + 1])
    tail = CircleSeries(series.times[split:], series.values[split:])
    total = circle_increment(series, max_step)
    return abs(total - circle_increment(head, max_step) - circle_increment(tail, max_step))


@dataclass
class GridPotential:
    """A periodic function on the uniform grid of T^n.

    `values` has shape (N,) for n = 1 and (N, N) for n = 2; node (i, j) sits at (i/N, j/N).
    """

    values: FloatArray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim not in SUPPORTED_DIMS:
            raise InvalidInput(f"Grid potentials are 1- or 2-dimensional, got shape {self.values.shape}")
        if len(set(self.values.shape)) != 1:
            raise InvalidInput(f"Grid must have the same resolution on each axis, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise InvalidInput("Grid potential values must be finite")

    @classmethod
    def zeros(cls, dim: int, N: int) -> "GridPotential":
        return cls(np.zeros((N,) * dim))

    @classmethod
    def from_function(cls, f: Callable[[FloatArray], FloatArray], dim: int, N: int) -> "GridPotential":
        """Sample a vectorized function f(x) (x of shape (..., dim)) on the grid."""
        return cls(np.asarray(f(grid_nodes(dim, N)), dtype=float).reshape((N,) * dim))

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def spacing(self) -> float:
        return 1.0 / self.N

    def nodes(self) -> FloatArray:
        """Grid node coordinates, shape (N, dim) or (N, N, dim)."""
        return grid_nodes(self.dim, self.N)

    def interpolate(self, x: np.ndarray) -> FloatArray:
        """Periodic multilinear interpolation at points x of shape (..., dim)."""
        return _multilinear(self.values, x)

    def gradient(self, method: str = "centered") -> FloatArray:
        """Discrete gradient on the grid, shape values.shape + (dim,)."""
        if method == "centered":
            h = self.spacing
            parts = [
                (np.roll(self.values, -1, axis=a) - np.roll(self.values, 1, axis=a)) / (2 * h) for a in range(self.dim)
            ]
        elif method == "spectral":
            freqs = np.fft.fftfreq(self.N, d=1.0 / self.N)
            spectrum = np.fft.fftn(self.values)
            parts = []
            for a in range(self.dim):
                shape = [1] * self.dim
                shape[a] = self.N
                k = freqs.reshape(shape).copy()
                if self.N % 2 == 0:
                    # Nyquist mode has no odd counterpart
                    k.flat[self.N // 2] = 0.0
                parts.append(np.real(np.fft.ifftn(2j * np.pi * k * spectrum)))
        else:
            raise InvalidInput(f"Unknown gradient method {method!r}; use 'centered' or 'spectral'")
        return np.stack(parts, axis=-1)

    def gradient_at(self, x: np.ndarray, method: str = "centered") -> FloatArray:
        """Interpolated gradient at points x of shape (..., dim)."""
        grad = self.gradient(method)
        return np.stack([_multilinear(grad[..., a], x) for a in range(self.dim)], axis=-1)

    def lipschitz_estimate(self) -> float:
        """Largest second difference of u over h², a Lipschitz estimate of du."""
        h = self.spacing
        second = [np.abs(np.roll(self.values, -1, axis=a) - 2 * self.values + np.roll(self.values, 1, axis=a))
                  for a in range(self.dim)]
        return float(max(np.max(s) for s in second) / h**2)

    def oscillation(self) -> float:
        return float(np.max(self.values) - np.min(self.values))


def grid_nodes(dim: int, N: int) -> FloatArray:
    """Coordinates of the uniform grid, shape (N, dim) or (N, N, dim)."""
    axis = np.arange(N) / N
    if dim == 1:
        return axis[:, None]
    if dim == 2:
        return np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1)
    raise InvalidInput(f"Unsupported torus dimension {dim}")


def _multilinear(values: np.ndarray, x: np.ndarray) -> FloatArray:
    dim = values.ndim
    N = values.shape[0]
    pts = np.asarray(x, dtype=float)
    if pts.shape[-1] != dim:
        pts = pts[..., None] if dim == 1 else pts
    if pts.shape[-1] != dim:
        raise InvalidInput(f"Points of shape {pts.shape} do not match grid dimension {dim}")
    scaled = wrap_array(pts) * N
    base = np.floor(scaled).astype(int)
    frac = scaled - base
    out = np.zeros(pts.shape[:-1])
    for corner in itertools.product((0, 1), repeat=dim):
        weight = np.ones(pts.shape[:-1])
        index = []
        for a, bit in enumerate(corner):
            weight = weight * (frac[..., a] if bit else 1.0 - frac[..., a])
            index.append((base[..., a] + bit) % N)
        out = out + weight * values[tuple(index)]
    return out
