"""Tonelli Lagrangians and Hamiltonians on T^n x R^n and the Legendre transform between them.

All evaluators are vectorized over leading axes: positions and velocities (or
momenta) are arrays of shape (..., n) and scalar results have shape (...).
"""

from abc import ABC, abstractmethod
from collections.abc import Callable
from dataclasses import dataclass
from typing import Any

import numpy as np
from pydantic import BaseModel

from .debug import debug_print
from .geometry import GridPotential, TorusPoint, wrap, wrap_array
from .types import FloatArray, InvalidInput, NoConvergence

FD_STEP = 1e-6
FD_HESSIAN_STEP = 1e-5
NEWTON_MAX_ITER = 50
NEWTON_TOL = 1e-12

Evaluator = Callable[[FloatArray, FloatArray], FloatArray]


def _vectors(x: Any, y: Any, dim: int) -> tuple[FloatArray, FloatArray]:
    """Broadcast positions and fiber vectors to common (..., dim) arrays."""
    if isinstance(x, TorusPoint):
        x = x.as_array()
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if dim == 1:
        xa = xa[..., None] if xa.ndim == 0 or xa.shape[-1] != 1 else xa
        ya = ya[..., None] if ya.ndim == 0 or ya.shape[-1] != 1 else ya
    if xa.shape[-1] != dim or ya.shape[-1] != dim:
        raise InvalidInput(f"Expected vectors of dimension {dim}, got shapes {xa.shape} and {ya.shape}")
    shape = np.broadcast_shapes(xa.shape, ya.shape)
    return np.broadcast_to(xa, shape), np.broadcast_to(ya, shape)


def _fd_gradient(f: Callable[[FloatArray], FloatArray], y: FloatArray, step: float = FD_STEP) -> FloatArray:
    """Central-difference gradient of a scalar function over the last axis of y."""
    n = y.shape[-1]
    out = np.empty(y.shape)
    for i in range(n):
        e = np.zeros(n)
        e[i] = step
        out[..., i] = (f(y + e) - f(y - e)) / (2 * step)
    return out


def _fd_jacobian(g: Callable[[FloatArray], FloatArray], y: FloatArray, step: float = FD_HESSIAN_STEP) -> FloatArray:
    """Central-difference Jacobian of a vector function; entry [..., i, j] = d g_i / d y_j."""
    n = y.shape[-1]
    out = np.empty((*y.shape, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = step
        out[..., :, j] = (g(y + e) - g(y - e)) / (2 * step)
    return 0.5 * (out + np.swapaxes(out, -1, -2)) if out.shape[-1] == out.shape[-2] else out


def _quadratic(M: FloatArray, y: FloatArray) -> FloatArray:
    return 0.5 * np.einsum("...i,ij,...j->...", y, M, y)


class TonelliLagrangian(ABC):
    """A fiberwise strictly convex, superlinear Lagrangian L(x, v) on T^n x R^n.

    Subclasses implement `L`; derivatives default to central finite differences
    and `finite_differences` reports whether any derivative is numerical.
    """

    dim: int
    name: str = "lagrangian"
    finite_differences: bool = True

    @abstractmethod
    def L(self, x: FloatArray, v: FloatArray) -> FloatArray: ...

    def __call__(self, x: Any, v: Any) -> FloatArray:
        xa, va = _vectors(x, v, self.dim)
        return self.L(xa, va)

    def gradient_v(self, x: FloatArray, v: FloatArray) -> FloatArray:
        xa, va = _vectors(x, v, self.dim)
        return _fd_gradient(lambda w: self.L(xa, w), va)

    def gradient_x(self, x: FloatArray, v: FloatArray) -> FloatArray:
        xa, va = _vectors(x, v, self.dim)
        return _fd_gradient(lambda y: self.L(y, va), xa)

    def hessian_v(self, x: FloatArray, v: FloatArray) -> FloatArray:
        xa, va = _vectors(x, v, self.dim)
        return _fd_jacobian(lambda w: self.gradient_v(xa, w), va)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": type(self).__name__, "name": self.name, "dim": self.dim}


class TonelliHamiltonian(ABC):
    """A fiberwise strictly convex, superlinear Hamiltonian H(x, p) on T^n x R^n."""

    dim: int
    name: str = "hamiltonian"
    finite_differences: bool = True

    @abstractmethod
    def H(self, x: FloatArray, p: FloatArray) -> FloatArray: ...

    def __call__(self, x: Any, p: Any) -> FloatArray:
        xa, pa = _vectors(x, p, self.dim)
        return self.H(xa, pa)

    def gradient_p(self, x: FloatArray, p: FloatArray) -> FloatArray:
        xa, pa = _vectors(x, p, self.dim)
        return _fd_gradient(lambda q: self.H(xa, q), pa)

    def gradient_x(self, x: FloatArray, p: FloatArray) -> FloatArray:
        xa, pa = _vectors(x, p, self.dim)
        return _fd_gradient(lambda y: self.H(y, pa), xa)

    def hessian_p(self, x: FloatArray, p: FloatArray) -> FloatArray:
        xa, pa = _vectors(x, p, self.dim)
        return _fd_jacobian(lambda q: self.gradient_p(xa, q), pa)

    def hessian_x(self, x: FloatArray, p: FloatArray) -> FloatArray:
        xa, pa = _vectors(x, p, self.dim)
        return _fd_jacobian(lambda y: self.gradient_x(y, pa), xa)

    def mixed_xp(self, x: FloatArray, p: FloatArray) -> FloatArray:
        """Matrix [..., i, j] = d²H / dx_j dp_i."""
        xa, pa = _vectors(x, p, self.dim)
        n = self.dim
        out = np.empty((*xa.shape, n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = FD_HESSIAN_STEP
            out[..., :, j] = (self.gradient_p(xa + e, pa) - self.gradient_p(xa - e, pa)) / (2 * FD_HESSIAN_STEP)
        return out

    def to_dict(self) -> dict[str, Any]:
        return {"kind": type(self).__name__, "name": self.name, "dim": self.dim}


@dataclass(frozen=True)
class CosinePotential:
    """V(x) = offset + sum_i amplitudes[i] * cos(2 pi x_i)."""

    amplitudes: tuple[float, ...]
    offset: float = 0.0

    @property
    def dim(self) -> int:
        return len(self.amplitudes)

    def value(self, x: FloatArray) -> FloatArray:
        a = np.asarray(self.amplitudes)
        return self.offset + np.sum(a * np.cos(2 * np.pi * np.asarray(x)), axis=-1)

    def gradient(self, x: FloatArray) -> FloatArray:
        a = np.asarray(self.amplitudes)
        return -2 * np.pi * a * np.sin(2 * np.pi * np.asarray(x))

    def hessian(self, x: FloatArray) -> FloatArray:
        a = np.asarray(self.amplitudes)
        diag = -4 * np.pi**2 * a * np.cos(2 * np.pi * np.asarray(x))
        return diag[..., :, None] * np.eye(self.dim)

    @property
    def max_value(self) -> float:
        return self.offset + float(np.sum(np.abs(self.amplitudes)))

    @property
    def min_value(self) -> float:
        return self.offset - float(np.sum(np.abs(self.amplitudes)))

    def to_dict(self) -> dict[str, Any]:
        return {"amplitudes": list(self.amplitudes), "offset": self.offset}


def _kinetic_matrix(A: Any, dim: int) -> FloatArray:
    if A is None:
        return np.eye(dim)
    M = np.asarray(A, dtype=float)
    if M.ndim == 0:
        M = M * np.eye(dim)
    elif M.ndim == 1:
        M = np.diag(M)
    if M.shape != (dim, dim) or not np.allclose(M, M.T):
        raise InvalidInput(f"Kinetic matrix must be symmetric {dim}x{dim}, got {M.tolist()}")
    if np.min(np.linalg.eigvalsh(M)) <= 0:
        raise InvalidInput("Kinetic matrix must be positive definite")
    return M


@dataclass(frozen=True)
class MagneticTerm:
    """W(x) with W_i(x) = mean_i + modulation_i * sin(2 pi x_{i+1}), indices mod n.

    On T^1 the modulation is exact and leaves alpha unchanged; on T^2 it carries the
    field dW_2/dx_1 - dW_1/dx_2 = 2 pi (m_2 cos(2 pi x_1) - m_1 cos(2 pi x_2)).
    """

    mean: tuple[float, ...]
    modulation: tuple[float, ...]

    @classmethod
    def build(cls, dim: int, W: Any = None, modulation: Any = None) -> "MagneticTerm":
        def components(value: Any, what: str) -> tuple[float, ...]:
            if value is None:
                return (0.0,) * dim
            a = np.atleast_1d(np.asarray(value, dtype=float))
            if a.size == 1:
                a = np.full(dim, float(a[0]))
            if a.shape != (dim,):
                raise InvalidInput(f"Magnetic {what} must have {dim} components, got {a.tolist()}")
            return tuple(float(ai) for ai in a)

        return cls(components(W, "term"), components(modulation, "modulation"))

    @property
    def dim(self) -> int:
        return len(self.mean)

    @property
    def constant(self) -> bool:
        return not any(self.modulation)

    def _partner(self, x: FloatArray) -> FloatArray:
        return np.roll(np.asarray(x, dtype=float), -1, axis=-1)

    def value(self, x: FloatArray) -> FloatArray:
        """W(x), shape (..., n)."""
        return np.asarray(self.mean) + np.asarray(self.modulation) * np.sin(2 * np.pi * self._partner(x))

    def jacobian(self, x: FloatArray) -> FloatArray:
        """Matrix [..., i, j] = dW_i / dx_j."""
        xa = np.asarray(x, dtype=float)
        n = self.dim
        J = np.zeros((*xa.shape, n))
        if self.constant:
            return J
        slope = 2 * np.pi * np.asarray(self.modulation) * np.cos(2 * np.pi * self._partner(xa))
        rows = np.arange(n)
        J[..., rows, (rows + 1) % n] = slope
        return J

    def second(self, x: FloatArray) -> FloatArray:
        """Tensor [..., i, j, k] = d²W_i / dx_j dx_k."""
        xa = np.asarray(x, dtype=float)
        n = self.dim
        T = np.zeros((*xa.shape, n, n))
        if self.constant:
            return T
        curvature = -4 * np.pi**2 * np.asarray(self.modulation) * np.sin(2 * np.pi * self._partner(xa))
        rows = np.arange(n)
        partners = (rows + 1) % n
        T[..., rows, partners, partners] = curvature
        return T

    def to_dict(self) -> dict[str, Any]:
        return {"mean": list(self.mean), "modulation": list(self.modulation)}


def _magnetic(dim: int, W: Any, modulation: Any) -> MagneticTerm:
    if isinstance(W, MagneticTerm):
        if W.dim != dim:
            raise InvalidInput(f"Magnetic term has dimension {W.dim}, potential has dimension {dim}")
        return W
    return MagneticTerm.build(dim, W, modulation)


class MechanicalLagrangian(TonelliLagrangian):
    """L(x, v) = 1/2 <A v, v> - V(x) + <W(x), v>."""

    finite_differences = False

    def __init__(
        self,
        potential: CosinePotential,
        A: Any = None,
        W: Any = None,
        name: str = "mechanical",
        modulation: Any = None,
    ):
        self.dim = potential.dim
        self.potential = potential
        self.A = _kinetic_matrix(A, self.dim)
        self.magnetic = _magnetic(self.dim, W, modulation)
        self.W = np.asarray(self.magnetic.mean)
        self.name = name

    def L(self, x: FloatArray, v: FloatArray) -> FloatArray:
        return _quadratic(self.A, v) - self.potential.value(x) + np.sum(v * self.magnetic.value(x), axis=-1)

    def gradient_v(self, x: FloatArray, v: FloatArray) -> FloatArray:
        xa, va = _vectors(x, v, self.dim)
        return va @ self.A + self.magnetic.value(xa)

    def gradient_x(self, x: FloatArray, v: FloatArray) -> FloatArray:
        xa, va = _vectors(x, v, self.dim)
        return -self.potential.gradient(xa) + np.einsum("...ij,...i->...j", self.magnetic.jacobian(xa), va)

    def hessian_v(self, x: FloatArray, v: FloatArray) -> FloatArray:
        xa, _ = _vectors(x, v, self.dim)
        return np.broadcast_to(self.A, (*xa.shape[:-1], self.dim, self.dim)).copy()

    def hamiltonian(self) -> "MechanicalHamiltonian":
        """The closed-form Legendre dual."""
        return MechanicalHamiltonian(self.potential, self.A, self.magnetic, name=self.name)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "mechanical_lagrangian",
            "name": self.name,
            "A": self.A.tolist(),
            "W": self.magnetic.to_dict(),
            "potential": self.potential.to_dict(),
        }


class MechanicalHamiltonian(TonelliHamiltonian):
    """H(x, p) = 1/2 <A^-1 (p - W(x)), p - W(x)> + V(x)."""

    finite_differences = False

    def __init__(
        self,
        potential: CosinePotential,
        A: Any = None,
        W: Any = None,
        name: str = "mechanical",
        modulation: Any = None,
    ):
        self.dim = potential.dim
        self.potential = potential
        self.A = _kinetic_matrix(A, self.dim)
        self.A_inv = np.linalg.inv(self.A)
        self.magnetic = _magnetic(self.dim, W, modulation)
        self.W = np.asarray(self.magnetic.mean)
        self.name = name

    def _velocity(self, x: FloatArray, p: FloatArray) -> FloatArray:
        return (p - self.magnetic.value(x)) @ self.A_inv

    def H(self, x: FloatArray, p: FloatArray) -> FloatArray:
        return _quadratic(self.A_inv, p - self.magnetic.value(x)) + self.potential.value(x)

    def gradient_p(self, x: FloatArray, p: FloatArray) -> FloatArray:
        xa, pa = _vectors(x, p, self.dim)
        return self._velocity(xa, pa)

    def gradient_x(self, x: FloatArray, p: FloatArray) -> FloatArray:
        xa, pa = _vectors(x, p, self.dim)
        q = self._velocity(xa, pa)
        return self.potential.gradient(xa) - np.einsum("...kj,...k->...j", self.magnetic.jacobian(xa), q)

    def hessian_p(self, x: FloatArray, p: FloatArray) -> FloatArray:
        xa, _ = _vectors(x, p, self.dim)
        return np.broadcast_to(self.A_inv, (*xa.shape[:-1], self.dim, self.dim)).copy()

    def hessian_x(self, x: FloatArray, p: FloatArray) -> FloatArray:
        xa, pa = _vectors(x, p, self.dim)
        hessian = self.potential.hessian(xa)
        if self.magnetic.constant:
            return hessian
        J = self.magnetic.jacobian(xa)
        q = self._velocity(xa, pa)
        gauge = np.einsum("...kj,km,...ml->...jl", J, self.A_inv, J)
        return hessian + gauge - np.einsum("...k,...kjl->...jl", q, self.magnetic.second(xa))

    def mixed_xp(self, x: FloatArray, p: FloatArray) -> FloatArray:
        xa, _ = _vectors(x, p, self.dim)
        return -np.einsum("im,...mj->...ij", self.A_inv, self.magnetic.jacobian(xa))

    def lagrangian(self) -> MechanicalLagrangian:
        """The closed-form Legendre dual."""
        return MechanicalLagrangian(self.potential, self.A, self.magnetic, name=self.name)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "mechanical_hamiltonian",
            "name": self.name,
            "A": self.A.tolist(),
            "W": self.magnetic.to_dict(),
            "potential": self.potential.to_dict(),
        }


class FunctionLagrangian(TonelliLagrangian):
    """A Lagrangian built from user-supplied evaluators.

    Missing derivatives fall back to central finite differences (h = 1e-6).
    """

    def __init__(
        self,
        dim: int,
        L: Evaluator,
        gradient_v: Evaluator | None = None,
        hessian_v: Evaluator | None = None,
        name: str = "custom",
    ):
        self.dim = dim
        self._L = L
        self._gradient_v = gradient_v
        self._hessian_v = hessian_v
        self.name = name
        self.finite_differences = gradient_v is None or hessian_v is None

    def L(self, x: FloatArray, v: FloatArray) -> FloatArray:
        return np.asarray(self._L(x, v), dtype=float)

    def gradient_v(self, x: FloatArray, v: FloatArray) -> FloatArray:
        if self._gradient_v is None:
            return super().gradient_v(x, v)
        xa, va = _vectors(x, v, self.dim)
        return np.asarray(self._gradient_v(xa, va), dtype=float).reshape(va.shape)

    def hessian_v(self, x: FloatArray, v: FloatArray) -> FloatArray:
        if self._hessian_v is None:
            return super().hessian_v(x, v)
        xa, va = _vectors(x, v, self.dim)
        return np.asarray(self._hessian_v(xa, va), dtype=float).reshape((*va.shape, self.dim))


def _newton_fiber(
    gradient: Callable[[FloatArray], FloatArray],
    hessian: Callable[[FloatArray], FloatArray],
    target: FloatArray,
    guess: FloatArray,
    what: str,
    max_iter: int = NEWTON_MAX_ITER,
    tol: float = NEWTON_TOL,
) -> FloatArray:
    """Solve gradient(y) = target fiberwise by damped Newton iteration.

    Each element halves its step until the residual decreases (at most 30 halvings).
    """
    y = np.array(guess, dtype=float)
    scale = 1.0 + np.max(np.abs(target), axis=-1)
    residual = gradient(y) - target
    norm = np.max(np.abs(residual), axis=-1)
    for iteration in range(max_iter):
        if np.all(norm <= tol * scale):
            debug_print("{}: Newton converged in {} iterations", what, iteration, level=2)
            return y
        step = np.linalg.solve(hessian(y), residual[..., None])[..., 0]
        lam = np.ones(norm.shape)
        for _ in range(30):
            trial = y - lam[..., None] * step
            trial_residual = gradient(trial) - target
            trial_norm = np.max(np.abs(trial_residual), axis=-1)
            worse = (trial_norm > norm) & (norm > tol * scale)
            if not np.any(worse):
                break
            lam = np.where(worse, lam / 2, lam)
        y, residual, norm = trial, trial_residual, trial_norm
    if np.all(norm <= tol * scale):
        return y
    raise NoConvergence(what, max_iter, float(np.max(norm)))


class ConjugateHamiltonian(TonelliHamiltonian):
    """H(x, p) = sup_v <p, v> - L(x, v), evaluated by Newton on dL/dv = p."""

    def __init__(self, lagrangian: TonelliLagrangian):
        self.lagrangian = lagrangian
        self.dim = lagrangian.dim
        self.name = f"conjugate({lagrangian.name})"

    def velocity(self, x: FloatArray, p: FloatArray) -> FloatArray:
        """The maximizing velocity v with dL/dv(x, v) = p."""
        xa, pa = _vectors(x, p, self.dim)
        return _newton_fiber(
            lambda v: self.lagrangian.gradient_v(xa, v),
            lambda v: self.lagrangian.hessian_v(xa, v),
            pa,
            pa.copy(),
            "inverse Legendre transform",
        )

    def H(self, x: FloatArray, p: FloatArray) -> FloatArray:
        xa, pa = _vectors(x, p, self.dim)
        v = self.velocity(xa, pa)
        return np.sum(pa * v, axis=-1) - self.lagrangian.L(xa, v)

    def gradient_p(self, x: FloatArray, p: FloatArray) -> FloatArray:
        return self.velocity(x, p)

    def gradient_x(self, x: FloatArray, p: FloatArray) -> FloatArray:
        xa, pa = _vectors(x, p, self.dim)
        return -self.lagrangian.gradient_x(xa, self.velocity(xa, pa))

    def hessian_p(self, x: FloatArray, p: FloatArray) -> FloatArray:
        xa, pa = _vectors(x, p, self.dim)
        return np.linalg.inv(self.lagrangian.hessian_v(xa, self.velocity(xa, pa)))

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "conjugate_hamiltonian", "lagrangian": self.lagrangian.to_dict()}


class ConjugateLagrangian(TonelliLagrangian):
    """L(x, v) = sup_p <p, v> - H(x, p), evaluated by Newton on dH/dp = v."""

    def __init__(self, hamiltonian: TonelliHamiltonian):
        self.hamiltonian = hamiltonian
        self.dim = hamiltonian.dim
        self.name = f"conjugate({hamiltonian.name})"
        self.finite_differences = hamiltonian.finite_differences

    def momentum(self, x: FloatArray, v: FloatArray) -> FloatArray:
        """The maximizing momentum p with dH/dp(x, p) = v."""
        xa, va = _vectors(x, v, self.dim)
        return _newton_fiber(
            lambda p: self.hamiltonian.gradient_p(xa, p),
            lambda p: self.hamiltonian.hessian_p(xa, p),
            va,
            va.copy(),
            "Legendre transform",
        )

    def L(self, x: FloatArray, v: FloatArray) -> FloatArray:
        xa, va = _vectors(x, v, self.dim)
        p = self.momentum(xa, va)
        return np.sum(p * va, axis=-1) - self.hamiltonian.H(xa, p)

    def gradient_v(self, x: FloatArray, v: FloatArray) -> FloatArray:
        return self.momentum(x, v)

    def gradient_x(self, x: FloatArray, v: FloatArray) -> FloatArray:
        xa, va = _vectors(x, v, self.dim)
        return -self.hamiltonian.gradient_x(xa, self.momentum(xa, va))

    def hessian_v(self, x: FloatArray, v: FloatArray) -> FloatArray:
        xa, va = _vectors(x, v, self.dim)
        return np.linalg.inv(self.hamiltonian.hessian_p(xa, self.momentum(xa, va)))

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "conjugate_lagrangian", "hamiltonian": self.hamiltonian.to_dict()}


def _base_point(xa: FloatArray) -> TorusPoint | FloatArray:
    return wrap(xa) if xa.ndim == 1 else wrap_array(xa)


def legendre(L: TonelliLagrangian, x: Any, v: Any) -> tuple[TorusPoint | FloatArray, FloatArray]:
    """Legendre transform (x, v) -> (x, dL/dv(x, v)).

    A single point returns a TorusPoint; batches return wrapped coordinate arrays.
    """
    xa, va = _vectors(x, v, L.dim)
    return _base_point(xa), np.asarray(L.gradient_v(xa, va))


def inverse_legendre(
    H: TonelliHamiltonian | TonelliLagrangian, x: Any, p: Any
) -> tuple[TorusPoint | FloatArray, FloatArray]:
    """Inverse Legendre transform (x, p) -> (x, v).

    For a Hamiltonian, v = dH/dp(x, p). For a Lagrangian, v solves dL/dv(x, v) = p
    by damped Newton iteration started at v = p.

    Raises:
        NoConvergence: If the Newton solve does not converge in 50 iterations
    """
    xa, pa = _vectors(x, p, H.dim)
    if isinstance(H, TonelliLagrangian):
        return _base_point(xa), ConjugateHamiltonian(H).velocity(xa, pa)
    return _base_point(xa), np.asarray(H.gradient_p(xa, pa))


def lagrangian_from_hamiltonian(H: TonelliHamiltonian) -> TonelliLagrangian:
    """The Legendre-Fenchel dual L(x, v) = sup_p <p, v> - H(x, p)."""
    return ConjugateLagrangian(H)


def hamiltonian_from_lagrangian(L: TonelliLagrangian) -> TonelliHamiltonian:
    """The Legendre-Fenchel dual H(x, p) = sup_v <p, v> - L(x, v)."""
    return ConjugateHamiltonian(L)


def fenchel_gap(L: TonelliLagrangian, H: TonelliHamiltonian, x: Any, v: Any, p: Any) -> FloatArray:
    """L(x, v) + H(x, p) - <p, v>, nonnegative for a dual pair."""
    xa, va = _vectors(x, v, L.dim)
    xb, pa = _vectors(x, p, L.dim)
    return L.L(xa, va) + H.H(xb, pa) - np.sum(pa * va, axis=-1)


class TonelliReport(BaseModel):
    """Outcome of the sampled Tonelli checks."""

    name: str
    samples: int
    seed: int
    min_eigenvalue: float
    min_eigenvalue_at: list[float]
    superlinearity_ratios: dict[str, float]
    superlinear: bool
    finite_differences: bool
    passed: bool
    failures: list[str]


SUPERLINEARITY_RADII = (10.0, 100.0)
EIGENVALUE_TOL = 1e-8


def verify_tonelli(L: TonelliLagrangian, samples: int = 1000, seed: int = 0, v_scale: float = 3.0) -> TonelliReport:
    """Check fiberwise convexity and superlinearity of L at random samples.

    The Hessian eigenvalue check includes v = 0 at a few base points; the
    superlinearity check reports min over sampled directions of L(x, R u) / R.
    """
    rng = np.random.default_rng(seed)
    n = L.dim
    x = rng.random((samples, n))
    v = rng.normal(scale=v_scale, size=(samples, n))
    v[: max(1, samples // 20)] = 0.0

    eigenvalues = np.linalg.eigvalsh(L.hessian_v(x, v))
    smallest = eigenvalues[:, 0]
    worst = int(np.argmin(smallest))
    min_eig = float(smallest[worst])

    directions = rng.normal(size=(samples, n))
    directions /= np.linalg.norm(directions, axis=-1, keepdims=True)
    ratios = {f"{R:g}": float(np.min(L.L(x, R * directions) / R)) for R in SUPERLINEARITY_RADII}
    values = list(ratios.values())
    superlinear = all(b > a for a, b in zip(values, values[1:], strict=False))

    failures = []
    if not min_eig > EIGENVALUE_TOL:
        failures.append(
            f"Hessian not positive definite: eigenvalue {min_eig:.6g} at x={x[worst].tolist()}, v={v[worst].tolist()}"
        )
    if not superlinear:
        failures.append(f"Superlinearity ratios do not increase: {ratios}")
    debug_print("Tonelli check of {}: min eigenvalue {:.6g}, ratios {}", L.name, min_eig, ratios)
    return TonelliReport(
        name=L.name,
        samples=samples,
        seed=seed,
        min_eigenvalue=min_eig,
        min_eigenvalue_at=[*x[worst].tolist(), *v[worst].tolist()],
        superlinearity_ratios=ratios,
        superlinear=superlinear,
        finite_differences=L.finite_differences,
        passed=not failures,
        failures=failures,
    )


@dataclass(frozen=True)
class Model:
    """A built-in model: its name and its dual Lagrangian/Hamiltonian pair."""

    name: str
    lagrangian: MechanicalLagrangian
    hamiltonian: MechanicalHamiltonian

    @property
    def dim(self) -> int:
        return self.lagrangian.dim

    @property
    def potential(self) -> CosinePotential:
        return self.lagrangian.potential


MODEL_NAMES = ("integrable", "pendulum", "two_dof_pendulum", "magnetic")


def build_model(
    name: str,
    dim: int | None = None,
    amplitude: float | None = None,
    offset: float = 0.0,
    kinetic: Any = None,
    magnetic: Any = None,
    modulation: Any = None,
) -> Model:
    """Build a registry model.

    Models:
        integrable: H = 1/2 |p|^2
        pendulum: H = 1/2 p^2 + cos(2 pi x)
        two_dof_pendulum: H = 1/2 |p|^2 + cos(2 pi x1) + cos(2 pi x2)
        magnetic: H = 1/2 |p - W(x)|^2 with mean W 0.3 per axis

    `amplitude` scales the cosine terms, `offset` shifts V by a constant, `kinetic`
    sets A (scalar, diagonal or matrix), `magnetic` sets the mean of W and `modulation`
    its sin(2 pi x_{i+1}) amplitudes (see `MagneticTerm`) for any model.
    """
    defaults: dict[str, tuple[int, float, float]] = {
        "integrable": (1, 0.0, 0.0),
        "pendulum": (1, 1.0, 0.0),
        "two_dof_pendulum": (2, 1.0, 0.0),
        "magnetic": (1, 0.0, 0.3),
    }
    if name not in defaults:
        raise InvalidInput(f"Unknown model {name!r}; choose one of {', '.join(MODEL_NAMES)}")
    default_dim, default_amplitude, default_w = defaults[name]
    if name in ("pendulum", "two_dof_pendulum") and dim is not None and dim != default_dim:
        raise InvalidInput(f"Model {name!r} has dimension {default_dim}, got {dim}")
    n = default_dim if dim is None else dim
    if n not in (1, 2):
        raise InvalidInput(f"Torus dimension must be 1 or 2, got {n}")
    a = default_amplitude if amplitude is None else amplitude
    potential = CosinePotential(amplitudes=(a,) * n, offset=offset)
    W = MagneticTerm.build(n, default_w if magnetic is None else magnetic, modulation)
    lagrangian = MechanicalLagrangian(potential, kinetic, W, name=name)
    return Model(name=name, lagrangian=lagrangian, hamiltonian=lagrangian.hamiltonian())


@dataclass(frozen=True)
class ClosedOneForm:
    """eta(x) = c + du(x): a constant class c plus the differential of a periodic grid potential."""

    cohomology: tuple[float, ...]
    exact_part: GridPotential | None = None
    gradient_method: str = "centered"

    def __post_init__(self) -> None:
        if self.exact_part is not None and self.exact_part.dim != len(self.cohomology):
            raise InvalidInput(
                f"Exact part has dimension {self.exact_part.dim}, class has dimension {len(self.cohomology)}"
            )

    @classmethod
    def constant(cls, c: Any) -> "ClosedOneForm":
        return cls(tuple(float(ci) for ci in np.atleast_1d(np.asarray(c, dtype=float))))

    @property
    def dim(self) -> int:
        return len(self.cohomology)

    @property
    def c(self) -> FloatArray:
        return np.asarray(self.cohomology, dtype=float)

    def __call__(self, x: Any) -> FloatArray:
        """Values of eta at points of shape (..., n)."""
        xa = np.asarray(x.as_array() if isinstance(x, TorusPoint) else x, dtype=float)
        if self.dim == 1 and (xa.ndim == 0 or xa.shape[-1] != 1):
            xa = xa[..., None]
        base = np.broadcast_to(self.c, xa.shape)
        if self.exact_part is None:
            return base.copy()
        return base + self.exact_part.gradient_at(xa, self.gradient_method)
