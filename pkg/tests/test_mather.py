"""Tests for value iteration, alpha/beta tables, the minimizing-measure LP and the pendulum oracles."""

import json
import math
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pytest
import scipy.sparse as sparse
from pydantic import ValidationError
from scipy.integrate import simpson

from tonellilab.dynamics import WeightedMeasure
from tonellilab.geometry import GridPotential, grid_nodes
from tonellilab.graphs import LagrangianGraph, kam_conjugacy_check
from tonellilab.mather import (
    PENDULUM_C0,
    AlphaTable,
    AlphaTableEntry,
    LaxOleinikStencil,
    LPSolution,
    action_defect,
    alpha_from_beta,
    alpha_table,
    aubry_estimate,
    beta_from_alpha,
    class_grid,
    critical_value,
    flat_interval,
    grid_modulus,
    holonomy_matrix,
    lax_oleinik_apply,
    lower_convex_envelope,
    mather_measure_lp,
    pendulum_alpha_oracle,
    pendulum_beta_oracle,
    pendulum_class_of_energy,
    pendulum_energy_of_rotation,
    pendulum_momentum_oracle,
    pendulum_period,
    subderivative_interval,
)
from tonellilab.schwartzman import rotation_vector
from tonellilab.tonelli import Model, build_model
from tonellilab.types import Extrapolation, Infeasible, InvalidInput, InvalidStep, LPError, NoConvergence
from tonellilab.utils import dumps17

H_GRID = np.linspace(-1.5, 1.5, 61)


@pytest.fixture(scope="module")
def integrable_table() -> AlphaTable:
    """alpha of the free particle on 33 classes in [-2, 2]."""
    grid, _ = class_grid(-2.0, 2.0, 33)
    return alpha_table(build_model("integrable").lagrangian, grid, N=64, dt=0.2, v_max=2.4, cached=False)


@pytest.fixture(scope="module")
def pendulum_table() -> AlphaTable:
    """alpha of the pendulum on 33 classes in [-2, 2]."""
    grid, _ = class_grid(-2.0, 2.0, 33)
    return alpha_table(build_model("pendulum").lagrangian, grid, N=128, dt=0.05, v_max=3.0, cached=False)


class TestLaxOleinik:
    """Test the discrete Lax-Oleinik operator."""

    def test_zero_fixed_point(self, integrable: Model) -> None:
        """Test that u = 0 is fixed for the free particle at c = 0."""
        u = GridPotential.zeros(1, 64)
        Tu = lax_oleinik_apply(u, integrable.lagrangian, 0.0, dt=0.2, v_max=2.4)
        np.testing.assert_array_equal(Tu.values, 0.0)

    def test_commutes_with_constants(self, rng: np.random.Generator, pendulum: Model) -> None:
        """Test T(u + k) = Tu + k."""
        stencil = LaxOleinikStencil(pendulum.lagrangian, 0.3, 64, 0.05)
        u = rng.normal(size=64)
        np.testing.assert_allclose(stencil.apply(u + 2.5), stencil.apply(u) + 2.5, atol=1e-12)

    def test_monotone_and_non_expansive(self, rng: np.random.Generator) -> None:
        """Test u <= w implies Tu <= Tw, and sup|Tu - Tw| <= sup|u - w|."""
        stencil = LaxOleinikStencil(build_model("two_dof_pendulum").lagrangian, [0.2, -0.1], 16, 0.1)
        u = rng.normal(size=(16, 16))
        w = u + rng.random((16, 16))
        assert np.all(stencil.apply(u) <= stencil.apply(w) + 1e-12)
        z = rng.normal(size=(16, 16))
        assert np.max(np.abs(stencil.apply(u) - stencil.apply(z))) <= np.max(np.abs(u - z)) + 1e-12

    def test_reach_too_long(self, integrable: Model) -> None:
        """Test that a stencil spanning half the torus is rejected."""
        with pytest.raises(InvalidStep):
            LaxOleinikStencil(integrable.lagrangian, 0.0, 64, 0.5)
        with pytest.raises(InvalidStep):
            LaxOleinikStencil(integrable.lagrangian, 0.0, 64, 0.0)

    def test_resolution_too_coarse(self, integrable: Model) -> None:
        """Test the minimum grid resolution."""
        with pytest.raises(InvalidInput):
            LaxOleinikStencil(integrable.lagrangian, 0.0, 8, 0.05)

    def test_minimizers_stay_put(self, integrable: Model) -> None:
        """Test that a flat potential at c = 0 selects staying put."""
        stencil = LaxOleinikStencil(integrable.lagrangian, 0.0, 16, 0.1, v_max=2.0)
        np.testing.assert_array_equal(stencil.minimizers(np.zeros(16)), np.arange(16))


class TestCriticalValue:
    """Test Mather's alpha by value iteration."""

    def test_integrable(self, integrable: Model) -> None:
        """Test alpha(c) = c^2 / 2 for the free particle."""
        result = critical_value(integrable.lagrangian, 0.8, N=64, dt=0.2, v_max=2.4)
        assert result.alpha == pytest.approx(0.32, abs=5e-3)
        assert result.residual <= 1e-4

    def test_pendulum_flat_piece(self, pendulum: Model) -> None:
        """Test alpha(0) = max V for the pendulum."""
        result = critical_value(pendulum.lagrangian, 0.0, N=64, dt=0.05)
        assert result.alpha == pytest.approx(1.0, abs=1e-2)
        assert np.max(result.u.values) == 0.0

    def test_pendulum_rotating(self, pendulum: Model) -> None:
        """Test alpha(2) against the quadrature oracle."""
        result = critical_value(pendulum.lagrangian, 2.0, N=256, dt=0.05)
        assert result.alpha == pytest.approx(pendulum_alpha_oracle(2.0), abs=1e-2)

    def test_monotone_in_potential(self, pendulum: Model) -> None:
        """Test that lowering V by 0.5 lowers alpha by 0.5."""
        lowered = build_model("pendulum", offset=-0.5)
        base = critical_value(pendulum.lagrangian, 0.0, N=64, dt=0.05).alpha
        shifted = critical_value(lowered.lagrangian, 0.0, N=64, dt=0.05).alpha
        assert shifted == pytest.approx(base - 0.5, abs=1e-8)

    def test_exact_magnetic_modulation(self) -> None:
        """Test that a modulation of W on T^1 is exact and keeps alpha(c) = (c - 0.3)^2 / 2."""
        model = build_model("magnetic", modulation=0.2)
        result = critical_value(model.lagrangian, 0.8, N=64, dt=0.2, v_max=2.4)
        assert result.alpha == pytest.approx(0.125, abs=1e-2)

    def test_no_convergence(self, pendulum: Model) -> None:
        """Test that an exhausted sweep budget raises with the last residual."""
        with pytest.raises(NoConvergence) as excinfo:
            critical_value(pendulum.lagrangian, 0.0, N=64, dt=0.05, max_sweeps=1)
        assert excinfo.value.iterations == 1
        assert excinfo.value.last_residual > 1e-4

    def test_bad_relaxation(self, pendulum: Model) -> None:
        """Test the relaxation range."""
        with pytest.raises(InvalidInput):
            critical_value(pendulum.lagrangian, 0.0, N=64, dt=0.05, relaxation=0.0)


class TestAlphaTable:
    """Test tabulation, convexification and caching of alpha."""

    def test_integrable_values(self, integrable_table: AlphaTable) -> None:
        """Test the free-particle table against c^2 / 2."""
        assert integrable_table.valid.all()
        c = integrable_table.c_grid[:, 0]
        np.testing.assert_allclose(integrable_table.alpha, 0.5 * c**2, atol=5e-3)
        assert integrable_table.convexified
        assert integrable_table.adjustment <= 1e-12

    def test_pendulum_values(self, pendulum_table: AlphaTable) -> None:
        """Test the pendulum table against the oracle."""
        expected = np.array([pendulum_alpha_oracle(c) for c in pendulum_table.c_grid[:, 0]])
        np.testing.assert_allclose(pendulum_table.alpha, expected, atol=2e-2)

    def test_flat_interval(self, pendulum_table: AlphaTable) -> None:
        """Test that the flat piece of the pendulum ends near +-4/pi."""
        lo, hi = flat_interval(pendulum_table)
        assert lo == pytest.approx(-PENDULUM_C0, abs=0.125)
        assert hi == pytest.approx(PENDULUM_C0, abs=0.125)

    def test_flat_interval_reaching_boundary(self, integrable_table: AlphaTable) -> None:
        """Test that a flat piece touching the table boundary is rejected."""
        with pytest.raises(Extrapolation):
            flat_interval(integrable_table, slope_tol=10.0)

    def test_unconverged_entries_are_invalid(self, pendulum: Model) -> None:
        """Test that entries exhausting the sweep budget become NaN."""
        table = alpha_table(
            pendulum.lagrangian, np.array([0.0, 0.5]), N=64, dt=0.05, max_sweeps=1, convexify=False, cached=False
        )
        assert not table.valid.any()
        assert np.isnan(table.alpha).all()
        assert np.isfinite(table.residual).all()

    def test_cache_hit(self, integrable: Model) -> None:
        """Test that a repeated call is served from the cache."""
        grid, _ = class_grid(-1.0, 1.0, 5)
        first = alpha_table(integrable.lagrangian, grid, N=64, dt=0.2, v_max=2.4)
        with patch("tonellilab.mather.critical_value", side_effect=AssertionError("recomputed")):
            second = alpha_table(integrable.lagrangian, grid, N=64, dt=0.2, v_max=2.4)
        np.testing.assert_array_equal(second.alpha, first.alpha)
        assert second.meta == first.meta

    def test_cache_bypass(self, integrable: Model) -> None:
        """Test that cached=False always recomputes."""
        grid, _ = class_grid(-1.0, 1.0, 5)
        alpha_table(integrable.lagrangian, grid, N=64, dt=0.2, v_max=2.4)
        with (
            patch("tonellilab.mather.critical_value", side_effect=AssertionError("recomputed")),
            pytest.raises(AssertionError),
        ):
            alpha_table(integrable.lagrangian, grid, N=64, dt=0.2, v_max=2.4, cached=False)

    def test_malformed_cache_entry_recomputed(self, integrable: Model, isolated_cache: Path) -> None:
        """Test that a cached table whose columns disagree in length is recomputed."""
        grid, _ = class_grid(-1.0, 1.0, 5)
        first = alpha_table(integrable.lagrangian, grid, N=64, dt=0.2, v_max=2.4)
        (entry,) = isolated_cache.glob("alpha_table-*.json")
        data = json.loads(entry.read_text())
        data["alpha"] = data["alpha"][:-1]
        entry.write_text(json.dumps(data))
        with patch("tonellilab.mather.critical_value", wraps=critical_value) as mock_critical:
            second = alpha_table(integrable.lagrangian, grid, N=64, dt=0.2, v_max=2.4)
        assert mock_critical.call_count == 5
        np.testing.assert_array_equal(second.alpha, first.alpha)
        assert len(json.loads(entry.read_text())["alpha"]) == 5

    def test_entry_schema(self, integrable_table: AlphaTable) -> None:
        """Test that a stored table validates and a mismatched grid shape does not."""
        data = json.loads(dumps17(integrable_table.to_dict()))
        assert AlphaTableEntry.model_validate(data).grid_shape == [33]
        with pytest.raises(ValidationError):
            AlphaTableEntry.model_validate({**data, "grid_shape": [4, 4]})

    def test_dict_preserves_invalid_entries(self) -> None:
        """Test that NaN values and infinite residuals survive JSON."""
        table = AlphaTable(
            c_grid=np.array([[0.0], [1.0]]),
            alpha=np.array([0.5, np.nan]),
            residual=np.array([1e-5, np.inf]),
            valid=np.array([True, False]),
            raw_alpha=np.array([0.5, np.nan]),
        )
        restored = AlphaTable.from_dict(json.loads(dumps17(table.to_dict())))
        assert np.isnan(restored.alpha[1])
        assert restored.residual[1] == np.inf
        assert restored.valid.tolist() == [True, False]

    def test_csv(self, integrable_table: AlphaTable) -> None:
        """Test the CSV layout."""
        lines = integrable_table.to_csv().splitlines()
        assert lines[0] == "c1,alpha,residual"
        assert len(lines) == 34
        assert lines[1].startswith("-2,")

    def test_class_grid(self) -> None:
        """Test one- and two-dimensional class grids."""
        grid, shape = class_grid([-1.0, 0.0], [1.0, 2.0], 3)
        assert shape == (3, 3)
        assert grid[1].tolist() == [-1.0, 1.0]
        with pytest.raises(InvalidInput):
            class_grid(1.0, -1.0, 5)


class TestConvexEnvelope:
    """Test lower convex envelopes."""

    def test_one_dimensional(self) -> None:
        """Test that a bump above the chord is removed."""
        x = np.array([0.0, 1.0, 2.0, 3.0])
        y = np.array([0.0, 2.0, 1.0, 3.0])
        np.testing.assert_allclose(lower_convex_envelope(x, y), [0.0, 0.5, 1.0, 3.0])

    def test_two_dimensional(self) -> None:
        """Test a convex surface with its centre raised above the edge midpoints."""
        grid, _ = class_grid([-1.0, -1.0], [1.0, 1.0], 3)
        values = np.sum(grid**2, axis=1)
        values[4] = 1.5
        envelope = lower_convex_envelope(grid, values)
        assert envelope[4] == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(np.delete(envelope, 4), np.delete(values, 4))


class TestBeta:
    """Test beta by discrete conjugation."""

    def test_pendulum_minimum(self, pendulum_table: AlphaTable) -> None:
        """Test beta(0) = -max V."""
        bt = beta_from_alpha(pendulum_table, np.array([0.0]))
        assert bt.beta[0] == pytest.approx(-1.0, abs=1e-2)
        assert not bt.extrapolated[0]

    def test_pendulum_corner(self, pendulum_table: AlphaTable) -> None:
        """Test the corner of beta at h = 0 spanning the flat piece of alpha."""
        bt = beta_from_alpha(pendulum_table, np.linspace(-1.0, 1.0, 41))
        interval = subderivative_interval(bt, 0.0)
        assert interval.lower[0] == pytest.approx(-PENDULUM_C0, abs=0.15)
        assert interval.upper[0] == pytest.approx(PENDULUM_C0, abs=0.15)
        assert not interval.differentiable

    def test_double_conjugation(self, integrable_table: AlphaTable) -> None:
        """Test alpha** against alpha within the grid modulus."""
        bt = beta_from_alpha(integrable_table, H_GRID)
        assert not bt.extrapolated.any()
        again = alpha_from_beta(bt, integrable_table.c_grid)
        inner = np.abs(integrable_table.c_grid[:, 0]) <= 1.25
        assert again.valid[inner].all()
        gap = integrable_table.alpha[inner] - again.alpha[inner]
        assert np.all(gap >= -1e-12)
        assert np.all(gap <= grid_modulus(integrable_table.c_grid, H_GRID) + 1e-12)

    def test_extrapolated_entries(self, integrable_table: AlphaTable) -> None:
        """Test that rotation vectors beyond the tabulated slopes are flagged."""
        bt = beta_from_alpha(integrable_table, np.array([0.0, 3.0]))
        assert bt.extrapolated.tolist() == [False, True]
        assert bt.table()[1][1][-1] is True

    def test_requires_convexified_table(self, integrable_table: AlphaTable) -> None:
        """Test that raw tables are rejected."""
        raw = AlphaTable(
            integrable_table.c_grid,
            integrable_table.raw_alpha,
            integrable_table.residual,
            integrable_table.valid,
            integrable_table.raw_alpha,
        )
        with pytest.raises(InvalidInput):
            beta_from_alpha(raw, H_GRID)

    def test_grid_modulus(self) -> None:
        """Test the product of grid spacings."""
        assert grid_modulus(np.linspace(-2, 2, 33), H_GRID) == pytest.approx(0.125 * 0.05)


class TestSubderivative:
    """Test subderivative intervals of tabulations."""

    def test_smooth_node(self, integrable_table: AlphaTable) -> None:
        """Test a node of the smooth free-particle alpha."""
        interval = subderivative_interval(integrable_table, 0.5)
        assert interval.lower[0] == pytest.approx(0.4375, abs=0.05)
        assert interval.upper[0] == pytest.approx(0.5625, abs=0.05)
        assert interval.differentiable

    def test_between_nodes(self, integrable_table: AlphaTable) -> None:
        """Test that a point inside a cell has a single slope."""
        interval = subderivative_interval(integrable_table, 0.5625)
        assert interval.width == 0.0
        assert interval.differentiable

    def test_boundary(self, integrable_table: AlphaTable) -> None:
        """Test points on or beyond the table boundary."""
        with pytest.raises(Extrapolation):
            subderivative_interval(integrable_table, 2.0)
        with pytest.raises(Extrapolation):
            subderivative_interval(integrable_table, 3.0)

    def test_two_dimensional_corner(self) -> None:
        """Test the box of secant slopes of |c1| + c2^2 at the origin."""
        grid, shape = class_grid([-1.0, -1.0], [1.0, 1.0], 5)
        values = np.abs(grid[:, 0]) + grid[:, 1] ** 2
        table = AlphaTable(grid, values, np.zeros(25), np.ones(25, dtype=bool), values, True, 0.0, shape)
        interval = subderivative_interval(table, [0.0, 0.0])
        assert interval.lower == [-1.0, -0.5]
        assert interval.upper == [1.0, 0.5]
        assert len(interval.vertices) == 4
        assert interval.width == 2.0
        assert not interval.differentiable


class TestMatherMeasureLP:
    """Test the minimizing-measure linear program."""

    def test_free_particle(self, integrable: Model) -> None:
        """Test beta(h) = h^2 / 2 and the support at velocity h."""
        result = mather_measure_lp(integrable.lagrangian, 0.5)
        assert result.beta_lp == pytest.approx(0.125, abs=1e-6)
        assert rotation_vector(result.measure).value[0] == pytest.approx(0.5)
        assert action_defect(integrable.lagrangian, result.measure, 0.5, 0.125) == pytest.approx(0.0, abs=1e-6)

    def test_pendulum_rest(self, pendulum: Model) -> None:
        """Test beta(0) = -1 with the measure at the top of the potential."""
        result = mather_measure_lp(pendulum.lagrangian, 0.0)
        assert result.beta_lp == pytest.approx(-1.0, abs=1e-6)
        assert np.all(np.abs(result.measure.points[:, 0]) <= 1e-12)

    def test_infeasible(self, integrable: Model) -> None:
        """Test a rotation vector beyond the velocity grid."""
        with pytest.raises(Infeasible):
            mather_measure_lp(integrable.lagrangian, 3.0)

    def test_backend_failure(self, integrable: Model) -> None:
        """Test that backend failures surface as LPError."""

        class FailingBackend:
            def solve(self, c: np.ndarray, A_eq: sparse.spmatrix, b_eq: np.ndarray) -> LPSolution:
                return LPSolution(None, math.nan, 4, "numerical difficulties")

        with pytest.raises(LPError, match="numerical difficulties"):
            mather_measure_lp(integrable.lagrangian, 0.5, backend=FailingBackend())

    def test_limits(self, integrable: Model) -> None:
        """Test the variable limit and the dimension restriction."""
        with pytest.raises(InvalidInput):
            mather_measure_lp(integrable.lagrangian, 0.5, N_x=128, N_v=33)
        with pytest.raises(InvalidInput):
            mather_measure_lp(build_model("integrable", dim=2).lagrangian, 0.5)

    def test_holonomy_columns(self) -> None:
        """Test that each transition conserves mass."""
        A = holonomy_matrix(np.arange(16) / 16, np.linspace(-1, 1, 5), 0.1)
        np.testing.assert_allclose(np.asarray(A.sum(axis=0)).ravel(), 0.0, atol=1e-12)


class TestActionDefect:
    """Test c-minimality of measures and duality with the alpha table."""

    def test_zero_rotation_measure_minimizes_flat_interval(self, pendulum: Model) -> None:
        """Test that the measure at the top of V is c-minimizing for every c on the flat piece."""
        mu = mather_measure_lp(pendulum.lagrangian, 0.0).measure
        for c in np.linspace(-1.2, 1.2, 7):
            assert action_defect(pendulum.lagrangian, mu, c, pendulum_alpha_oracle(c)) <= 2e-2

    def test_rotating_measure_leaves_flat_interval(self, integrable: Model) -> None:
        """Test that a measure with rotation 0.5 is not c-minimizing away from c = 0.5."""
        mu = mather_measure_lp(integrable.lagrangian, 0.5).measure
        assert action_defect(integrable.lagrangian, mu, 1.5, 1.125) == pytest.approx(0.5, abs=1e-6)

    def test_requires_tangent_measure(self, pendulum: Model) -> None:
        """Test that cotangent measures are rejected."""
        with pytest.raises(InvalidInput):
            action_defect(pendulum.lagrangian, WeightedMeasure.dirac(0.0, 0.0), 0.0, 1.0)

    @pytest.mark.parametrize(
        "name, h, fixture_name", [("integrable", 0.5, "integrable_table"), ("pendulum", 0.0, "pendulum_table")]
    )
    def test_weak_duality(self, name: str, h: float, fixture_name: str, request: pytest.FixtureRequest) -> None:
        """Test beta_lp(h) + alpha(c) >= c h on every tabulated class."""
        table: AlphaTable = request.getfixturevalue(fixture_name)
        beta_lp = mather_measure_lp(build_model(name).lagrangian, h).beta_lp
        c = table.c_grid[:, 0]
        assert np.min(beta_lp + table.alpha - c * h) >= -3e-2


class TestClassConsistency:
    """Test that rotation numbers on invariant graphs lie in the subderivative of alpha."""

    def test_free_particle(self, integrable: Model, integrable_table: AlphaTable) -> None:
        """Test the horizontal circle of class 0.625."""
        graph = LagrangianGraph.from_potential(0.625, GridPotential.zeros(1, 64))
        rho = kam_conjugacy_check(integrable.hamiltonian, graph, T=200.0).rho[0]
        interval = subderivative_interval(integrable_table, 0.625)
        assert interval.lower[0] <= rho <= interval.upper[0]

    def test_pendulum(self, pendulum: Model, pendulum_table: AlphaTable) -> None:
        """Test the rotating invariant circle of class 1.75."""
        nodes = grid_nodes(1, 256)[:, 0]
        graph = LagrangianGraph.from_momentum(1.75, pendulum_momentum_oracle(1.75, nodes))
        rho = kam_conjugacy_check(pendulum.hamiltonian, graph, T=100.0, x0_samples=2, dt=0.01).rho[0]
        interval = subderivative_interval(pendulum_table, 1.75)
        assert interval.lower[0] - 5e-2 <= rho <= interval.upper[0] + 5e-2
        assert rho == pytest.approx(1 / pendulum_period(pendulum_alpha_oracle(1.75)), abs=5e-3)


class TestAubry:
    """Test the calibration-based Aubry estimate."""

    def test_free_particle(self, integrable: Model) -> None:
        """Test that every point is calibrated for the free particle at c = 0."""
        estimate = aubry_estimate(GridPotential.zeros(1, 64), integrable.lagrangian, 0.0, dt=0.2, v_max=2.4)
        assert len(estimate) == 64
        assert estimate.fraction == 1.0

    def test_pendulum_top(self, pendulum: Model) -> None:
        """Test that the pendulum at c = 0 concentrates on the top of the potential."""
        result = critical_value(pendulum.lagrangian, 0.0, N=64, dt=0.05)
        estimate = aubry_estimate(result.u, pendulum.lagrangian, 0.0, dt=0.05, alpha=result.alpha)
        assert estimate.nodes == [(0,)]
        assert (0,) in estimate
        np.testing.assert_array_equal(estimate.points, [[0.0]])


class TestPendulumOracles:
    """Test the quadrature oracles of the pendulum."""

    def test_separatrix_class(self) -> None:
        """Test c(1) = 4/pi."""
        assert pendulum_class_of_energy(1.0) == pytest.approx(4 / math.pi, abs=1e-8)
        assert pendulum_alpha_oracle(0.0) == 1.0
        assert pendulum_alpha_oracle(-PENDULUM_C0) == 1.0

    def test_alpha_inverts_class(self) -> None:
        """Test alpha(c(E)) = E."""
        assert pendulum_alpha_oracle(pendulum_class_of_energy(2.0)) == pytest.approx(2.0, abs=1e-10)

    def test_period(self) -> None:
        """Test the period at and above the separatrix."""
        assert pendulum_period(1.0) == math.inf
        assert pendulum_energy_of_rotation(1 / pendulum_period(2.0)) == pytest.approx(2.0, abs=1e-8)
        with pytest.raises(InvalidInput):
            pendulum_period(0.5)

    def test_beta(self) -> None:
        """Test beta(0) = -1 and the Fenchel inequality."""
        assert pendulum_beta_oracle(0.0) == -1.0
        for h in (0.3, 1.0):
            for c in (0.0, 1.5, 2.5):
                assert pendulum_beta_oracle(h) + pendulum_alpha_oracle(c) >= c * h - 1e-9

    def test_momentum(self) -> None:
        """Test that the invariant circle of class c has mean momentum c."""
        x = np.linspace(0.0, 1.0, 2001)
        assert simpson(pendulum_momentum_oracle(2.0, x), x=x) == pytest.approx(2.0, abs=1e-6)
        assert np.all(pendulum_momentum_oracle(-2.0, x) < 0)
        with pytest.raises(InvalidInput):
            pendulum_momentum_oracle(1.0, x)
