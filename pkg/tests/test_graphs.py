"""Tests for Lagrangian graphs and the checks run against them."""

import math

import numpy as np
import pytest

from tonellilab.geometry import GridPotential, grid_nodes
from tonellilab.graphs import (
    LagrangianGraph,
    calibration_check,
    compare_graphs,
    invariance_defect,
    kam_conjugacy_check,
    subcritical_report,
)
from tonellilab.mather import critical_value, pendulum_alpha_oracle, pendulum_momentum_oracle, pendulum_period
from tonellilab.tonelli import Model, build_model
from tonellilab.types import InvalidInput, InvalidStep

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def oracle_graph(c: float, N: int) -> LagrangianGraph:
    """The rotating invariant circle of the pendulum with class c."""
    return LagrangianGraph.from_momentum(c, pendulum_momentum_oracle(c, grid_nodes(1, N)[:, 0]))


def wave(amplitude: float, N: int) -> GridPotential:
    """u = amplitude * sin(2 pi x) / (2 pi), whose gradient is amplitude * cos(2 pi x)."""
    return GridPotential.from_function(lambda x: amplitude * np.sin(2 * np.pi * x[..., 0]) / (2 * np.pi), 1, N)


class TestLagrangianGraph:
    """Test construction and serialization of graphs."""

    def test_momentum_of_potential(self) -> None:
        """Test p = c + du at nodes and between them."""
        graph = LagrangianGraph.from_potential(0.5, wave(1.0, 64), "spectral")
        np.testing.assert_allclose(graph.momentum_grid[:, 0], 0.5 + np.cos(2 * np.pi * np.arange(64) / 64), atol=1e-10)
        assert graph.momentum(0.0)[0] == pytest.approx(1.5)

    def test_from_momentum_one_dimensional(self) -> None:
        """Test that integrating a momentum field recovers the graph."""
        nodes = grid_nodes(1, 64)[:, 0]
        graph = LagrangianGraph.from_momentum(0.5, 0.5 + np.cos(2 * np.pi * nodes))
        np.testing.assert_allclose(graph.momentum_grid[:, 0], 0.5 + np.cos(2 * np.pi * nodes), atol=2e-3)
        assert np.mean(graph.u.values) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("method", ["centered", "spectral"])
    def test_from_momentum_inverts_own_gradient(self, method: str) -> None:
        """Test that a loaded rotating circle differentiates back to its momentum field."""
        nodes = grid_nodes(1, 64)[:, 0]
        p = pendulum_momentum_oracle(2.0, nodes)
        graph = LagrangianGraph.from_momentum(2.0, p, method)
        np.testing.assert_allclose(graph.momentum_grid[:, 0], p, atol=1e-6)

    def test_from_momentum_unknown_method(self) -> None:
        """Test that an unknown gradient method is rejected."""
        with pytest.raises(InvalidInput):
            LagrangianGraph.from_momentum(0.5, np.full(64, 0.5), "upwind")

    def test_from_momentum_rejects_wrong_mean(self) -> None:
        """Test that a field whose mean is not the class is rejected."""
        with pytest.raises(InvalidInput):
            LagrangianGraph.from_momentum(0.5, np.full(64, 0.7))

    def test_from_momentum_two_dimensional(self) -> None:
        """Test the spectral inverse of the gradient on T^2."""
        u = GridPotential.from_function(
            lambda x: np.sin(2 * np.pi * x[..., 0]) * np.cos(2 * np.pi * x[..., 1]) / (2 * np.pi), 2, 32
        )
        original = LagrangianGraph((0.5, -0.25), u, "spectral")
        recovered = LagrangianGraph.from_momentum([0.5, -0.25], original.momentum_grid, "spectral")
        np.testing.assert_allclose(recovered.u.values, u.values, atol=1e-10)
        with pytest.raises(InvalidInput):
            LagrangianGraph.from_momentum([0.5, -0.25], np.zeros((32, 32)))

    def test_resample(self) -> None:
        """Test moving a graph to a finer grid."""
        graph = LagrangianGraph.from_potential(0.5, wave(1.0, 64))
        assert graph.resample(64) is graph
        fine = graph.resample(128)
        assert fine.N == 128
        np.testing.assert_allclose(fine.momentum(grid_nodes(1, 64)), graph.momentum_grid, atol=2e-3)

    def test_json(self) -> None:
        """Test the graph file layout and its validation."""
        graph = LagrangianGraph.from_potential(0.5, wave(0.1, 16))
        data = graph.to_json()
        assert data["n"] == 1
        assert data["N"] == 16
        assert data["c"] == [0.5]
        np.testing.assert_array_equal(LagrangianGraph.from_json(data).u.values, graph.u.values)
        with pytest.raises(InvalidInput):
            LagrangianGraph.from_json({**data, "N": 32})

    def test_smoothing_window(self) -> None:
        """Test Savitzky-Golay window validation."""
        assert LagrangianGraph.from_potential(0.5, wave(1.0, 64), smoothing=9).smoothing == 9
        with pytest.raises(InvalidInput):
            LagrangianGraph.from_potential(0.5, wave(1.0, 64), smoothing=8)
        with pytest.raises(InvalidInput):
            LagrangianGraph.from_potential(0.5, wave(1.0, 64), smoothing=3)

    def test_dimension_mismatch(self) -> None:
        """Test that the class and the potential must agree in dimension."""
        with pytest.raises(InvalidInput):
            LagrangianGraph((0.5, 0.5), GridPotential.zeros(1, 16))


class TestInvarianceDefect:
    """Test the flow-invariance defect of graphs."""

    def test_free_particle(self, integrable: Model) -> None:
        """Test that constant graphs are invariant under free motion."""
        graph = LagrangianGraph.from_potential(0.5, GridPotential.zeros(1, 64))
        assert invariance_defect(integrable.hamiltonian, graph) <= 1e-10

    def test_non_invariant(self, pendulum: Model) -> None:
        """Test that a constant graph is not pendulum-invariant."""
        graph = LagrangianGraph.from_potential(0.5, GridPotential.zeros(1, 64))
        assert invariance_defect(pendulum.hamiltonian, graph, dt=0.05) >= 0.1

    def test_oracle_circle(self, pendulum: Model) -> None:
        """Test the rotating invariant circle of class 2."""
        assert invariance_defect(pendulum.hamiltonian, oracle_graph(2.0, 256)) <= 5 / 256

    def test_step_too_long(self, integrable: Model) -> None:
        """Test that steps crossing half the torus are rejected."""
        graph = LagrangianGraph.from_potential(2.0, GridPotential.zeros(1, 16))
        with pytest.raises(InvalidStep):
            invariance_defect(integrable.hamiltonian, graph, dt=0.5)


class TestSubcritical:
    """Test the energy-level position of graphs."""

    def test_pendulum_flat_class(self, pendulum: Model) -> None:
        """Test u = 0 at c = 0: subcritical, critical only at the top of V."""
        graph = LagrangianGraph.from_potential(0.0, GridPotential.zeros(1, 64))
        report = subcritical_report(pendulum.hamiltonian, graph, 1.0, 1e-3)
        assert report.subcritical
        assert report.critical_part == [[0]]
        assert report.critical_fraction == pytest.approx(1 / 64)
        assert report.min_energy == pytest.approx(-1.0)

    def test_supercritical(self, pendulum: Model) -> None:
        """Test a graph rising above the level alpha(c)."""
        graph = LagrangianGraph.from_potential(0.5, GridPotential.zeros(1, 64))
        report = subcritical_report(pendulum.hamiltonian, graph, 1.0, 1e-3)
        assert not report.subcritical
        assert report.max_excess == pytest.approx(0.125)

    def test_oracle_circle_is_critical(self, pendulum: Model) -> None:
        """Test that the invariant circle lies on the level alpha(c)."""
        report = subcritical_report(pendulum.hamiltonian, oracle_graph(2.0, 256), pendulum_alpha_oracle(2.0), 5e-2)
        assert report.subcritical
        assert report.critical_fraction == 1.0


class TestCalibration:
    """Test calibration of orbits on a weak KAM graph."""

    def test_free_particle(self, integrable: Model) -> None:
        """Test that free motion calibrates u = 0 at c = 0.8."""
        graph = LagrangianGraph.from_potential(0.8, GridPotential.zeros(1, 64))
        report = calibration_check(graph, integrable.lagrangian, 0.32, dt=1e-2, T=1.0, x0_samples=4, curves=10)
        assert report.equality_defect <= 1e-9
        assert report.inequality_violations == 0
        assert report.min_margin >= -1e-12
        assert report.orbits == 4

    def test_wrong_potential(self, pendulum: Model) -> None:
        """Test that u = 0 does not calibrate the pendulum at c = 0."""
        graph = LagrangianGraph.from_potential(0.0, GridPotential.zeros(1, 64))
        report = calibration_check(graph, pendulum.lagrangian, 1.0, dt=1e-2, T=1.0, x0_samples=4, curves=0)
        assert report.equality_defect > 1e-2
        assert report.curves == 0


class TestCompareGraphs:
    """Test fiberwise comparison of graphs."""

    def test_equal(self) -> None:
        """Test a graph against itself."""
        graph = LagrangianGraph.from_potential(0.5, wave(1.0, 64))
        comparison = compare_graphs(graph, graph, 1e-6)
        assert comparison.verdict == "equal"
        assert not comparison.theorem_violation

    def test_disjoint(self) -> None:
        """Test two horizontal circles."""
        comparison = compare_graphs(
            LagrangianGraph.from_potential(0.3, GridPotential.zeros(1, 32)),
            LagrangianGraph.from_potential(0.7, GridPotential.zeros(1, 64)),
            1e-2,
        )
        assert comparison.verdict == "disjoint"
        assert comparison.min_gap == pytest.approx(0.4)
        assert comparison.N == 64

    def test_overlapping(self) -> None:
        """Test graphs of one class that cross."""
        flat = LagrangianGraph.from_potential(0.5, GridPotential.zeros(1, 64))
        bumped = LagrangianGraph.from_potential(0.5, wave(0.05, 64))
        comparison = compare_graphs(flat, bumped, 1e-2)
        assert comparison.verdict == "overlapping"
        assert comparison.theorem_violation

    def test_dimension_mismatch(self) -> None:
        """Test graphs over different tori."""
        with pytest.raises(InvalidInput):
            compare_graphs(
                LagrangianGraph.from_potential(0.5, GridPotential.zeros(1, 16)),
                LagrangianGraph.from_potential([0.5, 0.5], GridPotential.zeros(2, 16)),
                1e-2,
            )


class TestKamConjugacy:
    """Test rotation numbers and equidistribution on invariant graphs."""

    def test_golden_rotation(self, integrable: Model) -> None:
        """Test that an irrational rotation is consistent with strict ergodicity."""
        graph = LagrangianGraph.from_potential(GOLDEN, GridPotential.zeros(1, 64))
        report = kam_conjugacy_check(integrable.hamiltonian, graph, T=200.0)
        assert report.rho[0] == pytest.approx(GOLDEN, abs=1e-9)
        assert report.equidistribution_defect <= 5e-2
        assert not report.resonant
        assert report.verdict == "consistent with Schwartzman strict ergodicity"

    def test_resonant_torus(self) -> None:
        """Test that a rational direction on T^2 is resonant."""
        H = build_model("integrable", dim=2).hamiltonian
        graph = LagrangianGraph.from_potential([0.5, 0.5], GridPotential.zeros(2, 16))
        report = kam_conjugacy_check(H, graph, T=200.0)
        assert report.resonant
        assert report.rational_approximation == "1"
        assert report.verdict == "resonant (periodic orbits)"

    def test_pendulum_rotation_number(self, pendulum: Model) -> None:
        """Test the rotation number 1/T(E) on the invariant circle of class 2."""
        report = kam_conjugacy_check(pendulum.hamiltonian, oracle_graph(2.0, 256), T=100.0, x0_samples=2, dt=0.01)
        expected = 1 / pendulum_period(pendulum_alpha_oracle(2.0))
        assert report.rho[0] == pytest.approx(expected, abs=5e-3)
        assert not report.resonant


@pytest.fixture(scope="module")
def computed_circle() -> tuple[LagrangianGraph, float]:
    """Weak KAM graph of the pendulum at c = 2 from value iteration, with its alpha."""
    result = critical_value(build_model("pendulum").lagrangian, 2.0, N=256, dt=0.05, v_max=3.0)
    return LagrangianGraph.from_potential(2.0, result.u, smoothing=9), result.alpha


class TestValueIterationGraph:
    """Test graphs computed by value iteration against the invariant circle."""

    def test_matches_oracle_circle(self, computed_circle: tuple[LagrangianGraph, float]) -> None:
        """Test that the computed graph of class 2 is the rotating invariant circle."""
        graph, alpha = computed_circle
        comparison = compare_graphs(graph, oracle_graph(2.0, 256), 5e-2)
        assert comparison.hausdorff_vertical <= 5e-2
        assert comparison.verdict == "equal"
        assert alpha == pytest.approx(pendulum_alpha_oracle(2.0), abs=2e-2)

    def test_subcritical(self, pendulum: Model, computed_circle: tuple[LagrangianGraph, float]) -> None:
        """Test that the computed graph lies on the level alpha(2)."""
        graph, alpha = computed_circle
        report = subcritical_report(pendulum.hamiltonian, graph, alpha, 0.1)
        assert report.subcritical
        assert report.critical_fraction == 1.0

    def test_invariant(self, pendulum: Model, computed_circle: tuple[LagrangianGraph, float]) -> None:
        """Test that the flow keeps the computed graph in place."""
        graph, _ = computed_circle
        assert invariance_defect(pendulum.hamiltonian, graph, dt=0.01) <= 5e-2
