"""Tests for rotation vectors and Schwartzman asymptotic cycles."""

import math
from fractions import Fraction

import numpy as np
import pytest
from pydantic import ValidationError

from tonellilab.dynamics import WeightedMeasure, integrate, occupation_measure
from tonellilab.geometry import GridPotential, torus_distance
from tonellilab.mather import pendulum_period
from tonellilab.schwartzman import (
    AsymptoticCycle,
    TorusMap,
    closed_orbit_report,
    conjugate_cycle_set,
    cycle_from_flow_measure,
    cycle_from_trajectory,
    detect_equilibria,
    diameter_report,
    flow_ensemble,
    flow_orbit,
    hamiltonian_ensemble,
    linear_flow,
    pair_with_form,
    period_ratio,
    periodic_orbit_cycle,
    pushforward_cycle,
    rotation_vector,
    schwartzman_diameter,
    semiconjugacy_defect,
    stratified_starts,
)
from tonellilab.tonelli import ClosedOneForm, Model, build_model
from tonellilab.types import InvalidInput, SemiconjugacyViolated

ALPHA = np.array([1.0, math.sqrt(2.0) - 1.0])


class TestRotationVector:
    """Test rotation vectors of measures on TM."""

    def test_dirac_at_rest(self) -> None:
        """Test that a rest point has zero rotation."""
        mu = WeightedMeasure.dirac([0.3, 0.4], [0.0, 0.0], "TM")
        np.testing.assert_array_equal(rotation_vector(mu).vector, [0.0, 0.0])

    def test_constant_velocity(self, rng: np.random.Generator) -> None:
        """Test that a measure with constant velocity h has rotation h."""
        h = np.array([0.3, -0.2])
        mu = WeightedMeasure.uniform(rng.random((10, 2)), np.tile(h, (10, 1)), "TM")
        cycle = rotation_vector(mu)
        np.testing.assert_allclose(cycle.vector, h)
        assert cycle.method == "measure_formula"

    def test_requires_tangent_measure(self) -> None:
        """Test that cotangent measures are rejected."""
        with pytest.raises(InvalidInput):
            rotation_vector(WeightedMeasure.dirac(0.3, 1.0))

    def test_pendulum_rotating_orbit(self, pendulum: Model) -> None:
        """Test the rotation number 1/T(E) of a rotating pendulum orbit."""
        traj = integrate(pendulum.hamiltonian, 0.5, math.sqrt(5.0), T=100.0, dt=0.01)
        expected = 1.0 / pendulum_period(1.5)
        mu = occupation_measure(traj).to_tangent(pendulum.hamiltonian)
        assert rotation_vector(mu).value[0] == pytest.approx(expected, abs=1e-2)
        assert cycle_from_trajectory(traj).value[0] == pytest.approx(expected, abs=1e-2)

    def test_pair_with_constant_form(self, rng: np.random.Generator) -> None:
        """Test pairing a TM measure with a constant closed form."""
        mu = WeightedMeasure.uniform(rng.random((5, 2)), np.tile([0.5, 2.0], (5, 1)), "TM")
        assert pair_with_form(mu, ClosedOneForm.constant([1.0, -1.0])) == pytest.approx(-1.5)

    def test_exact_part_pairs_to_zero(self, pendulum: Model) -> None:
        """Test that on an invariant measure a closed form pairs like its class alone."""
        traj = integrate(pendulum.hamiltonian, 0.5, math.sqrt(5.0), T=100.0, dt=0.01)
        mu = occupation_measure(traj).to_tangent(pendulum.hamiltonian)
        exact = GridPotential.from_function(lambda x: np.sin(2 * np.pi * x[..., 0]) / (2 * np.pi), 1, 1024)
        eta = ClosedOneForm((0.7,), exact)
        rho = rotation_vector(mu).value[0]
        assert pair_with_form(mu, eta) == pytest.approx(0.7 * rho, abs=1e-2)
        assert pair_with_form(mu, ClosedOneForm((0.0,), exact)) == pytest.approx(0.0, abs=1e-2)

    def test_linear_on_mixtures(self, rng: np.random.Generator) -> None:
        """Test rho(a mu + (1 - a) nu) = a rho(mu) + (1 - a) rho(nu)."""
        mu = WeightedMeasure.uniform(rng.random((6, 2)), rng.normal(size=(6, 2)), "TM")
        nu = WeightedMeasure.uniform(rng.random((3, 2)), rng.normal(size=(3, 2)), "TM")
        for a in (0.0, 0.3, 1.0):
            mixed = rotation_vector(WeightedMeasure.mixture([mu, nu], [a, 1.0 - a]))
            expected = a * rotation_vector(mu).vector + (1.0 - a) * rotation_vector(nu).vector
            np.testing.assert_allclose(mixed.vector, expected, atol=1e-12)

    def test_non_finite_cycle_rejected(self) -> None:
        """Test that cycles must be finite."""
        with pytest.raises(ValidationError):
            AsymptoticCycle(value=[float("nan")], method="closed_orbit")


class TestFlowCycles:
    """Test asymptotic cycles of flows on the base torus."""

    def test_linear_flow_measure(self, rng: np.random.Generator) -> None:
        """Test that any measure of a linear flow has cycle alpha."""
        mu = WeightedMeasure.uniform(rng.random((20, 2)), space="M")
        np.testing.assert_allclose(cycle_from_flow_measure(linear_flow(ALPHA), mu).vector, ALPHA)

    def test_pairings_with_forms(self, rng: np.random.Generator) -> None:
        """Test the pairings with a list of constant forms."""
        mu = WeightedMeasure.uniform(rng.random((4, 2)), space="M")
        cycle = cycle_from_flow_measure(linear_flow(ALPHA), mu, forms=[[1, 0], [0, 1], [1, 1]])
        np.testing.assert_allclose(cycle.vector, [1.0, math.sqrt(2.0) - 1.0, math.sqrt(2.0)])

    def test_flow_orbit_winding(self) -> None:
        """Test the trajectory limit along a linear flow orbit."""
        path = flow_orbit(linear_flow(ALPHA), [0.2, 0.9], T=50.0, dt=0.1)
        cycle = cycle_from_trajectory(path)
        np.testing.assert_allclose(cycle.vector, ALPHA, atol=1e-9)
        assert cycle.error_bar <= 1e-9
        assert cycle.window == pytest.approx(50.0)

    def test_librating_orbit(self, pendulum: Model) -> None:
        """Test that a librating pendulum orbit does not wind."""
        traj = integrate(pendulum.hamiltonian, 0.5, math.sqrt(3.0), T=100.0, dt=0.01)
        assert abs(cycle_from_trajectory(traj).value[0]) <= 1 / 100

    def test_periodic_orbit_cycle(self) -> None:
        """Test the closed-orbit formula."""
        assert periodic_orbit_cycle((1, 0), 2.0).value == [0.5, 0.0]
        with pytest.raises(InvalidInput):
            periodic_orbit_cycle((1,), 0.0)


class TestPushforward:
    """Test the naturality of asymptotic cycles under torus maps."""

    def test_identity(self, rng: np.random.Generator) -> None:
        """Test that the identity map preserves cycles."""
        X = linear_flow(ALPHA)
        mu = WeightedMeasure.uniform(rng.random((8, 2)), space="M")
        left, right = pushforward_cycle(TorusMap.identity(2), mu, X, X)
        np.testing.assert_allclose(left.vector, right.vector)
        np.testing.assert_allclose(left.vector, ALPHA)

    def test_shear(self, rng: np.random.Generator) -> None:
        """Test a shear semi-conjugating two linear flows."""
        M = np.array([[1, 1], [0, 1]])
        mu = WeightedMeasure.uniform(rng.random((8, 2)), space="M")
        left, right = pushforward_cycle(TorusMap(M), mu, linear_flow(ALPHA), linear_flow(M @ ALPHA))
        np.testing.assert_allclose(left.vector, M @ ALPHA, atol=1e-12)
        np.testing.assert_allclose(right.vector, M @ ALPHA, atol=1e-12)

    def test_constant_map(self, rng: np.random.Generator) -> None:
        """Test that collapsing onto a rest point kills the cycle."""
        mu = WeightedMeasure.uniform(rng.random((8, 2)), space="M")
        psi = TorusMap.constant([0.5, 0.5])
        left, right = pushforward_cycle(psi, mu, linear_flow(ALPHA), linear_flow([0.0, 0.0]))
        np.testing.assert_array_equal(left.vector, [0.0, 0.0])
        np.testing.assert_array_equal(right.vector, [0.0, 0.0])

    def test_violation(self, rng: np.random.Generator) -> None:
        """Test that a map that does not intertwine the flows is rejected."""
        mu = WeightedMeasure.uniform(rng.random((8, 2)), space="M")
        assert semiconjugacy_defect(TorusMap.identity(2), linear_flow(ALPHA), linear_flow([0.5, 0.5]), mu.points) > 0.1
        with pytest.raises(SemiconjugacyViolated):
            pushforward_cycle(TorusMap.identity(2), mu, linear_flow(ALPHA), linear_flow([0.5, 0.5]))

    def test_integer_matrix_required(self) -> None:
        """Test that torus maps need integer matrices."""
        with pytest.raises(InvalidInput):
            TorusMap([[0.5, 0.0], [0.0, 1.0]])

    def test_conjugate_cycle_set(self) -> None:
        """Test the image of cycles under H_1(psi)."""
        psi = TorusMap([[1, 1], [0, 1]])
        cycle = AsymptoticCycle(value=[1.0, 2.0], method="trajectory_limit", error_bar=0.01)
        (image,) = conjugate_cycle_set(psi, [cycle])
        assert image.value == [3.0, 2.0]
        assert image.error_bar == pytest.approx(0.02)


class TestClosedOrbits:
    """Test the rigidity of closed orbits."""

    def test_coinciding_cycles(self) -> None:
        """Test closed orbits with equal cycles."""
        report = closed_orbit_report([((1,), 2.0), ((2,), 4.0)])
        assert report.consistent
        assert report.verdict == "consistent with Schwartzman unique ergodicity"

    def test_different_cycles(self) -> None:
        """Test closed orbits with different cycles."""
        report = closed_orbit_report([((1,), 2.0), ((1,), 3.0)])
        assert not report.consistent
        assert report.spread == pytest.approx(1 / 6)
        assert report.verdict == "not Schwartzman uniquely ergodic"

    def test_fixed_point_forces_null_homology(self) -> None:
        """Test that a fixed point rules out winding closed orbits."""
        report = closed_orbit_report([((1,), 2.0)], fixed_points=1)
        assert report.null_homologous_required
        assert not report.consistent
        assert closed_orbit_report([((0,), 1.0)], fixed_points=1).consistent

    def test_period_ratio(self) -> None:
        """Test rational period ratios."""
        assert period_ratio(2.0, 3.0) == Fraction(2, 3)
        assert period_ratio(math.pi, 1.0, max_denominator=7) == Fraction(22, 7)


class TestEnsembles:
    """Test equilibria, stratified starts and Schwartzman diameters."""

    def test_detect_pendulum_equilibria(self, pendulum: Model) -> None:
        """Test the two rest points of the pendulum."""
        equilibria = detect_equilibria(pendulum.hamiltonian)
        assert len(equilibria) == 2
        for target in (0.0, 0.5):
            assert any(torus_distance(e.x.as_array(), np.array([target])) < 1e-8 for e in equilibria)
        assert all(e.p[0] == 0.0 for e in equilibria)
        assert equilibria[0].dirac().space == "T*M"

    def test_detect_two_dof_equilibria(self) -> None:
        """Test the four rest points of the two-degree-of-freedom pendulum."""
        assert len(detect_equilibria(build_model("two_dof_pendulum").hamiltonian, seeds_per_axis=8)) == 4

    def test_modulated_magnetic_equilibria(self) -> None:
        """Test that equilibria under a position-dependent W carry momentum W(x) and are rest points."""
        H = build_model("two_dof_pendulum", magnetic=[0.1, -0.2], modulation=[0.3, 0.25]).hamiltonian
        equilibria = detect_equilibria(H, seeds_per_axis=8)
        assert len(equilibria) == 4
        for e in equilibria:
            x = e.x.as_array()
            np.testing.assert_allclose(e.p, H.magnetic.value(x))
            np.testing.assert_allclose(H.gradient_p(x, e.p), 0.0, atol=1e-12)
            np.testing.assert_allclose(H.gradient_x(x, e.p), 0.0, atol=1e-8)

    def test_stratified_starts(self, pendulum: Model) -> None:
        """Test starts at the potential minimum with prescribed energies."""
        xs, ps = stratified_starts(pendulum.hamiltonian, [0.0, 2.0])
        np.testing.assert_allclose(xs, 0.5)
        np.testing.assert_allclose(ps[:, 0], [math.sqrt(2), -math.sqrt(2), math.sqrt(6), -math.sqrt(6)])
        np.testing.assert_allclose(pendulum.hamiltonian(xs, ps), [0.0, 0.0, 2.0, 2.0], atol=1e-12)
        with pytest.raises(InvalidInput):
            stratified_starts(pendulum.hamiltonian, [-2.0])
        with pytest.raises(InvalidInput):
            stratified_starts(build_model("two_dof_pendulum").hamiltonian, [1.0])

    def test_linear_flow_diameter(self, rng: np.random.Generator) -> None:
        """Test that a minimal linear flow has a tiny diameter."""
        cycles = flow_ensemble(linear_flow(ALPHA), rng.random((20, 2)), window=100.0, dt=0.1)
        assert schwartzman_diameter(cycles) <= 1e-2
        assert diameter_report(cycles).uniquely_ergodic

    def test_pendulum_diameter(self, pendulum: Model) -> None:
        """Test that opposite rotating orbits separate the cycles."""
        xs, ps = stratified_starts(pendulum.hamiltonian, [2.0])
        cycles = hamiltonian_ensemble(pendulum.hamiltonian, xs, ps, window=50.0, dt=0.01)
        assert schwartzman_diameter(cycles) >= 2 / pendulum_period(2.0) - 0.05
        report = diameter_report(cycles)
        assert not report.uniquely_ergodic
        assert report.verdict == "not Schwartzman uniquely ergodic"

    def test_diameter_of_measures(self) -> None:
        """Test diameters of measure ensembles."""
        tangent = [WeightedMeasure.dirac(0.1, 0.5, "TM"), WeightedMeasure.dirac(0.2, -0.5, "TM")]
        assert schwartzman_diameter(tangent) == pytest.approx(1.0)
        base = [WeightedMeasure.dirac([0.1, 0.2], space="M")]
        assert schwartzman_diameter(base, flow=linear_flow(ALPHA)) == 0.0
        with pytest.raises(InvalidInput):
            schwartzman_diameter(base * 2)
        with pytest.raises(InvalidInput):
            schwartzman_diameter([])
