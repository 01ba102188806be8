"""
Test suite for optimal incentives, schedules and per-limit tables
"""
from dataclasses import replace

import numpy as np
import pytest

from models.errors import NoInteriorRootError, ParameterError
from models.incentives import (
    GridSchedule,
    LimitTable,
    StationarySchedule,
    admissibility_integral,
    closed_form_incentive,
    foc_map,
    foc_solve,
    hamiltonian,
    incentive_schedule,
    per_limit_incentive_table,
    stationary_incentive,
)
from models.intensity import PowerIntensity
from models.params import BASELINE_INTENSITY, BASELINE_PENALTY, BASELINE_SIDE
from models.penalty import LinearExpPenalty
from models.value import solve_value_pde, stationary_coefficients

L = 0.11
TICK = 0.01


@pytest.fixture(scope='module')
def sv():
    return stationary_coefficients(BASELINE_SIDE, L)


@pytest.fixture(scope='module')
def schedule(sv):
    return StationarySchedule(sv, BASELINE_INTENSITY, BASELINE_PENALTY)


@pytest.fixture
def models():
    return PowerIntensity(BASELINE_INTENSITY), LinearExpPenalty(BASELINE_PENALTY)


class TestFirstOrderCondition:
    @pytest.mark.parametrize('x, p', [(0.01, 0.3), (0.05, 1.2), (0.1, 0.05), (0.002, 4.9)])
    def test_root_matches_closed_form(self, models, x, p):
        """Bracketed root agrees with the explicit incentive"""
        intensity, penalty = models
        z_root = foc_solve(x, p, intensity, penalty)
        z_closed = float(closed_form_incentive(x, p, BASELINE_INTENSITY, BASELINE_PENALTY))
        assert z_root == pytest.approx(z_closed, rel=1e-10)

    def test_mid_book_root(self, models):
        """x = 0.05, p = 1.2 gives an incentive of about 2.478e-3 $"""
        assert foc_solve(0.05, 1.2, *models) == pytest.approx(2.4778e-3, rel=1e-4)

    def test_root_zeroes_the_map(self, models):
        """dz H vanishes at the root to solver tolerance"""
        intensity, penalty = models
        z = foc_solve(0.03, 0.8, intensity, penalty)
        weight = float(penalty.dz(0.03, z))
        assert abs(foc_map(0.03, z, 0.8, intensity, penalty)) <= 1e-8 * weight

    def test_map_changes_sign_at_root(self, models):
        """dz H is positive just below the root and negative just above"""
        intensity, penalty = models
        z = foc_solve(0.04, 0.6, intensity, penalty)
        assert foc_map(0.04, 0.5 * z, 0.6, intensity, penalty) > 0
        assert foc_map(0.04, 2.0 * z, 0.6, intensity, penalty) < 0

    def test_zero_adjoint_gives_no_incentive(self, models):
        """p = 0 gives z = 0"""
        assert foc_solve(0.03, 0.0, *models) == 0.0

    def test_negative_adjoint_rejected(self, models):
        """Negative p is outside the domain"""
        with pytest.raises(ParameterError):
            foc_solve(0.03, -0.1, *models)

    def test_cap_exceeded(self, models):
        """A root beyond z_max is reported, not clipped"""
        with pytest.raises(NoInteriorRootError):
            foc_solve(0.001, 4.0, *models, z_max=1e-3)

    @pytest.mark.parametrize('scale', [1e-3, 7.5, 1e4])
    def test_invariant_under_joint_rate_and_cost_scaling(self, scale):
        """Multiplying lam and A_bar by the same constant leaves the optimum unchanged"""
        base = foc_solve(0.03, 0.8, PowerIntensity(BASELINE_INTENSITY), LinearExpPenalty(BASELINE_PENALTY))
        scaled = foc_solve(0.03, 0.8,
                           PowerIntensity(replace(BASELINE_INTENSITY, lam=scale * BASELINE_INTENSITY.lam)),
                           LinearExpPenalty(replace(BASELINE_PENALTY, A_bar=scale * BASELINE_PENALTY.A_bar)))
        assert scaled == pytest.approx(base, rel=1e-10)

    def test_nondecreasing_in_value(self, models):
        """A larger adjoint value never lowers the optimal incentive"""
        ps = np.linspace(0.0, 5.0, 41)
        for x in (0.005, 0.03, 0.09):
            zs = [foc_solve(x, p, *models) for p in ps]
            assert np.all(np.diff(zs) >= 0)

    def test_root_maximises_hamiltonian(self, models):
        """No incentive on a fine grid beats the root"""
        intensity, penalty = models
        x, p = 0.02, 0.5
        z_star = foc_solve(x, p, intensity, penalty)
        grid = np.linspace(0.0, 10 * z_star, 2001)
        h_grid = hamiltonian(x, 1.0, grid, p, 0.1, BASELINE_SIDE, intensity, penalty)
        h_star = hamiltonian(x, 1.0, z_star, p, 0.1, BASELINE_SIDE, intensity, penalty)
        assert np.max(h_grid) <= h_star + 1e-9 * abs(h_star)

    def test_hamiltonian_concave_in_density_and_incentive(self, models):
        """Midpoint concavity of H in (u, z) at random points"""
        intensity, penalty = models
        generator = np.random.default_rng(2024)
        n = 1000
        x = generator.uniform(0.001, 0.109, n)
        p = generator.uniform(0.0, 5.0, n)
        q = generator.uniform(-2.0, 2.0, n)
        u1, u2 = generator.uniform(0.0, 1e4, (2, n))
        z1, z2 = generator.uniform(0.0, 0.05, (2, n))

        def h(u, z):
            return hamiltonian(x, u, z, p, q, BASELINE_SIDE, intensity, penalty)

        mid = h((u1 + u2) / 2, (z1 + z2) / 2)
        chord = (h(u1, z1) + h(u2, z2)) / 2
        scale = np.abs(h(u1, z1)) + np.abs(h(u2, z2)) + 1.0
        assert np.all(mid >= chord - 1e-12 * scale)

    def test_hamiltonian_rejects_negative_density(self, models):
        """u must be nonnegative"""
        with pytest.raises(ParameterError):
            hamiltonian(0.02, -1.0, 1.0, 0.5, 0.0, BASELINE_SIDE, *models)


class TestStationaryIncentive:
    def test_first_limit_magnitude(self, sv):
        """Closed-form incentive at the first limit"""
        assert stationary_incentive(0.01, sv, BASELINE_INTENSITY, BASELINE_PENALTY) == pytest.approx(25.04, rel=1e-2)

    def test_domain(self, sv):
        """x = 0 is on the boundary"""
        with pytest.raises(ParameterError):
            stationary_incentive(0.0, sv, BASELINE_INTENSITY, BASELINE_PENALTY)

    def test_schedule_vanishes_on_boundary(self, schedule):
        """Zero at 0 and L, positive inside"""
        z = schedule.evaluate(0.0, np.array([0.0, 0.05, L]))
        assert z[0] == 0 and z[-1] == 0 and z[1] > 0

    def test_scaled(self, schedule):
        """Scaled schedule is the pointwise multiple"""
        x = np.array([0.01, 0.02])
        assert np.allclose(schedule.scaled(0.5).evaluate(0.0, x), 0.5 * schedule.evaluate(0.0, x))


class TestLimitTable:
    def test_baseline_table(self, schedule):
        """Ten positive incentives, strictly decreasing away from the mid-price"""
        table = per_limit_incentive_table(schedule, TICK, 10, L=L)
        assert list(table.limits) == list(range(1, 11))
        assert np.allclose(table.distances, np.arange(1, 11) * TICK)
        assert np.all(np.diff(table.incentives) < 0)
        assert np.all(table.incentives > 0)

    def test_frame_columns(self, schedule):
        """One row per limit"""
        frame = per_limit_incentive_table(schedule, TICK, 10, L=L).to_frame()
        assert list(frame.columns) == ['limit', 'distance', 'incentive']
        assert len(frame) == 10

    def test_interval_convention(self, schedule):
        """Averaging over the tick differs from point evaluation"""
        point = per_limit_incentive_table(schedule, TICK, 10, L=L)
        interval = per_limit_incentive_table(schedule, TICK, 10, convention='interval', L=L)
        assert np.all(interval.incentives > 0)
        assert not np.allclose(point.incentives, interval.incentives)

    def test_too_many_limits(self, schedule):
        """Limit 11 lies beyond L"""
        with pytest.raises(ParameterError):
            per_limit_incentive_table(schedule, TICK, 12, L=L)

    def test_negative_incentives_rejected(self):
        """Tables hold nonnegative incentives"""
        with pytest.raises(ParameterError):
            LimitTable(limits=np.array([1]), distances=np.array([0.01]), incentives=np.array([-1.0]))


class TestGridSchedule:
    @pytest.fixture(scope='class')
    def field(self):
        return solve_value_pde(BASELINE_SIDE, L, 1.0, TICK, 0.1)

    def test_closed_form_schedule(self, field):
        """Zero on the boundary and at maturity, finite admissibility integral"""
        schedule = incentive_schedule(field, BASELINE_INTENSITY, BASELINE_PENALTY)
        assert schedule.values.shape == field.values.shape
        assert np.all(schedule.values[:, 0] == 0) and np.all(schedule.values[:, -1] == 0)
        assert np.all(schedule.values[-1] == 0)
        assert np.isfinite(schedule.admissibility)

    def test_root_finder_path_agrees(self, field):
        """A custom baseline forces the root finder; it matches the explicit path"""
        custom = PowerIntensity(BASELINE_INTENSITY,
                                baseline=lambda x: BASELINE_INTENSITY.lam0 * np.exp(-BASELINE_INTENSITY.kappa0 * x))
        numeric = incentive_schedule(field, custom, LinearExpPenalty(BASELINE_PENALTY))
        closed = incentive_schedule(field, BASELINE_INTENSITY, BASELINE_PENALTY)
        assert np.allclose(numeric.values, closed.values, rtol=1e-9, atol=0.0)

    def test_nearest_time_node(self, field):
        """Evaluation uses the nearest time node"""
        schedule = incentive_schedule(field, BASELINE_INTENSITY, BASELINE_PENALTY)
        assert schedule.time_key(0.04) == 0
        assert schedule.time_key(0.26) == 3
        assert np.allclose(schedule.evaluate(0.26, field.x), schedule.values[3])

    def test_scaled_schedule_recomputes_admissibility(self, field):
        """Scaling keeps the integral of f(x, Z)² current"""
        schedule = incentive_schedule(field, BASELINE_INTENSITY, BASELINE_PENALTY)
        doubled = schedule.scaled(2.0)
        expected = admissibility_integral(field.t, field.x, 2.0 * schedule.values, PowerIntensity(BASELINE_INTENSITY))
        assert np.allclose(doubled.values, 2.0 * schedule.values)
        assert doubled.admissibility == pytest.approx(expected, rel=1e-12)
        assert doubled.admissibility > schedule.admissibility

    def test_frame_covers_grid(self, field):
        """One row per (t, x) node"""
        schedule = incentive_schedule(field, BASELINE_INTENSITY, BASELINE_PENALTY)
        frame = schedule.to_frame()
        assert list(frame.columns) == ['t', 'x', 'z']
        assert len(frame) == len(field.t) * len(field.x)

    def test_negative_values_rejected(self):
        """Grid schedules hold nonnegative values"""
        with pytest.raises(ParameterError):
            GridSchedule(np.array([0.0]), np.array([0.0, 0.1]), np.array([[0.0, -1.0]]))
