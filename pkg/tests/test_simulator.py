"""
Test suite for the order-book simulator and ensemble statistics
"""
import math

import numpy as np
import pytest
from scipy import integrate

from models.errors import GridError, ParameterError, StabilityError
from models.incentives import StationarySchedule
from models.params import BookParams, IntensityParams, SideParams, baseline_bundle
from models.simulator import (
    BookSimulator,
    BookState,
    ensemble_average,
    estimate_objective,
    limit_volumes,
    simulate_book,
    stationary_mean_profile,
)
from models.value import stationary_coefficients
from utils.statistics import GainAnalyzer, fullness_rank, mean_and_stderr, paired_comparison

DX = 2e-3
DT = 2e-3


@pytest.fixture(scope='module')
def bundle():
    return baseline_bundle()


@pytest.fixture(scope='module')
def schedules(bundle):
    book = bundle.book
    return tuple(StationarySchedule(stationary_coefficients(book.side(s), book.L), bundle.intensity, bundle.penalty)
                 for s in ('ask', 'bid'))


@pytest.fixture(scope='module')
def paired(bundle, schedules):
    """Ensembles with and without incentives driven by the same random streams."""
    common = dict(book=bundle.book, intensity=bundle.intensity, u0=BookState.empty(bundle.book.L, DX),
                  T=5.0, dx=DX, dt=DT, seed=99)
    return ensemble_average(20, schedules=schedules, **common), ensemble_average(20, schedules=None, **common)


class TestBookState:
    def test_empty(self):
        """Empty book on the reference grid"""
        state = BookState.empty(0.11, DX)
        assert len(state.ask) == 56
        assert state.L == pytest.approx(0.11)
        assert state.x_bid[0] == pytest.approx(-0.11)

    def test_mirroring(self):
        """Bid side is stored negative and read back mirrored"""
        ask = np.array([0.0, 1.0, 2.0, 0.0])
        bid = np.array([0.0, 3.0, 4.0, 0.0])
        state = BookState.from_mirrored(ask, bid, 0.01)
        assert np.array_equal(state.bid, np.array([0.0, -4.0, -3.0, 0.0]))
        assert np.array_equal(state.mirrored('bid'), bid)

    def test_sign_convention(self):
        """Ask is nonnegative, bid nonpositive"""
        with pytest.raises(ParameterError):
            BookState(ask=np.array([0.0, -1.0, 0.0]), bid=np.zeros(3), dx=0.01)
        with pytest.raises(ParameterError):
            BookState(ask=np.zeros(3), bid=np.array([0.0, 1.0, 0.0]), dx=0.01)

    def test_boundary_nodes(self):
        """Both ends of each side hold zero"""
        with pytest.raises(ParameterError):
            BookState(ask=np.array([1.0, 1.0, 0.0]), bid=np.zeros(3), dx=0.01)

    def test_half_filled(self, bundle):
        """Half the stationary mean, identical on both sides"""
        state = BookState.half_filled(bundle.book, bundle.intensity, DX)
        assert state.ask.max() > 0
        assert np.allclose(state.mirrored('bid'), state.ask)


class TestLimitVolumes:
    def test_volumes_add_up(self):
        """Per-limit volumes sum to the trapezoid integral"""
        x = np.linspace(0.0, 0.11, 111)
        profile = np.sin(np.pi * x / 0.11)
        volumes = limit_volumes(profile, 1e-3, 0.01, 10)
        assert volumes.shape == (10,)
        assert volumes.sum() == pytest.approx(integrate.trapezoid(profile, dx=1e-3), rel=1e-12)

    def test_last_cell_folded(self):
        """The cell beyond the last limit joins the last limit"""
        profile = np.ones(111)
        volumes = limit_volumes(profile, 1e-3, 0.01, 10)
        assert volumes[0] == pytest.approx(0.01)
        assert volumes[-1] == pytest.approx(0.02)

    def test_batch_axis(self):
        """One row of volumes per path"""
        profiles = np.ones((3, 111))
        assert limit_volumes(profiles, 1e-3, 0.01, 10).shape == (3, 10)

    def test_tick_must_be_multiple_of_step(self):
        """Tick not a multiple of dx is refused"""
        with pytest.raises(GridError):
            limit_volumes(np.ones(111), 3e-3, 0.01, 10)


class TestSimulator:
    def test_degenerate_decay(self, bundle):
        """No transport, noise or arrivals: u decays like exp(alpha t)"""
        still = SideParams(eta=0.0, beta=0.0, alpha=-0.2, sigma=0.0)
        book = BookParams(ask=still, bid=still, rho=0.0, L=0.11, tick=0.01)
        silent = IntensityParams(lam=0.0, kappa=1.0, lam0=0.0, kappa0=1.0, r=0.5)
        x = np.linspace(0.0, 0.11, 56)
        profile = np.sin(np.pi * x / 0.11)
        profile[0] = profile[-1] = 0.0
        u0 = BookState.from_mirrored(profile, profile, DX)
        terminal, _ = simulate_book(book, silent, None, u0, 10.0, DX, DT, seed=1)
        expected = profile[1:-1] * math.exp(-0.2 * 10.0)
        assert np.max(np.abs(terminal.ask[1:-1] - expected) / expected) <= 1e-6
        assert np.allclose(terminal.mirrored('bid'), terminal.ask, rtol=1e-12, atol=0)

    def test_mirror_symmetry_without_noise(self, bundle):
        """Identical sides and mirrored initial books stay mirrored under transport"""
        side = SideParams(eta=1e-3, beta=2e-2, alpha=-0.2, sigma=0.0)
        book = BookParams(ask=side, bid=side, rho=-0.05, L=0.11, tick=0.01)
        schedule = StationarySchedule(stationary_coefficients(side, book.L), bundle.intensity, bundle.penalty)
        x = np.linspace(0.0, book.L, 56)
        profile = 1e3 * x * (book.L - x) ** 2
        u0 = BookState.from_mirrored(profile, profile, DX)
        terminal, _ = simulate_book(book, bundle.intensity, (schedule, schedule), u0, 2.0, DX, DT, seed=4)
        assert terminal.ask.max() > 0
        assert np.allclose(terminal.mirrored('bid'), terminal.ask, rtol=1e-12, atol=0)

    def test_recorded_path_keeps_invariants(self, bundle, schedules):
        """Every snapshot has zero boundaries and the right signs"""
        _, path = simulate_book(bundle.book, bundle.intensity, schedules, BookState.empty(bundle.book.L, DX),
                                1.0, DX, DT, seed=3, record_every=100)
        assert len(path.states) == 6
        for state in path.states:
            assert state.ask[0] == 0 and state.ask[-1] == 0
            assert np.all(state.ask >= 0) and np.all(state.bid <= 0)
        frame = path.to_frame('bid')
        assert list(frame.columns) == ['t', 'x', 'u']
        assert (frame['u'] <= 0).all()

    def test_same_seed_same_path(self, bundle, schedules):
        """Same seed and path index reproduce the path exactly"""
        u0 = BookState.empty(bundle.book.L, DX)
        first, _ = simulate_book(bundle.book, bundle.intensity, schedules, u0, 1.0, DX, DT, seed=8, path_index=4)
        second, _ = simulate_book(bundle.book, bundle.intensity, schedules, u0, 1.0, DX, DT, seed=8, path_index=4)
        assert np.array_equal(first.ask, second.ask)
        assert np.array_equal(first.bid, second.bid)

    def test_noise_correlation(self, bundle):
        """Ask and bid increments carry the rho correlation"""
        simulator = BookSimulator(bundle.book, bundle.intensity, DX, DT, 10.0)
        noise = simulator.draw_noise(seed=2, path_indices=range(4))
        assert noise.shape == (5000, 2, 4)
        increments = noise.transpose(0, 2, 1).reshape(-1, 2)
        corr = np.corrcoef(increments[:, 0], increments[:, 1])[0, 1]
        assert corr == pytest.approx(-0.05, abs=0.03)

    def test_grid_must_divide_domain(self, bundle):
        """dx must divide L"""
        with pytest.raises(GridError):
            BookSimulator(bundle.book, bundle.intensity, 3e-3, DT, 10.0)

    def test_noise_stability_bound(self, bundle):
        """sigma² dt above the limit is refused"""
        with pytest.raises(StabilityError):
            BookSimulator(bundle.book, bundle.intensity, DX, 2.0, 10.0)

    def test_initial_book_must_conform(self, bundle):
        """Initial book on another grid is refused"""
        simulator = BookSimulator(bundle.book, bundle.intensity, DX, DT, 1.0)
        with pytest.raises(GridError):
            simulator.run(BookState.empty(bundle.book.L, 1e-3), seed=1, path_indices=[0])

    def test_stationary_mean_profile(self, bundle):
        """Nonnegative, zero on the boundary, not identically zero"""
        profile = stationary_mean_profile(bundle.book.ask, bundle.book.L, DX, bundle.intensity)
        assert profile[0] == 0 and profile[-1] == 0
        assert np.all(profile >= 0) and profile.max() > 0


class TestEnsemble:
    def test_incentives_add_liquidity(self, paired):
        """First three limits hold more volume with incentives"""
        with_incentives, without = paired
        for k in range(3):
            comparison = paired_comparison(with_incentives.path_limit_volumes['ask'][:, k],
                                           without.path_limit_volumes['ask'][:, k])
            assert comparison.mean_diff > 0
            assert comparison.z > 3

    def test_no_truncation_at_small_noise(self, paired):
        """Reference noise rarely hits the positivity floor"""
        with_incentives, _ = paired
        assert with_incentives.truncation_fraction < 0.05
        assert not with_incentives.noise_dominated

    def test_shape_frames(self, paired):
        """Shape tables per side with the expected signs"""
        with_incentives, _ = paired
        ask = with_incentives.shape_frame('ask')
        bid = with_incentives.shape_frame('bid')
        assert list(ask.columns) == ['x', 'mean_u', 'std_u']
        assert (ask['mean_u'] >= 0).all() and (bid['mean_u'] <= 0).all()
        assert bid['x'].iloc[0] == pytest.approx(-0.11)

    def test_limits_frame(self, paired):
        """Ten limits per side"""
        frame = paired[0].limits_frame()
        assert list(frame.columns) == ['limit', 'side', 'volume']
        assert len(frame) == 20

    def test_gain_analyzer(self, paired):
        """Gain table columns and a positive total gain"""
        metrics = GainAnalyzer(*paired).calculate_all_metrics()
        assert list(metrics['table'].columns) == ['limit', 'volume_with', 'volume_without', 'diff', 'stderr', 'z']
        assert metrics['total'].mean_diff > 0
        assert metrics['first_limit_rank_with'] <= metrics['first_limit_rank_without']

    def test_worker_count_does_not_change_results(self, bundle, schedules):
        """Serial and parallel ensembles are identical"""
        common = dict(book=bundle.book, intensity=bundle.intensity, schedules=schedules,
                      u0=BookState.empty(bundle.book.L, DX), T=0.5, dx=DX, dt=DT, seed=17)
        serial = ensemble_average(60, n_jobs=1, **common)
        parallel = ensemble_average(60, n_jobs=2, **common)
        for side in ('ask', 'bid'):
            assert np.array_equal(serial.mean[side], parallel.mean[side])
            assert np.array_equal(serial.std[side], parallel.std[side])

    def test_doubled_schedule_adds_volume(self, bundle, schedules):
        """Twice the incentive never leaves less mean volume at any node"""
        common = dict(book=bundle.book, intensity=bundle.intensity, u0=BookState.empty(bundle.book.L, DX),
                      T=1.0, dx=DX, dt=DT, seed=31)
        base = ensemble_average(10, schedules=schedules, **common)
        doubled = ensemble_average(10, schedules=tuple(s.scaled(2.0) for s in schedules), **common)
        for side in ('ask', 'bid'):
            assert np.all(doubled.mean[side] >= base.mean[side] - 1e-10 * base.mean[side].max())
            assert np.all(doubled.path_total_volumes[side] > base.path_total_volumes[side])

    def test_needs_two_paths(self, bundle):
        """A single path has no spread"""
        with pytest.raises(ParameterError):
            ensemble_average(1, bundle.book, bundle.intensity, None, BookState.empty(bundle.book.L, DX),
                             1.0, DX, DT, seed=1)


class TestObjective:
    def test_incentives_pay_off(self, bundle, schedules):
        """Optimal incentives beat none on paired paths"""
        common = dict(book=bundle.book, intensity=bundle.intensity, penalty=bundle.penalty,
                      u0=BookState.empty(bundle.book.L, DX), T=2.0, dx=DX, dt=DT, n_paths=10, seed=23)
        optimal = estimate_objective(schedules=schedules, **common)
        none = estimate_objective(schedules=None, **common)
        assert none.penalty_integral == 0.0
        assert optimal.penalty_integral > 0.0
        assert paired_comparison(optimal.per_path, none.per_path).mean_diff > 0

    def test_empty_silent_book_scores_zero(self, bundle):
        """No orders, no arrivals and no incentive give an objective of exactly zero"""
        silent = IntensityParams(lam=0.0, kappa=100.0, lam0=0.0, kappa0=50.0, r=0.5)
        estimate = estimate_objective(bundle.book, silent, bundle.penalty, None, BookState.empty(bundle.book.L, DX),
                                      T=1.0, dx=DX, dt=DT, n_paths=4, seed=6)
        assert estimate.mean == 0.0
        assert estimate.stderr == 0.0
        assert estimate.penalty_integral == 0.0
        assert np.all(estimate.per_path == 0.0)


class TestStatistics:
    def test_mean_and_stderr(self):
        """Sample mean and standard error"""
        mean, stderr = mean_and_stderr([1.0, 2.0, 3.0, 4.0])
        assert mean == 2.5
        assert stderr == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)

    def test_single_sample(self):
        """One sample has zero standard error"""
        assert mean_and_stderr([5.0]) == (5.0, 0.0)

    def test_paired_zero_variance(self):
        """Constant differences give an infinite z"""
        comparison = paired_comparison([2.0, 3.0], [1.0, 2.0])
        assert comparison.mean_diff == 1.0
        assert comparison.z == math.inf

    def test_paired_shape_mismatch(self):
        """Unequal sample sizes are refused"""
        with pytest.raises(ValueError):
            paired_comparison([1.0, 2.0], [1.0])

    def test_fullness_rank(self):
        """Rank 1 is the fullest limit"""
        assert fullness_rank([1.0, 5.0, 3.0], limit=1) == 3
        assert fullness_rank([1.0, 5.0, 3.0], limit=2) == 1
