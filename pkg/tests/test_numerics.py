"""
Test suite for tridiagonal operators and counter-based random streams
"""
import numpy as np
import pytest

from models.errors import ParameterError
from utils import rng
from utils.tridiag import choose_scheme, convection_diffusion_operator


def dense(operator):
    n = operator.size
    matrix = np.diag(operator.diag)
    matrix[np.arange(1, n), np.arange(n - 1)] = operator.lower[1:]
    matrix[np.arange(n - 1), np.arange(1, n)] = operator.upper[:-1]
    return matrix


class TestTridiagonal:
    @pytest.fixture
    def operator(self):
        return convection_diffusion_operator(20, 5e-3, 1e-3, -2e-2, -0.2)

    def test_matvec_matches_dense(self, operator):
        """Banded product equals the dense product"""
        v = np.linspace(1.0, 2.0, 20)
        assert np.allclose(operator.matvec(v), dense(operator) @ v)

    def test_solve_matches_dense(self, operator):
        """Banded solve equals the dense solve"""
        shifted = operator.shifted(1.0, -0.01)
        rhs = np.ones((20, 3))
        assert np.allclose(shifted.solve(rhs), np.linalg.solve(dense(shifted), rhs))

    def test_scheme_selection(self):
        """Central while the cell Peclet number allows it"""
        assert choose_scheme(1e-3, 2e-2, 1e-3) == 'central'
        assert choose_scheme(1e-6, 2e-2, 1e-3) == 'upwind'
        assert choose_scheme(0.0, 0.0, 1e-3) == 'central'
        with pytest.raises(ParameterError):
            choose_scheme(1e-3, 2e-2, 1e-3, scheme='spectral')

    def test_upwind_is_monotone(self):
        """Upwind off-diagonals are nonnegative"""
        operator = convection_diffusion_operator(10, 1e-2, 1e-6, 2e-2, -0.2)
        assert np.all(operator.lower[1:] >= 0) and np.all(operator.upper[:-1] >= 0)


class TestStreams:
    def test_same_coordinates_same_draws(self):
        """Same (seed, kind, index), same draws"""
        a = rng.stream(7, rng.BOOK_PATH, 3).standard_normal(5)
        b = rng.stream(7, rng.BOOK_PATH, 3).standard_normal(5)
        assert np.array_equal(a, b)

    def test_coordinates_separate_streams(self):
        """Changing any coordinate changes the stream"""
        a = rng.stream(7, rng.BOOK_PATH, 3).standard_normal(5)
        assert not np.array_equal(a, rng.stream(7, rng.BOOK_PATH, 4).standard_normal(5))
        assert not np.array_equal(a, rng.stream(7, rng.FEYNMAN_KAC_BATCH, 3).standard_normal(5))
        assert not np.array_equal(a, rng.stream(8, rng.BOOK_PATH, 3).standard_normal(5))

    def test_full_width_seed(self):
        """Seeds up to 2**64 - 1 are accepted"""
        assert rng.stream(2 ** 64 - 1, rng.VALIDATION, 0).random() < 1.0
