import numpy as np
import pytest
from scipy.stats import qmc

from pmelab.errors import ConfigError
from pmelab.sobol import MAX_DIM, sobol_points


def van_der_corput(n):
    """Base-2 radical inverse of n, computed digit by digit."""
    x, f = 0.0, 0.5
    while n:
        x += f * (n & 1)
        n >>= 1
        f /= 2
    return x


def test_first_points_1d():
    got = sobol_points(1, 8, skip=1)[:, 0]
    np.testing.assert_array_equal(got, [0.5, 0.75, 0.25, 0.375, 0.875, 0.625, 0.125, 0.1875])


def test_1d_is_gray_coded_van_der_corput():
    # Gray-code order visits the radical inverses of i ^ (i >> 1)
    got = sobol_points(1, 64, skip=0)[:, 0]
    ref = [van_der_corput(i ^ (i >> 1)) for i in range(64)]
    np.testing.assert_array_equal(got, ref)


def test_first_point_2d():
    np.testing.assert_array_equal(sobol_points(2, 1, skip=1)[0], [0.5, 0.5])


@pytest.mark.filterwarnings("ignore:The balance properties")
@pytest.mark.parametrize("dim", [2, 5, 10, 32, 64])
def test_matches_scipy_unscrambled(dim):
    ref = qmc.Sobol(dim, scramble=False).random(257)
    got = sobol_points(dim, 256, skip=1)
    np.testing.assert_array_equal(got, ref[1:])


def test_range_and_dyadic_stratification():
    k = 7
    P = sobol_points(10, 2**k, skip=0)
    assert np.all((P >= 0) & (P < 1))
    for j in range(10):
        cells = np.floor(P[:, j] * 2**k).astype(int)
        assert sorted(cells) == list(range(2**k))


def test_skip_offsets_the_sequence():
    np.testing.assert_array_equal(sobol_points(3, 10, skip=5), sobol_points(3, 15, skip=0)[5:])


@pytest.mark.parametrize("dim", [0, MAX_DIM + 1])
def test_unsupported_dimension(dim):
    with pytest.raises(ConfigError):
        sobol_points(dim, 4)
