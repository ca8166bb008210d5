import numpy as np
import pytest

from lpm.spectral import dft, dft_matrix, fft_radix2, idft, is_power_of_two, naive_dft


def test_power_of_two():
    assert [n for n in range(1, 40) if is_power_of_two(n)] == [1, 2, 4, 8, 16, 32]


@pytest.mark.parametrize("n", [1, 2, 4, 8, 16, 32, 64, 128])
def test_radix2_matches_naive(n, rng):
    x = rng.normal(size=(3, n)) + 1j * rng.normal(size=(3, n))
    np.testing.assert_allclose(fft_radix2(x) / np.sqrt(n), naive_dft(x), atol=1e-9)


@pytest.mark.parametrize("n", [3, 5, 10, 12, 33])
def test_dft_matches_numpy_for_any_length(n, rng):
    x = rng.normal(size=n) + 1j * rng.normal(size=n)
    np.testing.assert_allclose(dft(x), np.fft.fft(x) / np.sqrt(n), atol=1e-12)


def test_constant_vector_goes_to_dc():
    np.testing.assert_allclose(dft(np.ones(4, dtype=complex)), [2, 0, 0, 0], atol=1e-15)


def test_rotating_phasor_example():
    np.testing.assert_allclose(dft(np.array([1, 1j, -1, -1j])), [0, 2, 0, 0], atol=1e-15)


@pytest.mark.parametrize("n", [4, 8, 10, 16])
def test_idft_inverts(n, rng):
    x = rng.normal(size=(2, n)) + 1j * rng.normal(size=(2, n))
    np.testing.assert_allclose(idft(dft(x)), x, atol=1e-12)


def test_dft_matrix_is_unitary_and_read_only():
    F = dft_matrix(10)
    np.testing.assert_allclose(F @ F.conj().T, np.eye(10), atol=1e-12)
    with pytest.raises(ValueError):
        dft_matrix(10)[0, 0] = 0
