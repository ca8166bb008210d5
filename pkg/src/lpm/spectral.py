"""Unitary discrete Fourier transforms along the last axis.

Power-of-two lengths use an iterative radix-2 decimation-in-time FFT; any
other length falls back to a cached dense DFT matrix.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@lru_cache(maxsize=None)
def _bit_reversal(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


@lru_cache(maxsize=None)
def _twiddles(size: int) -> np.ndarray:
    half = size // 2
    return np.exp(-2j * np.pi * np.arange(half) / size)


@lru_cache(maxsize=None)
def dft_matrix(n: int) -> np.ndarray:
    """Dense unitary DFT matrix ``F[k, m] = exp(-2j*pi*k*m/n) / sqrt(n)``."""
    k = np.arange(n)
    # reduce k*m mod n before scaling so large n keeps full phase accuracy
    phase = (np.outer(k, k) % n) * (-2.0 * np.pi / n)
    mat = np.exp(1j * phase) / np.sqrt(n)
    mat.setflags(write=False)
    return mat


def fft_radix2(x: np.ndarray) -> np.ndarray:
    """Unnormalised forward FFT along the last axis; length must be a power of two."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    if not is_power_of_two(n):
        raise ValueError(f"radix-2 FFT needs a power-of-two length, got {n}")
    lead = x.shape[:-1]
    out = x[..., _bit_reversal(n)]
    size = 2
    while size <= n:
        half = size // 2
        out = out.reshape(*lead, n // size, size)
        even = out[..., :half]
        odd = out[..., half:] * _twiddles(size)
        out = np.concatenate([even + odd, even - odd], axis=-1)
        size *= 2
    return out.reshape(*lead, n)


def naive_dft(x: np.ndarray) -> np.ndarray:
    """Unitary DFT by dense matrix product, O(n^2)."""
    x = np.asarray(x, dtype=np.complex128)
    return x @ dft_matrix(x.shape[-1]).T


def dft(x: np.ndarray) -> np.ndarray:
    """Unitary (1/sqrt(n)) forward DFT along the last axis."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    if n < 1:
        raise ValueError("DFT of an empty axis")
    if is_power_of_two(n):
        return fft_radix2(x) / np.sqrt(n)
    return naive_dft(x)


def idft(x: np.ndarray) -> np.ndarray:
    """Inverse of :func:`dft`; also its adjoint since the transform is unitary."""
    return np.conj(dft(np.conj(x)))
