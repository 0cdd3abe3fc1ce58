"""Discrete Fourier transforms along axis 0.

Three interchangeable backends produce the same transform:

* ``"radix2"``: iterative Cooley-Tukey written here (power-of-two sizes);
  the butterfly order is fixed, so results do not depend on scheduling.
* ``"naive"``: the O(N^2) matrix product, kept as a correctness reference.
* ``"numpy"``: ``numpy.fft``, the default for long time integrations.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

_BACKENDS = ("numpy", "radix2", "naive")
_backend = "numpy"


def set_backend(name: str) -> str:
    """Select the transform backend; returns the previous one."""
    global _backend
    if name not in _BACKENDS:
        raise ValueError(f"unknown FFT backend {name!r}; choose from {_BACKENDS}")
    prev, _backend = _backend, name
    return prev


def get_backend() -> str:
    return _backend


@lru_cache(maxsize=None)
def _bitrev(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


@lru_cache(maxsize=None)
def _twiddles(m: int) -> np.ndarray:
    return np.exp(-1j * np.pi * np.arange(m) / m)


def fft_radix2(x: np.ndarray) -> np.ndarray:
    """Forward transform along axis 0 (length must be a power of two)."""
    x = np.asarray(x, dtype=complex)
    n = x.shape[0]
    if n & (n - 1) or n == 0:
        raise ValueError(f"radix-2 FFT needs a power-of-two length, got {n}")
    tail = x.shape[1:]
    y = x[_bitrev(n)].reshape(n, -1).T  # (batch, n)
    batch = y.shape[0]
    m = 1
    while m < n:
        blocks = y.reshape(batch, n // (2 * m), 2, m)
        even = blocks[:, :, 0, :]
        odd = blocks[:, :, 1, :] * _twiddles(m)
        y = np.concatenate([even + odd, even - odd], axis=-1).reshape(batch, n)
        m *= 2
    return y.T.reshape((n,) + tail)


@lru_cache(maxsize=8)
def _dft_matrix(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n)


def dft_naive(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    n = x.shape[0]
    return (_dft_matrix(n) @ x.reshape(n, -1)).reshape(x.shape)


def fft(x: np.ndarray, backend: str | None = None) -> np.ndarray:
    b = backend or _backend
    if b == "numpy":
        return np.fft.fft(x, axis=0)
    if b == "radix2":
        return fft_radix2(x)
    return dft_naive(x)


def ifft(X: np.ndarray, backend: str | None = None) -> np.ndarray:
    b = backend or _backend
    if b == "numpy":
        return np.fft.ifft(X, axis=0)
    n = X.shape[0]
    return np.conj(fft(np.conj(X), b)) / n
