"""Periodic curve fields and spectral calculus in the arclength variable."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import NonZeroMeanError
from . import fourier


@dataclass(frozen=True)
class CurveField:
    """Samples v(l_k), l_k = k Lbox / N, of a p-component periodic field; ``values`` is (N, p)."""

    values: np.ndarray
    Lbox: float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.ndim != 2 or vals.shape[1] < 1:
            raise ValueError("values must have shape (N, p)")
        N = vals.shape[0]
        if N < 2 or N & (N - 1):
            raise ValueError(f"grid size must be a power of two, got {N}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        if not self.Lbox > 0:
            raise ValueError("Lbox must be positive")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "Lbox", float(self.Lbox))

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def dl(self) -> float:
        return self.Lbox / self.N

    @property
    def l(self) -> np.ndarray:
        return grid_points(self.N, self.Lbox)

    def with_values(self, values: np.ndarray) -> "CurveField":
        return CurveField(values, self.Lbox)

    @classmethod
    def from_function(cls, fn, N: int, Lbox: float) -> "CurveField":
        """Sample ``fn(l)`` (returning (N,) or (N, p)) on the grid."""
        return cls(np.asarray(fn(grid_points(N, Lbox)), dtype=float), Lbox)

    @classmethod
    def zeros(cls, N: int, p: int, Lbox: float) -> "CurveField":
        return cls(np.zeros((N, p)), Lbox)


def grid_points(N: int, Lbox: float) -> np.ndarray:
    return np.arange(N) * (Lbox / N)


@lru_cache(maxsize=64)
def wavenumbers(N: int, Lbox: float) -> np.ndarray:
    """Angular wavenumbers in transform order; the Nyquist entry is kept (sign +)."""
    k = np.fft.fftfreq(N, d=1.0 / N)
    k[N // 2] = N // 2
    return 2.0 * np.pi * k / Lbox


@lru_cache(maxsize=256)
def _multiplier(N: int, Lbox: float, order: int) -> np.ndarray:
    k = wavenumbers(N, Lbox)
    mult = (1j * k) ** order
    if order % 2:
        mult[N // 2] = 0.0  # odd derivatives of the Nyquist mode are not representable
    return mult


@lru_cache(maxsize=64)
def _inverse_multiplier(N: int, Lbox: float) -> np.ndarray:
    k = wavenumbers(N, Lbox)
    out = np.zeros(N, dtype=complex)
    nz = k != 0
    out[nz] = 1.0 / (1j * k[nz])
    out[N // 2] = 0.0
    return out


def _bcast(mult: np.ndarray, arr: np.ndarray) -> np.ndarray:
    return mult.reshape((-1,) + (1,) * (arr.ndim - 1))


def deriv(arr: np.ndarray, order: int, Lbox: float) -> np.ndarray:
    """Spectral derivative of real samples along axis 0."""
    if order == 0:
        return np.array(arr, dtype=float)
    N = arr.shape[0]
    spec = fourier.fft(arr)
    return fourier.ifft(spec * _bcast(_multiplier(N, float(Lbox), order), arr)).real


def derivs(arr: np.ndarray, max_order: int, Lbox: float) -> list[np.ndarray]:
    """[arr, arr_l, ..., arr_{max_order l}] from a single forward transform."""
    N = arr.shape[0]
    spec = fourier.fft(arr)
    out = [np.array(arr, dtype=float)]
    for order in range(1, max_order + 1):
        out.append(fourier.ifft(spec * _bcast(_multiplier(N, float(Lbox), order), arr)).real)
    return out


def check_mean_zero(arr: np.ndarray, labels=None, rel: float = 1e-8) -> None:
    """Raise NonZeroMeanError if any column's mean exceeds rel * (rms + 1e-30)."""
    a = arr.reshape(arr.shape[0], -1)
    means = a.mean(axis=0)
    rms = np.sqrt(np.mean(a * a, axis=0))
    bad = np.flatnonzero(np.abs(means) >= rel * (rms + 1e-30))
    if bad.size:
        j = int(bad[0])
        comp = labels[j] if labels is not None else (np.unravel_index(j, arr.shape[1:]) if arr.ndim > 2 else j)
        raise NonZeroMeanError(comp, float(means[j]))


def antideriv(arr: np.ndarray, Lbox: float, check: bool = True) -> np.ndarray:
    """Mean-zero periodic antiderivative along axis 0."""
    if check:
        check_mean_zero(arr)
    N = arr.shape[0]
    spec = fourier.fft(arr)
    return fourier.ifft(spec * _bcast(_inverse_multiplier(N, float(Lbox)), arr)).real


def dealias(arr: np.ndarray) -> np.ndarray:
    """2/3-rule truncation: zero modes with |index| > N/3."""
    N = arr.shape[0]
    spec = fourier.fft(arr)
    idx = np.abs(np.fft.fftfreq(N, d=1.0 / N))
    mask = (idx <= N / 3.0).astype(float)
    return fourier.ifft(spec * _bcast(mask, arr)).real


def dx(u: CurveField, order: int = 1) -> CurveField:
    """order-th spectral l-derivative of each component (1 <= order <= 5)."""
    if not 1 <= order <= 5:
        raise ValueError("derivative order must be in 1..5")
    return u.with_values(deriv(u.values, order, u.Lbox))


def dx_inverse(u: CurveField) -> CurveField:
    """Mean-zero periodic antiderivative; each component must have (near) zero grid mean."""
    return u.with_values(antideriv(u.values, u.Lbox))
