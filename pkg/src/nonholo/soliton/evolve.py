"""RK4 evolution of hierarchy flows with Hamiltonian monitoring."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import BlowUpError, StabilityError
from .hierarchy import Hamiltonians, flow_rhs_array, hamiltonian_values
from .spectral import CurveField, antideriv, dealias as dealias_fn

BLOWUP = 1e6


@dataclass(frozen=True)
class HierarchyConfig:
    k: int
    dt: float
    steps: int
    dealias: bool = False
    stride: int = 0  # snapshot stride; 0 keeps only the first and last state
    override_dt: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.steps < 0:
            raise ValueError("steps must be non-negative")
        if self.k not in (0, 1, 2):
            raise ValueError("flow index must be 0, 1 or 2")


def stability_bound(k: int, dl: float) -> float:
    """Largest dt accepted without override (empirical RK4 constants)."""
    return 0.5 * dl if k == 0 else 0.05 * dl ** (2 * k + 1)


@dataclass
class FlowState:
    field: CurveField
    tau: float = 0.0
    Rbar: float = 0.0
    H: Hamiltonians | None = None
    extras: dict = field(default_factory=dict)

    def with_diagnostics(self) -> "FlowState":
        self.H = hamiltonian_values(self.field.values, self.field.Lbox)
        return self

    def diagnostics(self) -> dict:
        """Covector w = v (lowest member), its wedge potential and the hierarchy fields."""
        from .hierarchy import e_perp_closed

        v = self.field.values
        L = self.field.Lbox
        M = v[:, :, None] * v[:, None, :] - v[:, :, None] * v[:, None, :]  # v (x) w - w (x) v with w = v
        theta = antideriv(M, L, check=False)
        return {
            "varpi": v.copy(),
            "Theta": theta,
            "e_perp": [e_perp_closed(v, k, L) for k in range(3)],
            "H": hamiltonian_values(v, L).as_dict(),
        }


def _rk4_step(f, y: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def evolve(state: FlowState, cfg: HierarchyConfig) -> list[FlowState]:
    """Integrate v_tau = flow_rhs(v, k, Rbar) with classical RK4; returns snapshots."""
    fld = state.field
    bound = stability_bound(cfg.k, fld.dl)
    if cfg.dt > bound and not cfg.override_dt:
        raise StabilityError(f"dt = {cfg.dt:.3e} exceeds the k={cfg.k} bound {bound:.3e}")
    L = fld.Lbox
    if cfg.dealias:
        def f(y):
            return dealias_fn(flow_rhs_array(dealias_fn(y), cfg.k, state.Rbar, L))
    else:
        def f(y):
            return flow_rhs_array(y, cfg.k, state.Rbar, L)

    y = np.array(fld.values)
    snaps = [FlowState(fld, state.tau, state.Rbar).with_diagnostics()]
    for n in range(1, cfg.steps + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            y_new = _rk4_step(f, y, cfg.dt)
        if not np.all(np.isfinite(y_new)) or np.max(np.abs(y_new)) > BLOWUP:
            last = FlowState(fld.with_values(y), state.tau + (n - 1) * cfg.dt, state.Rbar).with_diagnostics()
            raise BlowUpError(f"|v| exceeded {BLOWUP:g} at step {n}", last)
        y = y_new
        if n == cfg.steps or (cfg.stride and n % cfg.stride == 0):
            snaps.append(FlowState(fld.with_values(y), state.tau + n * cfg.dt, state.Rbar).with_diagnostics())
    return snaps


def relative_drift(snaps: list[FlowState], name: str) -> float:
    vals = np.array([getattr(s.H, name) for s in snaps])
    ref = abs(vals[0])
    return float(np.max(np.abs(vals - vals[0])) / (ref if ref > 0 else 1.0))


# -- kinematics helpers -------------------------------------------------------------------------------
def sech_soliton(N: int, Lbox: float, kappa: float, l0: float, images: int = 2) -> CurveField:
    """Periodized p=1 profile 2 kappa sech(kappa (l - l0)) (sum over nearby images)."""
    l = np.arange(N) * (Lbox / N)
    v = np.zeros(N)
    for j in range(-images, images + 1):
        v += 2.0 * kappa / np.cosh(kappa * (l - l0 + j * Lbox))
    return CurveField(v[:, None], Lbox)


def measure_shift(ref: np.ndarray, cur: np.ndarray, Lbox: float) -> float:
    """Shift s (mod Lbox, in (-L/2, L/2]) maximizing the correlation of cur(l) with ref(l - s).

    Coarse grid argmax of the circular cross-correlation, refined by Newton
    iterations on the band-limited (Fourier-interpolated) correlation.
    """
    ref = np.asarray(ref, dtype=float).reshape(len(ref), -1)
    cur = np.asarray(cur, dtype=float).reshape(len(cur), -1)
    N = ref.shape[0]
    A = np.fft.fft(cur, axis=0)
    B = np.fft.fft(ref, axis=0)
    cross = np.sum(A * np.conj(B), axis=1)
    k = 2.0 * np.pi * np.fft.fftfreq(N, d=Lbox / N)
    corr = np.real(np.fft.ifft(cross))
    s = int(np.argmax(corr)) * Lbox / N
    for _ in range(30):
        ph = np.exp(1j * k * s)
        c1 = np.real(np.sum(1j * k * cross * ph))
        c2 = np.real(np.sum(-(k ** 2) * cross * ph))
        if c2 >= 0:
            break
        step = -c1 / c2
        s += step
        if abs(step) < 1e-14 * Lbox:
            break
    s = (s + Lbox / 2) % Lbox - Lbox / 2
    return float(s)


def shift_field(values: np.ndarray, s: float, Lbox: float) -> np.ndarray:
    """Band-limited translate: returns u(l - s)."""
    values = np.asarray(values, dtype=float)
    N = values.shape[0]
    k = 2.0 * np.pi * np.fft.fftfreq(N, d=Lbox / N)
    ph = np.exp(-1j * k * s)
    if N % 2 == 0:
        ph[N // 2] = np.cos(k[N // 2] * s)
    shape = (N,) + (1,) * (values.ndim - 1)
    return np.real(np.fft.ifft(np.fft.fft(values, axis=0) * ph.reshape(shape), axis=0))
