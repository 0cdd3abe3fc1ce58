"""Scalar light-cone sine-Gordon reduction of the -1 flow and the hyperbolic residual check."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NonholoError
from .spectral import antideriv, deriv, grid_points


class WindingError(NonholoError):
    def __init__(self, winding: float):
        super().__init__(f"mean of theta_l corresponds to non-integer winding {winding:.6f}")
        self.winding = winding


class HyperbolicDomainError(NonholoError):
    def __init__(self, value: float):
        super().__init__(f"|v_tau| = {value:.6f} > 1 leaves the domain of sqrt(1 - |v_tau|^2)")
        self.value = value


@dataclass(frozen=True)
class SGConfig:
    dt: float
    steps: int
    stride: int = 1


@dataclass(frozen=True)
class SGTrajectory:
    taus: np.ndarray  # (M,)
    thetas: np.ndarray  # (M, N)
    Lbox: float
    winding: int

    def energies(self) -> np.ndarray:
        """E = 1/2 int theta_l^2 dl per snapshot."""
        dl = self.Lbox / self.thetas.shape[1]
        return np.array([0.5 * np.sum(theta_l(t, self.Lbox, self.winding) ** 2) * dl for t in self.thetas])

    def heq_fields(self) -> tuple[np.ndarray, np.ndarray]:
        """(v, v_tau) with v = -theta_l and v_tau = sin theta, each (M, N, 1)."""
        v = np.stack([-theta_l(t, self.Lbox, self.winding) for t in self.thetas])
        return v[..., None], np.sin(self.thetas)[..., None]


def _ramp(N: int, Lbox: float, winding: int) -> np.ndarray:
    return 2.0 * np.pi * winding * grid_points(N, Lbox) / Lbox


def theta_l(theta: np.ndarray, Lbox: float, winding: int) -> np.ndarray:
    N = theta.shape[0]
    return deriv(theta - _ramp(N, Lbox, winding), 1, Lbox) + 2.0 * np.pi * winding / Lbox


def infer_winding(theta0: np.ndarray, tol: float = 0.05) -> int:
    """Integer winding from the increment across the period (endpoint extrapolated linearly)."""
    total = theta0[-1] + (theta0[-1] - theta0[-2]) - theta0[0]
    w = total / (2.0 * np.pi)
    if abs(w - round(w)) > tol:
        raise WindingError(w)
    return int(round(w))


def _project(theta: np.ndarray) -> np.ndarray:
    """Shift the constant mode so that mean(sin theta) = 0 (solvability of theta_{l tau} = -sin theta)."""
    S = np.mean(np.sin(theta))
    C = np.mean(np.cos(theta))
    if S == 0.0:
        return theta
    return theta - np.arctan2(S, C)


def sg_evolve(theta0, Lbox: float, cfg: SGConfig, winding: int | None = None) -> SGTrajectory:
    """Evolve theta_{l tau} = -sin theta on a periodic grid.

    theta = 2 pi m l / L + phi with phi periodic.  The mean-free part obeys
    phi_tau = -D^{-1}(sin theta - <sin theta>); the constant mode moves so that
    the constraint <sin theta> = 0 is preserved, and is re-projected after
    each RK4 step to remove drift.
    """
    theta0 = np.asarray(theta0, dtype=float)
    N = theta0.shape[0]
    if winding is None:
        winding = infer_winding(theta0)
    elif winding != int(winding):
        raise WindingError(float(winding))
    ramp = _ramp(N, Lbox, winding)
    phi = _project(theta0) - ramp

    def rhs(ph):
        th = ph + ramp
        s = np.sin(th)
        c = np.cos(th)
        tilde = -antideriv(s - s.mean(), Lbox, check=False)
        # zero-mode velocity keeping d/dtau <sin theta> = 0
        return tilde - np.mean(c * tilde) / np.mean(c)

    taus = [0.0]
    snaps = [phi + ramp]
    dt = cfg.dt
    for n in range(1, cfg.steps + 1):
        k1 = rhs(phi)
        k2 = rhs(phi + 0.5 * dt * k1)
        k3 = rhs(phi + 0.5 * dt * k2)
        k4 = rhs(phi + dt * k3)
        phi = _project(phi + ramp + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)) - ramp
        if n % cfg.stride == 0 or n == cfg.steps:
            taus.append(n * dt)
            snaps.append(phi + ramp)
    return SGTrajectory(np.array(taus), np.array(snaps), float(Lbox), winding)


def heq_residual(v: np.ndarray, taus: np.ndarray, Lbox: float, v_tau: np.ndarray | None = None) -> float:
    """max |D_l(v_tau) + sqrt(1 - |v_tau|^2) v| over interior snapshots.

    ``v`` is (M, N, p).  v_tau is formed by central differences in tau
    (uniform spacing assumed); a supplied ``v_tau`` is used only for the
    domain check, never in the residual.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim == 2:
        v = v[..., None]
    if v.shape[0] < 3:
        raise ValueError("need at least three snapshots for central differences")
    dtau = np.diff(taus)
    if not np.allclose(dtau, dtau[0], rtol=1e-9, atol=0.0):
        raise ValueError("snapshots must be uniformly spaced in tau")
    vt = (v[2:] - v[:-2]) / (2.0 * dtau[0])
    mag = np.sqrt(np.sum(vt * vt, axis=-1))
    check = mag if v_tau is None else np.sqrt(np.sum(np.asarray(v_tau) ** 2, axis=-1))
    if np.max(check) > 1.0:
        raise HyperbolicDomainError(float(np.max(check)))
    worst = 0.0
    for j in range(vt.shape[0]):
        lhs = deriv(vt[j], 1, Lbox)
        res = lhs + np.sqrt(np.clip(1.0 - mag[j] ** 2, 0.0, None))[:, None] * v[j + 1]
        worst = max(worst, float(np.max(np.abs(res))))
    return worst


def mode_frequency(traj: SGTrajectory) -> float:
    """Angular frequency of the first Fourier mode, from its unwrapped phase (least squares)."""
    coeff = np.fft.fft(traj.thetas - _ramp(traj.thetas.shape[1], traj.Lbox, traj.winding)[None, :], axis=1)[:, 1]
    phase = np.unwrap(np.angle(coeff))
    slope = np.polyfit(traj.taus, phase, 1)[0]
    return float(abs(slope))
