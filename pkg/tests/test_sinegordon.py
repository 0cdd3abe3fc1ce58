import numpy as np
import pytest

from nonholo.soliton import (HyperbolicDomainError, SGConfig, WindingError, heq_residual, mode_frequency,
                             sg_evolve)
from nonholo.soliton.spectral import grid_points

TWO_PI = 2 * np.pi


def small_wave(N=128, L=TWO_PI, amp=0.01):
    return amp * np.sin(TWO_PI * grid_points(N, L) / L)


def kink(N=256, L=40.0, a=1.0):
    l = grid_points(N, L)
    return 4 * np.arctan(np.exp(a * (l - L / 2)))


def test_zero_stays_zero():
    traj = sg_evolve(np.zeros(64), 5.0, SGConfig(0.05, 40))
    assert np.max(np.abs(traj.thetas)) == 0.0
    assert heq_residual(*traj.heq_fields()[:1], traj.taus, 5.0) == 0.0


@pytest.mark.parametrize("L", [TWO_PI, 10.0])
def test_linear_mode_frequency(L):
    omega = L / TWO_PI
    period = TWO_PI / omega
    dt = period / 200
    traj = sg_evolve(small_wave(L=L), L, SGConfig(dt, 2000))
    assert mode_frequency(traj) == pytest.approx(omega, rel=1e-2)


def test_heq_residual_of_sg_trajectory():
    traj = sg_evolve(small_wave(amp=0.3), TWO_PI, SGConfig(0.01, 600, stride=1))
    v, vt = traj.heq_fields()
    assert heq_residual(v, traj.taus, TWO_PI, v_tau=vt) < 1e-4


def test_heq_negative_control(rng):
    taus = np.arange(20) * 0.05
    v = 0.3 * rng.normal(size=(20, 64, 1))
    v = np.cumsum(v, axis=0) * 0.05
    assert heq_residual(v, taus, 4.0) > 0.1


def test_heq_domain_error():
    taus = np.arange(5) * 0.1
    v = np.zeros((5, 64, 1))
    v[:, 0, 0] = 2.0 * taus  # v_tau = 2
    with pytest.raises(HyperbolicDomainError):
        heq_residual(v, taus, 4.0)


def test_heq_requires_uniform_snapshots():
    with pytest.raises(ValueError):
        heq_residual(np.zeros((3, 64, 1)), np.array([0.0, 0.1, 0.3]), 4.0)
    with pytest.raises(ValueError):
        heq_residual(np.zeros((2, 64, 1)), np.array([0.0, 0.1]), 4.0)


def test_non_integer_winding_rejected():
    l = grid_points(64, 5.0)
    with pytest.raises(WindingError):
        sg_evolve(0.5 * TWO_PI * l / 5.0, 5.0, SGConfig(0.01, 1))
    with pytest.raises(WindingError):
        sg_evolve(np.zeros(64), 5.0, SGConfig(0.01, 1), winding=0.5)


def test_kink_energy_conserved():
    th = kink()
    traj = sg_evolve(th, 40.0, SGConfig(0.02, 500, stride=50))
    assert traj.winding == 1
    E = traj.energies()
    assert np.max(np.abs(E - E[0])) / E[0] < 1e-6


def test_constraint_mean_sin_zero():
    traj = sg_evolve(kink(), 40.0, SGConfig(0.02, 100, stride=10))
    assert np.max(np.abs(np.mean(np.sin(traj.thetas), axis=1))) < 1e-12
