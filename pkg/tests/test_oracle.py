import math

import numpy as np
import pytest

from paramguide import correlations, oracle, spectral_solver
from paramguide.errors import AccuracyError, InvalidParameterError, PreconditionError
from paramguide.model import THZ
from paramguide.verification import random_device


def test_transfer_against_closed_form(device):
    nu = np.linspace(-15, 15, 31) * THZ
    for cfg in (device, device.replace(phase_mismatch_dk=2.5, coupling_phase=1.1)):
        T = oracle.integrate_transfer(nu, 0.1, cfg)
        ref = spectral_solver.transfer_matrix(nu, 0.1, cfg)
        assert np.max(np.abs(T.entries - ref)) / np.max(np.abs(ref)) < 1e-9
        assert T.error_estimate < 1e-6


def test_rk4_fourth_order(device):
    nu = 4 * THZ
    ref = spectral_solver.transfer_matrix(nu, 0.1, device)
    errs = [np.max(np.abs(oracle.integrate_transfer(nu, 0.1, device, 0.1 / n, check=False).entries - ref))
            for n in (64, 128, 256)]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert all(3.8 < p < 4.2 for p in orders)


def test_richardson_guard(device):
    with pytest.raises(AccuracyError):
        oracle.integrate_transfer(15 * THZ, 0.1, device, step=0.05)


def test_zero_length_identity(device):
    T = oracle.integrate_transfer(np.array([0.0, THZ]), 0.0, device).entries
    assert np.array_equal(T, np.broadcast_to(np.eye(2), (2, 2, 2)))
    assert oracle.noise_flux_quadrature(THZ, 0.0, device) == (0.0, 0.0)
    with pytest.raises(InvalidParameterError):
        oracle.integrate_transfer(0.0, -1.0, device)


def test_shifted_origin_same_intensity(device):
    cfg = device.replace(phase_mismatch_dk=3.0)
    a = oracle.integrate_transfer(THZ, 0.1, cfg).entries
    b = oracle.integrate_transfer(THZ, 0.1, cfg, z0=0.37).entries
    assert np.allclose(np.abs(a), np.abs(b), rtol=1e-12)


def test_noise_quadrature_matches_closed_form():
    rng = np.random.default_rng(7)
    for _ in range(10):
        cfg = random_device(rng)
        nu = rng.uniform(-5, 5) * THZ
        q = oracle.noise_flux_quadrature(nu, cfg.length, cfg, n_T=0.0)
        c = spectral_solver.noise_flux_density(nu, cfg.length, cfg)
        scale = max(c)
        assert abs(q[0] - c[0]) <= 1e-8 * scale and abs(q[1] - c[1]) <= 1e-8 * scale


def test_thermal_occupation_adds_noise(device):
    cold = oracle.noise_flux_quadrature(THZ, 0.1, device, n_T=0.0)
    warm = oracle.noise_flux_quadrature(THZ, 0.1, device, n_T=0.5)
    assert warm[0] > cold[0] and warm[1] > cold[1]
    with pytest.raises(InvalidParameterError):
        oracle.noise_flux_quadrature(THZ, 0.1, device, n_T=-1.0)


def test_greens_causality(device):
    greens = oracle.noise_greens(THZ, 0.1, device, steps=64)
    assert not np.any(greens.at(0.2))
    assert np.allclose(greens.at(0.1), np.eye(2))
    with pytest.raises(InvalidParameterError):
        greens.at(0.1 / 3)


def test_commutator_sum():
    rng = np.random.default_rng(11)
    for _ in range(5):
        cfg = random_device(rng)
        assert oracle.commutator_sum(rng.uniform(-5, 5) * THZ, cfg.length, cfg) == pytest.approx(1.0, abs=1e-8)


def test_wick_matches_correlations(device):
    sym = correlations.symmetric_loss_config(device)
    w = correlations.Windows(6 * THZ, 0.3 * THZ)
    taus = np.linspace(-3e-13, 3e-13, 7)
    m = oracle.wick_fourth_moment((w.te, w.tm), 0.1, taus, sym, bins=2048)
    r = correlations.theta(w, 0.1, taus, device)
    assert np.max(np.abs(m.K - r.K)) / np.max(r.K) < 1e-6
    assert m.D_te == pytest.approx(r.D_te, rel=1e-6)
    assert m.D_tm == pytest.approx(r.D_tm, rel=1e-6)
    assert m.flux_te == pytest.approx(r.flux, rel=1e-6)
    assert m.commutator_defect < 1e-8


def test_wick_full_kernel_and_defect(device):
    w = correlations.Windows(6 * THZ, 3 * THZ)
    m = oracle.wick_fourth_moment((w.te, w.tm), 0.1, 0.0, device, bins=1024)
    k = correlations.correlation_K(w, 0.1, 0.0, device, kernel="full")
    assert m.K == pytest.approx(k, rel=1e-5)
    # unequal losses without Langevin terms: outputs fail to commute
    assert m.commutator_defect > 0.1


def test_wick_window_checks(device):
    with pytest.raises(PreconditionError):
        oracle.wick_fourth_moment(((1e13, 2e13), (-2e13, -1e13 + 1e11)), 0.1, 0.0, device)
    with pytest.raises(PreconditionError):
        oracle.wick_fourth_moment(((-1e12, 1e12), (-1e12, 1e12)), 0.1, 0.0, device)
    with pytest.raises(PreconditionError):
        oracle.wick_fourth_moment(((1e13, 1e13), (-1e13, -1e13)), 0.1, 0.0, device)
