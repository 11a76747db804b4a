import math

import mpmath
import numpy as np
import pytest

from paramguide import oracle
from paramguide.errors import PreconditionError, RangeError, UnsupportedRegimeError
from paramguide.model import THZ, SpectralGrid, phase_mismatch_D, total_spdc_bandwidth
from paramguide.spectral_solver import (Regime, asymptotic_flux_density, dispersion_point,
                                        flux_spectrum, integrate_band, k_coefficients, kappa,
                                        narrowband_gain, noise_flux_density, nondegenerate_flux,
                                        signal_flux_density, spectrum_from_callable,
                                        transfer_matrix)


def test_kappa_real_on_resonance(device):
    cfg = device.with_losses(3.5, 3.5)
    assert kappa(0.0, cfg) == pytest.approx(0.08, rel=1e-15)


def test_kappa_branch_without_coupling(lossless):
    cfg = lossless.replace(coupling_g=0.0, phase_mismatch_dk=4.0)
    assert kappa(0.0, cfg) == pytest.approx(2.0j, rel=1e-15)


def test_dispersion_point_against_high_precision(device):
    cfg = device.replace(coupling_phase=0.4)
    pt = dispersion_point(THZ, cfg)
    mpmath.mp.dps = 40
    g = mpmath.mpf("0.08") * mpmath.expj(mpmath.mpf("0.4"))
    nu = 2 * mpmath.pi * mpmath.mpf(10) ** 12
    vte, vtm = mpmath.mpf("8.24e9"), mpmath.mpf("8.34e9")
    D = nu * (1 / vte - 1 / vtm)
    k = mpmath.sqrt(abs(g) ** 2 - (D + 1j * (4 - 3)) ** 2 / 4)
    c = 0.5j * nu * (1 / vtm + 1 / vte) - mpmath.mpf("3.5")
    kp = (-D - 1j) / (2 * g) - 1j * k / g
    km = (-D - 1j) / (2 * g) + 1j * k / g
    for got, want in ((pt.kappa, k), (pt.mu_plus, c + k), (pt.mu_minus, c - k),
                      (pt.K_plus, kp), (pt.K_minus, km)):
        assert abs(got - complex(want)) <= 1e-11 * abs(complex(want))
    assert pt.D == pytest.approx(float(D), rel=1e-14)
    assert pt.K_plus * pt.K_minus == pytest.approx(np.exp(-0.8j), abs=1e-9)


def test_k_coefficients_need_coupling(device):
    with pytest.raises(ZeroDivisionError):
        k_coefficients(0.0, device.replace(coupling_g=0.0))
    pt = dispersion_point(0.0, device.replace(coupling_g=0.0), with_k=False)
    assert pt.K_plus is None


def test_signal_zero_coupling(device):
    assert signal_flux_density(THZ, 0.1, device.replace(coupling_g=0.0)) == 0.0


def test_signal_kappa_zero_limit(lossless):
    # lossless band edge D = 2g: kappa = 0
    nu = 2 * 0.08 / lossless.inverse_velocity_mismatch
    assert abs(kappa(nu, lossless)) < 1e-9
    L = 0.1
    assert signal_flux_density(nu, L, lossless) == pytest.approx(0.08 ** 2 * L * L / (2 * math.pi), rel=1e-9)


@pytest.mark.parametrize("losses", [(0.0, 0.0), (3.0, 3.0)])
def test_densities_continuous_at_branch_point(device, losses):
    cfg = device.with_losses(*losses)
    nu0 = 2 * 0.08 / cfg.inverse_velocity_mismatch
    nus = np.array([nu0 - 5e-11 * abs(nu0), nu0 + 5e-11 * abs(nu0)])
    s = signal_flux_density(nus, 0.1, cfg)
    assert abs(s[1] - s[0]) <= 1e-9 * abs(s[0])
    if losses[0] > 0:
        n_te, _ = noise_flux_density(nus, 0.1, cfg)
        assert n_te[0] > 0
        assert abs(n_te[1] - n_te[0]) <= 1e-9 * n_te[0]


def test_noise_at_kappa_zero_is_finite_limit(device):
    cfg = device.with_losses(3.0, 3.0)
    nu0 = 2 * 0.08 / cfg.inverse_velocity_mismatch
    at = noise_flux_density(nu0, 0.1, cfg)[0]
    near = noise_flux_density(nu0 * (1 + 1e-6), 0.1, cfg)[0]
    assert at > 0 and at == pytest.approx(near, rel=1e-6)


def test_noise_zero_length_and_temperature(device):
    assert noise_flux_density(THZ, 0.0, device) == (0.0, 0.0)
    with pytest.raises(UnsupportedRegimeError):
        noise_flux_density(THZ, 0.1, device.replace(reservoir_temperature=1e-15))


def test_noise_swap(device):
    nu = np.linspace(-20, 20, 401) * THZ
    te, tm = noise_flux_density(nu, 0.1, device)
    assert np.max(np.abs(te / tm - 0.75)) < 1e-12


def test_pair_symmetry_against_oracle(device):
    T = oracle.integrate_transfer(np.array([-3.0, 1.0, 5.0]) * THZ, 0.1, device).entries
    assert np.allclose(np.abs(T[:, 0, 1]), np.abs(T[:, 1, 0]), rtol=1e-10, atol=0)


def test_lossless_symplectic(lossless):
    nu = np.linspace(-10, 10, 51) * THZ
    T = transfer_matrix(nu, 0.3, lossless.replace(phase_mismatch_dk=1.3, coupling_phase=0.9))
    assert np.max(np.abs(np.abs(T[:, 0, 0]) ** 2 - np.abs(T[:, 0, 1]) ** 2 - 1)) < 1e-10


def test_transfer_matrix_singular_at_kappa_zero(lossless):
    with pytest.raises(PreconditionError):
        transfer_matrix(2 * 0.08 / lossless.inverse_velocity_mismatch, 0.1, lossless)


def test_asymptotic_high_gain_on_resonance(device):
    cfg = device.replace(coupling_g=50.0)
    val = asymptotic_flux_density(0.0, 0.05, cfg, Regime.HIGH_GAIN)
    g = 50.0
    expect = g * g / (2 * math.pi) * math.exp(-7 * 0.05) * math.sinh(g * 0.05) ** 2 / g ** 2
    assert val.valid and val.value == pytest.approx(expect, rel=1e-12)
    assert not asymptotic_flux_density(0.0, 0.05, device, "HighGain").valid


def test_asymptotic_short_length(lossless, device):
    val = asymptotic_flux_density(1e6, 1e-4, lossless, "LowGainShortL")
    assert val.value == pytest.approx(0.08 ** 2 * 1e-8 / (2 * math.pi), rel=1e-9)
    L = 0.005
    half = 0.5 * total_spdc_bandwidth(lossless, L)
    nu = np.linspace(-half, half, 401)[1:-1]
    approx = asymptotic_flux_density(nu, L, lossless, "LowGainShortL").value
    exact = signal_flux_density(nu, L, lossless)
    assert np.max(np.abs(approx / exact - 1)) < 0.02
    assert not asymptotic_flux_density(0.0, 1.0, device, "LowGainShortL").valid


def test_nondegenerate_flux(device):
    bw, L = 1e9, 0.1
    base = bw / (2 * math.pi) * 0.08 ** 2 * L * L
    r = nondegenerate_flux(0.0, L, device, bw)
    assert r.q_te == r.q_tm == pytest.approx(base, rel=1e-15)
    assert nondegenerate_flux(2 * math.pi / L, L, device, bw).q_te == pytest.approx(0.0, abs=1e-30 + 1e-15 * base)
    r = nondegenerate_flux(math.pi / L, L, device, bw)
    # numerical quadrature of |int exp(i dk z) dz|^2
    z = np.linspace(0, L, 20001)
    integral = abs(np.trapezoid(np.exp(1j * math.pi / L * z), z)) ** 2
    assert r.q_te == pytest.approx(base * (2 / math.pi) ** 2, rel=1e-12)
    assert r.q_te == pytest.approx(bw / (2 * math.pi) * 0.08 ** 2 * integral, rel=1e-7)
    assert r.valid


def test_narrowband_gain(device):
    c, s, ph = narrowband_gain(0.0, device.replace(coupling_phase=0.3))
    assert (c, s, ph) == (1.0, 0.0, 0.3)
    c, s, _ = narrowband_gain(1 / 0.08, device)
    assert c == pytest.approx(2.381, abs=1e-3) and s == pytest.approx(1.381, abs=1e-3)
    for z in (0.5, 3.0, 20.0):
        c, s, _ = narrowband_gain(z, device)
        assert c - s == pytest.approx(1.0, rel=1e-12)


def test_parametric_threshold(lossless):
    below = lossless.with_losses(0.05, 0.05)   # gamma_TE gamma_TM < g^2
    above = lossless.with_losses(0.2, 0.2)
    grow = [signal_flux_density(0.0, L, below) for L in (20.0, 40.0, 80.0)]
    decay = [signal_flux_density(0.0, L, above) for L in (20.0, 40.0, 80.0)]
    assert grow[0] < grow[1] < grow[2]
    assert decay[0] > decay[1] > decay[2]


def test_integrate_band_trivial_cases():
    grid = SpectralGrid.uniform(-1e13, 1e13, 11)
    zero = spectrum_from_callable(grid, lambda nu: 0.0)
    assert integrate_band(zero, (-1e12, 1e12)) == 0.0
    const = spectrum_from_callable(grid, lambda nu: 2.5)
    assert integrate_band(const, (-3e12, 4e12)) == pytest.approx(2.5 * 7e12, rel=1e-9)
    with pytest.raises(RangeError):
        integrate_band(const, (-2e13, 0.0))


def test_flux_spectrum_nonnegative(device):
    spec = flux_spectrum(device)
    assert spec.grid.detunings.size == 2001
    for arr in (spec.signal, spec.noise_te, spec.noise_tm):
        assert np.all(arr >= 0)
    # signal is even in nu for dk = 0
    assert np.allclose(spec.signal, spec.signal[::-1], rtol=1e-12)
    assert spec.total_signal > 0 and spec.total_noise_tm > spec.total_noise_te > 0


def test_d_matches_model(device):
    pt = dispersion_point(2 * THZ, device)
    assert pt.D == phase_mismatch_D(2 * THZ, device)
