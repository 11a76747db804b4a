import math

import numpy as np
import pytest

from paramguide import quantized_pump as qp
from paramguide.errors import InvalidParameterError, PreconditionError, RegimeError
from paramguide.model import THZ


@pytest.fixture
def qcfg(qpump_loaded):
    return qpump_loaded.device


def test_band_grid():
    g = qp.BandGrid.uniform(4, 1e10)
    assert np.allclose(g.nu_values, [-1.5e10, -0.5e10, 0.5e10, 1.5e10])
    assert g.total_width == pytest.approx(4e10)
    assert g.Q0 == pytest.approx(1e10 / (2 * math.pi))
    with pytest.raises((InvalidParameterError, PreconditionError)):
        qp.BandGrid(np.array([0.0, 1e10]), 1e10)


def test_norm_conserved(qcfg, qpump_loaded):
    grid = qp.BandGrid.uniform(16, qpump_loaded.band_width)
    traj = qp.propagate_amplitudes(grid, qcfg, 2.0, 4000, record_every=50)
    assert np.max(np.abs(traj.norm - 1)) < 1e-10
    assert traj.z[-1] == pytest.approx(2.0)
    assert traj[0].C_p == 1.0


def test_two_band_closed_form_and_rk4(qcfg, qpump_loaded):
    bw = qpump_loaded.band_width
    grid = qp.BandGrid.uniform(2, bw)
    delta = qcfg.inverse_velocity_mismatch * -grid.nu_values[1]
    traj = qp.propagate_amplitudes(grid, qcfg, 3.0, 10_000, record_every=100)
    cf = qp.two_band_closed_form(delta, qcfg.G, grid.Q0, traj.z)
    assert np.max(np.abs(traj.C_p - cf.C_p)) < 1e-9
    assert np.max(np.abs(traj.C_W[:, 1] - cf.C_W1)) < 1e-9
    assert np.max(np.abs(traj.C_W[:, 0] - cf.C_W2)) < 1e-9
    total = np.abs(cf.C_p) ** 2 + np.abs(cf.C_W1) ** 2 + np.abs(cf.C_W2) ** 2
    assert np.allclose(total, 1.0, atol=1e-12)


def test_rk4_convergence(qcfg, qpump_loaded):
    grid = qp.BandGrid.uniform(2, qpump_loaded.band_width)
    delta = qcfg.inverse_velocity_mismatch * -grid.nu_values[1]
    ref = qp.two_band_closed_form(delta, qcfg.G, grid.Q0, 3.0)
    errs = [abs(qp.propagate_amplitudes(grid, qcfg, 3.0, n).C_W[-1, 1] - ref.C_W1) for n in (80, 160)]
    assert 3.5 < math.log2(errs[0] / errs[1]) < 4.5


def test_zero_detuning_rabi():
    K = qp.rabi_wavenumber(0.0, 0.5, 2.0)
    assert K == pytest.approx(1.0)
    z = np.array([0.0, 0.5 * math.pi / K, math.pi / K])
    cf = qp.two_band_closed_form(0.0, 0.5, 2.0, z)
    assert np.abs(cf.C_p[1]) < 1e-15
    assert np.abs(cf.C_W1[1]) ** 2 == pytest.approx(0.5)
    assert cf.C_p[2] == pytest.approx(-1.0)


def test_closed_form_scalar_and_zero_coupling():
    cf = qp.two_band_closed_form(0.0, 0.0, 1.0, 2.0)
    assert cf.C_p == 1.0 and cf.K_R == 0.0
    cf = qp.two_band_closed_form(3.0, 0.5, 1.0, 0.7)
    assert isinstance(cf.C_p, complex)
    with pytest.raises(InvalidParameterError):
        qp.rabi_wavenumber(0.0, 1.0, 0.0)


def test_decay_probability():
    p = qp.decay_probability(1e-3, 2.0)
    assert p["linear"] == pytest.approx(2e-3)
    assert p["sin_squared"] == pytest.approx(4e-6, rel=1e-5)


def test_broadband_regimes(qcfg):
    dv = abs(qcfg.inverse_velocity_mismatch)
    width = 2 * math.pi * 1e12
    for alpha, regime in ((0.01, "Rabi"), (1.0, "Intermediate"), (50.0, "Decay")):
        cfg = qcfg.replace(coupling_G=math.sqrt(width) * dv / alpha)
        res = qp.broadband_regime(cfg, width)
        assert res.alpha == pytest.approx(alpha, rel=1e-12)
        assert res.regime.value == regime
        assert res.decay_full == pytest.approx(2 * res.decay_half)
    assert qp.broadband_regime(qcfg, width).regime is qp.BroadbandRegime.DECAY
    with pytest.raises(InvalidParameterError):
        qp.broadband_regime(qcfg, 0.0)


def test_decay_fit_recovers_exponent():
    z = np.linspace(0, 10, 2001)
    fit = qp.fit_decay_exponent((z, np.exp(-0.7 * z) * np.exp(1j * z)))
    assert fit.kappa == pytest.approx(0.7, rel=1e-12)
    with pytest.raises(PreconditionError):
        qp.fit_decay_exponent((z[:10], np.exp(-0.7 * z[:10])))
    with pytest.raises(RegimeError):
        qp.fit_decay_exponent((z, 0.65 + 0.35 * np.cos(z)))


def test_small_decay_run(qcfg):
    # modest grid at alpha = 20; the fitted exponent is within a few percent of |G|^2/(2 dv)
    width = 2 * math.pi * 1e12
    dv = abs(qcfg.inverse_velocity_mismatch)
    cfg = qcfg.replace(coupling_G=math.sqrt(width) * dv / 20.0)
    res = qp.broadband_regime(cfg, width)
    grid = qp.BandGrid.uniform(401, width / 401)
    z_max = 3.0 / res.decay_half
    steps = int(math.ceil(z_max * 0.5 * width * dv / 0.02))
    traj = qp.propagate_amplitudes(grid, cfg, z_max, steps, record_every=steps // 1000)
    fit = qp.fit_decay_exponent(traj, lower=math.exp(-2.5))
    assert fit.kappa / res.decay_half == pytest.approx(1.0, abs=0.03)


def test_initial_state_checks(qcfg):
    grid = qp.BandGrid.uniform(2, 1e10)
    bad = qp.StateAmplitudes(1.0, np.array([0.1, 0.0]), 0.0)
    with pytest.raises(PreconditionError):
        qp.propagate_amplitudes(grid, qcfg, 1.0, 10, initial=bad)
    with pytest.raises(PreconditionError):
        qp.propagate_amplitudes(grid, qcfg, 1.0, 10, initial=qp.StateAmplitudes(1.0, np.zeros(3), 0.0))
    with pytest.raises(InvalidParameterError):
        qp.propagate_amplitudes(grid, qcfg, 1.0, 0)


def test_classical_gain_check(qcfg, qpump_loaded):
    g, k_channel = qp.classical_gain_check(qcfg, qpump_loaded.band_width)
    assert k_channel == pytest.approx(g, rel=1e-12)
    k2 = qp.rabi_wavenumber(0.0, qcfg.G, qpump_loaded.band_width / (2 * math.pi))
    assert k2 == pytest.approx(math.sqrt(2) * g, rel=1e-12)
