"""Flux correlations between mirror-symmetric TE/TM detection windows.

The TE window is [c - w/2, c + w/2]; the TM window is its mirror image
around the degenerate frequency. All spectral integrals run over the TE
window, the TM partner entering through the paired kernel. Langevin terms are
dropped, so windows should sit well outside the noise band; a warning flag is
set when they do not.

Two kernels are available:

``"low_gain"`` (default)
    the simplified kernels valid for |D| > 2|g|, with g taken real:
    e^{kL}K- - e^{-kL}K+ = -i(D/g) sin(|k|L) - (2|k|/g) cos(|k|L),
    |k| = sqrt(D^2/4 - |g|^2). Loss enters only as exp(-(gTE+gTM)L).
``"full"``
    the general complex kappa and K+/- including the TE/TM loss imbalance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .errors import InvalidParameterError, PreconditionError, RegimeError
from .model import DeviceConfig, phase_mismatch_D
from .spectral_solver import k_coefficients, kappa

QUAD_RTOL = 1e-11
NOISE_BAND_MARGIN = 10.0
KERNELS = ("low_gain", "full")


@dataclass(frozen=True)
class Windows:
    """Detection windows centred at +/- center (rad/s) with common width (rad/s)."""

    center: float
    width: float

    def __post_init__(self):
        if self.width < 0:
            raise InvalidParameterError("window width must be >= 0")
        if self.width > 0 and abs(self.center) < 0.5 * self.width:
            raise PreconditionError("TE and TM windows overlap (|center| < width/2)")

    @property
    def te(self) -> tuple[float, float]:
        return self.center - 0.5 * self.width, self.center + 0.5 * self.width

    @property
    def tm(self) -> tuple[float, float]:
        lo, hi = self.te
        return -hi, -lo


@dataclass(frozen=True)
class CorrelationResult:
    theta: np.ndarray | float
    K: np.ndarray | float
    D_te: float
    D_tm: float
    tau: np.ndarray | float
    windows: Windows
    flux: float
    noise_band_warning: bool
    kernel: str

    def peak(self) -> tuple[float, float]:
        """(tau, theta) at the sampled maximum of theta."""
        th = np.atleast_1d(self.theta)
        i = int(np.argmax(th))
        return float(np.atleast_1d(self.tau)[i]), float(th[i])


def _kernel_values(nu, L, cfg: DeviceConfig, kernel: str):
    """Return (|T12|^2, |T11|^2, |T22|^2, T11 conj(T21)) up to unimodular phases.

    T11 conj(T21) is reported with the constant phase of K+K- removed so the
    low-gain and full paths share one convention.
    """
    g = cfg.coupling_g
    gsum = cfg.te.field_loss + cfg.tm.field_loss
    damp = math.exp(-gsum * L)
    D = np.asarray(phase_mismatch_D(nu, cfg), dtype=float)
    if kernel == "low_gain":
        kk2 = 0.25 * D * D - g * g
        if np.any(kk2 <= 0):
            raise RegimeError("low-gain kernels need |D| > 2|g| throughout the window")
        kk = np.sqrt(kk2)
        s, c = np.sin(kk * L), np.cos(kk * L)
        k_te = -1j * (D / g) * s - (2 * kk / g) * c
        k_tm = -1j * (D / g) * s + (2 * kk / g) * c
        cross_tail = -2j * s
        denom = 4 * kk2
    else:
        k = np.asarray(kappa(nu, cfg))
        kp, km = (np.asarray(v) for v in k_coefficients(nu, cfg))
        ep, em = np.exp(k * L), np.exp(-k * L)
        k_te = ep * km - em * kp
        k_tm = ep * kp - em * km
        cross_tail = np.conj(ep) - np.conj(em)
        denom = 4 * np.abs(k) ** 2
    g2 = g * g
    t12 = damp * g2 * np.abs(cross_tail) ** 2 / denom
    t11 = damp * g2 * np.abs(k_te) ** 2 / denom
    t22 = damp * g2 * np.abs(k_tm) ** 2 / denom
    cross = damp * g2 * k_te * cross_tail / denom
    return t12, t11, t22, cross


def _window_integrals(windows: Windows, L, taus, cfg, kernel):
    lo, hi = windows.te
    taus = np.asarray(taus, dtype=float)

    def f(nu):
        t12, t11, t22, cross = _kernel_values(nu, L, cfg, kernel)
        ph = cross * np.exp(-1j * nu * taus)
        return np.concatenate(([t12, t11, t22], ph.real, ph.imag)) / (2 * math.pi)

    if hi == lo:
        return 0.0, 0.0, 0.0, np.zeros(taus.size, dtype=complex)
    val, _ = integrate.quad_vec(f, lo, hi, epsabs=0.0, epsrel=QUAD_RTOL, norm="max", limit=2000)
    n = taus.size
    return val[0], val[1], val[2], val[3:3 + n] + 1j * val[3 + n:]


def noise_band_warning(windows: Windows, cfg: DeviceConfig) -> bool:
    """True if the TE window reaches |D| < 10 max(gamma)."""
    lo, hi = windows.te
    D = phase_mismatch_D(np.array([lo, hi]), cfg)
    # D is affine in nu, so its smallest magnitude is at an edge unless it changes sign
    dmin = 0.0 if D[0] * D[1] <= 0 else float(np.min(np.abs(D)))
    return dmin < NOISE_BAND_MARGIN * max(cfg.te.field_loss, cfg.tm.field_loss)


def _check_kernel(kernel):
    if kernel not in KERNELS:
        raise InvalidParameterError(f"kernel must be one of {KERNELS}, got {kernel!r}")


def fluctuation_D(mode: str, windows: Windows, L: float, cfg: DeviceConfig,
                  kernel: str = "low_gain") -> tuple[float, bool]:
    """Band fluctuation D_TE or D_TM and the noise-band warning flag."""
    _check_kernel(kernel)
    mode = mode.upper()
    if mode not in ("TE", "TM"):
        raise InvalidParameterError("mode must be 'TE' or 'TM'")
    warn = noise_band_warning(windows, cfg)
    if cfg.coupling_g == 0 or windows.width == 0:
        return 0.0, warn
    q, i_te, i_tm, _ = _window_integrals(windows, L, [0.0], cfg, kernel)
    return float(q * (i_te if mode == "TE" else i_tm)), warn


def correlation_K(windows: Windows, L: float, tau, cfg: DeviceConfig,
                  kernel: str = "low_gain"):
    """Flux cross-correlation K(L, tau) for one delay or an array of delays."""
    _check_kernel(kernel)
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    if cfg.coupling_g == 0 or windows.width == 0:
        out = np.zeros(taus.size)
    else:
        out = np.abs(_window_integrals(windows, L, taus, cfg, kernel)[3]) ** 2
    return float(out[0]) if np.ndim(tau) == 0 else out


def theta(windows: Windows, L: float, tau, cfg: DeviceConfig,
          kernel: str = "low_gain") -> CorrelationResult:
    """Normalized correlation Theta = K / sqrt(D_TE D_TM)."""
    _check_kernel(kernel)
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    warn = noise_band_warning(windows, cfg)
    if cfg.coupling_g == 0:
        raise PreconditionError("correlation undefined: D_TE * D_TM = 0 (zero coupling)")
    if windows.width == 0:
        # narrow-band limit: every integral collapses to the integrand at the centre
        t12, t11, t22, cross = _kernel_values(np.array([windows.center]), L, cfg, kernel)
        th = np.full(taus.size, float(np.abs(cross[0]) ** 2 / (t12[0] * math.sqrt(t11[0] * t22[0]))))
        scalar = np.ndim(tau) == 0
        return CorrelationResult(th[0] if scalar else th, 0.0 if scalar else np.zeros(taus.size),
                                 0.0, 0.0, tau, windows, 0.0, warn, kernel)
    q, i_te, i_tm, c = _window_integrals(windows, L, taus, cfg, kernel)
    d_te, d_tm = q * i_te, q * i_tm
    if d_te * d_tm <= 0:
        raise PreconditionError("correlation undefined: D_TE * D_TM = 0")
    K = np.abs(c) ** 2
    th = K / math.sqrt(d_te * d_tm)
    scalar = np.ndim(tau) == 0
    return CorrelationResult(float(th[0]) if scalar else th, float(K[0]) if scalar else K,
                             float(d_te), float(d_tm), tau, windows, float(q), warn, kernel)


def peak_theta(windows: Windows, L: float, cfg: DeviceConfig, tau_span: float,
               kernel: str = "low_gain", samples: int = 401) -> tuple[float, float]:
    """Locate the maximum of Theta(tau) on [-tau_span, tau_span], refined by Brent search."""
    taus = np.linspace(-tau_span, tau_span, samples)
    res = theta(windows, L, taus, cfg, kernel)
    i = int(np.argmax(res.theta))
    a, b = taus[max(i - 1, 0)], taus[min(i + 1, samples - 1)]
    opt = optimize.minimize_scalar(lambda t: -theta(windows, L, t, cfg, kernel).theta,
                                   bounds=(a, b), method="bounded",
                                   options={"xatol": 1e-6 * (b - a)})
    return float(opt.x), float(-opt.fun)


def correlation_time(taus, K) -> float:
    """Equivalent width of K(tau): integral of K over its maximum."""
    taus, K = np.asarray(taus, dtype=float), np.asarray(K, dtype=float)
    return float(np.trapezoid(K, taus) / np.max(K))


def symmetric_loss_config(cfg: DeviceConfig) -> DeviceConfig:
    """Same device with both losses set to their mean and g made real.

    For |D| > 2|g| its exact kernels coincide with the low-gain kernels, which
    gives the numerical oracle a configuration to check them against.
    """
    mean = 0.5 * (cfg.te.field_loss + cfg.tm.field_loss)
    return cfg.with_losses(mean, mean).replace(coupling_phase=0.0)
