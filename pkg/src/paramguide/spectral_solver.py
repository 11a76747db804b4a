"""Closed-form boundary-value solution for degenerate down-conversion.

All per-detuning functions accept a scalar or a 1-D array of detunings ``nu``
(rad/s) and broadcast. The noise densities for the TM mode refer to the
partner detuning -nu, so ``noise_tm[i]`` pairs with ``signal[i]`` of TE.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy import integrate, special

from .errors import (InvalidParameterError, PreconditionError, RangeError,
                     UnsupportedRegimeError)
from .model import DeviceConfig, SpectralGrid, phase_mismatch_D, total_spdc_bandwidth

SERIES_THRESHOLD = 0.05   # |b L| below which the moment series is used
QUAD_RTOL = 1e-9
DEFAULT_SAMPLES = 2001
DEFAULT_SPAN = 1.5        # grid half-span in units of the total bandwidth


def _scalar_or_array(x):
    x = np.asarray(x)
    return x.item() if x.ndim == 0 else x


# --------------------------------------------------------------------------
# dispersion quantities

@dataclass(frozen=True)
class DispersionPoint:
    nu: float
    D: float
    kappa: complex
    mu_plus: complex
    mu_minus: complex
    K_plus: complex | None
    K_minus: complex | None


def kappa(nu, cfg: DeviceConfig):
    """kappa = sqrt(|g|^2 - [D + i(g_TE - g_TM)]^2 / 4), principal branch."""
    D = np.asarray(phase_mismatch_D(nu, cfg), dtype=float)
    dloss = cfg.te.field_loss - cfg.tm.field_loss
    z = (D + 1j * dloss) ** 2
    return _scalar_or_array(np.sqrt(cfg.coupling_g ** 2 - 0.25 * z + 0j))


def _mu_center(nu, cfg: DeviceConfig):
    nu = np.asarray(nu, dtype=float)
    return (0.5j * nu * (1.0 / cfg.tm.group_velocity + 1.0 / cfg.te.group_velocity)
            - 0.5 * (cfg.tm.field_loss + cfg.te.field_loss))


def k_coefficients(nu, cfg: DeviceConfig):
    """Eigenvector ratios (K_plus, K_minus); undefined at g = 0."""
    if cfg.coupling_g == 0:
        raise ZeroDivisionError("K+/K- are undefined for zero coupling g")
    g = cfg.g
    D = np.asarray(phase_mismatch_D(nu, cfg), dtype=float)
    k = np.asarray(kappa(nu, cfg))
    base = (-D - 1j * (cfg.te.field_loss - cfg.tm.field_loss)) / (2.0 * g)
    return _scalar_or_array(base - 1j * k / g), _scalar_or_array(base + 1j * k / g)


def dispersion_point(nu: float, cfg: DeviceConfig, with_k: bool = True) -> DispersionPoint:
    """kappa, mu+/-, and (unless ``with_k`` is False) K+/- at one detuning."""
    k = complex(kappa(nu, cfg))
    c = complex(_mu_center(nu, cfg))
    kp = km = None
    if with_k:
        kp, km = (complex(v) for v in k_coefficients(nu, cfg))
    return DispersionPoint(float(nu), float(phase_mismatch_D(nu, cfg)), k, c + k, c - k, kp, km)


def transfer_matrix(nu, L: float, cfg: DeviceConfig) -> np.ndarray:
    """Closed-form map (a_TE, a+_TM(-nu)) at z = 0 to z = L built from mu+/-, K+/-.

    Returns shape (..., 2, 2). Requires g != 0 and kappa != 0.
    """
    nu = np.asarray(nu, dtype=float)
    k = np.asarray(kappa(nu, cfg))
    if np.any(k == 0):
        raise PreconditionError("closed-form transfer matrix is singular at kappa = 0")
    kp, km = (np.asarray(v) for v in k_coefficients(nu, cfg))
    c = _mu_center(nu, cfg)
    ep, em = np.exp((c + k) * L), np.exp((c - k) * L)
    pref = cfg.g / (2j * k)
    ph = np.exp(-0.5j * cfg.phase_mismatch_dk * L)
    T = np.empty(nu.shape + (2, 2), dtype=complex)
    T[..., 0, 0] = pref * (ep * km - em * kp) * ph
    T[..., 0, 1] = pref * (em - ep) * ph
    # K+ K- = exp(-2i Arg g) exactly; the computed product loses digits near lobe zeros
    T[..., 1, 0] = pref * np.exp(-2j * cfg.coupling_phase) * (ep - em) / ph
    T[..., 1, 1] = pref * (km * em - kp * ep) / ph
    return T


# --------------------------------------------------------------------------
# numerically stable building blocks

def _sinhc(u):
    """sinh(u)/u for real u, exact at 0."""
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < 1e-4
    safe = np.where(small, 1.0, u)
    return np.where(small, 1.0 + u * u / 6.0, np.sinh(safe) / safe)


def _sinh_ratio_sq(k, L):
    """|sinh(k L)/k|^2, continuous through k = 0.

    Uses |sinh(x + iy)|^2 = sinh^2 x + sin^2 y so each part is a convex
    combination of bounded ratios and no cancellation occurs.
    """
    x, y = np.real(k), np.imag(k)
    sx = (L * _sinhc(x * L)) ** 2
    sy = (L * np.sinc(y * L / np.pi)) ** 2
    r2 = x * x + y * y
    w = np.where(r2 > 0, x * x / np.where(r2 > 0, r2, 1.0), 0.5)
    return w * sx + (1.0 - w) * sy


def _expm1_ratio(x, L):
    """(exp(x L) - 1)/x for real x, -> L at x = 0."""
    x = np.asarray(x, dtype=float)
    zero = x == 0
    safe = np.where(zero, 1.0, x)
    return np.where(zero, L, np.expm1(safe * L) / safe)


def _cexpm1(w):
    """exp(w) - 1 for complex w without cancellation."""
    wr, wi = np.real(w), np.imag(w)
    s = np.sin(0.5 * wi)
    return np.expm1(wr) * np.cos(wi) - 2.0 * s * s + 1j * np.exp(wr) * np.sin(wi)


def _moments(a, L, nmax):
    """m_n = int_0^L exp(-a s) s^n ds for n = 0..nmax, a >= 0 (arrays)."""
    a = np.asarray(a, dtype=float)
    u = a * L
    out = []
    for n in range(nmax + 1):
        small = u < 1.0
        # power series in u for small damping
        ser = np.zeros_like(u)
        term = np.ones_like(u)
        for j in range(40):
            ser = ser + term / (n + j + 1)
            term = term * (-u) / (j + 1)
        us = np.where(small, 1.0, u)
        big = special.gamma(n + 1) * special.gammainc(n + 1, us) / us ** (n + 1)
        out.append(L ** (n + 1) * np.where(small, ser, big))
    return out


def _damped_square_integral(a, b, L, hyperbolic: bool):
    """int_0^L exp(-a s) f(b s)^2 ds / b^2 with f = sinh or sin; finite at b = 0."""
    a = np.broadcast_to(np.asarray(a, dtype=float), np.shape(b)).copy()
    b = np.asarray(b, dtype=float)
    out = np.empty(b.shape)
    small = np.abs(b) * L < SERIES_THRESHOLD
    if np.any(small):
        bs, as_ = b[small], a[small]
        nterms = 8
        m = _moments(as_, L, 2 * nterms)
        acc = np.zeros_like(bs)
        for k in range(1, nterms + 1):
            sign = 1.0 if (hyperbolic or k % 2 == 1) else -1.0
            coef = sign * 2.0 ** (2 * k - 1) / math.factorial(2 * k)
            acc = acc + coef * bs ** (2 * k - 2) * m[2 * k]
        out[small] = acc
    big = ~small
    if np.any(big):
        bb, ab = b[big], a[big]
        e0 = _expm1_ratio(-ab, L)
        if hyperbolic:
            val = 0.25 * (_expm1_ratio(2 * bb - ab, L) + _expm1_ratio(-2 * bb - ab, L)) - 0.5 * e0
        else:
            w = -ab + 2j * bb
            val = 0.5 * e0 - 0.5 * np.real(_cexpm1(w * L) / w)
        out[big] = val / (bb * bb)
    return out


def noise_integral_over_kappa_sq(nu, L: float, cfg: DeviceConfig):
    """F(mu+/-, L) / |kappa|^2, continuous through kappa = 0."""
    k = np.asarray(kappa(nu, cfg))
    x, y = np.abs(np.real(k)), np.abs(np.imag(k))
    a = cfg.te.field_loss + cfg.tm.field_loss
    hx = _damped_square_integral(a, np.atleast_1d(x), L, True)
    jy = _damped_square_integral(a, np.atleast_1d(y), L, False)
    x1, y1 = np.atleast_1d(x), np.atleast_1d(y)
    r2 = x1 * x1 + y1 * y1
    w = np.where(r2 > 0, x1 * x1 / np.where(r2 > 0, r2, 1.0), 0.5)
    out = 4.0 * (w * hx + (1.0 - w) * jy)
    return _scalar_or_array(out.reshape(np.shape(k)))


def noise_integral(nu, L: float, cfg: DeviceConfig):
    """F(mu+/-, L) = int_0^L |exp(mu+ (L-s)) - exp(mu- (L-s))|^2 ds."""
    k = np.asarray(kappa(nu, cfg))
    return _scalar_or_array(np.abs(k) ** 2 * noise_integral_over_kappa_sq(nu, L, cfg))


# --------------------------------------------------------------------------
# spectral densities

def signal_flux_density(nu, L: float, cfg: DeviceConfig):
    """Signal (boundary-vacuum) photon flux per unit angular frequency.

    Equal for TE at +nu and TM at -nu.
    """
    if L < 0:
        raise InvalidParameterError("length must be >= 0")
    if cfg.coupling_g == 0 or L == 0:
        return _scalar_or_array(np.zeros(np.shape(nu)))
    k = np.asarray(kappa(nu, cfg))
    gsum = cfg.te.field_loss + cfg.tm.field_loss
    val = math.exp(-gsum * L) * cfg.coupling_g ** 2 / (2 * math.pi) * _sinh_ratio_sq(k, L)
    return _scalar_or_array(val)


def noise_flux_density(nu, L: float, cfg: DeviceConfig):
    """Langevin-noise flux densities (TE at nu, TM at -nu) for a zero-temperature reservoir."""
    if cfg.reservoir_temperature > 0:
        raise UnsupportedRegimeError(
            "closed-form noise assumes a zero-temperature reservoir; "
            "use oracle.noise_flux_quadrature for T > 0")
    if L < 0:
        raise InvalidParameterError("length must be >= 0")
    if cfg.coupling_g == 0 or L == 0:
        z = _scalar_or_array(np.zeros(np.shape(nu)))
        return z, z
    common = cfg.coupling_g ** 2 / (4 * math.pi) * np.asarray(noise_integral_over_kappa_sq(nu, L, cfg))
    return (_scalar_or_array(cfg.tm.field_loss * common),
            _scalar_or_array(cfg.te.field_loss * common))


# --------------------------------------------------------------------------
# asymptotic regimes and special cases

class Regime(str, enum.Enum):
    HIGH_GAIN = "HighGain"
    LOW_GAIN_SHORT_L = "LowGainShortL"


@dataclass(frozen=True)
class FlaggedValue:
    """A value together with a flag telling whether its approximation holds."""

    value: float
    valid: bool


HIGH_GAIN_MARGIN = 10.0
SHORT_LENGTH_LIMIT = 0.1


def asymptotic_flux_density(nu, L: float, cfg: DeviceConfig, regime) -> FlaggedValue:
    """Approximate signal density in the high-gain or short-device limit."""
    regime = Regime(regime)
    g = cfg.coupling_g
    D = np.asarray(phase_mismatch_D(nu, cfg), dtype=float)
    gsum = cfg.te.field_loss + cfg.tm.field_loss
    if regime is Regime.HIGH_GAIN:
        k = np.sqrt(np.abs(g * g - 0.25 * D * D))
        inside = np.abs(D) < 2 * g
        shape = np.where(inside, (L * _sinhc(k * L)) ** 2, (L * np.sinc(k * L / np.pi)) ** 2)
        val = g * g * math.exp(-gsum * L) / (2 * math.pi) * shape
        valid = g >= HIGH_GAIN_MARGIN * max(cfg.te.field_loss, cfg.tm.field_loss)
    else:
        k = 0.5 * np.abs(D)
        val = g * g / (2 * math.pi) * (L * np.sinc(k * L / np.pi)) ** 2
        valid = gsum * L <= SHORT_LENGTH_LIMIT
    return FlaggedValue(_scalar_or_array(val), bool(valid))


@dataclass(frozen=True)
class NondegenerateFlux:
    q_te: float
    q_tm: float
    valid: bool


def nondegenerate_flux(dk: float, L: float, cfg: DeviceConfig, band_width: float) -> NondegenerateFlux:
    """Perturbative photon fluxes in a narrow detection band around a nondegenerate pair."""
    if band_width < 0:
        raise InvalidParameterError("band width must be >= 0")
    q = band_width / (2 * math.pi) * cfg.coupling_g ** 2 * L * L * float(np.sinc(dk * L / (2 * math.pi))) ** 2
    valid = band_width * L * abs(cfg.inverse_velocity_mismatch) <= SHORT_LENGTH_LIMIT
    return NondegenerateFlux(q, q, valid)


def narrowband_gain(z: float, cfg: DeviceConfig) -> tuple[float, float, float]:
    """(cosh^2(|g| z), sinh^2(|g| z), Arg g) for the lossless matched narrowband limit."""
    gz = cfg.coupling_g * z
    return math.cosh(gz) ** 2, math.sinh(gz) ** 2, cfg.coupling_phase


# --------------------------------------------------------------------------
# spectra and band integration

DENSITIES = ("signal", "noise_te", "noise_tm")


def density_function(cfg: DeviceConfig, L: float, which: str) -> Callable[[float], float]:
    if which == "signal":
        return lambda nu: float(signal_flux_density(nu, L, cfg))
    if which == "noise_te":
        return lambda nu: float(noise_flux_density(nu, L, cfg)[0])
    if which == "noise_tm":
        return lambda nu: float(noise_flux_density(nu, L, cfg)[1])
    raise InvalidParameterError(f"unknown density {which!r}; expected one of {DENSITIES}")


@dataclass(frozen=True)
class FluxSpectrum:
    """Sampled spectral densities plus totals over the full grid span.

    ``evaluators`` maps each density name to a callable of nu used for
    adaptive band integration.
    """

    grid: SpectralGrid
    signal: np.ndarray
    noise_te: np.ndarray
    noise_tm: np.ndarray
    total_signal: float
    total_noise_te: float
    total_noise_tm: float
    length: float
    evaluators: Mapping[str, Callable[[float], float]] = field(repr=False, compare=False)
    cfg: DeviceConfig | None = field(default=None, repr=False, compare=False)


def default_grid(cfg: DeviceConfig, L: float | None = None, samples: int = DEFAULT_SAMPLES) -> SpectralGrid:
    half = DEFAULT_SPAN * total_spdc_bandwidth(cfg, L)
    return SpectralGrid.uniform(-half, half, samples)


def _quad(fn, lo, hi, breakpoints=()):
    if hi == lo:
        return 0.0
    pts = [p for p in breakpoints if lo < p < hi]
    val, _ = integrate.quad(fn, lo, hi, epsabs=0.0, epsrel=QUAD_RTOL, limit=1000,
                            points=pts or None)
    return float(val)


def _lobe_breakpoints(spectrum: FluxSpectrum, lo, hi):
    # quad copes better when side-lobe zeros of the lossless shape are marked
    cfg = spectrum.cfg
    if cfg is None:
        return ()
    dv = abs(cfg.inverse_velocity_mismatch)
    if dv == 0:
        return ()
    step = 2 * math.pi / (spectrum.length * dv)
    n_lo, n_hi = math.ceil(lo / step), math.floor(hi / step)
    if n_hi - n_lo > 200:
        return ()
    return tuple(n * step for n in range(n_lo, n_hi + 1))


def integrate_band(spectrum: FluxSpectrum, window, which: str = "signal") -> float:
    """Adaptive quadrature (relative tolerance 1e-9) of one density over [lo, hi]."""
    lo, hi = (float(w) for w in window)
    if hi < lo:
        raise InvalidParameterError("window must satisfy lo <= hi")
    g_lo, g_hi = spectrum.grid.span
    if lo < g_lo or hi > g_hi:
        raise RangeError(f"window [{lo:.6e}, {hi:.6e}] outside grid [{g_lo:.6e}, {g_hi:.6e}]")
    if which not in spectrum.evaluators:
        raise InvalidParameterError(f"unknown density {which!r}")
    return _quad(spectrum.evaluators[which], lo, hi, _lobe_breakpoints(spectrum, lo, hi))


def flux_spectrum(cfg: DeviceConfig, L: float | None = None,
                  grid: SpectralGrid | None = None, with_noise: bool = True) -> FluxSpectrum:
    """Evaluate signal and noise densities on a grid and integrate them over its span."""
    L = cfg.length if L is None else float(L)
    grid = default_grid(cfg, L) if grid is None else grid
    nu = grid.detunings
    sig = np.asarray(signal_flux_density(nu, L, cfg), dtype=float)
    if with_noise:
        nte, ntm = (np.asarray(v, dtype=float) for v in noise_flux_density(nu, L, cfg))
    else:
        nte = ntm = np.zeros_like(sig)
    evaluators = {w: density_function(cfg, L, w) for w in DENSITIES}
    partial = FluxSpectrum(grid, sig, nte, ntm, 0.0, 0.0, 0.0, L, evaluators, cfg)
    span = grid.span
    tot = {w: integrate_band(partial, span, w) if (with_noise or w == "signal") else 0.0
           for w in DENSITIES}
    return FluxSpectrum(grid, sig, nte, ntm, tot["signal"], tot["noise_te"], tot["noise_tm"],
                        L, evaluators, cfg)


def spectrum_from_callable(grid: SpectralGrid, density: Callable[[float], float]) -> FluxSpectrum:
    """Wrap an arbitrary signal density (e.g. measured or synthetic) as a spectrum."""
    vals = np.array([density(v) for v in grid.detunings], dtype=float)
    zeros = np.zeros_like(vals)
    ev = {"signal": density, "noise_te": lambda nu: 0.0, "noise_tm": lambda nu: 0.0}
    partial = FluxSpectrum(grid, vals, zeros, zeros, 0.0, 0.0, 0.0, 0.0, ev)
    total = integrate_band(partial, grid.span)
    return FluxSpectrum(grid, vals, zeros, zeros, total, 0.0, 0.0, 0.0, ev)
