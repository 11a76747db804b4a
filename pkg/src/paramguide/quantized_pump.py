"""Single-photon pump decaying into TE/TM pairs, propagated as a state vector along z.

Only states allowed by energy conservation are carried: the undecayed pump
|1_p, vac> with amplitude C_p, and one pair |1_TE(nu), 1_TM(-nu)> per band
with amplitude C_W(nu). Their equations are

    dC_p/dz    = -i G* sqrt(Q0) sum_nu C_W(nu)
    dC_W(nu)/dz = i delta_nu C_W(nu) - i G sqrt(Q0) C_p

with Q0 = band_width / 2 pi and delta_nu = nu (1/v_TM - 1/v_TE). The
generator is anti-Hermitian, so |C_p|^2 + sum |C_W|^2 is conserved.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, PreconditionError, RegimeError
from .model import (HBAR, DeviceConfig, band_detuning, broadband_alpha, derive_g,
                    pump_overlap_for_power, rabi_q0)

NORM_TOLERANCE = 1e-10
RABI_ALPHA_MAX = 0.1
DECAY_ALPHA_MIN = 10.0


@dataclass(frozen=True)
class BandGrid:
    """Equal-width bands symmetric about the degenerate frequency."""

    nu_values: np.ndarray
    band_width: float

    def __post_init__(self):
        nu = np.asarray(self.nu_values, dtype=float)
        if self.band_width <= 0:
            raise InvalidParameterError("band width must be positive")
        if nu.ndim != 1 or nu.size == 0:
            raise InvalidParameterError("need at least one band")
        if not np.allclose(np.sort(nu), -np.sort(nu)[::-1], rtol=0, atol=1e-9 * self.band_width):
            raise InvalidParameterError("band centers must be symmetric about 0")
        if nu.size > 1 and np.min(np.diff(np.sort(nu))) < self.band_width * (1 - 1e-12):
            raise InvalidParameterError("bands overlap")
        nu = nu.copy()
        nu.flags.writeable = False
        object.__setattr__(self, "nu_values", nu)

    @classmethod
    def uniform(cls, count: int, band_width: float) -> "BandGrid":
        """``count`` adjacent bands tiling [-count*bw/2, count*bw/2]."""
        if count < 1:
            raise InvalidParameterError("band count must be >= 1")
        return cls(band_width * (np.arange(count) - 0.5 * (count - 1)), band_width)

    @property
    def total_width(self) -> float:
        return self.nu_values.size * self.band_width

    @property
    def Q0(self) -> float:
        return rabi_q0(self.band_width)


@dataclass(frozen=True)
class StateAmplitudes:
    C_p: complex
    C_W: np.ndarray
    z: float

    @property
    def norm(self) -> float:
        return abs(self.C_p) ** 2 + float(np.sum(np.abs(self.C_W) ** 2))


@dataclass(frozen=True)
class Trajectory:
    """Amplitudes sampled at ``z`` (cm); ``C_W`` has shape (len(z), bands)."""

    z: np.ndarray
    C_p: np.ndarray
    C_W: np.ndarray
    grid: BandGrid

    def __len__(self):
        return self.z.size

    def __getitem__(self, i) -> StateAmplitudes:
        return StateAmplitudes(complex(self.C_p[i]), self.C_W[i].copy(), float(self.z[i]))

    @property
    def norm(self) -> np.ndarray:
        return np.abs(self.C_p) ** 2 + np.sum(np.abs(self.C_W) ** 2, axis=1)


def propagate_amplitudes(grid: BandGrid, cfg: DeviceConfig, z_max: float, n_steps: int,
                         initial: StateAmplitudes | None = None, record_every: int = 1) -> Trajectory:
    """Fixed-step RK4 integration from z = 0 (or ``initial.z``) over ``z_max``.

    Every ``record_every``-th step is stored, plus the final one.
    """
    if z_max < 0 or n_steps < 1 or record_every < 1:
        raise InvalidParameterError("need z_max >= 0, n_steps >= 1, record_every >= 1")
    delta = np.asarray(band_detuning(grid.nu_values, cfg), dtype=float)
    coupling = cfg.G * math.sqrt(grid.Q0)
    nb = delta.size
    if initial is None:
        cp, cw, z0 = 1.0 + 0j, np.zeros(nb, dtype=complex), 0.0
    else:
        cw = np.asarray(initial.C_W, dtype=complex)
        if cw.shape != (nb,):
            raise PreconditionError(f"initial state has {cw.size} bands, grid has {nb}")
        if abs(initial.norm - 1.0) > NORM_TOLERANCE:
            raise PreconditionError(f"initial state is not normalized (norm {initial.norm:.12g})")
        cp, cw, z0 = complex(initial.C_p), cw.copy(), float(initial.z)

    h = z_max / n_steps
    idelta = 1j * delta
    cc = np.conj(coupling)

    def rhs(p, w):
        return -1j * cc * w.sum(), idelta * w - 1j * coupling * p

    n_rec = n_steps // record_every + 1 + (1 if n_steps % record_every else 0)
    zs = np.empty(n_rec)
    cps = np.empty(n_rec, dtype=complex)
    cws = np.empty((n_rec, nb), dtype=complex)
    zs[0], cps[0], cws[0] = z0, cp, cw
    r = 1
    for step in range(1, n_steps + 1):
        k1p, k1w = rhs(cp, cw)
        k2p, k2w = rhs(cp + 0.5 * h * k1p, cw + 0.5 * h * k1w)
        k3p, k3w = rhs(cp + 0.5 * h * k2p, cw + 0.5 * h * k2w)
        k4p, k4w = rhs(cp + h * k3p, cw + h * k3w)
        cp = cp + (h / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p)
        cw = cw + (h / 6.0) * (k1w + 2 * k2w + 2 * k3w + k4w)
        if step % record_every == 0 or step == n_steps:
            zs[r], cps[r], cws[r] = z0 + step * h, cp, cw
            r += 1
    return Trajectory(zs[:r], cps[:r], cws[:r], grid)


# --------------------------------------------------------------------------
# two symmetric bands

@dataclass(frozen=True)
class TwoBandSolution:
    C_p: np.ndarray | complex
    C_W1: np.ndarray | complex
    C_W2: np.ndarray | complex
    K_R: float
    phase: np.ndarray | float  # relative phase Arg(C_W2 / C_W1)


def rabi_wavenumber(delta: float, G: complex, Q0: float, channels: int = 2) -> float:
    """sqrt(delta^2 + channels Q0 |G|^2); channels = 2 for the symmetric two-band case."""
    if Q0 <= 0:
        raise InvalidParameterError("Q0 must be positive")
    return math.sqrt(delta * delta + channels * Q0 * abs(G) ** 2)


def two_band_closed_form(delta: float, G: complex, Q0: float, z) -> TwoBandSolution:
    """Exact solution for bands at detunings +/- delta starting from C_p = 1."""
    K = rabi_wavenumber(delta, G, Q0)
    z = np.asarray(z, dtype=float)
    if K == 0:
        one = np.ones_like(z, dtype=complex)
        zero = np.zeros_like(z, dtype=complex)
        return TwoBandSolution(_s(one), _s(zero), _s(zero), 0.0, _s(np.zeros_like(z)))
    s, c = np.sin(K * z), np.cos(K * z)
    pre = -1j * G * math.sqrt(Q0) / K
    w1 = pre * (s - 1j * (delta / K) * (c - 1))
    w2 = pre * (s + 1j * (delta / K) * (c - 1))
    cp = (delta / K) ** 2 + (2 * Q0 * abs(G) ** 2 / K ** 2) * c + 0j
    num = s + 1j * (delta / K) * (c - 1)
    den = s - 1j * (delta / K) * (c - 1)
    phase = np.angle(num / np.where(den == 0, 1.0, den))
    return TwoBandSolution(_s(cp), _s(w1), _s(w2), K, _s(np.where(den == 0, 0.0, phase)))


def _s(x):
    x = np.asarray(x)
    return x.item() if x.ndim == 0 else x


def decay_probability(K_R: float, length: float) -> dict:
    """Two readings of the pump-decay probability after ``length`` at zero detuning.

    ``sin_squared`` is 1 - |C_p|^2 = sin^2(K_R L) ~ (K_R L)^2; ``linear`` is K_R L.
    """
    return {"sin_squared": math.sin(K_R * length) ** 2, "linear": K_R * length}


# --------------------------------------------------------------------------
# broadband limits

class BroadbandRegime(str, enum.Enum):
    RABI = "Rabi"
    INTERMEDIATE = "Intermediate"
    DECAY = "Decay"


@dataclass(frozen=True)
class BroadbandResult:
    """alpha, the regime, and the analytic scales that go with it.

    ``decay_half`` is |G|^2 / (2 |1/v_TM - 1/v_TE|) and ``decay_full`` twice that;
    both are always reported. ``rate_or_K`` is K_R in the Rabi regime,
    ``decay_half`` in the decay regime and NaN in between.
    """

    alpha: float
    regime: BroadbandRegime
    rate_or_K: float
    rabi_wavenumber: float
    decay_half: float
    decay_full: float


def broadband_regime(cfg: DeviceConfig, total_width: float) -> BroadbandResult:
    if total_width <= 0:
        raise InvalidParameterError("total width must be positive")
    alpha = broadband_alpha(cfg, total_width)
    G2 = cfg.coupling_G ** 2
    K = math.sqrt(G2 * total_width / (2 * math.pi))
    dv = abs(cfg.inverse_velocity_mismatch)
    full = G2 / dv if dv else math.inf
    half = 0.5 * full
    if alpha < RABI_ALPHA_MAX:
        regime, value = BroadbandRegime.RABI, K
    elif alpha > DECAY_ALPHA_MIN:
        regime, value = BroadbandRegime.DECAY, half
    else:
        regime, value = BroadbandRegime.INTERMEDIATE, math.nan
    return BroadbandResult(alpha, regime, value, K, half, full)


@dataclass(frozen=True)
class DecayFit:
    kappa: float
    residual: float  # rms of ln|C_p| about the fitted line
    window: tuple[float, float]


def fit_decay_exponent(trajectory, upper: float = math.exp(-0.1),
                       lower: float = math.exp(-4.0)) -> DecayFit:
    """Least-squares slope of -ln|C_p| against z where upper >= |C_p| >= lower.

    Accepts a :class:`Trajectory` or a ``(z, C_p)`` pair. The window must
    reach below 1/e and |C_p| must fall monotonically across it.
    """
    if isinstance(trajectory, Trajectory):
        z, cp = trajectory.z, trajectory.C_p
    else:
        z, cp = (np.asarray(v) for v in trajectory)
    amp = np.abs(np.asarray(cp))
    z = np.asarray(z, dtype=float)
    if amp.min() > math.exp(-1.0):
        raise PreconditionError("trajectory too short: |C_p| never drops below 1/e")
    start = int(np.argmax(amp <= upper))
    below = np.nonzero(amp[start:] < lower)[0]
    stop = start + (int(below[0]) if below.size else amp.size - start)
    seg_z, seg = z[start:stop], np.log(amp[start:stop])
    if seg.size < 3:
        raise PreconditionError("too few samples in the exponential window")
    if np.any(np.diff(seg) > 1e-9 * max(1.0, abs(seg).max())):
        raise RegimeError("|C_p| is not monotone in the fit window (Rabi-like regime?)")
    slope, intercept = np.polyfit(seg_z, seg, 1)
    resid = float(np.sqrt(np.mean((seg - (slope * seg_z + intercept)) ** 2)))
    return DecayFit(float(-slope), resid, (float(seg_z[0]), float(seg_z[-1])))


def classical_gain_check(cfg: DeviceConfig, band_width: float) -> tuple[float, float]:
    """(g, per-channel Rabi coupling) when the classical pump carries one photon per band.

    A classical pump of power hbar omega_p Q0 gives g; the single-photon pump
    couples each pair channel with |G| sqrt(Q0). The symmetric two-band K_R
    is sqrt(2) times the latter because two channels share the pump photon.
    """
    Q0 = rabi_q0(band_width)
    power = HBAR * cfg.pump.central_angular_frequency * Q0
    g = abs(derive_g(pump_overlap_for_power(cfg, power), cfg.te, cfg.tm))
    return g, rabi_wavenumber(0.0, cfg.G, Q0, channels=1)
