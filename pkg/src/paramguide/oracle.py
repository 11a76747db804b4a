"""Brute-force numerical reference for the closed-form solver.

Nothing here calls the closed-form dispersion code. The coupled mode
equations for (a_TE(nu), a+_TM(-nu)) are assembled directly from the config
in the original, z-dependent form

    d a/dz = (i nu/v_TE - gamma_TE) a + i g exp(-i dk z) b
    d b/dz = (i nu/v_TM - gamma_TM) b - i g* exp(+i dk z) a

and integrated with classical fixed-step RK4. Because the z dependence is a
pure rotation R(z) = diag(exp(-i dk z/2), exp(+i dk z/2)), one RK4 step from
z is R(z) S R(z)^-1 with S the step from 0, so n steps collapse to
R(z0 + nh) (R(-h) S)^n R(z0)^-1. That is algebraically the same recursion as
looping over steps, just evaluated by repeated squaring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AccuracyError, InvalidParameterError, PreconditionError
from .model import DeviceConfig, thermal_occupation

DEFAULT_STEPS = 4096
RICHARDSON_LIMIT = 1e-6


def coefficient_matrix(nu, z, cfg: DeviceConfig) -> np.ndarray:
    """Raw ODE matrix M(z) for each detuning, shape (..., 2, 2).

    The common phase nu (1/v_TE + 1/v_TM)/2 is removed from the diagonal; it
    multiplies the solution by a unit-modulus scalar that is restored in
    :func:`integrate_transfer`.
    """
    nu = np.asarray(nu, dtype=float)
    inv_te, inv_tm = 1.0 / cfg.te.group_velocity, 1.0 / cfg.tm.group_velocity
    common = 0.5 * nu * (inv_te + inv_tm)
    g = cfg.g
    M = np.empty(nu.shape + (2, 2), dtype=complex)
    M[..., 0, 0] = 1j * (nu * inv_te - common) - cfg.te.field_loss
    M[..., 1, 1] = 1j * (nu * inv_tm - common) - cfg.tm.field_loss
    M[..., 0, 1] = 1j * g * np.exp(-1j * cfg.phase_mismatch_dk * z)
    M[..., 1, 0] = -1j * np.conj(g) * np.exp(1j * cfg.phase_mismatch_dk * z)
    return M


def rk4_step_matrix(nu, h: float, cfg: DeviceConfig, z: float = 0.0) -> np.ndarray:
    """Propagator of one classical RK4 step of size h starting at z."""
    M0 = coefficient_matrix(nu, z, cfg)
    Mh = coefficient_matrix(nu, z + 0.5 * h, cfg)
    M1 = coefficient_matrix(nu, z + h, cfg)
    eye = np.broadcast_to(np.eye(2, dtype=complex), M0.shape)
    k1 = M0
    k2 = Mh @ (eye + 0.5 * h * k1)
    k3 = Mh @ (eye + 0.5 * h * k2)
    k4 = M1 @ (eye + h * k3)
    return eye + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _rotation(z: float, dk: float) -> np.ndarray:
    return np.array([np.exp(-0.5j * dk * z), np.exp(0.5j * dk * z)])


def _common_phase(nu, L, cfg):
    nu = np.asarray(nu, dtype=float)
    return np.exp(0.5j * nu * (1.0 / cfg.te.group_velocity + 1.0 / cfg.tm.group_velocity) * L)


def _propagate(nu, L, n, cfg, z0=0.0):
    h = L / n
    P = _rotation(-h, cfg.phase_mismatch_dk)[:, None] * rk4_step_matrix(nu, h, cfg)
    T = np.linalg.matrix_power(P, n)
    r_out = _rotation(z0 + L, cfg.phase_mismatch_dk)
    r_in = _rotation(z0, cfg.phase_mismatch_dk)
    T = r_out[:, None] * T / r_in[None, :]
    return T * _common_phase(nu, L, cfg)[..., None, None]


@dataclass(frozen=True)
class TransferMatrix:
    """Numerical fundamental matrix T(nu, L) with its Richardson error estimate."""

    nu: np.ndarray | float
    entries: np.ndarray
    length: float
    steps: int
    error_estimate: float


def _steps_for(L: float, step: float | None) -> int:
    if step is None:
        return DEFAULT_STEPS
    if not step > 0:
        raise InvalidParameterError("step must be positive")
    n = max(2, int(math.ceil(L / step - 1e-9)))
    return n + (n % 2)


def integrate_transfer(nu, L: float, cfg: DeviceConfig, step: float | None = None,
                       z0: float = 0.0, check: bool = True) -> TransferMatrix:
    """RK4 fundamental matrix from z0 to z0 + L (default step L/4096).

    The Richardson estimate |T_h - T_2h| / 15, relative to max |T_h|, must
    stay below 1e-6 when ``check`` is set.
    """
    if L < 0:
        raise InvalidParameterError("length must be >= 0")
    nu_arr = np.asarray(nu, dtype=float)
    if L == 0:
        eye = np.broadcast_to(np.eye(2, dtype=complex), nu_arr.shape + (2, 2)).copy()
        return TransferMatrix(nu, eye, 0.0, 0, 0.0)
    n = _steps_for(L, None if step is None else step)
    fine = _propagate(nu_arr, L, n, cfg, z0)
    coarse = _propagate(nu_arr, L, n // 2, cfg, z0)
    scale = np.max(np.abs(fine), axis=(-2, -1))
    err = float(np.max(np.max(np.abs(fine - coarse), axis=(-2, -1)) / 15.0 / scale))
    if check and err > RICHARDSON_LIMIT:
        raise AccuracyError(f"RK4 Richardson error estimate {err:.3e} exceeds {RICHARDSON_LIMIT:g}; "
                            f"reduce the step (currently L/{n})")
    return TransferMatrix(nu, fine, float(L), n, err)


# --------------------------------------------------------------------------
# Langevin noise by quadrature of the Green's kernel

@dataclass(frozen=True)
class NoiseGreens:
    """|Phi_ij(L, xi)|^2 on the RK4 grid xi_k = k L / n, shape (n+1, ..., 2, 2)."""

    nu: np.ndarray | float
    xi: np.ndarray
    kernel: np.ndarray
    length: float

    def at(self, xi: float) -> np.ndarray:
        """Kernel at a grid point; zero beyond the output plane (causality)."""
        if xi > self.length:
            return np.zeros_like(self.kernel[0])
        k = int(round(xi / self.length * (self.xi.size - 1)))
        if not math.isclose(self.xi[k], xi, rel_tol=1e-12, abs_tol=1e-15):
            raise InvalidParameterError("xi must be a grid point")
        return self.kernel[k]


def _matrix_powers(P: np.ndarray, n: int) -> np.ndarray:
    """Stack [P^0, P^1, ..., P^n] built by doubling."""
    eye = np.broadcast_to(np.eye(2, dtype=complex), P.shape)
    out = np.empty((n + 1,) + P.shape, dtype=complex)
    out[0] = eye
    filled, block = 1, P
    while filled < n + 1:
        take = min(filled, n + 1 - filled)
        out[filled:filled + take] = out[:take] @ block
        filled += take
        block = block @ block
    return out


def noise_greens(nu, L: float, cfg: DeviceConfig, steps: int = DEFAULT_STEPS) -> NoiseGreens:
    """Propagated Green's kernel from a source at xi to the output at L."""
    n = steps + (steps % 2)
    h = L / n
    P = _rotation(-h, cfg.phase_mismatch_dk)[:, None] * rk4_step_matrix(nu, h, cfg)
    powers = _matrix_powers(P, n)
    # Phi(L, xi_k) = R(L) P^(n-k) R(xi_k)^-1; rotations are unimodular
    kernel = np.abs(powers[::-1]) ** 2
    return NoiseGreens(nu, np.linspace(0.0, L, n + 1), kernel, float(L))


def _simpson_weights(n: int, h: float) -> np.ndarray:
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * h / 3.0


def _integrate_kernel(greens: NoiseGreens) -> np.ndarray:
    n = greens.xi.size - 1
    w = _simpson_weights(n, greens.length / n)
    return np.tensordot(w, greens.kernel, axes=(0, 0))


def noise_flux_quadrature(nu, L: float, cfg: DeviceConfig, n_T: float | None = None,
                          steps: int = DEFAULT_STEPS):
    """Noise flux densities (TE at nu, TM at -nu) for an occupation n_T.

    With n_T = None the occupation is taken from the config temperature at
    the TE carrier frequency.
    """
    if L < 0:
        raise InvalidParameterError("length must be >= 0")
    if n_T is None:
        n_T = thermal_occupation(cfg.te.central_angular_frequency, cfg.reservoir_temperature)
    if n_T < 0:
        raise InvalidParameterError("occupation must be >= 0")
    if L == 0:
        z = np.zeros(np.shape(nu))
        return (z.item(), z.item()) if z.ndim == 0 else (z, z)
    I = _integrate_kernel(noise_greens(nu, L, cfg, steps))
    gte, gtm = cfg.te.field_loss, cfg.tm.field_loss
    te = (gte * n_T * I[..., 0, 0] + gtm * (n_T + 1.0) * I[..., 0, 1]) / math.pi
    tm = (gte * (n_T + 1.0) * I[..., 1, 0] + gtm * n_T * I[..., 1, 1]) / math.pi
    if np.ndim(te) == 0:
        return float(te), float(tm)
    return te, tm


def signal_flux_oracle(nu, L: float, cfg: DeviceConfig, step: float | None = None):
    """Signal density |T_12|^2 / 2 pi from the integrated transfer matrix."""
    T = integrate_transfer(nu, L, cfg, step).entries
    val = np.abs(T[..., 0, 1]) ** 2 / (2 * math.pi)
    return float(val) if np.ndim(val) == 0 else val


def commutator_sum(nu, L: float, cfg: DeviceConfig, steps: int = DEFAULT_STEPS):
    """|T11|^2 - |T12|^2 + 2 int (gamma_TE |Phi11|^2 - gamma_TM |Phi12|^2) dxi (should be 1)."""
    T = integrate_transfer(nu, L, cfg, L / steps).entries
    I = _integrate_kernel(noise_greens(nu, L, cfg, steps))
    val = (np.abs(T[..., 0, 0]) ** 2 - np.abs(T[..., 0, 1]) ** 2
           + 2.0 * (cfg.te.field_loss * I[..., 0, 0] - cfg.tm.field_loss * I[..., 0, 1]))
    return float(val) if np.ndim(val) == 0 else val


# --------------------------------------------------------------------------
# fourth-order moments by Gaussian factorization

@dataclass(frozen=True)
class WickMoments:
    """Fourth-order moments; ``commutator_defect`` is |<AB> - <BA>| / |<AB>| at tau = 0."""

    K: np.ndarray | float
    D_te: float
    D_tm: float
    flux_te: float
    flux_tm: float
    commutator_defect: float


def _check_windows(windows):
    (lo_p, hi_p), (lo_m, hi_m) = ((float(a), float(b)) for a, b in windows)
    if not (hi_p > lo_p and hi_m > lo_m):
        raise PreconditionError("windows must have positive width")
    if max(lo_p, lo_m) < min(hi_p, hi_m):
        raise PreconditionError("correlation windows overlap")
    scale = max(abs(lo_p), abs(hi_p))
    if abs(lo_m + hi_p) > 1e-9 * scale or abs(hi_m + lo_p) > 1e-9 * scale:
        raise PreconditionError("the TM window must be the mirror image of the TE window")
    return lo_p, hi_p


def wick_fourth_moment(windows, L: float, tau, cfg: DeviceConfig, bins: int = 4096,
                       step: float | None = None) -> WickMoments:
    """Flux correlation K and fluctuations D from discretized Gaussian moments.

    The TE window (first) is split into ``bins`` equal bins; each bin is one
    input mode pair (alpha_k = a_TE(nu_k), beta_k = a_TM(-nu_k)) with vacuum
    moments <x x+> = 1/(2 pi h). Output operators are linear in the inputs,
    so every fourth moment follows from pairwise contractions.

    Langevin inputs are left out. With unequal TE/TM losses the truncated
    output operators A (TE) and B (TM) then fail to commute; the pairing
    <A+B+> is taken as conj(<AB>), which is what commuting outputs give.
    The size of the neglected commutator is returned for inspection.
    """
    lo, hi = _check_windows(windows)
    h = (hi - lo) / bins
    nu = lo + h * (np.arange(bins) + 0.5)
    T = integrate_transfer(nu, L, cfg, step).entries
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    vac = 1.0 / (2 * math.pi * h)
    zero = np.zeros(bins, dtype=complex)

    # operator = (annihilator coeffs on alpha, beta; creator coeffs on alpha+, beta+)
    def dag(op):
        ca, cb, da, db = op
        return np.conj(da), np.conj(db), np.conj(ca), np.conj(cb)

    def pair(x, y):
        # vacuum input: only <annihilator creator> survives
        return complex(np.sum(x[0] * y[2] + x[1] * y[3]) * vac)

    B = (zero, h * np.conj(T[:, 1, 1]), h * np.conj(T[:, 1, 0]), zero)
    Bd = dag(B)
    flux_tm = pair(Bd, B).real
    D_tm = (pair(Bd, Bd) * pair(B, B) + pair(Bd, B) * pair(B, Bd)).real

    K = np.empty(taus.size)
    for i, t in enumerate(taus):
        ph = h * np.exp(-1j * nu * t)
        A = (ph * T[:, 0, 0], zero, zero, ph * T[:, 0, 1])
        Ad = dag(A)
        ab = pair(A, B)
        K[i] = (np.conj(ab) * ab + pair(Ad, B) * pair(A, Bd)).real
    A0 = (h * T[:, 0, 0], zero, zero, h * T[:, 0, 1])
    Ad0 = dag(A0)
    flux_te = pair(Ad0, A0).real
    D_te = (pair(Ad0, Ad0) * pair(A0, A0) + pair(Ad0, A0) * pair(A0, Ad0)).real
    ab0 = pair(A0, B)
    defect = abs(ab0 - pair(B, A0)) / abs(ab0) if ab0 != 0 else 0.0
    Kout = float(K[0]) if np.ndim(tau) == 0 else K
    return WickMoments(Kout, float(D_te), float(D_tm), float(flux_te), float(flux_tm), float(defect))
