"""Physical parameters, unit handling and derived quantities.

Units are CGS lengths (cm), seconds and angular frequencies in rad/s.
Config files may give ordinary frequencies in THz; they are converted with
an explicit factor of 2*pi. Temperatures are energies (erg internally, meV
in config files).
"""

from __future__ import annotations

import dataclasses
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .errors import ConfigError, DegenerateVelocityError, InvalidParameterError

HBAR = 1.054571817e-27  # erg s
C_LIGHT = 2.99792458e10  # cm/s
MEV = 1.602176634e-15  # erg per meV
THZ = 2.0 * math.pi * 1e12  # rad/s per THz

ENERGY_TOLERANCE = 1e-9


class Mode(str, enum.Enum):
    TE = "TE"
    TM = "TM"
    PUMP = "Pump"


@dataclass(frozen=True)
class ModeParams:
    """One guided mode: group velocity (cm/s), field loss (1/cm), carrier (rad/s)."""

    label: Mode
    group_velocity: float
    field_loss: float = 0.0
    central_angular_frequency: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "label", Mode(self.label))
        if not (self.group_velocity > 0 and math.isfinite(self.group_velocity)):
            raise InvalidParameterError(
                f"{self.label.value}: group velocity must be positive, got {self.group_velocity!r}")
        if not (self.field_loss >= 0 and math.isfinite(self.field_loss)):
            raise InvalidParameterError(
                f"{self.label.value}: field loss must be >= 0, got {self.field_loss!r}")
        if not (self.central_angular_frequency > 0):
            raise InvalidParameterError(
                f"{self.label.value}: carrier frequency must be positive, "
                f"got {self.central_angular_frequency!r}")


@dataclass(frozen=True)
class DeviceConfig:
    """Waveguide device: three modes, couplings, mismatch, length and temperature.

    ``coupling_g`` (1/cm) and ``coupling_G`` (s^1/2/cm) are magnitudes; the
    common phase lives in ``coupling_phase``. ``reservoir_temperature`` is an
    energy in erg.
    """

    te: ModeParams
    tm: ModeParams
    pump: ModeParams
    coupling_g: float = 0.0
    coupling_G: float = 0.0
    phase_mismatch_dk: float = 0.0
    length: float = 0.1
    reservoir_temperature: float = 0.0
    coupling_phase: float = 0.0

    def __post_init__(self):
        for name in ("coupling_g", "coupling_G"):
            val = getattr(self, name)
            if not (val >= 0 and math.isfinite(val)):
                raise InvalidParameterError(f"{name} must be a finite value >= 0, got {val!r}")
        if not (self.length > 0 and math.isfinite(self.length)):
            raise InvalidParameterError(f"length must be positive, got {self.length!r}")
        if not (self.reservoir_temperature >= 0):
            raise InvalidParameterError("reservoir temperature must be >= 0")
        if not math.isfinite(self.phase_mismatch_dk):
            raise InvalidParameterError("phase mismatch must be finite")
        wp = self.pump.central_angular_frequency
        wsum = self.te.central_angular_frequency + self.tm.central_angular_frequency
        if abs(wp - wsum) > ENERGY_TOLERANCE * wp:
            raise ConfigError(
                f"energy conservation violated: omega_p={wp:.12e}, "
                f"omega_TE+omega_TM={wsum:.12e} (relative mismatch {abs(wp - wsum) / wp:.3e})")

    @property
    def g(self) -> complex:
        """Complex classical-pump coupling, 1/cm."""
        return self.coupling_g * complex(math.cos(self.coupling_phase), math.sin(self.coupling_phase))

    @property
    def G(self) -> complex:
        """Complex quantized-pump coupling, s^1/2/cm."""
        return self.coupling_G * complex(math.cos(self.coupling_phase), math.sin(self.coupling_phase))

    @property
    def inverse_velocity_mismatch(self) -> float:
        """1/v_TE - 1/v_TM in s/cm."""
        return 1.0 / self.te.group_velocity - 1.0 / self.tm.group_velocity

    def replace(self, **changes) -> "DeviceConfig":
        return dataclasses.replace(self, **changes)

    def with_losses(self, te: float, tm: float) -> "DeviceConfig":
        return self.replace(te=dataclasses.replace(self.te, field_loss=te),
                            tm=dataclasses.replace(self.tm, field_loss=tm))

    def lossless(self) -> "DeviceConfig":
        return self.with_losses(0.0, 0.0)


@dataclass(frozen=True)
class SpectralGrid:
    """Ordered detuning samples plus an optional correlation window spec."""

    detunings: np.ndarray
    bin_width: float
    window_center: float = 0.0
    window_width: float = 0.0

    def __post_init__(self):
        nu = np.asarray(self.detunings, dtype=float)
        if nu.ndim != 1 or nu.size < 2:
            raise InvalidParameterError("grid needs at least two detunings")
        if np.any(np.diff(nu) <= 0):
            raise InvalidParameterError("detunings must be strictly increasing")
        if not self.bin_width > 0:
            raise InvalidParameterError("bin width must be positive")
        nu.setflags(write=False)
        object.__setattr__(self, "detunings", nu)

    @classmethod
    def uniform(cls, nu_min: float, nu_max: float, samples: int) -> "SpectralGrid":
        if samples < 2 or not nu_max > nu_min:
            raise InvalidParameterError("uniform grid needs nu_max > nu_min and samples >= 2")
        nu = np.linspace(nu_min, nu_max, samples)
        return cls(nu, (nu_max - nu_min) / (samples - 1))

    @property
    def span(self) -> tuple[float, float]:
        return float(self.detunings[0]), float(self.detunings[-1])


# --------------------------------------------------------------------------
# derived quantities

def _require_positive(**values):
    for name, v in values.items():
        if not v > 0:
            raise InvalidParameterError(f"{name} must be positive, got {v!r}")


def derive_g(overlap_A: complex, te: ModeParams, tm: ModeParams) -> complex:
    """Classical-pump coupling g = A / (hbar sqrt(v_TE v_TM)) in 1/cm."""
    _require_positive(v_te=te.group_velocity, v_tm=tm.group_velocity)
    return complex(overlap_A) / (HBAR * math.sqrt(te.group_velocity * tm.group_velocity))


def phase_mismatch_D(nu, cfg: DeviceConfig):
    """D(nu) = dk + nu (1/v_TE - 1/v_TM), 1/cm. Accepts scalars or arrays."""
    if np.ndim(nu) == 0:
        return cfg.phase_mismatch_dk + float(nu) * cfg.inverse_velocity_mismatch
    return cfg.phase_mismatch_dk + np.asarray(nu, dtype=float) * cfg.inverse_velocity_mismatch


def band_detuning(nu, cfg: DeviceConfig):
    """Quantized-pump band detuning delta_nu = nu (1/v_TM - 1/v_TE), 1/cm."""
    return -np.asarray(nu, dtype=float) * cfg.inverse_velocity_mismatch


def total_spdc_bandwidth(cfg: DeviceConfig, length: float | None = None) -> float:
    """Full width of the main spectral lobe, (4 pi / L) / |1/v_TE - 1/v_TM|, rad/s."""
    L = cfg.length if length is None else length
    _require_positive(length=L)
    dv = abs(cfg.inverse_velocity_mismatch)
    if dv == 0.0:
        raise DegenerateVelocityError("TE and TM group velocities coincide: bandwidth is unbounded")
    return 4.0 * math.pi / (L * dv)


def parametric_half_width(cfg: DeviceConfig, criterion: str = "mismatch") -> float:
    """Half-width in nu (rad/s) of the parametric-gain band.

    ``criterion="mismatch"`` uses |D(nu)| < 2|g| (real kappa, lossless);
    ``criterion="coupling"`` uses |nu| <= |g| / |1/v_TE - 1/v_TM|.
    The two differ by a factor of 2; both are exposed on purpose.
    """
    dv = abs(cfg.inverse_velocity_mismatch)
    if dv == 0.0:
        raise DegenerateVelocityError("TE and TM group velocities coincide")
    if criterion == "mismatch":
        return 2.0 * cfg.coupling_g / dv
    if criterion == "coupling":
        return cfg.coupling_g / dv
    raise InvalidParameterError(f"unknown criterion {criterion!r}")


def thermal_occupation(omega, temperature: float):
    """Bose-Einstein occupation 1/(exp(hbar omega / T) - 1); T is an energy (erg)."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise InvalidParameterError("frequency must be positive")
    if temperature < 0:
        raise InvalidParameterError("temperature must be >= 0")
    if temperature == 0:
        out = np.zeros_like(omega)
    else:
        x = HBAR * omega / temperature
        with np.errstate(over="ignore"):
            out = 1.0 / np.expm1(np.minimum(x, 745.0))
        out = np.where(x >= 745.0, 0.0, out)
    return float(out) if out.ndim == 0 else out


def interaction_time(length: float, v1: float, v2: float) -> float:
    """Characteristic interaction time L / sqrt(v1 v2), seconds."""
    _require_positive(v1=v1, v2=v2)
    return length / math.sqrt(v1 * v2)


def rabi_q0(band_width: float) -> float:
    """Q0 = band_width / 2 pi, s^-1 (single-photon flux per band)."""
    _require_positive(band_width=band_width)
    return band_width / (2.0 * math.pi)


def broadband_alpha(cfg: DeviceConfig, total_width: float) -> float:
    """alpha = sqrt(total_width) / |G| * |1/v_TM - 1/v_TE|."""
    _require_positive(total_width=total_width)
    if cfg.coupling_G == 0:
        return math.inf if cfg.inverse_velocity_mismatch else 0.0
    return math.sqrt(total_width) / cfg.coupling_G * abs(cfg.inverse_velocity_mismatch)


def pump_overlap_for_power(cfg: DeviceConfig, pump_power: float) -> complex:
    """Overlap A produced by a classical pump of the given power (erg/s).

    The single-photon overlap is G hbar sqrt(v_TE v_TM v_p); a classical pump
    carrying P/(hbar omega_p) photons per second has linear photon density
    P/(hbar omega_p v_p), whose square root scales the overlap.
    """
    _require_positive(pump_power=pump_power)
    vp = cfg.pump.group_velocity
    a_single = cfg.G * HBAR * math.sqrt(cfg.te.group_velocity * cfg.tm.group_velocity * vp)
    density = pump_power / (HBAR * cfg.pump.central_angular_frequency * vp)
    return a_single * math.sqrt(density)


# --------------------------------------------------------------------------
# config ingestion

_MODE_KEYS = {"group_velocity_cm_s", "field_loss_per_cm", "wavelength_nm", "frequency_thz"}
_COUPLING_KEYS = {"g_per_cm", "overlap_A", "phase_rad", "G_sqrt_s_per_cm"}
_DEVICE_KEYS = {"length_cm", "dk_per_cm", "temperature_mev"}
_QPUMP_KEYS = {"band_width_thz", "bands"}
_TOP_KEYS = {"modes", "coupling", "device", "qpump", "description"}


def _check_keys(section: str, data: Mapping, allowed: set):
    if not isinstance(data, Mapping):
        raise ConfigError(f"section '{section}' must be an object")
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in '{section}': {', '.join(unknown)}")


def _number(section: str, key: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{section}.{key}' must be a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"'{section}.{key}' must be finite")
    return value


def _mode_from_dict(label: Mode, data: Mapping) -> ModeParams:
    sec = f"modes.{label.name.lower()}"
    _check_keys(sec, data, _MODE_KEYS)
    if "group_velocity_cm_s" not in data:
        raise ConfigError(f"'{sec}.group_velocity_cm_s' is required")
    has_wl, has_f = "wavelength_nm" in data, "frequency_thz" in data
    if has_wl == has_f:
        raise ConfigError(f"'{sec}' needs exactly one of wavelength_nm or frequency_thz")
    if has_wl:
        wl = _number(sec, "wavelength_nm", data["wavelength_nm"])
        if wl <= 0:
            raise ConfigError(f"'{sec}.wavelength_nm' must be positive")
        omega = 2.0 * math.pi * C_LIGHT / (wl * 1e-7)
    else:
        omega = _number(sec, "frequency_thz", data["frequency_thz"]) * THZ
    return ModeParams(label,
                      _number(sec, "group_velocity_cm_s", data["group_velocity_cm_s"]),
                      _number(sec, "field_loss_per_cm", data.get("field_loss_per_cm", 0.0)),
                      omega)


@dataclass(frozen=True)
class LoadedConfig:
    """A parsed config file: the device plus optional quantized-pump band settings."""

    device: DeviceConfig
    raw: dict = field(repr=False)
    band_width: float | None = None  # rad/s
    bands: int | None = None


def config_from_dict(data: Mapping) -> LoadedConfig:
    """Build a validated config from a parsed JSON document; unknown keys are rejected."""
    _check_keys("<root>", data, _TOP_KEYS)
    modes = data.get("modes")
    if modes is None:
        raise ConfigError("'modes' section is required")
    _check_keys("modes", modes, {"te", "tm", "pump"})
    for m in ("te", "tm", "pump"):
        if m not in modes:
            raise ConfigError(f"'modes.{m}' is required")
    try:
        te = _mode_from_dict(Mode.TE, modes["te"])
        tm = _mode_from_dict(Mode.TM, modes["tm"])
        pump = _mode_from_dict(Mode.PUMP, modes["pump"])
    except InvalidParameterError as exc:
        raise ConfigError(str(exc)) from exc

    coupling = data.get("coupling", {})
    _check_keys("coupling", coupling, _COUPLING_KEYS)
    phase = _number("coupling", "phase_rad", coupling.get("phase_rad", 0.0))
    if "g_per_cm" in coupling:
        g = _number("coupling", "g_per_cm", coupling["g_per_cm"])
        if g < 0:
            raise ConfigError("'coupling.g_per_cm' must be >= 0 (use phase_rad for the sign)")
    elif "overlap_A" in coupling:
        A = _number("coupling", "overlap_A", coupling["overlap_A"])
        if A < 0:
            raise ConfigError("'coupling.overlap_A' must be >= 0 (use phase_rad for the sign)")
        g = abs(derive_g(A, te, tm))
    else:
        g = 0.0
    G = _number("coupling", "G_sqrt_s_per_cm", coupling.get("G_sqrt_s_per_cm", 0.0))

    device = data.get("device", {})
    _check_keys("device", device, _DEVICE_KEYS)
    if "length_cm" not in device:
        raise ConfigError("'device.length_cm' is required")
    temp_mev = _number("device", "temperature_mev", device.get("temperature_mev", 0.0))
    try:
        cfg = DeviceConfig(te, tm, pump, coupling_g=g, coupling_G=G,
                           phase_mismatch_dk=_number("device", "dk_per_cm", device.get("dk_per_cm", 0.0)),
                           length=_number("device", "length_cm", device["length_cm"]),
                           reservoir_temperature=temp_mev * MEV,
                           coupling_phase=phase)
    except InvalidParameterError as exc:
        raise ConfigError(str(exc)) from exc

    qp = data.get("qpump", {})
    _check_keys("qpump", qp, _QPUMP_KEYS)
    bw = qp.get("band_width_thz")
    bands = qp.get("bands")
    if bands is not None and (isinstance(bands, bool) or not isinstance(bands, int) or bands < 1):
        raise ConfigError("'qpump.bands' must be a positive integer")
    return LoadedConfig(cfg, dict(data),
                        None if bw is None else _number("qpump", "band_width_thz", bw) * THZ,
                        bands)


def load_config(path: str | Path) -> LoadedConfig:
    """Read and validate a JSON config file."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror or exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {p}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return config_from_dict(data)


def bundled_config_path(name: str) -> Path:
    """Path of a config shipped with the package (e.g. ``paper_device.json``)."""
    p = Path(__file__).with_name("data") / name
    if not p.exists():
        raise ConfigError(f"no bundled config named {name!r}")
    return p


def reference_device() -> DeviceConfig:
    """The bundled reference device (``paper_device.json``)."""
    return load_config(bundled_config_path("paper_device.json")).device
