"""Physical models of the emitter, excitation and detection chain.

All closed-form responses used by both the simulators and the fitting
routines live here: the saturation curve, the sine-square polarization
response and the Lorentzian line shape of the zero-phonon line (ZPL).

Unit conventions (fixed package-wide):
    rates      kcps (kilocounts per second)
    times      ns for lifetimes / dead times, ps for timestamps and jitter
    power      mW
    intensity  MW/cm^2
    lengths    nm for wavelengths, um for geometry
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError

# Gaussian FWHM = 2*sqrt(2*ln 2) * sigma
FWHM_TO_SIGMA = 1.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))


@dataclass(frozen=True)
class EmitterModel:
    """Effective two-level single-photon emitter.

    lifetime_ns        excited-state decay time
    n_inf_kcps         maximum observable photon-count rate
    i_sat              saturation intensity, MW/cm^2
    zpl_center_nm      ZPL peak wavelength
    zpl_fwhm_nm        ZPL full width at half maximum
    dw_factor          fraction of emission in the ZPL, in [0, 1]
    emission_dipole_angle_deg / excitation_dipole_angle_deg
                       projected dipole axes
    emission_visibility / excitation_visibility
                       polarization visibilities in [0, 1]
    """

    lifetime_ns: float = 1.0
    n_inf_kcps: float = 29.0
    i_sat: float = 130.0
    zpl_center_nm: float = 738.8
    zpl_fwhm_nm: float = 7.0
    dw_factor: float = 0.74
    emission_dipole_angle_deg: float = 0.0
    excitation_dipole_angle_deg: float = 0.0
    emission_visibility: float = 0.54
    excitation_visibility: float = 0.25

    def __post_init__(self):
        if not self.lifetime_ns > 0:
            raise InvalidParameterError("lifetime_ns must be > 0")
        if not self.i_sat > 0:
            raise InvalidParameterError("i_sat must be > 0")
        if self.n_inf_kcps < 0:
            raise InvalidParameterError("n_inf_kcps must be >= 0")
        if not self.zpl_fwhm_nm > 0:
            raise InvalidParameterError("zpl_fwhm_nm must be > 0")
        if not 0.0 <= self.dw_factor <= 1.0:
            raise InvalidParameterError("dw_factor must be in [0, 1]")
        for name in ("emission_visibility", "excitation_visibility"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidParameterError(f"{name} must be in [0, 1]")


@dataclass(frozen=True)
class ExcitationField:
    """Focused excitation laser at the sample."""

    power_mw: float
    spot_diameter_um: float = 0.6
    polarization_angle_deg: float = 0.0
    wavelength_nm: float = 532.0

    def __post_init__(self):
        if self.power_mw < 0:
            raise InvalidParameterError("power_mw must be >= 0")
        if not self.spot_diameter_um > 0:
            raise InvalidParameterError("spot_diameter_um must be > 0")

    @property
    def intensity(self):
        """Focal intensity in MW/cm^2."""
        return power_to_intensity(self.power_mw, self.spot_diameter_um)


@dataclass(frozen=True)
class BackgroundContext:
    """Uncorrelated background light entering the detection path.

    background_rate_kcps is the total detected background rate; sb_ratio
    is the signal-to-background ratio when known from an independent
    measurement (e.g. the emission spectrum).
    """

    background_rate_kcps: float = 0.0
    sb_ratio: float | None = None

    def __post_init__(self):
        if self.background_rate_kcps < 0:
            raise InvalidParameterError("background_rate_kcps must be >= 0")
        if self.sb_ratio is not None and not self.sb_ratio > 0:
            raise InvalidParameterError("sb_ratio must be > 0 when present")


@dataclass(frozen=True)
class DetectionChain:
    """Detector and filter stage shared by both HBT channels."""

    quantum_efficiency: float = 1.0
    jitter_fwhm_ps: float = 300.0
    dead_time_ns: float = 50.0
    filter_pass_nm: tuple = (727.0, 752.0)

    def __post_init__(self):
        if not 0.0 <= self.quantum_efficiency <= 1.0:
            raise InvalidParameterError("quantum_efficiency must be in [0, 1]")
        if self.jitter_fwhm_ps < 0:
            raise InvalidParameterError("jitter_fwhm_ps must be >= 0")
        if self.dead_time_ns < 0:
            raise InvalidParameterError("dead_time_ns must be >= 0")
        lo, hi = self.filter_pass_nm
        if not lo < hi:
            raise InvalidParameterError("filter passband must have min < max")


def power_to_intensity(power_mw, spot_diameter_um=0.6):
    """Convert laser power (mW) at the focus to intensity (MW/cm^2).

    The focal spot is treated as a uniform disk, I = P / (pi r^2); with
    the 0.6 um spot this maps 135 mW to 47.7 MW/cm^2.  Exactly linear in
    power.
    """
    power_mw = np.asarray(power_mw, dtype=float)
    if np.any(power_mw < 0):
        raise InvalidParameterError("power must be >= 0")
    if not spot_diameter_um > 0:
        raise InvalidParameterError("spot diameter must be > 0")
    radius_cm = 0.5 * spot_diameter_um * 1e-4
    area_cm2 = np.pi * radius_cm**2
    intensity = (power_mw * 1e-9) / area_cm2  # mW -> MW
    return float(intensity) if intensity.ndim == 0 else intensity


def intensity_to_power(intensity, spot_diameter_um=0.6):
    """Inverse of :func:`power_to_intensity` (MW/cm^2 -> mW)."""
    intensity = np.asarray(intensity, dtype=float)
    if np.any(intensity < 0):
        raise InvalidParameterError("intensity must be >= 0")
    if not spot_diameter_um > 0:
        raise InvalidParameterError("spot diameter must be > 0")
    radius_cm = 0.5 * spot_diameter_um * 1e-4
    power = intensity * np.pi * radius_cm**2 * 1e9
    return float(power) if power.ndim == 0 else power


def saturation_rate(intensity, n_inf_kcps, i_sat):
    """Expected count rate n(I) = n_inf * I / (I + I_sat), in kcps.

    Monotone increasing and concave in I, bounded by n_inf.
    """
    if not i_sat > 0:
        raise InvalidParameterError("i_sat must be > 0")
    if n_inf_kcps < 0:
        raise InvalidParameterError("n_inf_kcps must be >= 0")
    intensity = np.asarray(intensity, dtype=float)
    if np.any(intensity < 0):
        raise InvalidParameterError("intensity must be >= 0")
    rate = n_inf_kcps * intensity / (intensity + i_sat)
    return float(rate) if rate.ndim == 0 else rate


def polarization_response(angle_deg, offset_kcps, amplitude_kcps, phase_deg=0.0):
    """Sine-square polarization response, period 180 degrees.

    n(theta) = offset + amplitude * sin^2(theta - phase).  The visibility
    of this curve is amplitude / (amplitude + 2*offset).
    """
    if offset_kcps < 0 or amplitude_kcps < 0:
        raise InvalidParameterError("offset and amplitude must be >= 0")
    angle_deg = np.asarray(angle_deg, dtype=float)
    s = np.sin(np.radians(angle_deg - phase_deg))
    rate = offset_kcps + amplitude_kcps * s * s
    return float(rate) if rate.ndim == 0 else rate


def polarization_visibility(offset_kcps, amplitude_kcps):
    """(max - min) / (max + min) of the sine-square response."""
    if offset_kcps < 0 or amplitude_kcps < 0:
        raise InvalidParameterError("offset and amplitude must be >= 0")
    if offset_kcps == 0 and amplitude_kcps == 0:
        return 0.0
    return amplitude_kcps / (amplitude_kcps + 2.0 * offset_kcps)


def lorentzian(x, center, fwhm, amplitude=1.0):
    """Peak-normalized Lorentzian: amplitude at x = center."""
    half = 0.5 * fwhm
    return amplitude * half**2 / ((np.asarray(x, dtype=float) - center) ** 2 + half**2)


def lorentzian_area(fwhm, amplitude=1.0, window=None, center=0.0):
    """Area under a peak-amplitude Lorentzian.

    Full line integral by default (pi * amplitude * fwhm / 2); restricted
    to ``window = (lo, hi)`` when given.
    """
    half = 0.5 * fwhm
    if window is None:
        return np.pi * amplitude * half
    lo, hi = window
    return amplitude * half * (np.arctan((hi - center) / half) - np.arctan((lo - center) / half))


def zpl_spectrum_model(wavelength_nm, model: EmitterModel, pedestal_level=0.0, peak_amplitude=1.0):
    """Spectral intensity of the ZPL: Lorentzian plus a flat pedestal.

    The pedestal stands in for the phonon sideband and host background,
    which vary slowly over the 727-752 nm analysis window.  With a
    constant pedestal the model is symmetric about the line center.
    """
    if pedestal_level < 0:
        raise InvalidParameterError("pedestal_level must be >= 0")
    vals = pedestal_level + lorentzian(
        wavelength_nm, model.zpl_center_nm, model.zpl_fwhm_nm, peak_amplitude
    )
    return float(vals) if np.ndim(vals) == 0 else vals
