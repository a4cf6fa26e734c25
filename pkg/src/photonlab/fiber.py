"""Vector HE11 guided-mode numerics for a vacuum-clad silica nanofiber.

Solves the exact hybrid-mode characteristic equation (Bessel J inside,
modified Bessel K outside) by bracketed root finding on the effective
index, evaluates the vector mode profile, and turns the evanescent
intensity at a dipole position into a channeling efficiency

    eta = Gamma_guided / (Gamma_guided + Gamma_nonguided),

with the non-guided emission rate approximated by the free-space rate.
The guided rate follows the standard mode-overlap expression: both
propagation directions and both polarization modes are summed, the mode
profile is normalized by the cross-section integral of n^2 |e|^2, and
the 1-D density of states contributes the group index.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import jv, kv

from .errors import (
    InvalidParameterError,
    NoGuidedModeError,
    UndefinedEfficiencyError,
    UnreachableEfficiencyError,
    WavelengthRangeError,
)

# Fused-silica Sellmeier coefficients (three-term form, wavelength in um)
SELLMEIER_B = (0.6961663, 0.4079426, 0.8974794)
SELLMEIER_C_UM2 = (0.0684043**2, 0.1162414**2, 9.896161**2)
SUPPORTED_BAND_NM = (400.0, 1000.0)

SINGLE_MODE_V = 2.405


def silica_index(wavelength_nm):
    """Refractive index of fused silica from the three-term Sellmeier form.

    Valid over the 400-1000 nm band used here; smooth and monotone
    decreasing across the visible and near infrared.
    """
    lo, hi = SUPPORTED_BAND_NM
    wl = np.asarray(wavelength_nm, dtype=float)
    if np.any(wl < lo) or np.any(wl > hi):
        raise WavelengthRangeError(f"wavelength outside supported band {lo}-{hi} nm")
    lam2 = (wl / 1000.0) ** 2
    n2 = 1.0 + sum(b * lam2 / (lam2 - c) for b, c in zip(SELLMEIER_B, SELLMEIER_C_UM2))
    out = np.sqrt(n2)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class FiberSpec:
    """Step-index nanofiber: silica core, vacuum cladding."""

    diameter_nm: float = 530.0
    cladding_index: float = 1.0

    def __post_init__(self):
        if not self.diameter_nm > 0:
            raise InvalidParameterError("diameter_nm must be > 0")
        if not self.cladding_index >= 1.0:
            raise InvalidParameterError("cladding_index must be >= 1")

    @property
    def radius_um(self):
        return self.diameter_nm / 2000.0

    def core_index(self, wavelength_nm):
        return silica_index(wavelength_nm)


def v_number(spec: FiberSpec, wavelength_nm):
    """Normalized frequency V = (pi d / lambda) * sqrt(n1^2 - n2^2)."""
    n1 = spec.core_index(wavelength_nm)
    n2 = spec.cladding_index
    return math.pi * spec.diameter_nm / wavelength_nm * math.sqrt(n1**2 - n2**2)


def is_single_mode(spec: FiberSpec, wavelength_nm):
    return v_number(spec, wavelength_nm) < SINGLE_MODE_V


# ---------------------------------------------------------------------------
# characteristic equation and mode solution


def _characteristic(neff, k0, a, n1, n2):
    """Exact vector dispersion relation for the nu = 1 hybrid family.

    With Jp = J1'(u)/(u J1(u)) and Kp = K1'(w)/(w K1(w)):
    (Jp + Kp) (n1^2 Jp + n2^2 Kp) - neff^2 (1/u^2 + 1/w^2)^2 = 0.
    """
    u = k0 * a * math.sqrt(max(n1**2 - neff**2, 0.0))
    w = k0 * a * math.sqrt(max(neff**2 - n2**2, 0.0))
    if u <= 0.0 or w <= 0.0:
        return math.nan
    j0, j1 = jv(0, u), jv(1, u)
    k0w, k1w = kv(0, w), kv(1, w)
    if j1 == 0.0 or k1w == 0.0 or not (math.isfinite(k0w) and math.isfinite(k1w)):
        return math.nan
    jp = (j0 - j1 / u) / (u * j1)
    kp = (-k0w - k1w / w) / (w * k1w)
    inv2 = 1.0 / u**2 + 1.0 / w**2
    return (jp + kp) * (n1**2 * jp + n2**2 * kp) - neff**2 * inv2**2


def _hybrid_s(u, w, n1, n2):
    """Polarization hybridization parameter of the HE11 field profile."""
    j0, j1 = jv(0, u), jv(1, u)
    k0w, k1w = kv(0, w), kv(1, w)
    jp = (j0 - j1 / u) / (u * j1)
    kp = (-k0w - k1w / w) / (w * k1w)
    return (1.0 / u**2 + 1.0 / w**2) / (jp + kp)


@dataclass(frozen=True)
class GuidedMode:
    """Solved HE11 mode at one wavelength.

    Radial profile functions (F_r, F_phi, F_z) are stored both as callables
    (via :meth:`field_components`) and as samples on ``r_samples_um``,
    normalized so that the cross-section integral of n^2 |e|^2 is 1.
    """

    wavelength_nm: float
    beta_rad_per_um: float
    effective_index: float
    q_per_um: float
    u_param: float
    w_param: float
    s_param: float
    core_index: float
    cladding_index: float
    radius_um: float
    group_index: float
    norm_um2: float
    residual: float
    r_samples_um: np.ndarray = field(repr=False)
    e_samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not self.cladding_index < self.effective_index < self.core_index:
            raise InvalidParameterError("effective index must lie between the two indices")
        if not self.q_per_um > 0:
            raise InvalidParameterError("transverse decay constant must be > 0")

    @property
    def k0_per_um(self):
        return 2.0 * math.pi / (self.wavelength_nm / 1000.0)

    def field_components(self, r_um):
        """(F_r, F_phi, F_z) radial profile magnitudes at radius r (um).

        Unnormalized (core amplitude 1); the common normalization lives in
        ``norm_um2``.
        """
        r = np.asarray(r_um, dtype=float)
        a = self.radius_um
        beta = self.beta_rad_per_um
        h = self.u_param / a
        q = self.w_param / a
        s = self.s_param
        inside = r < a
        fr = np.empty(r.shape)
        fphi = np.empty(r.shape)
        fz = np.empty(r.shape)

        ri = r[inside]
        fz[inside] = jv(1, h * ri)
        fr[inside] = (beta / h) * (0.5 * (1 - s) * jv(0, h * ri) - 0.5 * (1 + s) * jv(2, h * ri))
        fphi[inside] = (beta / h) * (0.5 * (1 - s) * jv(0, h * ri) + 0.5 * (1 + s) * jv(2, h * ri))

        ro = r[~inside]
        scale = jv(1, self.u_param) / kv(1, self.w_param)
        fz[~inside] = scale * kv(1, q * ro)
        fr[~inside] = (beta / q) * scale * (0.5 * (1 - s) * kv(0, q * ro) + 0.5 * (1 + s) * kv(2, q * ro))
        fphi[~inside] = (beta / q) * scale * (0.5 * (1 - s) * kv(0, q * ro) - 0.5 * (1 + s) * kv(2, q * ro))
        return fr, fphi, fz


def _solve_neff(k0, a, n1, n2, n_scan=2000):
    """Bracketed root of the characteristic equation on (n2, n1)."""
    eps = 1e-9
    grid = np.linspace(n2 + eps, n1 - eps, n_scan)
    vals = np.array([_characteristic(x, k0, a, n1, n2) for x in grid])
    ok = np.isfinite(vals)
    sign_change = None
    for i in range(len(grid) - 1):
        if ok[i] and ok[i + 1] and vals[i] == 0.0:
            sign_change = (grid[i], grid[i])
        if ok[i] and ok[i + 1] and vals[i] * vals[i + 1] < 0.0:
            sign_change = (grid[i], grid[i + 1])  # keep the largest-neff change
    if sign_change is None:
        raise NoGuidedModeError(
            "no sign change of the characteristic equation in (n_clad, n_core); mode below cutoff")
    lo, hi = sign_change
    if lo == hi:
        return lo
    return brentq(lambda x: _characteristic(x, k0, a, n1, n2), lo, hi,
                  xtol=1e-15, rtol=8.9e-16, maxiter=200)


def solve_he11(spec: FiberSpec, wavelength_nm, n_samples=400):
    """Solve the fundamental HE11 mode of the fiber at one wavelength."""
    n1 = spec.core_index(wavelength_nm)
    n2 = spec.cladding_index
    a = spec.radius_um
    lam_um = wavelength_nm / 1000.0
    k0 = 2.0 * math.pi / lam_um

    neff = _solve_neff(k0, a, n1, n2)
    residual = abs(_characteristic(neff, k0, a, n1, n2))
    if not residual < 1e-10:
        raise NoGuidedModeError(f"root residual {residual:.2e} exceeds 1e-10")
    beta = neff * k0
    u = k0 * a * math.sqrt(n1**2 - neff**2)
    w = k0 * a * math.sqrt(neff**2 - n2**2)
    s = _hybrid_s(u, w, n1, n2)
    q = w / a

    # group index dbeta/dk0 from a symmetric wavelength step, silica
    # dispersion included
    dlam = wavelength_nm * 5e-4
    betas = []
    k0s = []
    for wl in (wavelength_nm - dlam, wavelength_nm + dlam):
        k = 2.0 * math.pi / (wl / 1000.0)
        betas.append(_solve_neff(k, a, spec.core_index(wl), n2) * k)
        k0s.append(k)
    group_index = (betas[1] - betas[0]) / (k0s[1] - k0s[0])

    mode = GuidedMode(
        wavelength_nm=float(wavelength_nm), beta_rad_per_um=beta, effective_index=neff,
        q_per_um=q, u_param=u, w_param=w, s_param=s, core_index=n1, cladding_index=n2,
        radius_um=a, group_index=group_index, norm_um2=1.0, residual=residual,
        r_samples_um=np.empty(0), e_samples=np.empty((3, 0)))

    def density(r):
        fr, fphi, fz = mode.field_components(np.array([r]))
        n_sq = n1**2 if r < a else n2**2
        return n_sq * (fr[0] ** 2 + fphi[0] ** 2 + fz[0] ** 2) * r

    norm_in, _ = quad(density, 0.0, a, limit=200)
    norm_out, _ = quad(density, a, a + 40.0 / q, limit=200)
    norm = math.pi * (norm_in + norm_out)

    r_grid = np.linspace(0.0, a + 6.0 / q, n_samples)
    fr, fphi, fz = mode.field_components(r_grid)
    samples = np.vstack([fr, fphi, fz]) / math.sqrt(norm)

    return GuidedMode(
        wavelength_nm=float(wavelength_nm), beta_rad_per_um=beta, effective_index=neff,
        q_per_um=q, u_param=u, w_param=w, s_param=s, core_index=n1, cladding_index=n2,
        radius_um=a, group_index=group_index, norm_um2=norm, residual=residual,
        r_samples_um=r_grid, e_samples=samples)


# ---------------------------------------------------------------------------
# dipole channeling efficiency


ORIENTATIONS = ("radial", "azimuthal", "axial", "random")


def guided_rate_ratio(mode: GuidedMode, r_from_surface_nm, orientation="random"):
    """Gamma_guided / Gamma_free_space for a dipole outside the fiber.

    Sums both propagation directions and both polarization modes; the
    free-space rate stands in for the total non-guided rate downstream.
    """
    if r_from_surface_nm < 0:
        raise InvalidParameterError("radial position must be >= 0")
    if orientation not in ORIENTATIONS:
        raise InvalidParameterError(f"orientation must be one of {ORIENTATIONS}")
    r_um = mode.radius_um + r_from_surface_nm / 1000.0
    fr, fphi, fz = mode.field_components(np.array([r_um]))
    weights = {"radial": fr[0] ** 2, "azimuthal": fphi[0] ** 2, "axial": fz[0] ** 2}
    prefactor = 3.0 * math.pi * mode.group_index / (mode.k0_per_um**2 * mode.norm_um2)
    if orientation == "random":
        return prefactor * (weights["radial"] + weights["azimuthal"] + weights["axial"]) / 3.0
    return prefactor * weights[orientation]


def channeling_efficiency(mode: GuidedMode, spec: FiberSpec, r_from_surface_nm,
                          orientation="random"):
    """Fraction of spontaneous emission channeled into the guided mode.

    eta = Gamma_g / (Gamma_g + Gamma_0), strictly decreasing with distance
    from the surface.  ``random`` is the mean of the three principal
    orientations.
    """
    if abs(spec.radius_um - mode.radius_um) > 1e-12:
        raise InvalidParameterError("mode was solved for a different fiber")
    if orientation == "random":
        vals = [channeling_efficiency(mode, spec, r_from_surface_nm, o)
                for o in ("radial", "azimuthal", "axial")]
        return float(np.mean(vals))
    g = guided_rate_ratio(mode, r_from_surface_nm, orientation)
    return g / (1.0 + g)


def invert_channeling(mode: GuidedMode, spec: FiberSpec, eta_target, orientation="random"):
    """Radial position (nm from the surface) at which eta equals the target."""
    if not 0.0 < eta_target < 1.0:
        raise InvalidParameterError("eta_target must be in (0, 1)")
    eta0 = channeling_efficiency(mode, spec, 0.0, orientation)
    if eta_target >= eta0:
        raise UnreachableEfficiencyError(
            f"target {eta_target:.4f} exceeds the surface maximum {eta0:.4f}")
    r_hi = 1.0
    while channeling_efficiency(mode, spec, r_hi, orientation) > eta_target:
        r_hi *= 2.0
        if r_hi > 1e7:
            raise UnreachableEfficiencyError("target efficiency unreachably small")
    r = brentq(lambda x: channeling_efficiency(mode, spec, x, orientation) - eta_target,
               0.0, r_hi, xtol=1e-10, rtol=8.9e-16, maxiter=200)
    return float(r)


# ---------------------------------------------------------------------------
# count-rate bookkeeping


def solid_angle_fraction(na):
    """Collection fraction of an objective: (1 - sqrt(1 - NA^2)) / 2."""
    if not 0.0 < na <= 1.0:
        raise InvalidParameterError("NA must be in (0, 1]")
    return (1.0 - math.sqrt(1.0 - na**2)) / 2.0


@dataclass(frozen=True)
class CollectionBudget:
    """Transmittances and collection fractions of the two detection paths."""

    kappa_onf: float = 0.25
    kappa_ol: float = 0.022
    na: float = 0.85
    f_ol: float = None
    guided_ends_counted: int = 2
    kappa_onf_err: float = 0.03
    kappa_ol_err: float = 0.004

    def __post_init__(self):
        if self.f_ol is None:
            object.__setattr__(self, "f_ol", solid_angle_fraction(self.na))
        for name in ("kappa_onf", "kappa_ol", "f_ol"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise InvalidParameterError(f"{name} must be in (0, 1]")
        if self.guided_ends_counted not in (1, 2):
            raise InvalidParameterError("guided_ends_counted must be 1 or 2")
        if self.kappa_onf_err < 0 or self.kappa_ol_err < 0:
            raise InvalidParameterError("uncertainties must be >= 0")


@dataclass(frozen=True)
class CouplingEstimate:
    """Guided-mode coupling fraction inferred from measured count rates."""

    eta: float
    uncertainty: float
    guided_rate_inferred_kcps: float = None
    radiated_rate_inferred_kcps: float = None
    r_nm: float = None

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise InvalidParameterError("eta must be in [0, 1]")
        if self.r_nm is not None and self.r_nm < 0:
            raise InvalidParameterError("r_nm must be >= 0")


def efficiency_from_counts(n_guided_kcps, n_radiated_kcps, budget: CollectionBudget,
                           n_guided_err=0.0, n_radiated_err=0.0):
    """Coupling efficiency from the two measured count rates.

    G = ends * n_guided / kappa_onf is the emission into the guided modes,
    R = n_radiated / (kappa_ol * f_ol) the emission into radiation modes;
    eta = G / (G + R).  First-order uncertainty is propagated from the
    count-rate errors and the budget's kappa uncertainties.
    """
    if n_guided_kcps < 0 or n_radiated_kcps < 0:
        raise InvalidParameterError("count rates must be >= 0")
    G = budget.guided_ends_counted * n_guided_kcps / budget.kappa_onf
    R = n_radiated_kcps / (budget.kappa_ol * budget.f_ol)
    if G + R == 0:
        raise UndefinedEfficiencyError("no counts in either channel")
    eta = G / (G + R)

    rel_g_sq = 0.0
    if G > 0:
        rel_g_sq = (n_guided_err / n_guided_kcps) ** 2 + (budget.kappa_onf_err / budget.kappa_onf) ** 2
    rel_r_sq = 0.0
    if R > 0:
        rel_r_sq = (n_radiated_err / n_radiated_kcps) ** 2 + (budget.kappa_ol_err / budget.kappa_ol) ** 2
    sigma = eta * (1.0 - eta) * math.sqrt(rel_g_sq + rel_r_sq)
    return CouplingEstimate(eta=float(eta), uncertainty=float(sigma),
                            guided_rate_inferred_kcps=float(G),
                            radiated_rate_inferred_kcps=float(R))
