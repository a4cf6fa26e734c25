"""Nonlinear least-squares core and the spectral / saturation / polarization fits.

The fitting engine is a damped Gauss-Newton (Levenberg-Marquardt) loop
with analytic Jacobians for all built-in models and a central
finite-difference fallback for user models.  All fit routines are pure
and deterministic for fixed inputs.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import FitFailureError, InvalidParameterError, UnresolvableLineError
from .models import lorentzian, lorentzian_area

DEFAULT_FILTER_WINDOW = (727.0, 752.0)


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class Spectrum:
    """Wavelength-intensity pairs from the spectrometer."""

    wavelengths_nm: np.ndarray
    intensities: np.ndarray
    resolution_nm: float = 0.0

    def __post_init__(self):
        wl = np.asarray(self.wavelengths_nm, dtype=float)
        inten = np.asarray(self.intensities, dtype=float)
        object.__setattr__(self, "wavelengths_nm", wl)
        object.__setattr__(self, "intensities", inten)
        if wl.shape != inten.shape or wl.ndim != 1:
            raise InvalidParameterError("wavelengths and intensities must be equal-length 1-D arrays")
        if wl.size >= 2 and not np.all(np.diff(wl) > 0):
            raise InvalidParameterError("wavelengths must be strictly increasing")
        if np.any(~np.isfinite(inten)) or np.any(~np.isfinite(wl)):
            raise InvalidParameterError("spectrum contains non-finite values")
        if np.any(inten < 0):
            raise InvalidParameterError("intensities must be non-negative")
        if self.resolution_nm < 0:
            raise InvalidParameterError("resolution_nm must be >= 0")

    def scaled(self, factor):
        return Spectrum(self.wavelengths_nm, self.intensities * factor, self.resolution_nm)


@dataclass
class FitResult:
    """Raw output of the least-squares engine."""

    params: np.ndarray
    cov: np.ndarray
    perr: np.ndarray
    ssr: float
    n_iter: int
    converged: bool
    message: str
    dof: int

    @property
    def reduced_chi2(self):
        return self.ssr / self.dof if self.dof > 0 else np.nan


@dataclass
class LorentzianFit:
    center_nm: float
    fwhm_nm: float
    peak_amplitude: float
    pedestal: tuple
    center_err: float
    fwhm_err: float
    amplitude_err: float
    warnings: list = field(default_factory=list)
    result: FitResult = None


@dataclass
class SaturationFit:
    n_inf_kcps: float
    i_sat: float
    n_inf_err: float
    i_sat_err: float
    residuals: np.ndarray = None
    background_slope: float = None
    saturation_power_mw: float = None
    warnings: list = field(default_factory=list)
    result: FitResult = None

    def __post_init__(self):
        if not (self.n_inf_kcps > 0 and self.i_sat > 0):
            raise InvalidParameterError("fitted n_inf and i_sat must be positive")


@dataclass
class PolarizationFit:
    offset: float
    amplitude: float
    phase_deg: float
    visibility: float
    visibility_err: float
    offset_err: float = np.nan
    amplitude_err: float = np.nan
    phase_err: float = np.nan
    warnings: list = field(default_factory=list)
    result: FitResult = None


# ---------------------------------------------------------------------------
# least-squares engine


def _fd_jacobian(model, x, params, f0=None):
    """Central finite-difference Jacobian of model(x, params)."""
    p = np.asarray(params, dtype=float)
    n = p.size
    if f0 is None:
        f0 = np.asarray(model(x, p), dtype=float)
    jac = np.empty((f0.size, n))
    for j in range(n):
        h = (np.abs(p[j]) + 1.0) * np.cbrt(np.finfo(float).eps)
        pp = p.copy()
        pp[j] += h
        pm = p.copy()
        pm[j] -= h
        jac[:, j] = (np.asarray(model(x, pp)) - np.asarray(model(x, pm))) / (2.0 * h)
    return jac


def nlls_fit(model, xdata, ydata, p0, bounds=None, sigma=None, jac=None,
             max_iter=200, tol=1e-12):
    """Damped Gauss-Newton least squares.

    model(x, params) -> predicted y.  ``jac(x, params)`` may supply the
    analytic Jacobian; otherwise central differences are used.  ``bounds``
    is an optional (lower, upper) pair of arrays; trial steps are
    projected onto the box.

    Returns a :class:`FitResult`; raises :class:`FitFailureError` when the
    iteration cap is hit or the normal equations stay singular, and
    :class:`InvalidParameterError` on violated preconditions.
    """
    x = np.asarray(xdata)
    y = np.asarray(ydata, dtype=float)
    p = np.asarray(p0, dtype=float).copy()
    npar = p.size
    if y.size < npar:
        raise InvalidParameterError(
            f"need at least as many points ({y.size}) as parameters ({npar})")
    if not np.all(np.isfinite(p)):
        raise InvalidParameterError("initial guess must be finite")
    if sigma is None:
        w = np.ones_like(y)
    else:
        w = 1.0 / np.asarray(sigma, dtype=float)
    if bounds is not None:
        lo = np.asarray(bounds[0], dtype=float)
        hi = np.asarray(bounds[1], dtype=float)
        if np.any(p < lo) or np.any(p > hi):
            raise InvalidParameterError("initial guess outside bounds")
    else:
        lo = hi = None

    def residual(params):
        return (np.asarray(model(x, params), dtype=float) - y) * w

    def jacobian(params, f0=None):
        if jac is not None:
            return np.asarray(jac(x, params), dtype=float) * w[:, None]
        return _fd_jacobian(model, x, params, f0=None) * w[:, None]

    r = residual(p)
    ssr = float(r @ r)
    lam = 0.0  # pure Gauss-Newton first; damp only when needed
    n_iter = 0
    message = "converged"
    converged = False

    for n_iter in range(1, max_iter + 1):
        J = jacobian(p)
        if not np.all(np.isfinite(J)):
            raise FitFailureError(
                "non-finite Jacobian",
                {"iteration": n_iter, "params": p.tolist(), "ssr": ssr})
        jtj = J.T @ J
        jtr = J.T @ r
        diag = np.diag(jtj).copy()
        diag[diag <= 0] = np.max(diag) if np.max(diag) > 0 else 1.0

        accepted = False
        for _ in range(60):
            try:
                step = np.linalg.solve(jtj + lam * np.diag(diag), -jtr)
            except np.linalg.LinAlgError:
                lam = max(lam * 10.0, 1e-10)
                continue
            if not np.all(np.isfinite(step)):
                lam = max(lam * 10.0, 1e-10)
                continue
            trial = p + step
            if lo is not None:
                trial = np.clip(trial, lo, hi)
            r_trial = residual(trial)
            ssr_trial = float(r_trial @ r_trial)
            if np.isfinite(ssr_trial) and ssr_trial <= ssr * (1.0 + 1e-14) + 1e-300:
                accepted = True
                break
            lam = max(lam * 10.0, 1e-10)
        if not accepted:
            raise FitFailureError(
                "could not find a descent step (singular or ill-conditioned system)",
                {"iteration": n_iter, "params": p.tolist(), "ssr": ssr, "lambda": lam})

        dp = trial - p
        p = trial
        improved = ssr - ssr_trial
        ssr = ssr_trial
        r = r_trial
        lam = 0.0 if lam < 1e-8 else lam / 3.0
        if np.all(np.abs(dp) <= tol * (np.abs(p) + tol)) or improved <= tol * (ssr + tol):
            converged = True
            break

    if not converged:
        raise FitFailureError(
            f"no convergence after {max_iter} iterations",
            {"iteration": n_iter, "params": p.tolist(), "ssr": ssr})

    J = jacobian(p)
    dof = y.size - npar
    try:
        cov = np.linalg.inv(J.T @ J)
    except np.linalg.LinAlgError:
        cov = np.full((npar, npar), np.nan)
    if sigma is None and dof > 0:
        cov = cov * (ssr / dof)  # scale by reduced chi^2, curve_fit convention
    perr = np.sqrt(np.abs(np.diag(cov)))
    return FitResult(params=p, cov=cov, perr=perr, ssr=ssr, n_iter=n_iter,
                     converged=True, message=message, dof=dof)


# ---------------------------------------------------------------------------
# built-in models with analytic Jacobians


def saturation_model(intensity, params):
    n_inf, i_sat = params
    return n_inf * intensity / (intensity + i_sat)


def saturation_jac(intensity, params):
    n_inf, i_sat = params
    denom = intensity + i_sat
    return np.column_stack([intensity / denom, -n_inf * intensity / denom**2])


def lorentzian_pedestal_model(x, params):
    """params = (amplitude, center, fwhm, c0[, c1]) with polynomial pedestal."""
    amp, center, fwhm = params[:3]
    ped = np.polyval(params[3:][::-1], x - np.mean(x))
    return ped + lorentzian(x, center, fwhm, amp)


def lorentzian_pedestal_jac(x, params):
    amp, center, fwhm = params[:3]
    half = 0.5 * fwhm
    d = x - center
    denom = d**2 + half**2
    cols = [half**2 / denom,
            amp * half**2 * 2.0 * d / denom**2,
            amp * half * d**2 / denom**2]
    xm = x - np.mean(x)
    for k in range(len(params) - 3):
        cols.append(xm**k)
    return np.column_stack(cols)


def sinsq_model(theta_deg, params):
    offset, amplitude, phase_deg = params
    s = np.sin(np.radians(theta_deg - phase_deg))
    return offset + amplitude * s * s


def sinsq_jac(theta_deg, params):
    offset, amplitude, phase_deg = params
    u = np.radians(theta_deg - phase_deg)
    s = np.sin(u)
    return np.column_stack([
        np.ones_like(u),
        s * s,
        -amplitude * np.sin(2.0 * u) * (np.pi / 180.0),
    ])


BUILTIN_MODELS = {
    "saturation": (saturation_model, saturation_jac),
    "lorentzian_pedestal": (lorentzian_pedestal_model, lorentzian_pedestal_jac),
    "sinsq": (sinsq_model, sinsq_jac),
}


# ---------------------------------------------------------------------------
# spectrum analysis


def fit_lorentzian(spectrum: Spectrum, pedestal_degree=0):
    """Fit a Lorentzian plus polynomial pedestal to a spectrum.

    Initial guesses come from the argmax and the half-maximum crossings.
    A peak too close to the window edge (margin < 2 FWHM) is flagged, not
    rejected.
    """
    wl = spectrum.wavelengths_nm
    inten = spectrum.intensities
    if wl.size < 4 + pedestal_degree:
        raise InvalidParameterError("spectrum too short to fit")
    if pedestal_degree not in (0, 1):
        raise InvalidParameterError("pedestal_degree must be 0 or 1")

    ped0 = float(np.min(inten))
    amp0 = float(np.max(inten) - ped0)
    center0 = float(wl[np.argmax(inten)])
    half_level = ped0 + 0.5 * amp0
    above = inten >= half_level
    if amp0 > 0 and np.any(above):
        idx = np.flatnonzero(above)
        fwhm0 = max(float(wl[idx[-1]] - wl[idx[0]]), float(np.mean(np.diff(wl))))
    else:
        fwhm0 = (wl[-1] - wl[0]) / 10.0

    p0 = [amp0, center0, fwhm0] + [ped0] + [0.0] * pedestal_degree
    span = wl[-1] - wl[0]
    lo = [0.0, wl[0], np.mean(np.diff(wl)) * 0.1] + [-np.inf] * (1 + pedestal_degree)
    hi = [np.inf, wl[-1], 10.0 * span] + [np.inf] * (1 + pedestal_degree)

    flags = []
    try:
        res = nlls_fit(lorentzian_pedestal_model, wl, inten, p0,
                       bounds=(lo, hi), jac=lorentzian_pedestal_jac)
    except FitFailureError:
        if amp0 <= 0 or np.ptp(inten) == 0:
            # degenerate pedestal-only input: report zero-amplitude line
            res = None
            flags.append("no-peak")
        else:
            raise
    if res is None:
        return LorentzianFit(center_nm=center0, fwhm_nm=fwhm0, peak_amplitude=0.0,
                             pedestal=(ped0,) + (0.0,) * pedestal_degree,
                             center_err=np.nan, fwhm_err=np.nan, amplitude_err=np.nan,
                             warnings=flags, result=None)

    amp, center, fwhm = res.params[:3]
    pedestal = tuple(res.params[3:])
    if center - 2.0 * fwhm < wl[0] or center + 2.0 * fwhm > wl[-1]:
        flags.append("peak-near-window-edge")
    if amp <= 2.0 * res.perr[0]:
        flags.append("amplitude-consistent-with-zero")
    return LorentzianFit(center_nm=float(center), fwhm_nm=float(fwhm),
                         peak_amplitude=float(amp), pedestal=pedestal,
                         center_err=float(res.perr[1]), fwhm_err=float(res.perr[2]),
                         amplitude_err=float(res.perr[0]),
                         warnings=flags, result=res)


def correct_instrument_width(fwhm_observed_nm, resolution_nm):
    """Deconvolve the instrument resolution in quadrature.

    Assumes a Gaussian instrument response: true = sqrt(obs^2 - res^2).
    Raises :class:`UnresolvableLineError` when the observed width does not
    exceed the resolution.
    """
    if not fwhm_observed_nm > 0:
        raise InvalidParameterError("observed FWHM must be > 0")
    if resolution_nm < 0:
        raise InvalidParameterError("resolution must be >= 0")
    if resolution_nm >= fwhm_observed_nm:
        raise UnresolvableLineError(
            f"line width {fwhm_observed_nm} nm is not resolvable at {resolution_nm} nm resolution")
    return float(np.sqrt(fwhm_observed_nm**2 - resolution_nm**2))


def debye_waller(spectrum: Spectrum, fit: LorentzianFit, window_nm=DEFAULT_FILTER_WINDOW,
                 pedestal_in_total=True):
    """ZPL fraction: fitted line area over total emission in the window.

    The denominator is the trapezoidal integral of the measured spectrum
    over ``window_nm`` (pedestal included by default; set
    ``pedestal_in_total=False`` to integrate the pedestal-subtracted
    spectrum instead).  The numerator is the fitted Lorentzian integrated
    over the same window.
    """
    lo, hi = window_nm
    if not lo < hi:
        raise InvalidParameterError("window must have lo < hi")
    if not lo <= fit.center_nm <= hi:
        raise InvalidParameterError("analysis window must contain the ZPL")
    wl = spectrum.wavelengths_nm
    inten = spectrum.intensities
    mask = (wl >= lo) & (wl <= hi)
    if mask.sum() < 2:
        raise InvalidParameterError("window contains too few samples")
    wlw = wl[mask]
    intw = inten[mask].astype(float)
    if not pedestal_in_total:
        xm = wlw - np.mean(wl)
        intw = intw - np.polyval(np.asarray(fit.pedestal)[::-1], xm)
        intw = np.clip(intw, 0.0, None)
    total = float(np.trapezoid(intw, wlw))
    if total <= 0:
        raise InvalidParameterError("bad spectrum: zero integrated emission in window")
    line = lorentzian_area(fit.fwhm_nm, fit.peak_amplitude, window=(lo, hi), center=fit.center_nm)
    return float(np.clip(line / total, 0.0, 1.0))


# ---------------------------------------------------------------------------
# saturation analysis


def fit_saturation(points, background_points=None, spot_diameter_um=None):
    """Fit n(I) = n_inf * I / (I + I_sat) to (intensity, rate) points.

    ``background_points`` is an optional (intensity, rate) table for the
    bare substrate; a straight line through the origin is fitted to it and
    subtracted from the signal rates before the saturation fit.  When
    ``spot_diameter_um`` is given the saturation power in mW is reported
    alongside the saturation intensity.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InvalidParameterError("points must be an (N, 2) table of (intensity, rate)")
    intensity = pts[:, 0]
    rate = pts[:, 1].copy()
    if intensity.size < 3:
        raise InvalidParameterError("need at least 3 points")
    pos = intensity[intensity > 0]
    if pos.size == 0 or np.max(pos) / np.min(pos) < 3.0:
        raise InvalidParameterError("points must span at least a factor 3 in intensity")

    bg_slope = None
    if background_points is not None:
        bg = np.asarray(background_points, dtype=float)
        if bg.ndim != 2 or bg.shape[1] != 2 or bg.shape[0] < 1:
            raise InvalidParameterError("background_points must be an (N, 2) table")
        denom = float(bg[:, 0] @ bg[:, 0])
        if denom <= 0:
            raise InvalidParameterError("background intensities must not be all zero")
        bg_slope = float(bg[:, 0] @ bg[:, 1]) / denom
        rate = rate - bg_slope * intensity

    n_inf0 = 1.2 * float(np.max(rate))
    if n_inf0 <= 0:
        raise InvalidParameterError("rates must contain positive values")
    half = 0.5 * n_inf0
    above = rate >= half
    i_sat0 = float(intensity[np.argmin(np.abs(rate - half))]) if np.any(above) else float(np.median(pos))
    i_sat0 = max(i_sat0, 1e-6)

    res = nlls_fit(saturation_model, intensity, rate, [n_inf0, i_sat0],
                   bounds=([0.0, 1e-12], [np.inf, np.inf]), jac=saturation_jac)
    n_inf, i_sat = res.params
    flags = []
    if np.max(intensity) < 0.2 * i_sat:
        flags.append("poorly-constrained: all points in the linear regime")
    power = intensity_to_power_or_none(i_sat, spot_diameter_um)
    residuals = rate - saturation_model(intensity, res.params)
    return SaturationFit(n_inf_kcps=float(n_inf), i_sat=float(i_sat),
                         n_inf_err=float(res.perr[0]), i_sat_err=float(res.perr[1]),
                         residuals=residuals, background_slope=bg_slope,
                         saturation_power_mw=power, warnings=flags, result=res)


def intensity_to_power_or_none(i_sat, spot_diameter_um):
    from .models import intensity_to_power

    if spot_diameter_um is None:
        return None
    return float(intensity_to_power(i_sat, spot_diameter_um))


def saturation_two_point(points):
    """Closed-form (n_inf, i_sat) from two exact points, for cross-checks.

    From n_i = n_inf I_i / (I_i + I_sat):
    I_sat = (n2 - n1) / (n1/I1 - n2/I2).
    """
    (i1, n1), (i2, n2) = points
    i_sat = (n2 - n1) / (n1 / i1 - n2 / i2)
    n_inf = n1 * (i1 + i_sat) / i1
    return n_inf, i_sat


# ---------------------------------------------------------------------------
# polarization analysis


def fit_polarization(angles_deg, rates):
    """Fit offset + amplitude * sin^2(theta - phase) to polarizer data.

    Reports visibility V = amplitude / (amplitude + 2*offset) with a
    first-order propagated uncertainty.  A span below 180 degrees leaves
    the phase ambiguous and is flagged.
    """
    theta = np.asarray(angles_deg, dtype=float)
    rate = np.asarray(rates, dtype=float)
    if theta.shape != rate.shape or theta.ndim != 1:
        raise InvalidParameterError("angles and rates must be equal-length 1-D arrays")
    if theta.size < 4:
        raise InvalidParameterError("need at least 4 points")
    flags = []
    if np.ptp(theta) < 180.0:
        flags.append("ambiguous: angle span below 180 degrees")

    if np.ptp(rate) == 0.0:
        flags.append("phase-unidentifiable: constant rates")
        return PolarizationFit(offset=float(rate[0]), amplitude=0.0, phase_deg=0.0,
                               visibility=0.0, visibility_err=0.0, warnings=flags)

    offset0 = float(np.min(rate))
    amp0 = float(np.ptp(rate))
    phase0 = float(np.mod(theta[np.argmax(rate)] - 90.0, 180.0))
    best = None
    for ph in (phase0, np.mod(phase0 + 90.0, 180.0)):
        try:
            res = nlls_fit(sinsq_model, theta, rate, [offset0, amp0, ph],
                           bounds=([0.0, 0.0, -360.0], [np.inf, np.inf, 720.0]),
                           jac=sinsq_jac)
        except FitFailureError:
            continue
        if best is None or res.ssr < best.ssr:
            best = res
    if best is None:
        raise FitFailureError("polarization fit failed from both phase guesses")

    offset, amplitude, phase = best.params
    phase = float(np.mod(phase, 180.0))
    vis = amplitude / (amplitude + 2.0 * offset) if amplitude + 2.0 * offset > 0 else 0.0
    denom = (amplitude + 2.0 * offset) ** 2
    if denom > 0 and np.all(np.isfinite(best.cov[:2, :2])):
        grad = np.array([-2.0 * amplitude / denom, 2.0 * offset / denom])  # d/d(offset), d/d(amp)
        cov2 = best.cov[:2, :2][[0, 1]][:, [0, 1]]
        vis_err = float(np.sqrt(max(grad @ cov2 @ grad, 0.0)))
    else:
        vis_err = np.nan
    return PolarizationFit(offset=float(offset), amplitude=float(amplitude),
                           phase_deg=phase, visibility=float(np.clip(vis, 0.0, 1.0)),
                           visibility_err=vis_err,
                           offset_err=float(best.perr[0]), amplitude_err=float(best.perr[1]),
                           phase_err=float(best.perr[2]), warnings=flags, result=best)


# ---------------------------------------------------------------------------
# Monte Carlo recovery studies (per-realization seeds, embarrassingly parallel)


def saturation_recovery_study(n_inf_true, i_sat_true, intensities, noise_frac,
                              n_realizations, seed):
    """Repeatedly fit noisy synthetic saturation curves.

    Each realization draws multiplicative Gaussian noise of fractional
    width ``noise_frac`` on the true curve and refits; returns the arrays
    of fitted (n_inf, i_sat).  Realizations use independent substreams of
    ``seed`` so the study is reproducible and order-independent.
    """
    intensities = np.asarray(intensities, dtype=float)
    truth = saturation_model(intensities, (n_inf_true, i_sat_true))
    children = np.random.SeedSequence(seed).spawn(n_realizations)
    n_inf_fits = np.empty(n_realizations)
    i_sat_fits = np.empty(n_realizations)
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        rates = truth * (1.0 + noise_frac * rng.standard_normal(truth.size))
        try:
            fit = fit_saturation(np.column_stack([intensities, rates]))
            n_inf_fits[i], i_sat_fits[i] = fit.n_inf_kcps, fit.i_sat
        except (FitFailureError, InvalidParameterError):
            n_inf_fits[i] = i_sat_fits[i] = np.nan
    return n_inf_fits, i_sat_fits


def polarization_recovery_study(offset, amplitude, phase_deg, angles_deg, noise_frac,
                                n_realizations, seed):
    """Repeatedly fit noisy synthetic polarization curves; returns visibilities."""
    angles_deg = np.asarray(angles_deg, dtype=float)
    truth = sinsq_model(angles_deg, (offset, amplitude, phase_deg))
    children = np.random.SeedSequence(seed).spawn(n_realizations)
    vis = np.empty(n_realizations)
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        rates = truth * (1.0 + noise_frac * rng.standard_normal(truth.size))
        try:
            vis[i] = fit_polarization(angles_deg, rates).visibility
        except (FitFailureError, InvalidParameterError):
            vis[i] = np.nan
    return vis
