"""Coincidence histogramming, g2 normalization, antibunching fits.

The histogram kernel is an exact two-pointer sliding-window sweep over
two sorted timestamp arrays, linear in the stream lengths plus the number
of in-window pairs.  Bins are centered on integer multiples of the bin
width; integer lags are assigned by rounding half away from zero, so the
histogram of swapped inputs is the exact mirror for every input (with a
half-open edge convention, even bin widths would break that symmetry on
integer timestamps).  For even widths the zero-lag bin therefore spans
w - 1 integer lags and every other bin spans w.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.special import erfcx

from .errors import FitFailureError, InvalidParameterError
from .fitting import FitResult, nlls_fit
from .models import FWHM_TO_SIGMA
from .simulate import PS_PER_S, TimestampStream


@dataclass(frozen=True)
class InstrumentResponse:
    """Gaussian timing response of the correlation measurement."""

    fwhm_ps: float = 300.0

    def __post_init__(self):
        if self.fwhm_ps < 0:
            raise InvalidParameterError("fwhm_ps must be >= 0")

    @property
    def sigma_ps(self):
        return self.fwhm_ps * FWHM_TO_SIGMA


@dataclass(frozen=True)
class CorrelationHistogram:
    """Binned coincidences over lags in [-max_lag, +max_lag]."""

    bin_width_ps: int
    counts: np.ndarray
    rate_a_kcps: float
    rate_b_kcps: float
    duration_ps: int
    n_a: int = 0
    n_b: int = 0

    def __post_init__(self):
        c = np.ascontiguousarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", c)
        if not self.bin_width_ps > 0:
            raise InvalidParameterError("bin_width_ps must be > 0")
        if c.size % 2 != 1:
            raise InvalidParameterError("histogram needs an odd number of bins centered on 0")
        if np.any(c < 0):
            raise InvalidParameterError("counts must be >= 0")

    @property
    def n_side(self):
        return self.counts.size // 2

    @property
    def max_lag_ps(self):
        return self.n_side * self.bin_width_ps

    @property
    def lags_ps(self):
        return (np.arange(self.counts.size) - self.n_side) * self.bin_width_ps

    @property
    def total_coincidences(self):
        return int(self.counts.sum())

    def mirrored(self):
        """Histogram with the roles of the two streams swapped."""
        return CorrelationHistogram(self.bin_width_ps, self.counts[::-1].copy(),
                                    self.rate_b_kcps, self.rate_a_kcps,
                                    self.duration_ps, self.n_b, self.n_a)


@dataclass(frozen=True)
class G2Curve:
    """Normalized intensity correlation versus delay."""

    lags_ps: np.ndarray
    values: np.ndarray
    counts: np.ndarray
    norm_per_bin: float
    bin_width_ps: int
    duration_ps: int


@dataclass
class AntibunchingFit:
    """Parameters of g2(tau) = plateau * (1 - a * exp(-|tau|/tau_d))."""

    dip_g2_0: float
    decay_time_ns: float
    amplitude: float
    dip_err: float
    decay_time_err_ns: float
    amplitude_err: float
    goodness_of_fit: float
    plateau: float = 1.0
    convolved_dip_g2_0: float = None
    irf_fwhm_ps: float = 0.0
    flags: list = field(default_factory=list)
    result: FitResult = None

    def __post_init__(self):
        if not self.decay_time_ns > 0:
            raise InvalidParameterError("decay_time_ns must be > 0")


@njit(cache=True)
def _count_pairs(a, b, bin_width, n_side, counts):
    """Exact sliding-window pair count of lag = t_b - t_a into counts."""
    w = bin_width
    half = w // 2
    reach = n_side * w + (w - 1) // 2     # largest |lag| inside the histogram
    lo = 0
    hi = 0
    nb = b.size
    for i in range(a.size):
        t = a[i]
        tlo = t - reach
        thi = t + reach
        while lo < nb and b[lo] < tlo:
            lo += 1
        if hi < lo:
            hi = lo
        while hi < nb and b[hi] <= thi:
            hi += 1
        for j in range(lo, hi):
            lag = b[j] - t
            if lag >= 0:
                k = (lag + half) // w
            else:
                k = -((-lag + half) // w)
            counts[k + n_side] += 1


def coincidence_histogram(a: TimestampStream, b: TimestampStream, bin_width_ps, max_lag_ps):
    """Histogram all pairs (t_a, t_b) by lag t_b - t_a.

    ``max_lag_ps`` is rounded up to a whole number of bins so that the
    requested window is always covered.  Empty streams yield an empty
    (all-zero) histogram.
    """
    bin_width_ps = int(bin_width_ps)
    if bin_width_ps <= 0:
        raise InvalidParameterError("bin_width_ps must be > 0")
    if max_lag_ps <= 0:
        raise InvalidParameterError("max_lag_ps must be > 0")
    if a.duration_ps != b.duration_ps:
        raise InvalidParameterError("streams must share one acquisition duration")
    n_side = int(math.ceil(max_lag_ps / bin_width_ps))
    counts = np.zeros(2 * n_side + 1, dtype=np.int64)
    if len(a) and len(b):
        _count_pairs(a.times_ps, b.times_ps, np.int64(bin_width_ps), np.int64(n_side), counts)
    return CorrelationHistogram(bin_width_ps=bin_width_ps, counts=counts,
                                rate_a_kcps=a.rate_kcps, rate_b_kcps=b.rate_kcps,
                                duration_ps=a.duration_ps, n_a=len(a), n_b=len(b))


def normalize_g2(h: CorrelationHistogram, mode="rate-product", plateau_fraction=0.25):
    """Normalize to the accidental-coincidence level.

    mode "rate-product" divides by rate_a * rate_b * duration * bin_width
    (the stationary-stream expectation); mode "plateau" rescales by the
    mean of the outer ``plateau_fraction`` of bins on each side instead.
    """
    if h.duration_ps <= 0 or h.rate_a_kcps <= 0 or h.rate_b_kcps <= 0:
        raise InvalidParameterError("normalization needs positive rates and duration")
    ra = h.rate_a_kcps * 1e3 / PS_PER_S
    rb = h.rate_b_kcps * 1e3 / PS_PER_S
    norm = ra * rb * h.duration_ps * h.bin_width_ps
    if mode == "plateau":
        k = max(int(round(plateau_fraction * h.n_side)), 1)
        edge = np.concatenate([h.counts[:k], h.counts[-k:]])
        if edge.mean() <= 0:
            raise InvalidParameterError("plateau normalization needs nonzero edge bins")
        norm = float(edge.mean())
    elif mode != "rate-product":
        raise InvalidParameterError(f"unknown normalization mode {mode!r}")
    return G2Curve(lags_ps=h.lags_ps, values=h.counts / norm, counts=h.counts,
                   norm_per_bin=norm, bin_width_ps=h.bin_width_ps, duration_ps=h.duration_ps)


# ---------------------------------------------------------------------------
# exponential-dip model, optionally smeared by the instrument response


def _emg_terms(ax, tau_ps, sigma_ps):
    """Stable pieces of the exponential-Gaussian convolution at |lag| = ax.

    Returns (T_u, T_v, gauss) with
    T_u = exp(k^2/2 + x/tau) erfc(u), T_v = exp(k^2/2 - x/tau) erfc(v),
    u, v = (k +/- x/sigma)/sqrt(2), k = sigma/tau, gauss = exp(-x^2/2 sigma^2).
    The v branch is split analytically where v < 0 so nothing overflows.
    """
    k = sigma_ps / tau_ps
    gauss = np.exp(-(ax * ax) / (2.0 * sigma_ps**2))
    u = (k + ax / sigma_ps) / np.sqrt(2.0)
    t_u = erfcx(u) * gauss
    v = (k - ax / sigma_ps) / np.sqrt(2.0)
    t_v = np.where(
        v >= 0.0,
        erfcx(np.abs(v)) * gauss,
        2.0 * np.exp(np.minimum(0.5 * k * k - ax / tau_ps, 50.0)) - erfcx(np.abs(v)) * gauss,
    )
    return t_u, t_v, gauss


def _exp_gauss_kernel(lag_ps, tau_ps, sigma_ps):
    """exp(-|t|/tau) convolved with a unit-area Gaussian of width sigma.

    Closed form; K(x) -> exp(-|x|/tau) as sigma -> 0, and K(0) >=
    exp(-0/tau) never exceeds 1.
    """
    x = np.asarray(lag_ps, dtype=float)
    if sigma_ps <= 0:
        return np.exp(-np.abs(x) / tau_ps)
    t_u, t_v, _ = _emg_terms(np.abs(x), tau_ps, sigma_ps)
    return 0.5 * (t_u + t_v)


def _dip_model(lag_ps, params, sigma_ps):
    amplitude, tau_ps, plateau = params
    return plateau * (1.0 - amplitude * _exp_gauss_kernel(lag_ps, tau_ps, sigma_ps))


def _dip_jac(lag_ps, params, sigma_ps):
    amplitude, tau_ps, plateau = params
    x = np.asarray(lag_ps, dtype=float)
    ax = np.abs(x)
    if sigma_ps <= 0:
        kern = np.exp(-ax / tau_ps)
        dk_dtau = kern * ax / tau_ps**2
    else:
        t_u, t_v, gauss = _emg_terms(ax, tau_ps, sigma_ps)
        kern = 0.5 * (t_u + t_v)
        k = sigma_ps / tau_ps
        # dT/dtau from the product rule on exp(A) erfc(z); the erfc'
        # pieces recombine into the same stable Gaussian factor
        dk_dtau = 0.5 * ((-k**2 / tau_ps - ax / tau_ps**2) * t_u
                         + (-k**2 / tau_ps + ax / tau_ps**2) * t_v
                         + gauss * (4.0 / np.sqrt(np.pi)) * (k / (tau_ps * np.sqrt(2.0))))
    return np.column_stack([
        -plateau * kern,
        -plateau * amplitude * dk_dtau,
        1.0 - amplitude * kern,
    ])


def convolve_irf(amplitude, decay_time_ns, irf: InstrumentResponse, lags_ps):
    """Antibunching model 1 - a*exp(-|tau|/tau_d) smeared by the IRF.

    Evaluated from the closed-form convolution with the normalized
    Gaussian; a zero-width IRF returns the bare model.  Smearing can only
    fill the dip in: the value at zero lag never decreases with the IRF
    width.
    """
    if amplitude < 0:
        raise InvalidParameterError("amplitude must be >= 0")
    if not decay_time_ns > 0:
        raise InvalidParameterError("decay_time_ns must be > 0")
    tau_ps = decay_time_ns * 1e3
    sigma = irf.sigma_ps if irf is not None else 0.0
    return 1.0 - amplitude * _exp_gauss_kernel(np.asarray(lags_ps, dtype=float), tau_ps, sigma)


def fit_antibunching(g2: G2Curve, irf: InstrumentResponse = None, weights=None,
                     float_plateau=False):
    """Least-squares fit of g2(tau) = 1 - a*exp(-|tau|/tau_d).

    With an IRF the model is forward-convolved with the Gaussian response
    before comparison to the data (no deconvolution of the data), and the
    reported dip is the zero-lag value of the *unconvolved* model; the
    zero-lag value of the convolved model is reported alongside.  Weights
    "poisson" uses per-bin sqrt(counts) uncertainties.
    """
    lags = np.asarray(g2.lags_ps, dtype=float)
    vals = np.asarray(g2.values, dtype=float)
    if lags.size < 8:
        raise InvalidParameterError("g2 curve has too few bins to fit")
    sigma_ps = irf.sigma_ps if irf is not None else 0.0
    sigma = None
    if weights == "poisson":
        sigma = np.where(g2.counts > 0, np.sqrt(g2.counts), 1.0) / g2.norm_per_bin

    # initial guesses from the central dip
    mid = lags.size // 2
    core = vals[max(mid - 2, 0):mid + 3]
    a0 = float(np.clip(1.0 - np.min(core), 0.02, 1.0))
    deficit = 1.0 - vals
    big = deficit > a0 / np.e
    tau0 = g2.bin_width_ps * 8.0
    if np.any(big):
        idx = np.flatnonzero(big)
        tau0 = max(float(np.abs(lags[idx]).max()), float(g2.bin_width_ps))
    p0 = [a0, tau0, 1.0]
    lo = [-1.0, 0.1 * g2.bin_width_ps, 0.5]
    hi = [2.0, float(np.abs(lags).max()) * 2.0, 2.0]

    if float_plateau:
        res = nlls_fit(lambda x, p: _dip_model(x, p, sigma_ps), lags, vals, p0,
                       bounds=(lo, hi), sigma=sigma,
                       jac=lambda x, p: _dip_jac(x, p, sigma_ps))
        amplitude, tau_ps, plateau = res.params
        a_err, tau_err = res.perr[0], res.perr[1]
    else:
        res = nlls_fit(lambda x, p: _dip_model(x, (p[0], p[1], 1.0), sigma_ps), lags, vals,
                       p0[:2], bounds=(lo[:2], hi[:2]), sigma=sigma,
                       jac=lambda x, p: _dip_jac(x, (p[0], p[1], 1.0), sigma_ps)[:, :2])
        amplitude, tau_ps = res.params
        plateau = 1.0
        a_err, tau_err = res.perr[0], res.perr[1]

    flags = []
    if abs(amplitude) < max(2.0 * a_err, 1e-3):
        flags.append("decay-time-unidentifiable: no significant antibunching")
    if np.abs(lags).max() < 10.0 * tau_ps:
        flags.append("short-span: curve covers fewer than 10 decay times")

    dip = plateau * (1.0 - amplitude)
    if dip < 0:
        flags.append("dip-clamped-to-zero")
        dip = 0.0
    convolved_dip = None
    if irf is not None:
        convolved_dip = float(plateau * (1.0 - amplitude * _exp_gauss_kernel(0.0, tau_ps, sigma_ps)))
    return AntibunchingFit(
        dip_g2_0=float(dip), decay_time_ns=float(tau_ps / 1e3), amplitude=float(amplitude),
        dip_err=float(plateau * a_err), decay_time_err_ns=float(tau_err / 1e3),
        amplitude_err=float(a_err), goodness_of_fit=float(res.reduced_chi2),
        plateau=float(plateau), convolved_dip_g2_0=convolved_dip,
        irf_fwhm_ps=float(irf.fwhm_ps) if irf is not None else 0.0,
        flags=flags, result=res)


# ---------------------------------------------------------------------------
# background correction


def _signal_fraction(sb_ratio):
    if not sb_ratio > 0:
        raise InvalidParameterError("sb_ratio must be > 0")
    return sb_ratio / (sb_ratio + 1.0)


def background_correct(g2_0_measured, sb_ratio, mode="quadratic"):
    """Remove the uncorrelated-background contribution from a measured dip.

    With rho = S/(S+B), the standard correction is
    (g2 - (1 - rho^2)) / rho^2; uncorrelated light dilutes correlations
    quadratically in rho.  mode "linear" instead subtracts the perfect-
    emitter floor (1 - rho^2) directly, the back-of-envelope variant.
    Returns (corrected_value, clamped_flag); negative results clamp to 0.
    """
    if g2_0_measured < 0:
        raise InvalidParameterError("g2_0_measured must be >= 0")
    rho = _signal_fraction(sb_ratio)
    floor = 1.0 - rho**2
    if mode == "quadratic":
        corrected = (g2_0_measured - floor) / rho**2
    elif mode == "linear":
        corrected = g2_0_measured - floor
    else:
        raise InvalidParameterError(f"unknown correction mode {mode!r}")
    clamped = corrected < 0
    return (0.0 if clamped else float(corrected)), bool(clamped)


def predict_measured_floor(g2_0_true, sb_ratio):
    """Measured dip expected for a given true dip and S/B ratio.

    Inverse of :func:`background_correct` (quadratic mode):
    g2_meas = 1 - rho^2 * (1 - g2_true).
    """
    if g2_0_true < 0:
        raise InvalidParameterError("g2_0_true must be >= 0")
    rho = _signal_fraction(sb_ratio)
    return float(1.0 - rho**2 * (1.0 - g2_0_true))
