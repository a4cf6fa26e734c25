"""Seeded Monte Carlo photon streams and confocal raster-scan images.

Emission epochs follow a renewal process: after each emission the emitter
waits an exponential re-excitation time plus an exponential emission time
(rate 1/lifetime).  That produces intensity correlations
g2(tau) = 1 - exp(-|tau|/tau_d) with a single effective decay time, the
minimal model behind a single-exponential antibunching fit.  Detected
events are thinned by the detector efficiency onto the target rate,
routed 50/50 between the two HBT channels, merged with independent
Poisson background, jittered, dead-time pruned and sorted.

Everything is deterministic for a fixed seed: named substreams are
spawned from the seed in a fixed order, and scan pixels consume exactly
one uniform variate each so edits to one emitter cannot shift the draws
of unrelated pixels.
"""

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.stats import poisson as _poisson

from .errors import InvalidParameterError
from .models import (
    FWHM_TO_SIGMA,
    BackgroundContext,
    DetectionChain,
    EmitterModel,
    ExcitationField,
    saturation_rate,
)

PS_PER_S = 1_000_000_000_000
_GEN_CHUNK = 4_000_000


@dataclass(frozen=True)
class TimestampStream:
    """Ordered photon arrival times (integer ps) on one detector channel."""

    channel_id: int
    times_ps: np.ndarray
    duration_ps: int

    def __post_init__(self):
        t = np.ascontiguousarray(self.times_ps, dtype=np.int64)
        object.__setattr__(self, "times_ps", t)
        if not self.duration_ps > 0:
            raise InvalidParameterError("duration_ps must be > 0")
        if t.size:
            if t[0] < 0 or t[-1] > self.duration_ps:
                raise InvalidParameterError("timestamps must lie in [0, duration_ps]")
            if t.size > 1 and not np.all(np.diff(t) > 0):
                raise InvalidParameterError("timestamps must be strictly ascending")

    def __len__(self):
        return self.times_ps.size

    @property
    def rate_kcps(self):
        return self.times_ps.size / self.duration_ps * PS_PER_S / 1e3

    @property
    def duration_s(self):
        return self.duration_ps / PS_PER_S


@dataclass(frozen=True)
class ScanConfig:
    """Raster-scan geometry and timing."""

    extent_um: tuple = (25.0, 25.0)
    step_um: float = 0.5
    dwell_s: float = 0.5
    psf_fwhm_um: float = 0.6

    def __post_init__(self):
        ex, ey = self.extent_um
        if not (ex > 0 and ey > 0 and self.step_um > 0 and self.dwell_s > 0
                and self.psf_fwhm_um > 0):
            raise InvalidParameterError("all scan parameters must be positive")
        if self.step_um > min(ex, ey):
            raise InvalidParameterError("step must not exceed the scan extent")

    @property
    def shape(self):
        ex, ey = self.extent_um
        return int(round(ey / self.step_um)), int(round(ex / self.step_um))


@dataclass(frozen=True)
class EmitterScene:
    """Emitters placed in a scan field plus a uniform background."""

    extent_um: tuple
    emitters: tuple = ()
    background_rate_kcps: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "emitters", tuple(self.emitters))
        ex, ey = self.extent_um
        if not (ex > 0 and ey > 0):
            raise InvalidParameterError("extent must be positive")
        if self.background_rate_kcps < 0:
            raise InvalidParameterError("background rate must be >= 0")
        for pos, emitter in self.emitters:
            x, y = pos
            if not (0.0 <= x <= ex and 0.0 <= y <= ey):
                raise InvalidParameterError(
                    f"emitter at ({x}, {y}) um lies outside the {ex} x {ey} um extent")
            if not isinstance(emitter, EmitterModel):
                raise InvalidParameterError("scene entries must be ((x, y), EmitterModel)")

    def without(self, index):
        """Copy of the scene with one emitter removed."""
        kept = tuple(e for i, e in enumerate(self.emitters) if i != index)
        return EmitterScene(self.extent_um, kept, self.background_rate_kcps)


@dataclass(frozen=True)
class ScanImage:
    """Count image plus the scan metadata needed to interpret it."""

    counts: np.ndarray
    config: ScanConfig

    @property
    def pixel_centers(self):
        ny, nx = self.counts.shape
        step = self.config.step_um
        return (np.arange(nx) + 0.5) * step, (np.arange(ny) + 0.5) * step


# ---------------------------------------------------------------------------
# photon stream generation


def renewal_intervals(rng, n, exc_scale_ps, life_scale_ps):
    """n inter-emission intervals: Exp(exc_scale) + Exp(life_scale), in ps."""
    return rng.exponential(exc_scale_ps, n) + rng.exponential(life_scale_ps, n)


def _renewal_epochs(rng, duration_ps, exc_scale_ps, life_scale_ps):
    """Renewal-process emission epochs on [0, duration_ps), chunked cumsum."""
    expected = duration_ps / (exc_scale_ps + life_scale_ps)
    n = int(min(expected + 6.0 * np.sqrt(expected) + 64.0, _GEN_CHUNK))
    parts = []
    t = 0.0
    while t < duration_ps:
        iv = renewal_intervals(rng, n, exc_scale_ps, life_scale_ps)
        tt = t + np.cumsum(iv)
        parts.append(tt[tt < duration_ps])
        t = tt[-1]
        n = int(min(max(0.02 * expected, 1024), _GEN_CHUNK))
    return np.concatenate(parts)


@njit(cache=True)
def _prune_dead_time(times, dead_ps):
    """Keep mask enforcing a minimum separation on a sorted int64 array."""
    keep = np.empty(times.size, np.bool_)
    last = np.int64(-1) - dead_ps
    for i in range(times.size):
        if times[i] - last >= dead_ps:
            keep[i] = True
            last = times[i]
        else:
            keep[i] = False
    return keep


def _finalize_channel(times_f, duration_ps, sigma_ps, dead_ps, rng, channel_id):
    """Jitter, clip, discretize to ps, sort and dead-time prune one channel."""
    if sigma_ps > 0 and times_f.size:
        times_f = times_f + rng.normal(0.0, sigma_ps, times_f.size)
    times = np.rint(times_f).astype(np.int64)
    times = times[(times >= 0) & (times <= duration_ps)]
    times.sort()
    dead = max(int(round(dead_ps)), 1)  # sub-ps coincidences collapse
    times = times[_prune_dead_time(times, np.int64(dead))]
    return TimestampStream(channel_id=channel_id, times_ps=times, duration_ps=duration_ps)


def simulate_hbt(emitter: EmitterModel, excitation_intensity, background: BackgroundContext,
                 detection: DetectionChain, duration_s, seed):
    """Simulate one HBT acquisition; returns the two channel streams.

    The renewal re-excitation rate is set so that, after thinning by the
    detection efficiency, the mean detected signal rate equals
    saturation_rate(excitation_intensity).  Background photons are an
    independent Poisson stream split evenly between the channels.
    """
    if not duration_s > 0:
        raise InvalidParameterError("duration_s must be > 0")
    if excitation_intensity < 0:
        raise InvalidParameterError("excitation_intensity must be >= 0")
    duration_ps = int(round(duration_s * PS_PER_S))
    target_kcps = saturation_rate(excitation_intensity, emitter.n_inf_kcps, emitter.i_sat)
    qe = detection.quantum_efficiency

    ss = np.random.SeedSequence(seed)
    rng_sig, rng_route, rng_bg, rng_jit = [np.random.default_rng(s) for s in ss.spawn(4)]

    # signal epochs, thinned onto the target detected rate
    if target_kcps > 0 and qe > 0:
        emission_rate_ps = target_kcps * 1e3 / PS_PER_S / qe
        life_ps = emitter.lifetime_ns * 1e3
        exc_scale = 1.0 / emission_rate_ps - life_ps
        if exc_scale <= 0:
            raise InvalidParameterError(
                "target rate is unreachable: mean emission interval shorter than the lifetime")
        epochs = _renewal_epochs(rng_sig, duration_ps, exc_scale, life_ps)
        if qe < 1.0:
            epochs = epochs[rng_sig.random(epochs.size) < qe]
    else:
        epochs = np.empty(0)

    to_ch0 = rng_route.random(epochs.size) < 0.5
    sig0, sig1 = epochs[to_ch0], epochs[~to_ch0]

    # independent Poisson background, half per channel
    bg_chan = []
    bg_rate_ps = background.background_rate_kcps * 1e3 / PS_PER_S / 2.0
    for _ in range(2):
        n_bg = rng_bg.poisson(bg_rate_ps * duration_ps)
        bg_chan.append(rng_bg.uniform(0.0, duration_ps, n_bg))

    sigma_ps = detection.jitter_fwhm_ps * FWHM_TO_SIGMA
    dead_ps = detection.dead_time_ns * 1e3
    streams = []
    for cid, (sig, bg) in enumerate([(sig0, bg_chan[0]), (sig1, bg_chan[1])]):
        merged = np.concatenate([sig, bg])
        streams.append(_finalize_channel(merged, duration_ps, sigma_ps, dead_ps, rng_jit, cid))
    return streams[0], streams[1]


# ---------------------------------------------------------------------------
# raster-scan simulation


def scan_mean_map(scene: EmitterScene, config: ScanConfig, excitation: ExcitationField):
    """Expected counts per pixel (no shot noise)."""
    ny, nx = config.shape
    xs = (np.arange(nx) + 0.5) * config.step_um
    ys = (np.arange(ny) + 0.5) * config.step_um
    xx, yy = np.meshgrid(xs, ys)
    rate = np.full((ny, nx), scene.background_rate_kcps, dtype=float)
    sigma = config.psf_fwhm_um * FWHM_TO_SIGMA
    intensity = excitation.intensity
    for (ex, ey), emitter in scene.emitters:
        peak = saturation_rate(intensity, emitter.n_inf_kcps, emitter.i_sat)
        d2 = (xx - ex) ** 2 + (yy - ey) ** 2
        rate += peak * np.exp(-d2 / (2.0 * sigma**2))
    return rate * 1e3 * config.dwell_s


def simulate_scan(scene: EmitterScene, config: ScanConfig, excitation: ExcitationField, seed):
    """Poisson-sampled confocal scan image, deterministic for a fixed seed.

    Each pixel consumes exactly one uniform variate (inverse-CDF
    sampling), so the draw at any pixel depends only on the seed, the
    pixel index and that pixel's own mean.
    """
    ex, ey = scene.extent_um
    cx, cy = config.extent_um
    if not (np.isclose(ex, cx) and np.isclose(ey, cy)):
        raise InvalidParameterError("scene extent and scan-config extent differ")
    mean = scan_mean_map(scene, config, excitation)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    u = rng.random(mean.shape)
    counts = np.zeros(mean.shape, dtype=np.int64)
    lit = mean > 0
    counts[lit] = _poisson.ppf(u[lit], mean[lit]).astype(np.int64)
    return ScanImage(counts=counts, config=config)
