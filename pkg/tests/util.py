"""Shared oracle helpers for the test suite."""

import numpy as np

from photonlab.simulate import TimestampStream


def brute_force_histogram(a, b, bin_width, n_side):
    """O(n^2) pair enumeration, the independent reference for the correlator."""
    counts = np.zeros(2 * n_side + 1, dtype=np.int64)
    half = bin_width // 2
    reach = n_side * bin_width + (bin_width - 1) // 2
    for t in np.asarray(a, dtype=np.int64):
        for u in np.asarray(b, dtype=np.int64):
            lag = int(u) - int(t)
            if abs(lag) <= reach:
                k = (lag + half) // bin_width if lag >= 0 else -((-lag + half) // bin_width)
                counts[k + n_side] += 1
    return counts


def stream(times, duration, channel=0):
    return TimestampStream(channel_id=channel, times_ps=np.asarray(times, dtype=np.int64),
                           duration_ps=int(duration))


def poisson_stream(rng, rate_kcps, duration_s, channel=0):
    duration_ps = int(duration_s * 1e12)
    n = rng.poisson(rate_kcps * 1e3 * duration_s)
    times = np.sort(rng.integers(0, duration_ps, n))
    times = np.unique(times)
    return TimestampStream(channel_id=channel, times_ps=times, duration_ps=duration_ps)
