"""File formats: timestamp streams, spectra, tables, images, reports.

Timestamp streams ship either as plain text (one integer picosecond per
line, with a comment header carrying channel and duration) or as a packed
little-endian binary with an 8-byte magic header.  Everything numeric is
written with enough digits to round-trip losslessly through the matching
reader.
"""

import struct
import warnings

import numpy as np

from .errors import DataFormatError
from .fitting import Spectrum
from .simulate import ScanConfig, ScanImage, TimestampStream

MAGIC = b"PHTSTRM1"
_F = "{:.17g}".format  # lossless float formatting


# ---------------------------------------------------------------------------
# timestamp streams


def write_timestamps(stream: TimestampStream, path, fmt="binary"):
    """Write one channel's timestamps as binary (default) or text."""
    if fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<IIqq", stream.channel_id, 0,
                                 stream.duration_ps, stream.times_ps.size))
            stream.times_ps.astype("<i8").tofile(fh)
    elif fmt == "text":
        with open(path, "w") as fh:
            fh.write(f"# photonlab timestamps channel={stream.channel_id} "
                     f"duration_ps={stream.duration_ps}\n")
            np.savetxt(fh, stream.times_ps, fmt="%d")
    else:
        raise DataFormatError(f"unknown timestamp format {fmt!r}")


def _read_timestamps_binary(path):
    with open(path, "rb") as fh:
        fh.seek(len(MAGIC))
        header = fh.read(struct.calcsize("<IIqq"))
        if len(header) != struct.calcsize("<IIqq"):
            raise DataFormatError(f"{path}: truncated binary header")
        channel_id, _, duration_ps, count = struct.unpack("<IIqq", header)
        times = np.fromfile(fh, dtype="<i8", count=count)
    if times.size != count:
        raise DataFormatError(f"{path}: expected {count} timestamps, found {times.size}")
    return TimestampStream(channel_id=channel_id, times_ps=times.astype(np.int64),
                           duration_ps=duration_ps)


def _read_timestamps_text(path):
    times = []
    channel_id = 0
    duration_ps = None
    last = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    if token.startswith("channel="):
                        channel_id = int(token.partition("=")[2])
                    elif token.startswith("duration_ps="):
                        duration_ps = int(token.partition("=")[2])
                continue
            try:
                t = int(line)
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: not an integer timestamp: {line!r}") from exc
            if last is not None and t <= last:
                raise DataFormatError(
                    f"{path}:{lineno}: timestamp {t} out of order (previous {last})")
            last = t
            times.append(t)
    times = np.asarray(times, dtype=np.int64)
    if duration_ps is None:
        duration_ps = int(times[-1]) if times.size else 1
    return TimestampStream(channel_id=channel_id, times_ps=times, duration_ps=duration_ps)


def read_timestamps(path):
    """Load a timestamp stream, auto-detecting binary vs text by the magic."""
    with open(path, "rb") as fh:
        head = fh.read(len(MAGIC))
    if head == MAGIC:
        return _read_timestamps_binary(path)
    return _read_timestamps_text(path)


# ---------------------------------------------------------------------------
# spectra and two-column tables


def write_spectrum(spectrum: Spectrum, path):
    with open(path, "w") as fh:
        fh.write("wavelength_nm,intensity\n")
        for wl, inten in zip(spectrum.wavelengths_nm, spectrum.intensities):
            fh.write(f"{_F(wl)},{_F(inten)}\n")


def read_table(path, n_columns=2):
    """Two-column comma-separated table; tolerates one non-numeric header row."""
    rows = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != n_columns:
                raise DataFormatError(f"{path}:{lineno}: expected {n_columns} columns")
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                if lineno == 1 or not rows:
                    continue  # header row
                raise DataFormatError(f"{path}:{lineno}: non-numeric value") from None
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=float)
    if np.any(~np.isfinite(data)):
        raise DataFormatError(f"{path}: table contains NaN or infinite values")
    return data


def read_spectrum(path, resolution_nm=0.0, strict=True):
    """Load a (wavelength, intensity) spectrum.

    Descending wavelength order is an error in strict mode; in lenient
    mode the spectrum is reversed with a warning.
    """
    data = read_table(path, 2)
    wl, inten = data[:, 0], data[:, 1]
    if wl.size >= 2 and np.all(np.diff(wl) < 0):
        if strict:
            raise DataFormatError(f"{path}: wavelengths are descending (strict mode)")
        warnings.warn(f"{path}: descending wavelengths reversed", stacklevel=2)
        wl, inten = wl[::-1], inten[::-1]
    try:
        return Spectrum(wl, inten, resolution_nm)
    except Exception as exc:
        raise DataFormatError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# scan images


def write_scan_image(image: ScanImage, path):
    cfg = image.config
    ex, ey = cfg.extent_um
    with open(path, "w") as fh:
        fh.write(f"# extent_um={_F(ex)}x{_F(ey)} step_um={_F(cfg.step_um)} "
                 f"dwell_s={_F(cfg.dwell_s)} psf_fwhm_um={_F(cfg.psf_fwhm_um)}\n")
        np.savetxt(fh, image.counts, fmt="%d", delimiter=",")


def read_scan_image(path):
    header = None
    with open(path) as fh:
        first = fh.readline()
        if first.startswith("#"):
            header = first[1:].split()
            counts = np.loadtxt(fh, dtype=np.int64, delimiter=",", ndmin=2)
        else:
            raise DataFormatError(f"{path}: missing scan-image header line")
    fields = dict(token.partition("=")[::2] for token in header)
    try:
        ex, ey = (float(v) for v in fields["extent_um"].split("x"))
        cfg = ScanConfig(extent_um=(ex, ey), step_um=float(fields["step_um"]),
                         dwell_s=float(fields["dwell_s"]),
                         psf_fwhm_um=float(fields["psf_fwhm_um"]))
    except (KeyError, ValueError) as exc:
        raise DataFormatError(f"{path}: bad scan-image header: {exc}") from exc
    return ScanImage(counts=counts, config=cfg)


# ---------------------------------------------------------------------------
# correlation histograms


def write_histogram(hist, path, g2=None):
    with open(path, "w") as fh:
        fh.write(f"# bin_width_ps={hist.bin_width_ps} duration_ps={hist.duration_ps} "
                 f"rate_a_kcps={_F(hist.rate_a_kcps)} rate_b_kcps={_F(hist.rate_b_kcps)} "
                 f"n_a={hist.n_a} n_b={hist.n_b}\n")
        fh.write("lag_ps,counts" + (",g2\n" if g2 is not None else "\n"))
        lags = hist.lags_ps
        for i in range(lags.size):
            row = f"{lags[i]},{hist.counts[i]}"
            if g2 is not None:
                row += f",{_F(g2.values[i])}"
            fh.write(row + "\n")


def read_histogram(path):
    from .correlate import CorrelationHistogram

    meta = {}
    lags = []
    counts = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                meta.update(token.partition("=")[::2] for token in line[1:].split())
                continue
            if line.startswith("lag_ps"):
                continue
            parts = line.split(",")
            lags.append(int(parts[0]))
            counts.append(int(parts[1]))
    try:
        hist = CorrelationHistogram(
            bin_width_ps=int(meta["bin_width_ps"]), counts=np.asarray(counts, dtype=np.int64),
            rate_a_kcps=float(meta["rate_a_kcps"]), rate_b_kcps=float(meta["rate_b_kcps"]),
            duration_ps=int(meta["duration_ps"]), n_a=int(meta["n_a"]), n_b=int(meta["n_b"]))
    except KeyError as exc:
        raise DataFormatError(f"{path}: missing histogram header field {exc}") from exc
    expected = (np.arange(len(counts)) - len(counts) // 2) * hist.bin_width_ps
    if not np.array_equal(np.asarray(lags), expected):
        raise DataFormatError(f"{path}: lag column inconsistent with bin width")
    return hist


# ---------------------------------------------------------------------------
# structured-text reports


def format_report(title, entries):
    """key: value report block used by all CLI fit summaries."""
    lines = [title, "-" * len(title)]
    for key, value in entries:
        if isinstance(value, float):
            value = f"{value:.6g}"
        lines.append(f"{key}: {value}")
    return "\n".join(lines) + "\n"
