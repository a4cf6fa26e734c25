"""Regenerate the example data tables in this directory.

Run from the repository root:  python demos/data/make_tables.py
"""

from pathlib import Path

import numpy as np

from photonlab.fitting import Spectrum
from photonlab.io import write_spectrum
from photonlab.models import lorentzian, lorentzian_area, saturation_rate

HERE = Path(__file__).parent
RNG = np.random.default_rng(20240531)


def saturation_tables():
    intensities = np.geomspace(15.0, 780.0, 9)
    rates = saturation_rate(intensities, 29.0, 130.0)
    noisy = rates * (1.0 + 0.03 * RNG.standard_normal(rates.size))
    with open(HERE / "saturation_signal.csv", "w") as fh:
        fh.write("intensity_mw_cm2,rate_kcps\n")
        for i, r in zip(intensities, noisy):
            fh.write(f"{i:.6g},{r:.6g}\n")
    slope = 0.3 / 47.7  # 0.3 kcps substrate background at 47.7 MW/cm2
    with open(HERE / "saturation_background.csv", "w") as fh:
        fh.write("intensity_mw_cm2,rate_kcps\n")
        for i in intensities:
            fh.write(f"{i:.6g},{slope * i:.6g}\n")


def polarization_table():
    angles = np.arange(0.0, 361.0, 10.0)
    v = 0.54
    offset = 0.5 * (1.0 - v) / v * 8.0
    rates = offset + 8.0 * np.sin(np.radians(angles - 40.0)) ** 2
    noisy = rates * (1.0 + 0.02 * RNG.standard_normal(rates.size))
    with open(HERE / "polarization_emission.csv", "w") as fh:
        fh.write("angle_deg,rate_kcps\n")
        for a, r in zip(angles, noisy):
            fh.write(f"{a:.6g},{r:.6g}\n")


def spectrum_table():
    wl = np.arange(720.0, 760.0001, 0.2)
    window = (727.0, 752.0)
    line = lorentzian_area(7.0, 1.0, window=window, center=738.8)
    pedestal = line * (1.0 / 0.74 - 1.0) / (window[1] - window[0])
    vals = pedestal + lorentzian(wl, 738.8, 7.0, 1.0)
    vals = np.clip(vals * (1.0 + 0.02 * RNG.standard_normal(wl.size)), 0.0, None)
    write_spectrum(Spectrum(wl, vals, resolution_nm=1.5), HERE / "zpl_spectrum.csv")


if __name__ == "__main__":
    saturation_tables()
    polarization_table()
    spectrum_table()
    print(f"tables written to {HERE}")
