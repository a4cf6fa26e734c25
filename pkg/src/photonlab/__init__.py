"""Desk-scale characterization chain of a single-photon emitter.

Simulation of photon-arrival streams and confocal scans, exact
coincidence correlation with antibunching fits, spectral / saturation /
polarization analyses, and nanofiber guided-mode coupling estimation.
"""

__version__ = "0.1.0"

from .correlate import (
    AntibunchingFit,
    CorrelationHistogram,
    G2Curve,
    InstrumentResponse,
    background_correct,
    coincidence_histogram,
    convolve_irf,
    fit_antibunching,
    normalize_g2,
    predict_measured_floor,
)
from .fiber import (
    CollectionBudget,
    CouplingEstimate,
    FiberSpec,
    GuidedMode,
    channeling_efficiency,
    efficiency_from_counts,
    invert_channeling,
    is_single_mode,
    silica_index,
    solve_he11,
    v_number,
)
from .fitting import (
    LorentzianFit,
    PolarizationFit,
    SaturationFit,
    Spectrum,
    correct_instrument_width,
    debye_waller,
    fit_lorentzian,
    fit_polarization,
    fit_saturation,
    nlls_fit,
)
from .models import (
    BackgroundContext,
    DetectionChain,
    EmitterModel,
    ExcitationField,
    intensity_to_power,
    polarization_response,
    polarization_visibility,
    power_to_intensity,
    saturation_rate,
    zpl_spectrum_model,
)
from .simulate import (
    EmitterScene,
    ScanConfig,
    ScanImage,
    TimestampStream,
    simulate_hbt,
    simulate_scan,
)

__all__ = [name for name in dir() if not name.startswith("_")]
