import numpy as np
import pytest

from photonlab.errors import InvalidParameterError
from photonlab.models import (
    BackgroundContext,
    DetectionChain,
    EmitterModel,
    ExcitationField,
    intensity_to_power,
    lorentzian,
    lorentzian_area,
    polarization_response,
    polarization_visibility,
    power_to_intensity,
    saturation_rate,
    zpl_spectrum_model,
)

SPOT_UM = 0.6


class TestPowerToIntensity:
    # printed (power mW, intensity MW/cm2) pairs; uniform-disk conversion
    PAIRS = [(135.0, 47.7), (56.0, 19.8), (25.0, 8.8), (11.0, 3.9), (370.0, 130.0)]

    @pytest.mark.parametrize("power,expected", PAIRS)
    def test_printed_pairs_within_2_percent(self, power, expected):
        got = power_to_intensity(power, SPOT_UM)
        assert abs(got - expected) / expected < 0.02

    def test_disk_formula_exact(self):
        r_cm = 0.5 * SPOT_UM * 1e-4
        assert power_to_intensity(135.0, SPOT_UM) == pytest.approx(
            135e-9 / (np.pi * r_cm**2), rel=1e-14)

    def test_zero_power(self):
        assert power_to_intensity(0.0, SPOT_UM) == 0.0

    def test_linearity(self):
        rng = np.random.default_rng(3)
        base = power_to_intensity(10.0, SPOT_UM)
        for a in rng.uniform(0.0, 50.0, 20):
            assert power_to_intensity(a * 10.0, SPOT_UM) == pytest.approx(a * base, rel=1e-12)

    def test_round_trip(self):
        assert intensity_to_power(power_to_intensity(135.0, SPOT_UM), SPOT_UM) == pytest.approx(135.0)

    def test_bad_spot(self):
        with pytest.raises(InvalidParameterError):
            power_to_intensity(1.0, 0.0)
        with pytest.raises(InvalidParameterError):
            power_to_intensity(-1.0, SPOT_UM)


class TestSaturationRate:
    def test_half_saturation(self):
        assert saturation_rate(130.0, 29.0, 130.0) == pytest.approx(14.5, rel=1e-12)

    def test_paper_arithmetic(self):
        # direct arithmetic of n_inf * I / (I + I_sat) with the paper constants
        assert saturation_rate(47.7, 29.0, 130.0) == pytest.approx(29.0 * 47.7 / 177.7, rel=1e-14)
        assert saturation_rate(47.7, 29.0, 130.0) == pytest.approx(7.784, abs=5e-3)

    def test_asymptote(self):
        assert saturation_rate(1e6 * 130.0, 29.0, 130.0) == pytest.approx(29.0, rel=1e-5)

    def test_monotone_increasing_concave_bounded(self):
        grid = np.linspace(0.0, 2000.0, 400)
        rates = saturation_rate(grid, 29.0, 130.0)
        diffs = np.diff(rates)
        assert np.all(diffs > 0)
        assert np.all(np.diff(diffs) < 0)
        assert np.all((rates >= 0) & (rates < 29.0))

    def test_errors(self):
        with pytest.raises(InvalidParameterError):
            saturation_rate(1.0, 29.0, 0.0)
        with pytest.raises(InvalidParameterError):
            saturation_rate(-1.0, 29.0, 130.0)


class TestPolarizationResponse:
    def test_period_180(self):
        theta = np.linspace(0.0, 360.0, 73)
        a = polarization_response(theta, 2.0, 5.0, phase_deg=33.0)
        b = polarization_response(theta + 180.0, 2.0, 5.0, phase_deg=33.0)
        assert np.allclose(a, b, rtol=0, atol=1e-9)

    def test_unpolarized(self):
        theta = np.linspace(0.0, 360.0, 37)
        vals = polarization_response(theta, 3.0, 0.0)
        assert np.all(vals == 3.0)
        assert polarization_visibility(3.0, 0.0) == 0.0

    def test_perfect_contrast(self):
        assert polarization_visibility(0.0, 5.0) == 1.0

    def test_visibility_sweep_matches_definition(self):
        rng = np.random.default_rng(11)
        theta = np.linspace(0.0, 180.0, 100_001)
        for _ in range(5):
            offset, amp = rng.uniform(0.1, 5.0, 2)
            vals = polarization_response(theta, offset, amp, phase_deg=rng.uniform(0, 180))
            sweep = (vals.max() - vals.min()) / (vals.max() + vals.min())
            assert sweep == pytest.approx(polarization_visibility(offset, amp), abs=1e-6)

    def test_max_min_ratio_at_v054(self):
        v = 0.54
        offset = (1.0 - v) / (2.0 * v)
        theta = np.linspace(0.0, 180.0, 100_001)
        vals = polarization_response(theta, offset, 1.0)
        assert vals.max() / vals.min() == pytest.approx((1 + v) / (1 - v), abs=1e-3)


class TestZplSpectrumModel:
    model = EmitterModel()

    def test_peak_and_half_maximum(self):
        center, fwhm = self.model.zpl_center_nm, self.model.zpl_fwhm_nm
        ped, amp = 0.3, 2.0
        assert zpl_spectrum_model(center, self.model, ped, amp) == pytest.approx(ped + amp)
        for sign in (-1, 1):
            val = zpl_spectrum_model(center + sign * fwhm / 2, self.model, ped, amp)
            assert val == pytest.approx(ped + amp / 2, rel=1e-12)

    def test_symmetry_with_constant_pedestal(self):
        deltas = np.linspace(0.0, 20.0, 50)
        center = self.model.zpl_center_nm
        left = zpl_spectrum_model(center - deltas, self.model, 0.2, 1.5)
        right = zpl_spectrum_model(center + deltas, self.model, 0.2, 1.5)
        assert np.allclose(left, right, rtol=1e-13)

    def test_integrated_area_close_to_analytic(self):
        fwhm = self.model.zpl_fwhm_nm
        center = self.model.zpl_center_nm
        wl = np.linspace(center - 50 * fwhm, center + 50 * fwhm, 200_001)
        vals = zpl_spectrum_model(wl, self.model, 0.0, 1.0)
        area = np.trapezoid(vals, wl)
        assert area == pytest.approx(lorentzian_area(fwhm, 1.0), rel=0.01)

    def test_lorentzian_window_area(self):
        full = lorentzian_area(7.0, 2.0)
        windowed = lorentzian_area(7.0, 2.0, window=(738.8 - 500, 738.8 + 500), center=738.8)
        assert windowed < full
        assert windowed == pytest.approx(full, rel=0.01)


class TestDomainTypes:
    def test_emitter_validation(self):
        with pytest.raises(InvalidParameterError):
            EmitterModel(lifetime_ns=0.0)
        with pytest.raises(InvalidParameterError):
            EmitterModel(i_sat=-1.0)
        with pytest.raises(InvalidParameterError):
            EmitterModel(dw_factor=1.2)
        with pytest.raises(InvalidParameterError):
            EmitterModel(emission_visibility=-0.1)

    def test_frozen(self):
        em = EmitterModel()
        with pytest.raises(AttributeError):
            em.lifetime_ns = 2.0

    def test_excitation(self):
        ex = ExcitationField(power_mw=135.0)
        assert ex.intensity == pytest.approx(47.746, abs=1e-3)
        with pytest.raises(InvalidParameterError):
            ExcitationField(power_mw=-1.0)
        with pytest.raises(InvalidParameterError):
            ExcitationField(power_mw=1.0, spot_diameter_um=0.0)

    def test_background(self):
        bg = BackgroundContext(background_rate_kcps=0.3, sb_ratio=3.5)
        assert bg.sb_ratio == 3.5
        with pytest.raises(InvalidParameterError):
            BackgroundContext(background_rate_kcps=-0.1)
        with pytest.raises(InvalidParameterError):
            BackgroundContext(background_rate_kcps=1.0, sb_ratio=0.0)

    def test_detection(self):
        with pytest.raises(InvalidParameterError):
            DetectionChain(quantum_efficiency=1.5)
        with pytest.raises(InvalidParameterError):
            DetectionChain(filter_pass_nm=(752.0, 727.0))

    def test_lorentzian_helper(self):
        assert lorentzian(5.0, 5.0, 2.0, 3.0) == 3.0
