import numpy as np
import pytest

from photonlab.errors import FitFailureError, InvalidParameterError, UnresolvableLineError
from photonlab.fitting import (
    BUILTIN_MODELS,
    Spectrum,
    _fd_jacobian,
    correct_instrument_width,
    debye_waller,
    fit_lorentzian,
    fit_polarization,
    fit_saturation,
    lorentzian_pedestal_model,
    nlls_fit,
    polarization_recovery_study,
    saturation_model,
    saturation_recovery_study,
    saturation_two_point,
    sinsq_model,
)
from photonlab.models import lorentzian, lorentzian_area

WINDOW = (727.0, 752.0)


def make_spectrum(center=738.8, fwhm=7.0, amplitude=1.0, pedestal=0.0, noise=0.0,
                  rng=None, step=0.2, resolution=1.5):
    wl = np.arange(720.0, 760.0001, step)
    vals = pedestal + lorentzian(wl, center, fwhm, amplitude)
    if noise > 0:
        vals = vals * (1.0 + noise * rng.standard_normal(wl.size))
        vals = np.clip(vals, 0.0, None)
    return Spectrum(wl, vals, resolution)


def pedestal_for_dw(dw, center=738.8, fwhm=7.0, amplitude=1.0, window=WINDOW):
    """Constant pedestal making ZPL/total area equal dw inside the window."""
    line = lorentzian_area(fwhm, amplitude, window=window, center=center)
    return line * (1.0 / dw - 1.0) / (window[1] - window[0])


class TestEngine:
    def test_linear_model_exact(self):
        x = np.linspace(0.0, 10.0, 25)
        y = 3.0 + 2.0 * x
        res = nlls_fit(lambda xx, p: p[0] + p[1] * xx, x, y, [0.0, 0.0])
        assert np.allclose(res.params, [3.0, 2.0], atol=1e-10)
        assert res.ssr < 1e-18

    def test_bent_valley(self):
        # classic curved-valley test: minimize (1-a)^2 + 100 (b - a^2)^2
        x = np.array([0.0, 1.0])
        y = np.array([1.0, 0.0])
        model = lambda xx, p: np.array([p[0], 10.0 * (p[1] - p[0] ** 2)])
        res = nlls_fit(model, x, y, [-1.2, 1.0], max_iter=500)
        assert np.allclose(res.params, [1.0, 1.0], atol=1e-6)

    def test_underdetermined(self):
        with pytest.raises(InvalidParameterError):
            nlls_fit(lambda x, p: p[0] + p[1] * x + p[2] * x * x,
                     np.array([1.0, 2.0]), np.array([1.0, 2.0]), [0.0, 0.0, 0.0])

    def test_initial_guess_validation(self):
        x = np.linspace(0, 1, 5)
        with pytest.raises(InvalidParameterError):
            nlls_fit(lambda xx, p: p[0] * xx, x, x, [np.nan])
        with pytest.raises(InvalidParameterError):
            nlls_fit(lambda xx, p: p[0] * xx, x, x, [5.0], bounds=([0.0], [1.0]))

    def test_iteration_cap_reports_diagnostics(self):
        x = np.linspace(0.1, 1.0, 30)
        y = np.exp(-8.0 * x)
        with pytest.raises(FitFailureError) as err:
            nlls_fit(lambda xx, p: np.exp(-p[0] * xx), x, y, [0.01], max_iter=1)
        assert "iteration" in err.value.diagnostics

    def test_bounds_respected(self):
        x = np.linspace(0.0, 5.0, 20)
        y = saturation_model(x, (10.0, 100.0))  # deep linear regime
        res = nlls_fit(saturation_model, x, y, [1.0, 50.0],
                       bounds=([0.0, 1.0], [5.0, 60.0]))
        assert 0.0 <= res.params[0] <= 5.0
        assert 1.0 <= res.params[1] <= 60.0

    def test_builtin_jacobians_match_finite_differences(self):
        cases = {
            "saturation": (np.linspace(1.0, 400.0, 30), [29.0, 130.0]),
            "lorentzian_pedestal": (np.linspace(720.0, 760.0, 80), [1.0, 738.8, 7.0, 0.1]),
            "sinsq": (np.linspace(0.0, 360.0, 37), [1.0, 2.0, 40.0]),
        }
        for name, (model, jac) in BUILTIN_MODELS.items():
            x, p = cases[name]
            analytic = jac(x, np.asarray(p, dtype=float))
            numeric = _fd_jacobian(model, x, np.asarray(p, dtype=float))
            scale = np.abs(analytic).max()
            assert np.allclose(analytic, numeric, atol=1e-5 * scale, rtol=1e-5), name


class TestLorentzianFit:
    def test_noiseless_recovery(self):
        spec = make_spectrum(pedestal=0.12766)
        fit = fit_lorentzian(spec)
        assert fit.center_nm == pytest.approx(738.8, rel=1e-4)
        assert fit.fwhm_nm == pytest.approx(7.0, rel=1e-4)
        assert fit.peak_amplitude == pytest.approx(1.0, rel=1e-4)
        assert fit.pedestal[0] == pytest.approx(0.12766, rel=1e-3)

    def test_linear_pedestal(self):
        wl = np.arange(720.0, 760.0001, 0.2)
        vals = 0.2 + 0.004 * (wl - 740.0) + lorentzian(wl, 738.8, 7.0, 1.0)
        fit = fit_lorentzian(Spectrum(wl, vals, 1.5), pedestal_degree=1)
        assert fit.center_nm == pytest.approx(738.8, abs=1e-3)
        assert fit.fwhm_nm == pytest.approx(7.0, rel=1e-3)

    def test_noisy_bias(self):
        rng = np.random.default_rng(42)
        centers, widths = [], []
        for _ in range(100):
            spec = make_spectrum(pedestal=0.12766, noise=0.05, rng=rng)
            fit = fit_lorentzian(spec)
            centers.append(fit.center_nm)
            widths.append(fit.fwhm_nm)
        assert abs(np.mean(centers) - 738.8) < 0.1
        assert abs(np.mean(widths) - 7.0) / 7.0 < 0.05

    def test_pedestal_only(self):
        wl = np.arange(720.0, 760.0001, 0.2)
        fit = fit_lorentzian(Spectrum(wl, np.full(wl.size, 0.7), 1.5))
        assert fit.peak_amplitude <= 1e-6 or "no-peak" in fit.warnings \
            or "amplitude-consistent-with-zero" in fit.warnings

    def test_edge_warning(self):
        spec = make_spectrum(center=722.0)
        fit = fit_lorentzian(spec)
        assert "peak-near-window-edge" in fit.warnings


class TestInstrumentWidth:
    def test_quadrature_value(self):
        assert correct_instrument_width(7.0, 1.5) == pytest.approx(np.sqrt(49.0 - 2.25), rel=1e-12)
        assert correct_instrument_width(7.0, 1.5) == pytest.approx(6.8374, abs=1e-4)

    def test_perfect_instrument(self):
        assert correct_instrument_width(4.2, 0.0) == 4.2

    def test_unresolvable(self):
        with pytest.raises(UnresolvableLineError):
            correct_instrument_width(1.0, 1.5)


class TestDebyeWaller:
    def test_pure_zpl(self):
        spec = make_spectrum(pedestal=0.0)
        fit = fit_lorentzian(spec)
        assert debye_waller(spec, fit, WINDOW) == pytest.approx(1.0, abs=1e-3)

    def test_constructed_074(self):
        spec = make_spectrum(pedestal=pedestal_for_dw(0.74))
        fit = fit_lorentzian(spec)
        assert debye_waller(spec, fit, WINDOW) == pytest.approx(0.74, abs=0.01)

    def test_window_sensitivity_is_surfaced(self):
        spec = make_spectrum(pedestal=pedestal_for_dw(0.74))
        fit = fit_lorentzian(spec)
        wide = debye_waller(spec, fit, WINDOW)
        narrow = debye_waller(spec, fit, (738.8 - 10.5, 738.8 + 10.5))
        assert wide != narrow  # the window is an explicit, visible parameter

    def test_pedestal_subtracted_mode(self):
        spec = make_spectrum(pedestal=pedestal_for_dw(0.74))
        fit = fit_lorentzian(spec)
        sub = debye_waller(spec, fit, WINDOW, pedestal_in_total=False)
        assert sub > debye_waller(spec, fit, WINDOW)
        assert sub == pytest.approx(1.0, abs=0.02)

    def test_window_must_contain_line(self):
        spec = make_spectrum()
        fit = fit_lorentzian(spec)
        with pytest.raises(InvalidParameterError):
            debye_waller(spec, fit, (745.0, 752.0))


class TestSaturationFit:
    INTENSITIES = np.geomspace(15.0, 780.0, 9)

    def test_noiseless_exact(self):
        rates = saturation_model(self.INTENSITIES, (29.0, 130.0))
        fit = fit_saturation(np.column_stack([self.INTENSITIES, rates]))
        assert fit.n_inf_kcps == pytest.approx(29.0, rel=1e-6)
        assert fit.i_sat == pytest.approx(130.0, rel=1e-6)

    def test_saturation_power_report(self):
        rates = saturation_model(self.INTENSITIES, (29.0, 130.0))
        fit = fit_saturation(np.column_stack([self.INTENSITIES, rates]), spot_diameter_um=0.6)
        assert fit.saturation_power_mw == pytest.approx(367.6, abs=0.5)

    def test_intensity_covariance(self):
        rates = saturation_model(self.INTENSITIES, (29.0, 130.0))
        fit1 = fit_saturation(np.column_stack([self.INTENSITIES, rates]))
        c = 3.7
        fit2 = fit_saturation(np.column_stack([c * self.INTENSITIES, rates]))
        assert fit2.i_sat == pytest.approx(c * fit1.i_sat, rel=1e-8)
        assert fit2.n_inf_kcps == pytest.approx(fit1.n_inf_kcps, rel=1e-8)

    def test_two_point_closed_form(self):
        pts = [(20.0, saturation_model(20.0, (29.0, 130.0))),
               (400.0, saturation_model(400.0, (29.0, 130.0)))]
        n_inf, i_sat = saturation_two_point(pts)
        assert n_inf == pytest.approx(29.0, rel=1e-12)
        assert i_sat == pytest.approx(130.0, rel=1e-12)

    def test_background_subtraction(self):
        slope = 0.006
        rates = saturation_model(self.INTENSITIES, (29.0, 130.0)) + slope * self.INTENSITIES
        bg = np.column_stack([self.INTENSITIES, slope * self.INTENSITIES])
        fit = fit_saturation(np.column_stack([self.INTENSITIES, rates]), background_points=bg)
        assert fit.background_slope == pytest.approx(slope, rel=1e-10)
        assert fit.n_inf_kcps == pytest.approx(29.0, rel=1e-6)
        assert fit.i_sat == pytest.approx(130.0, rel=1e-6)

    def test_linear_regime_warning(self):
        intensities = np.array([1.0, 2.0, 4.0, 8.0, 12.0])
        rates = saturation_model(intensities, (29.0, 130.0))
        fit = fit_saturation(np.column_stack([intensities, rates]))
        assert any("poorly-constrained" in w for w in fit.warnings)

    def test_span_precondition(self):
        intensities = np.array([100.0, 150.0, 200.0])
        rates = saturation_model(intensities, (29.0, 130.0))
        with pytest.raises(InvalidParameterError):
            fit_saturation(np.column_stack([intensities, rates]))

    def test_too_few_points(self):
        with pytest.raises(InvalidParameterError):
            fit_saturation(np.array([[10.0, 2.0], [100.0, 10.0]]))

    def test_recovery_study(self):
        n_inf, i_sat = saturation_recovery_study(29.0, 130.0, self.INTENSITIES, 0.05, 60, 77)
        ok = (np.abs(n_inf - 29.0) / 29.0 <= 0.10) & (np.abs(i_sat - 130.0) / 130.0 <= 0.20)
        assert np.mean(ok) >= 0.8

    def test_reorder_invariance(self):
        rng = np.random.default_rng(5)
        rates = saturation_model(self.INTENSITIES, (29.0, 130.0)) * \
            (1 + 0.03 * rng.standard_normal(9))
        table = np.column_stack([self.INTENSITIES, rates])
        fit1 = fit_saturation(table)
        fit2 = fit_saturation(table[::-1])
        assert fit1.n_inf_kcps == pytest.approx(fit2.n_inf_kcps, rel=1e-9)
        assert fit1.i_sat == pytest.approx(fit2.i_sat, rel=1e-9)


class TestPolarizationFit:
    ANGLES = np.arange(0.0, 361.0, 10.0)

    def test_constant_rates(self):
        fit = fit_polarization(self.ANGLES, np.full(self.ANGLES.size, 4.0))
        assert fit.visibility == 0.0
        assert fit.amplitude == 0.0

    def test_noiseless_v054(self):
        offset = (1.0 - 0.54) / (2.0 * 0.54)
        rates = sinsq_model(self.ANGLES, (offset, 1.0, 40.0))
        fit = fit_polarization(self.ANGLES, rates)
        assert fit.visibility == pytest.approx(0.54, abs=1e-6)
        assert fit.phase_deg == pytest.approx(40.0, abs=1e-6)

    def test_phase_shift_mod_180(self):
        offset = (1.0 - 0.54) / (2.0 * 0.54)
        rates = sinsq_model(self.ANGLES, (offset, 1.0, 130.0))
        fit = fit_polarization(self.ANGLES, rates)
        assert fit.visibility == pytest.approx(0.54, abs=1e-6)
        assert fit.phase_deg == pytest.approx(130.0, abs=1e-6)
        shifted = sinsq_model(self.ANGLES, (offset, 1.0, 130.0 + 90.0))
        fit90 = fit_polarization(self.ANGLES, shifted)
        assert fit90.visibility == pytest.approx(0.54, abs=1e-6)
        assert fit90.phase_deg == pytest.approx(40.0, abs=1e-6)

    def test_short_span_flag(self):
        angles = np.arange(0.0, 121.0, 10.0)
        rates = sinsq_model(angles, (0.4, 1.0, 20.0))
        fit = fit_polarization(angles, rates)
        assert any("ambiguous" in w for w in fit.warnings)

    def test_recovery_study(self):
        for v_true in (0.54, 0.25):
            offset = 0.5 * (1.0 - v_true) / v_true
            vis = polarization_recovery_study(offset, 1.0, 40.0, self.ANGLES, 0.03, 40, 19)
            assert abs(np.nanmean(vis) - v_true) < 0.02

    def test_reorder_invariance(self):
        rng = np.random.default_rng(8)
        rates = sinsq_model(self.ANGLES, (0.5, 1.0, 70.0)) * \
            (1 + 0.02 * rng.standard_normal(self.ANGLES.size))
        order = rng.permutation(self.ANGLES.size)
        fit1 = fit_polarization(self.ANGLES, rates)
        fit2 = fit_polarization(self.ANGLES[order], rates[order])
        assert fit1.visibility == pytest.approx(fit2.visibility, abs=1e-9)


class TestSpectrumType:
    def test_rescale_invariance(self):
        spec = make_spectrum(pedestal=pedestal_for_dw(0.74))
        fit1 = fit_lorentzian(spec)
        dw1 = debye_waller(spec, fit1, WINDOW)
        scaled = spec.scaled(37.0)
        fit2 = fit_lorentzian(scaled)
        assert fit2.center_nm == pytest.approx(fit1.center_nm, abs=1e-9)
        assert fit2.fwhm_nm == pytest.approx(fit1.fwhm_nm, rel=1e-9)
        assert fit2.peak_amplitude == pytest.approx(37.0 * fit1.peak_amplitude, rel=1e-9)
        assert debye_waller(scaled, fit2, WINDOW) == pytest.approx(dw1, abs=1e-9)

    def test_validation(self):
        with pytest.raises(InvalidParameterError):
            Spectrum(np.array([1.0, 2.0]), np.array([1.0]))
        with pytest.raises(InvalidParameterError):
            Spectrum(np.array([2.0, 1.0]), np.array([1.0, 1.0]))
        with pytest.raises(InvalidParameterError):
            Spectrum(np.array([1.0, 2.0]), np.array([1.0, -1.0]))
        with pytest.raises(InvalidParameterError):
            Spectrum(np.array([1.0, 2.0]), np.array([1.0, np.nan]))
        with pytest.raises(InvalidParameterError):
            Spectrum(np.array([1.0, 2.0]), np.array([1.0, 1.0]), resolution_nm=-1.0)

    def test_model_pedestal_consistency(self):
        # lorentzian_pedestal_model evaluates its polynomial about mean(x)
        x = np.linspace(700.0, 780.0, 11)
        vals = lorentzian_pedestal_model(x, np.array([2.0, 740.0, 6.0, 0.5]))
        assert vals.min() >= 0.5 - 1e-12
