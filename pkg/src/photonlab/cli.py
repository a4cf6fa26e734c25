"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
The default seed for stochastic subcommands can come from the
PHOTONLAB_SEED environment variable; an explicit --seed flag wins.
"""

import argparse
import os
import sys

import numpy as np

from . import __version__
from .config import load_config
from .correlate import (
    InstrumentResponse,
    background_correct,
    coincidence_histogram,
    fit_antibunching,
    normalize_g2,
    predict_measured_floor,
)
from .errors import (
    DataFormatError,
    FitFailureError,
    InvalidParameterError,
    NoGuidedModeError,
    UndefinedEfficiencyError,
    UnreachableEfficiencyError,
    UnresolvableLineError,
    WavelengthRangeError,
)
from .fiber import (
    CollectionBudget,
    FiberSpec,
    channeling_efficiency,
    efficiency_from_counts,
    invert_channeling,
    is_single_mode,
    solve_he11,
    v_number,
)
from .fitting import (
    Spectrum,
    correct_instrument_width,
    debye_waller,
    fit_lorentzian,
    fit_polarization,
    fit_saturation,
    polarization_recovery_study,
    saturation_recovery_study,
)
from .io import (
    format_report,
    read_histogram,
    read_spectrum,
    read_table,
    read_timestamps,
    write_histogram,
    write_scan_image,
    write_timestamps,
)
from .models import (
    BackgroundContext,
    DetectionChain,
    EmitterModel,
    ExcitationField,
    lorentzian,
    lorentzian_area,
    power_to_intensity,
)
from .simulate import EmitterScene, ScanConfig, simulate_hbt, simulate_scan

_DATA_ERRORS = (DataFormatError, InvalidParameterError, WavelengthRangeError,
                UnresolvableLineError, OSError)
_NUMERICAL_ERRORS = (FitFailureError, NoGuidedModeError, UnreachableEfficiencyError,
                     UndefinedEfficiencyError)


class _UsageError(Exception):
    pass


def _resolve_seed(args):
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("PHOTONLAB_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise _UsageError(f"PHOTONLAB_SEED is not an integer: {env!r}") from exc
    raise _UsageError("stochastic run needs a seed (--seed or PHOTONLAB_SEED)")


def _load_sections(path):
    return load_config(path) if path else {}


def _emit(text, out_path):
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate_hbt(args):
    cfg = _load_sections(args.config)
    emitter = cfg.get("emitter", EmitterModel())
    background = cfg.get("background", BackgroundContext())
    detection = cfg.get("detection", DetectionChain())
    if args.intensity is not None:
        intensity = args.intensity
    elif "excitation" in cfg:
        intensity = cfg["excitation"].intensity
    else:
        raise _UsageError("need --intensity or an [excitation] config section")
    seed = _resolve_seed(args)
    ch0, ch1 = simulate_hbt(emitter, intensity, background, detection,
                            duration_s=args.duration_s, seed=seed)
    write_timestamps(ch0, args.out_a, fmt=args.format)
    write_timestamps(ch1, args.out_b, fmt=args.format)
    print(f"wrote {len(ch0)} + {len(ch1)} events ({ch0.rate_kcps:.3f} / "
          f"{ch1.rate_kcps:.3f} kcps) to {args.out_a}, {args.out_b}")
    return 0


def cmd_simulate_scan(args):
    cfg = _load_sections(args.config)
    scan = cfg.get("scan", ScanConfig())
    excitation = cfg.get("excitation", ExcitationField(power_mw=56.0))
    emitter = cfg.get("emitter", EmitterModel())
    background = cfg.get("background", BackgroundContext(background_rate_kcps=0.3))
    positions = []
    for spec in args.emitter or []:
        try:
            x, y = (float(v) for v in spec.split(","))
        except ValueError as exc:
            raise _UsageError(f"--emitter wants X,Y in um, got {spec!r}") from exc
        positions.append(((x, y), emitter))
    scene = EmitterScene(extent_um=scan.extent_um, emitters=positions,
                         background_rate_kcps=background.background_rate_kcps)
    image = simulate_scan(scene, scan, excitation, seed=_resolve_seed(args))
    write_scan_image(image, args.out)
    print(f"wrote {image.counts.shape[0]}x{image.counts.shape[1]} scan image to {args.out}")
    return 0


def cmd_correlate(args):
    a = read_timestamps(args.stream_a)
    b = read_timestamps(args.stream_b)
    hist = coincidence_histogram(a, b, args.bin_width_ps, args.max_lag_ps)
    g2 = normalize_g2(hist, mode=args.normalize) if args.normalize else None
    write_histogram(hist, args.out, g2=g2)
    print(f"wrote {hist.counts.size} bins, {hist.total_coincidences} coincidences to {args.out}")
    return 0


def cmd_fit_g2(args):
    hist = read_histogram(args.histogram)
    g2 = normalize_g2(hist, mode=args.normalize)
    irf = InstrumentResponse(args.irf_fwhm_ps) if args.irf_fwhm_ps > 0 else None
    fit = fit_antibunching(g2, irf=irf, weights="poisson" if args.poisson_weights else None)
    entries = [
        ("dip_g2_0", fit.dip_g2_0),
        ("dip_err", fit.dip_err),
        ("decay_time_ns", fit.decay_time_ns),
        ("decay_time_err_ns", fit.decay_time_err_ns),
        ("amplitude", fit.amplitude),
        ("amplitude_err", fit.amplitude_err),
        ("plateau", fit.plateau),
        ("reduced_chi2", fit.goodness_of_fit),
    ]
    if irf is not None:
        entries.append(("irf_fwhm_ps", fit.irf_fwhm_ps))
        entries.append(("convolved_dip_g2_0", fit.convolved_dip_g2_0))
    if args.sb_ratio is not None:
        corrected, clamped = background_correct(fit.dip_g2_0, args.sb_ratio, mode=args.correction)
        entries += [
            ("sb_ratio", args.sb_ratio),
            ("background_floor_perfect_emitter", predict_measured_floor(0.0, args.sb_ratio)),
            (f"corrected_dip_{args.correction}", corrected),
            ("corrected_dip_clamped", clamped),
        ]
    for flag in fit.flags:
        entries.append(("flag", flag))
    _emit(format_report("antibunching fit", entries), args.out)
    return 0


def cmd_fit_spectrum(args):
    spectrum = read_spectrum(args.spectrum, resolution_nm=args.resolution_nm,
                             strict=not args.lenient)
    fit = fit_lorentzian(spectrum, pedestal_degree=args.pedestal_degree)
    entries = [
        ("center_nm", fit.center_nm),
        ("center_err_nm", fit.center_err),
        ("fwhm_nm", fit.fwhm_nm),
        ("fwhm_err_nm", fit.fwhm_err),
        ("peak_amplitude", fit.peak_amplitude),
        ("pedestal", ", ".join(f"{p:.6g}" for p in fit.pedestal)),
    ]
    if spectrum.resolution_nm > 0 and fit.peak_amplitude > 0:
        entries.append(("fwhm_instrument_corrected_nm",
                        correct_instrument_width(fit.fwhm_nm, spectrum.resolution_nm)))
    lo, hi = args.window
    if fit.peak_amplitude > 0:
        entries.append(("debye_waller_window", f"{lo:.6g}-{hi:.6g}"))
        entries.append(("debye_waller", debye_waller(spectrum, fit, (lo, hi))))
        entries.append(("debye_waller_pedestal_subtracted",
                        debye_waller(spectrum, fit, (lo, hi), pedestal_in_total=False)))
    for flag in fit.warnings:
        entries.append(("flag", flag))
    _emit(format_report("spectrum fit", entries), args.out)
    return 0


def cmd_fit_saturation(args):
    points = read_table(args.table, 2)
    background = read_table(args.background, 2) if args.background else None
    fit = fit_saturation(points, background_points=background, spot_diameter_um=args.spot_um)
    entries = [
        ("n_inf_kcps", fit.n_inf_kcps),
        ("n_inf_err_kcps", fit.n_inf_err),
        ("i_sat_mw_cm2", fit.i_sat),
        ("i_sat_err_mw_cm2", fit.i_sat_err),
    ]
    if fit.saturation_power_mw is not None:
        entries.append(("saturation_power_mw", fit.saturation_power_mw))
    if fit.background_slope is not None:
        entries.append(("background_slope_kcps_per_mw_cm2", fit.background_slope))
    for flag in fit.warnings:
        entries.append(("flag", flag))
    _emit(format_report("saturation fit", entries), args.out)
    return 0


def cmd_fit_polarization(args):
    table = read_table(args.table, 2)
    fit = fit_polarization(table[:, 0], table[:, 1])
    entries = [
        ("offset_kcps", fit.offset),
        ("amplitude_kcps", fit.amplitude),
        ("phase_deg", fit.phase_deg),
        ("visibility", fit.visibility),
        ("visibility_err", fit.visibility_err),
    ]
    for flag in fit.warnings:
        entries.append(("flag", flag))
    _emit(format_report("polarization fit", entries), args.out)
    return 0


def cmd_fiber_mode(args):
    spec = FiberSpec(diameter_nm=args.diameter_nm)
    v = v_number(spec, args.wavelength_nm)
    mode = solve_he11(spec, args.wavelength_nm)
    entries = [
        ("diameter_nm", spec.diameter_nm),
        ("wavelength_nm", args.wavelength_nm),
        ("core_index", mode.core_index),
        ("v_number", v),
        ("single_mode", is_single_mode(spec, args.wavelength_nm)),
        ("effective_index", mode.effective_index),
        ("beta_rad_per_um", mode.beta_rad_per_um),
        ("q_per_um", mode.q_per_um),
        ("group_index", mode.group_index),
        ("characteristic_residual", f"{mode.residual:.3e}"),
    ]
    _emit(format_report("HE11 guided mode", entries), args.out)
    if args.eta_out:
        rs = np.arange(0.0, args.eta_max_nm + args.eta_step_nm / 2, args.eta_step_nm)
        with open(args.eta_out, "w") as fh:
            fh.write("r_nm,eta_radial,eta_azimuthal,eta_axial,eta_random\n")
            for r in rs:
                row = [channeling_efficiency(mode, spec, r, o)
                       for o in ("radial", "azimuthal", "axial", "random")]
                fh.write(f"{r:.1f}," + ",".join(f"{v:.8g}" for v in row) + "\n")
        print(f"wrote eta(r) table to {args.eta_out}")
    return 0


def cmd_coupling(args):
    cfg = _load_sections(args.config)
    budget = cfg.get("budget", CollectionBudget())
    est = efficiency_from_counts(args.n_guided, args.n_radiated, budget,
                                 n_guided_err=args.n_guided_err,
                                 n_radiated_err=args.n_radiated_err)
    entries = [
        ("n_guided_kcps", args.n_guided),
        ("n_radiated_kcps", args.n_radiated),
        ("kappa_onf", budget.kappa_onf),
        ("kappa_ol", budget.kappa_ol),
        ("f_ol", budget.f_ol),
        ("guided_ends_counted", budget.guided_ends_counted),
        ("guided_emission_kcps", est.guided_rate_inferred_kcps),
        ("radiated_emission_kcps", est.radiated_rate_inferred_kcps),
        ("eta_percent", est.eta * 100),
        ("eta_err_percent", est.uncertainty * 100),
    ]
    if args.reference is not None:
        lo = est.eta - est.uncertainty
        hi = est.eta + est.uncertainty
        rlo = (args.reference - args.reference_tol) / 100.0
        rhi = (args.reference + args.reference_tol) / 100.0
        entries += [
            ("reference_percent", f"{args.reference:.6g} +- {args.reference_tol:.6g}"),
            ("central_value_discrepancy_percent", args.reference - est.eta * 100),
            ("one_sigma_intervals_overlap", not (hi < rlo or lo > rhi)),
        ]
    if args.invert:
        spec = FiberSpec(diameter_nm=args.diameter_nm)
        mode = solve_he11(spec, args.wavelength_nm)
        entries.append(("inferred_radial_position_nm",
                        invert_channeling(mode, spec, est.eta, orientation="random")))
    _emit(format_report("guided-mode coupling estimate", entries), args.out)
    return 0


# ---------------------------------------------------------------------------
# reproduce-paper


def _brute_force_histogram(a, b, bin_width, n_side):
    counts = np.zeros(2 * n_side + 1, dtype=np.int64)
    half = bin_width // 2
    reach = n_side * bin_width + (bin_width - 1) // 2
    for t in a:
        lags = b.astype(np.int64) - np.int64(t)
        lags = lags[np.abs(lags) <= reach]
        for lag in lags:
            k = (lag + half) // bin_width if lag >= 0 else -((-lag + half) // bin_width)
            counts[k + n_side] += 1
    return counts


def cmd_reproduce_paper(args):
    seed = _resolve_seed(args)
    sub = np.random.SeedSequence(seed).generate_state(8)
    lines = []
    say = lines.append
    say("reference reproduction report")
    say("=============================")
    say(f"seed: {seed}")
    say("")

    # 1. power -> intensity conversion chain
    say("[1] excitation power to intensity (0.6 um spot)")
    for power, printed in [(135.0, 47.7), (56.0, 19.8), (25.0, 8.8), (11.0, 3.9), (370.0, 130.0)]:
        got = power_to_intensity(power, 0.6)
        say(f"  {power:6.1f} mW -> {got:8.3f} MW/cm2   (reference {printed}, "
            f"dev {abs(got - printed) / printed * 100:.2f}%)")
    say("")

    # 2. saturation recovery study
    say("[2] saturation-curve recovery, 200 noisy realizations of (29 kcps, 130 MW/cm2)")
    intensities = np.geomspace(15.0, 780.0, 9)
    n_inf_fits, i_sat_fits = saturation_recovery_study(29.0, 130.0, intensities, 0.05,
                                                       200, int(sub[0]))
    ok = (np.abs(n_inf_fits - 29.0) / 29.0 <= 0.10) & (np.abs(i_sat_fits - 130.0) / 130.0 <= 0.20)
    say(f"  median n_inf {np.nanmedian(n_inf_fits):.3f} kcps, median I_sat "
        f"{np.nanmedian(i_sat_fits):.3f} MW/cm2")
    say(f"  fraction within (10%, 20%): {np.mean(ok):.3f}  (target >= 0.80)")
    say("")

    # 3. g2 chain at the reference operating point
    say("[3] g2 chain: 1.0 ns lifetime, spectrum S/B 3.5, host adds excess "
        "uncorrelated light, 300 ps timing response")
    signal = 380.0
    extra_bg = signal / 2.45
    emitter = EmitterModel(lifetime_ns=1.0, n_inf_kcps=2 * signal, i_sat=130.0)
    background = BackgroundContext(background_rate_kcps=extra_bg, sb_ratio=3.5)
    detection = DetectionChain(quantum_efficiency=1.0, jitter_fwhm_ps=300.0, dead_time_ns=50.0)
    ch0, ch1 = simulate_hbt(emitter, 130.0, background, detection,
                            duration_s=args.g2_duration_s, seed=int(sub[1]))
    hist = coincidence_histogram(ch0, ch1, 64, 20_000)
    g2 = normalize_g2(hist)
    fit = fit_antibunching(g2, irf=InstrumentResponse(300.0))
    corrected, _ = background_correct(fit.dip_g2_0, 3.5)
    corrected_lin, _ = background_correct(fit.dip_g2_0, 3.5, mode="linear")
    say(f"  duration {args.g2_duration_s:.0f} s, per-channel rates "
        f"{ch0.rate_kcps:.1f} / {ch1.rate_kcps:.1f} kcps")
    say(f"  measured (convolved-model) dip: {fit.convolved_dip_g2_0:.4f}   (reference 0.6 +- 0.08)")
    say(f"  fitted decay time: {fit.decay_time_ns:.4f} ns   (reference 1.0 +- 0.3 ns)")
    say(f"  perfect-emitter floor at S/B 3.5: {predict_measured_floor(0.0, 3.5):.4f} "
        f"  (reference 0.4)")
    say(f"  corrected dip, quadratic rho^2 formula: {corrected:.4f}   (reference < 0.2)")
    say(f"  corrected dip, linear-subtraction variant: {corrected_lin:.4f}")
    say("")

    # 4. correlator exactness
    say("[4] correlator exactness against O(n^2) enumeration")
    rng = np.random.default_rng(int(sub[2]))
    from .simulate import TimestampStream

    t_a = np.unique(rng.integers(0, 1_000_000, 400))
    t_b = np.unique(rng.integers(0, 1_000_000, 300))
    h = coincidence_histogram(TimestampStream(0, t_a, 1_000_000),
                              TimestampStream(1, t_b, 1_000_000), 64, 5_000)
    bf = _brute_force_histogram(t_a, t_b, 64, h.n_side)
    say(f"  {t_a.size} x {t_b.size} events, {h.total_coincidences} coincidences: "
        f"bin-for-bin equal = {np.array_equal(h.counts, bf)}")
    say("")

    # 5. spectrum analysis
    say("[5] spectrum: synthetic line at (738.8 nm, 7 nm), built to DW = 0.74 over 727-752 nm")
    wl = np.arange(720.0, 760.0001, 0.2)
    window = (727.0, 752.0)
    area_in_window = lorentzian_area(7.0, 1.0, window=window, center=738.8)
    pedestal = area_in_window * (1.0 / 0.74 - 1.0) / (window[1] - window[0])
    spec = Spectrum(wl, pedestal + lorentzian(wl, 738.8, 7.0, 1.0), resolution_nm=1.5)
    lfit = fit_lorentzian(spec)
    dw = debye_waller(spec, lfit, window)
    say(f"  fitted center {lfit.center_nm:.4f} nm (reference 738.8), "
        f"FWHM {lfit.fwhm_nm:.4f} nm (reference 7)")
    say(f"  Debye-Waller factor {dw:.4f} (reference 0.74)")
    say(f"  instrument-corrected FWHM {correct_instrument_width(lfit.fwhm_nm, 1.5):.4f} nm "
        f"(below the observed width)")
    say("")

    # 6. polarization
    say("[6] polarization visibility recovery, 100 noisy realizations each")
    angles = np.arange(0.0, 361.0, 10.0)
    for v_true, tag in [(0.54, "emission"), (0.25, "excitation")]:
        offset = 0.5 * (1.0 - v_true) / v_true if v_true > 0 else 1.0
        vis = polarization_recovery_study(offset, 1.0, 40.0, angles, 0.03, 100, int(sub[3]))
        say(f"  {tag}: true V {v_true:.2f}, mean recovered {np.nanmean(vis):.4f}, "
            f"worst |error| {np.nanmax(np.abs(vis - v_true)):.4f}")
    say("")

    # 7. fiber mode
    say("[7] nanofiber HE11 mode at 530 nm diameter, 738 nm wavelength")
    fiber = FiberSpec(diameter_nm=530.0)
    v = v_number(fiber, 738.0)
    mode = solve_he11(fiber, 738.0)
    say(f"  V number {v:.4f} (single mode: {v < 2.405}), "
        f"n_eff {mode.effective_index:.6f}, q {mode.q_per_um:.4f} /um")
    say(f"  characteristic residual {mode.residual:.3e} (< 1e-10)")
    say(f"  eta(110 nm, random) = {channeling_efficiency(mode, fiber, 110.0) * 100:.3f}%")
    say("")

    # 8. coupling efficiency bookkeeping
    say("[8] coupling efficiency from measured rates 1.176 / 1.500 kcps")
    budget = CollectionBudget()
    est = efficiency_from_counts(1.176, 1.500, budget, n_guided_err=0.120, n_radiated_err=0.150)
    r_inv = invert_channeling(mode, fiber, 0.041, orientation="random")
    lo, hi = est.eta - est.uncertainty, est.eta + est.uncertainty
    say(f"  documented formula: eta = {est.eta * 100:.3f} +- {est.uncertainty * 100:.3f} %")
    say(f"  reference value 4.1 +- 0.8 %: central values differ by "
        f"{4.1 - est.eta * 100:.3f} points; the printed value is not reproducible from the")
    say("  printed transmittances with this two-end bookkeeping, and the gap is reported,")
    say(f"  not tuned away; 1-sigma intervals overlap = {not (hi < 0.033 or lo > 0.049)}")
    say(f"  radial position at eta 4.1%: {r_inv:.1f} nm (reference 110 +- 20 nm)")
    say("")

    # 9. scan simulation
    say("[9] confocal scan: 0.3 kcps background, 0.5 s dwell")
    scan_cfg = ScanConfig(extent_um=(50.0, 50.0), step_um=0.5, dwell_s=0.5, psf_fwhm_um=0.6)
    scene = EmitterScene(extent_um=(50.0, 50.0), emitters=(),
                         background_rate_kcps=0.3)
    image = simulate_scan(scene, scan_cfg, ExcitationField(power_mw=135.0), seed=int(sub[4]))
    say(f"  background-only mean over {image.counts.size} pixels: "
        f"{image.counts.mean():.3f} counts (expected 150)")
    say("")
    say("[10] determinism: rerun with the same seed for a byte-identical report")

    _emit("\n".join(lines) + "\n", args.out)
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser():
    parser = argparse.ArgumentParser(
        prog="photonlab",
        description="Single-photon emitter characterization: simulation and analysis.")
    parser.add_argument("--version", action="version", version=f"photonlab {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("simulate-hbt", help="simulate a two-channel HBT acquisition")
    p.add_argument("--config", help="INI config with [emitter]/[background]/[detection]")
    p.add_argument("--intensity", type=float, help="excitation intensity, MW/cm2")
    p.add_argument("--duration-s", type=float, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-a", required=True)
    p.add_argument("--out-b", required=True)
    p.add_argument("--format", choices=("binary", "text"), default="binary")
    p.set_defaults(func=cmd_simulate_hbt)

    p = subs.add_parser("simulate-scan", help="simulate a confocal raster scan image")
    p.add_argument("--config", help="INI config with [scan]/[excitation]/[emitter]/[background]")
    p.add_argument("--emitter", action="append", metavar="X,Y",
                   help="place an emitter at X,Y um (repeatable)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate_scan)

    p = subs.add_parser("correlate", help="coincidence histogram of two timestamp files")
    p.add_argument("stream_a")
    p.add_argument("stream_b")
    p.add_argument("--bin-width-ps", type=int, default=64)
    p.add_argument("--max-lag-ps", type=int, default=50_000)
    p.add_argument("--normalize", nargs="?", const="rate-product",
                   choices=("rate-product", "plateau"), help="append a g2 column")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_correlate)

    p = subs.add_parser("fit-g2", help="fit the antibunching dip of a histogram file")
    p.add_argument("histogram")
    p.add_argument("--irf-fwhm-ps", type=float, default=0.0)
    p.add_argument("--sb-ratio", type=float)
    p.add_argument("--correction", choices=("quadratic", "linear"), default="quadratic")
    p.add_argument("--normalize", choices=("rate-product", "plateau"), default="rate-product")
    p.add_argument("--poisson-weights", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit_g2)

    p = subs.add_parser("fit-spectrum", help="Lorentzian + pedestal spectrum analysis")
    p.add_argument("spectrum")
    p.add_argument("--resolution-nm", type=float, default=0.0)
    p.add_argument("--window", type=float, nargs=2, default=(727.0, 752.0),
                   metavar=("LO", "HI"))
    p.add_argument("--pedestal-degree", type=int, choices=(0, 1), default=0)
    p.add_argument("--lenient", action="store_true",
                   help="reverse descending wavelengths instead of failing")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit_spectrum)

    p = subs.add_parser("fit-saturation", help="saturation-curve fit of an intensity/rate table")
    p.add_argument("table")
    p.add_argument("--background", help="substrate (intensity, rate) table to subtract")
    p.add_argument("--spot-um", type=float, help="report saturation power for this spot size")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit_saturation)

    p = subs.add_parser("fit-polarization", help="sine-square polarization fit")
    p.add_argument("table")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit_polarization)

    p = subs.add_parser("fiber-mode", help="solve the HE11 guided mode")
    p.add_argument("--diameter-nm", type=float, default=530.0)
    p.add_argument("--wavelength-nm", type=float, default=738.0)
    p.add_argument("--eta-out", help="write eta(r) table to this CSV")
    p.add_argument("--eta-max-nm", type=float, default=500.0)
    p.add_argument("--eta-step-nm", type=float, default=5.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fiber_mode)

    p = subs.add_parser("coupling", help="coupling efficiency from measured count rates")
    p.add_argument("--n-guided", type=float, required=True, metavar="KCPS")
    p.add_argument("--n-radiated", type=float, required=True, metavar="KCPS")
    p.add_argument("--n-guided-err", type=float, default=0.0)
    p.add_argument("--n-radiated-err", type=float, default=0.0)
    p.add_argument("--config", help="INI config with a [budget] section")
    p.add_argument("--reference", type=float, help="reference efficiency in percent")
    p.add_argument("--reference-tol", type=float, default=0.0)
    p.add_argument("--invert", action="store_true",
                   help="also infer the dipole radial position from eta")
    p.add_argument("--diameter-nm", type=float, default=530.0)
    p.add_argument("--wavelength-nm", type=float, default=738.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_coupling)

    p = subs.add_parser("reproduce-paper",
                        help="chain simulation and analysis into one deterministic report")
    p.add_argument("--seed", type=int)
    p.add_argument("--g2-duration-s", type=float, default=100.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_reproduce_paper)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse prints its own diagnostics
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
