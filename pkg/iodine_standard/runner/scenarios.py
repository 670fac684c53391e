"""
The named experiments the runner can execute

Each scenario is called as func(config, seed, out_dir), writes its data files
into out_dir and returns a ScenarioResult. Checks are pass/fail comparisons
against the figures the model is calibrated to reproduce.
"""

import math
from dataclasses import replace
from pathlib import Path
from statistics import median
from typing import NamedTuple

import numpy as np

from iodine_standard.analysis import (
    MIN_ALLAN_AVERAGES,
    allan_deviation,
    allan_slope,
    fit_dispersion,
    guess_dispersion,
    pressure_slope,
    repeatability,
    simulate_measurement_sets,
)
from iodine_standard.canceller import (
    measure_intensity_notch,
    measure_ram_rejection,
    write_psd_csv,
)
from iodine_standard.comb import (
    CounterConfig,
    beat_and_mix,
    beat_note,
    determine_mode_number,
    measure_absolute_frequency,
    reconstruct,
)
from iodine_standard.errors import AmbiguousModeError, ConvergenceError
from iodine_standard.freqcore import (
    FrequencyOffset,
    OpticalFrequency,
    SeriesKind,
    TimeSeries,
    format_khz,
    freq_from_khz_string,
)
from iodine_standard.lineshape import saturation_profile, sweeps, write_profile_csv
from iodine_standard.runner.scenario_tracker import ScenarioTracker
from iodine_standard.runner.settings import (
    build_chain,
    build_comb,
    build_context,
    build_counter,
    build_intensity_setup,
    build_modulation,
    build_noise,
    build_pi,
    build_prestab,
    build_ram_setup,
    build_repeatability,
)
from iodine_standard.servo import close_lock, prestabilize, simulate_free_laser
from iodine_standard.sigchain import (
    Discriminator,
    ModulationMode,
    fm_demod_signal,
    fm_demod_time_domain,
    ram_lock_shift,
)
from iodine_standard.utils import debug, logger, write_csv

TARGET_ALLAN_1S = 7.2e-13
ALLAN_TOLERANCE = 0.15
WHITE_FM_SLOPE = -0.5
SLOPE_TOLERANCE = 0.05
SLOPE_RANGE = (1.0, 30.0)
TIME_DOMAIN_TOLERANCE = 0.01
BACKGROUND_FRACTION = 0.3
BACKGROUND_TOLERANCE = 1.0
PSD_EXPORT_BANDWIDTH = 200.0
LOCKED_EXPORT_DECIMATION = 100
ORACLE_LENGTH = 64
ORACLE_TOLERANCE = 1e-12
NOISELESS_GATES = 10
SPAN_FRACTIONS = (-0.499, -0.01, -0.001, 0.0, 0.001, 0.01, 0.499)

CATALOG = []


class ScenarioResult(NamedTuple):
    """
    What a scenario reports

    Attributes
    ----------
    results : dict
        JSON-ready values
    checks : dict
        Descriptive check name to whether it passed
    """

    results: dict
    checks: dict


def scenario(name: str, description: str):
    """
    Decorator adding a function to the scenario catalog

    Parameters
    ----------
    name : string
        Command-line name
    description : string
        One-line description
    """

    def wrap(func):
        CATALOG.append((name, func, description))
        return func

    return wrap


def register_all() -> ScenarioTracker:
    """
    Make sure every cataloged scenario is in the tracker
    """
    tracker = ScenarioTracker()
    for name, func, description in CATALOG:
        if not tracker.has_scenario(name):
            tracker.add_scenario(name, func, description)
    return tracker


def _seeds(seed: int, count: int) -> list:
    return [int(value) for value in np.random.SeedSequence(seed).generate_state(count)]


def _within(value: float, target: float, tolerance: float) -> bool:
    return bool(abs(value - target) <= tolerance)


def _pressure_label(pressure: float) -> str:
    return "{0:g}Pa".format(pressure)


def _extrema_half_distance(detunings, values) -> float:
    high, low = int(np.argmax(values)), int(np.argmin(values))
    return 0.5 * abs(detunings[high] - detunings[low])


# pylint: disable=too-many-locals
@scenario("lineshape-scan", "FM dispersion scans and Lorentzian fits at two pressures")
def lineshape_scan(config: dict, seed: int, out_dir: Path) -> ScenarioResult:
    """
    Scan the FM signal across the line at the two broadening anchors and fit
    the dispersion shape to many noisy, sweep-averaged copies
    """
    context = build_context(config)
    mod = build_modulation(config)
    analysis = config["analysis"]
    lockin = config["lockin"]
    anchors = config["broadening"]
    fit_seeds = _seeds(seed, analysis["fit_seeds"] + 1)
    detector_rms = math.sqrt(
        lockin["detector_noise_psd"] / (4 * lockin["time_constant"])
    )

    results, checks = {}, {}
    cases = (
        ("low", anchors["low_pressure"], anchors["low_hwhm"], 1e3),
        ("high", anchors["high_pressure"], anchors["high_hwhm"], 1.5e3),
    )
    for name, pressure, expected, tolerance in cases:
        cond = context.cond.with_pressure(pressure)
        scanned = context.with_conditions(cond)
        span = analysis["scan_half_span"]
        detunings = scanned.shift + scanned.hwhm * np.linspace(
            -span, span, analysis["scan_points"]
        )
        clean = fm_demod_signal(detunings, scanned, mod)
        peak = float(np.max(np.abs(clean - np.median(clean))))
        noise_rms = math.hypot(analysis["scan_noise"] * peak, detector_rms)

        widths, failures, first = [], 0, None
        for fit_seed in fit_seeds[1:]:
            noisy = sweeps(clean, analysis["sweeps"], noise_rms, fit_seed)
            guess = guess_dispersion(
                detunings, noisy, _extrema_half_distance(detunings, noisy)
            )
            try:
                fit = fit_dispersion(detunings, noisy, guess)
            except ConvergenceError as error:
                logger.warning("Fit at %g Pa failed: %s", pressure, error)
                failures += 1
                continue
            widths.append(fit.hwhm)
            if first is None:
                first = (noisy, fit)

        label = _pressure_label(pressure)
        profile = saturation_profile(
            scanned.line, scanned.shift_model, cond, detunings, scanned.dip_contrast
        )
        write_profile_csv(out_dir / "profile_{0}.csv".format(label), detunings, profile)
        columns = {"detuning_Hz": detunings, "clean": clean}
        if first is not None:
            columns["averaged"] = first[0]
            first[1].to_json(out_dir / "fit_{0}.json".format(label))
        write_csv(out_dir / "scan_{0}.csv".format(label), columns)

        fitted = median(widths) if widths else float("nan")
        debug(
            "scenarios",
            "lineshape_scan",
            "{0}: median hwhm {1:.1f} Hz over {2} fits".format(
                label, fitted, len(widths)
            ),
        )
        results[name] = {
            "pressure_Pa": pressure,
            "model_hwhm_Hz": scanned.hwhm,
            "median_fit_hwhm_Hz": fitted,
            "fits": len(widths),
            "failed_fits": failures,
        }
        checks["fitted_hwhm_at_{0}_pressure".format(name)] = bool(
            widths and _within(fitted, expected, tolerance)
        )

    probe = context.shift + 0.5 * context.hwhm
    analytic = float(fm_demod_signal(probe, context, mod))
    sampled = fm_demod_time_domain(
        probe,
        context,
        mod,
        time_constant=lockin["td_time_constant"],
        rate=lockin["td_rate"],
        duration=lockin["td_duration"],
        seed=fit_seeds[0],
    )
    results["time_domain"] = {
        "detuning_Hz": probe,
        "analytic": analytic,
        "sampled": sampled,
    }
    checks["time_domain_matches_analytic"] = bool(
        abs(sampled - analytic) <= TIME_DOMAIN_TOLERANCE * abs(analytic)
    )
    return ScenarioResult(results, checks)


@scenario("notch-fig2", "Beam-intensity noise notch at 125 kHz")
def notch_fig2(config: dict, seed: int, out_dir: Path) -> ScenarioResult:
    """
    Out-of-loop spectra with and without the adaptive canceller
    """
    setup = build_intensity_setup(config)
    measured = measure_intensity_notch(setup, seed)
    for name, record in (
        ("open_loop", measured.open_loop),
        ("closed_loop", measured.closed_loop),
        ("floor", measured.floor),
    ):
        write_psd_csv(out_dir / "{0}.csv".format(name), record, PSD_EXPORT_BANDWIDTH)

    results = {
        "ref_freq_Hz": setup.canceller.ref_freq,
        "notch_fwhm_Hz": setup.canceller.bandwidth,
        "rejection_dB": measured.rejection_db,
        "above_floor_dB": measured.above_floor_db,
    }
    checks = {
        "rejection_near_27dB": _within(measured.rejection_db, 27.0, 1.5),
        "residual_near_9dB_above_floor": _within(measured.above_floor_db, 9.0, 2.0),
    }
    return ScenarioResult(results, checks)


@scenario("ram-reject", "RAM cancellation at 2.5 MHz and the resulting lock shift")
def ram_reject(config: dict, seed: int, out_dir: Path) -> ScenarioResult:
    """
    Measure the RAM notch depth and how much it shrinks the FM lock-point shift
    """
    setup = build_ram_setup(config)
    depth = measure_ram_rejection(setup, seed)

    context = build_context(config)
    mod = build_modulation(config).with_ram(setup.ram_depth)
    raw = ram_lock_shift(mod, context).hz
    rejected = ram_lock_shift(mod.rejected(depth), context).hz
    expected = 10.0 ** (-depth / 20.0)
    ratio = rejected / raw if raw else float("nan")

    depths = setup.ram_depth * np.logspace(-3, 0, 7)
    write_csv(
        out_dir / "ram_shift.csv",
        {
            "ram_depth": depths,
            "lock_shift_Hz": [
                ram_lock_shift(mod.with_ram(float(m)), context).hz for m in depths
            ],
        },
    )

    results = {
        "rejection_dB": depth,
        "raw_lock_shift_Hz": raw,
        "rejected_lock_shift_Hz": rejected,
        "shift_ratio": ratio,
        "expected_ratio": expected,
    }
    checks = {
        "rejection_between_40_and_50dB": bool(40.0 <= depth <= 50.0),
        "lock_shift_shrinks_by_rejection": bool(
            raw and abs(ratio / expected - 1.0) <= 0.1
        ),
    }
    return ScenarioResult(results, checks)


class _LockedRun(NamedTuple):
    context: object
    chain: object
    lock: object
    deviation: TimeSeries
    nominal: OpticalFrequency
    measurement: object


def _locked_run(config: dict, seed: int, duration: float) -> _LockedRun:
    """
    Free laser, prestabilization, long-term lock and comb counting
    """
    seeds = _seeds(seed, 3)
    context = build_context(config)
    chain = build_chain(config, context)
    pi = build_pi(config)
    servo = config["servo"]
    comb = config["comb"]

    free = simulate_free_laser(build_noise(config), duration, pi.update_rate, seeds[0])
    laser = prestabilize(free, build_prestab(config))
    lock = close_lock(
        laser, chain, pi, context.shift + servo["start_offset"], seeds[1]
    )

    shift = FrequencyOffset.from_hz(context.shift)
    settle = int(round(servo["settle"] * pi.update_rate))
    deviation = TimeSeries(
        lock.locked.values[settle:] - shift.hz,
        lock.locked.dt,
        SeriesKind.FREQUENCY_OFFSET,
    )
    nominal = context.line.unperturbed_center + shift
    measurement = measure_absolute_frequency(
        nominal,
        deviation,
        build_comb(config),
        build_counter(config),
        seeds[2],
        comb["f_rep_step"],
        comb["sign_step"],
    )
    return _LockedRun(context, chain, lock, deviation, nominal, measurement)


def _usable_taus(taus, series: TimeSeries) -> list:
    """
    Averaging times that are whole numbers of samples with three averages
    """
    usable = []
    for tau in taus:
        factor = round(tau / series.dt)
        whole = factor >= 1 and math.isclose(factor * series.dt, tau, rel_tol=1e-9)
        if whole and factor * MIN_ALLAN_AVERAGES <= len(series):
            usable.append(tau)
    return usable


def _fractional(measurement, nominal: OpticalFrequency) -> TimeSeries:
    signed = measurement.record.signed()
    return signed.with_values(
        (signed.values - signed.mean()) / nominal.hz,
        SeriesKind.FRACTIONAL_FREQUENCY,
    )


def _background_shifts(chain) -> tuple:
    """
    Lock-point displacement caused by a pump-independent background, for
    double and single demodulation
    """
    chain = replace(chain, discriminator=Discriminator.MODULATION_TRANSFER)
    offset = BACKGROUND_FRACTION * chain.peak_error()
    double = chain.with_offset(offset).lock_point() - chain.lock_point()
    single_chain = replace(chain, double_demod=False)
    single = single_chain.with_offset(offset).lock_point() - single_chain.lock_point()
    return double, single


def _decimated(series: TimeSeries, factor: int) -> TimeSeries:
    blocks = len(series) // factor
    if blocks < 1:
        return series
    values = series.values[: blocks * factor].reshape(blocks, factor).mean(axis=1)
    return TimeSeries(values, series.dt * factor, series.kind)


# pylint: disable=too-many-locals
@scenario("lock-run", "Closed-loop lock, comb counting and Allan deviation")
def lock_run(config: dict, seed: int, out_dir: Path) -> ScenarioResult:
    """
    Lock the noisy laser, count it against the comb and compute its stability
    """
    run = _locked_run(config, seed, config["servo"]["duration"])
    y = _fractional(run.measurement, run.nominal)
    taus = _usable_taus(config["analysis"]["allan_taus"], y)
    allan = allan_deviation(y, taus, config["analysis"]["overlapping"])
    plain = allan_deviation(y, [y.dt])
    overlapped = allan_deviation(y, taus, overlapping=True)

    _decimated(run.deviation, LOCKED_EXPORT_DECIMATION).to_csv(
        out_dir / "locked.csv", "offset_Hz"
    )
    run.measurement.record.to_csv(out_dir / "counted.csv")
    run.measurement.write_report(out_dir / "measurement.json")
    allan.to_csv(out_dir / "allan.csv")

    sigma_1s = plain.sigmas[0]
    try:
        slope = allan_slope(overlapped, *SLOPE_RANGE)
    except ValueError as error:
        logger.warning("No Allan slope: %s", error)
        slope = float("nan")
    double, single = _background_shifts(run.chain)

    summary = run.lock.summary()
    results = {
        "lock": summary,
        "absolute_kHz": format_khz(run.measurement.frequency),
        "p": run.measurement.p,
        "allan_sigma_1s": sigma_1s,
        "allan_slope": slope,
        "double_demod_background_shift_Hz": double,
        "single_demod_background_shift_Hz": single,
    }
    checks = {
        "allan_at_1s_matches_calibration": _within(
            sigma_1s, TARGET_ALLAN_1S, ALLAN_TOLERANCE * TARGET_ALLAN_1S
        ),
        "allan_follows_white_fm_slope": _within(slope, WHITE_FM_SLOPE, SLOPE_TOLERANCE),
        "stayed_in_lock": bool(summary["in_lock_fraction"] == 1.0),
        "double_demod_ignores_background": bool(abs(double) <= BACKGROUND_TOLERANCE),
        "single_demod_follows_background": bool(abs(single) > BACKGROUND_TOLERANCE),
    }
    return ScenarioResult(results, checks)


def _span_identity(config: dict, comb, p: int, seed: int) -> bool:
    """
    Noiseless measurements across the mixer span, with and without f0, give
    back the laser frequency exactly
    """
    section = config["comb"]
    quiet = replace(comb, ref_instability_1s=0.0)
    flat = TimeSeries(np.zeros(NOISELESS_GATES), 1.0, SeriesKind.FREQUENCY_OFFSET)
    for f_0 in (0, comb.f_0.millihertz):
        shifted = replace(quiet, f_0=OpticalFrequency(f_0))
        for fraction in SPAN_FRACTIONS:
            laser = comb.f_rep * p + FrequencyOffset.from_hz(
                round(fraction * comb.f_rep.hz, 3)
            )
            measured = measure_absolute_frequency(
                laser,
                flat,
                shifted,
                CounterConfig(gate=1.0),
                seed,
                section["f_rep_step"],
                section["sign_step"],
            )
            if measured.frequency != laser:
                logger.warning(
                    "Measured %s kHz for %s kHz",
                    format_khz(measured.frequency),
                    format_khz(laser),
                )
                return False
    return True


# pylint: disable=too-many-locals
@scenario("comb-measure", "Mode-number recovery and comb reconstruction")
def comb_measure(config: dict, seed: int, out_dir: Path) -> ScenarioResult:
    """
    Monte Carlo of the two-repetition-rate mode number determination, plus
    exact reconstruction checks
    """
    section = config["comb"]
    comb = build_comb(config)
    laser = freq_from_khz_string(config["line"]["absolute_khz"])
    trials = section["mode_trials"]
    sigma = section["mode_count_noise"]
    moved = comb.f_rep + FrequencyOffset.from_hz(section["f_rep_step"])

    rng = np.random.default_rng(seed)
    offsets = rng.uniform(-1e6, 1e6, trials)
    noise = rng.normal(0.0, sigma, (trials, 2))
    correct, residuals = [], []
    for trial in range(trials):
        frequency = laser + FrequencyOffset.from_hz(round(float(offsets[trial]), 3))
        p, mixed = beat_and_mix(frequency, comb)
        count_a = mixed.hz + noise[trial, 0]
        count_b = (frequency - moved * p).hz + noise[trial, 1]
        try:
            mode = determine_mode_number(
                count_a, comb.f_rep, count_b, moved, sigma if sigma > 0 else None
            )
        except AmbiguousModeError as error:
            logger.warning("Trial %d: %s", trial, error)
            correct.append(False)
            residuals.append(float("nan"))
            continue
        correct.append(mode.p == p)
        residuals.append(mode.residual)
    write_csv(
        out_dir / "mode_trials.csv",
        {
            "trial": np.arange(trials),
            "residual": residuals,
            "correct": np.asarray(correct, dtype=int),
        },
    )

    p, mixed = beat_and_mix(laser, comb)
    rebuilt = reconstruct(mixed.hz, p, comb)
    invariant = True
    for offset in (0, comb.f_0.millihertz, comb.f_rep.millihertz // 2):
        shifted = replace(comb, f_0=OpticalFrequency(offset))
        shifted_p, shifted_mixed = beat_and_mix(laser, shifted)
        invariant = invariant and shifted_p == p and (
            reconstruct(shifted_mixed.hz, shifted_p, shifted) == laser
        )
    nearest, beat = beat_note(laser, comb)

    recovered = int(sum(correct))
    results = {
        "trials": trials,
        "recovered": recovered,
        "p": p,
        "mixed_Hz": mixed.hz,
        "nearest_mode": nearest,
        "beat_note_Hz": beat.hz,
        "reconstructed_kHz": format_khz(rebuilt),
    }
    checks = {
        "mode_number_recovered_999_of_1000": bool(recovered >= 0.999 * trials),
        "noiseless_reconstruction_exact": bool(rebuilt == laser),
        "offset_frequency_cancels": bool(invariant),
        "identity_across_span": _span_identity(config, comb, p, seed),
    }
    return ScenarioResult(results, checks)


def _double_loop_allan(values: list, factor: int) -> float:
    """
    Direct evaluation of the non-overlapping two-sample deviation
    """
    blocks = len(values) // factor
    averages = []
    for block in range(blocks):
        total = 0.0
        for index in range(block * factor, (block + 1) * factor):
            total += values[index]
        averages.append(total / factor)
    squares = 0.0
    for block in range(blocks - 1):
        squares += (averages[block + 1] - averages[block]) ** 2
    return math.sqrt(squares / (2.0 * (blocks - 1)))


@scenario("allan", "Allan deviation of calibrated white FM and a brute-force oracle")
def allan(config: dict, seed: int, out_dir: Path) -> ScenarioResult:
    """
    Allan deviation of synthetic white frequency noise at the calibrated level
    """
    section = config["analysis"]
    rng = np.random.default_rng(seed)
    y = TimeSeries(
        rng.normal(0.0, TARGET_ALLAN_1S, section["allan_gates"]),
        config["counter"]["gate"],
        SeriesKind.FRACTIONAL_FREQUENCY,
    )
    taus = _usable_taus(section["allan_taus"], y)
    result = allan_deviation(y, taus, section["overlapping"])
    result.to_csv(out_dir / "allan.csv")
    sigma_1s = allan_deviation(y, [y.dt]).sigmas[0]
    slope = allan_slope(allan_deviation(y, taus, overlapping=True), *SLOPE_RANGE)

    short = TimeSeries(
        rng.normal(0.0, 1.0, ORACLE_LENGTH), 1.0, SeriesKind.FRACTIONAL_FREQUENCY
    )
    factors = list(range(1, ORACLE_LENGTH // MIN_ALLAN_AVERAGES + 1))
    computed = allan_deviation(short, factors)
    worst = max(
        abs(sigma - _double_loop_allan(short.values.tolist(), factor))
        / _double_loop_allan(short.values.tolist(), factor)
        for sigma, factor in zip(computed.sigmas, factors)
    )

    results = {
        "gates": len(y),
        "sigma_1s": sigma_1s,
        "slope": slope,
        "oracle_max_relative_difference": worst,
    }
    checks = {
        "allan_at_1s_matches_calibration": _within(
            sigma_1s, TARGET_ALLAN_1S, ALLAN_TOLERANCE * TARGET_ALLAN_1S
        ),
        "allan_follows_white_fm_slope": _within(slope, WHITE_FM_SLOPE, SLOPE_TOLERANCE),
        "matches_double_loop_oracle": bool(worst <= ORACLE_TOLERANCE),
    }
    return ScenarioResult(results, checks)


@scenario("pressure-shift", "Collisional shift and broadening against pressure")
def pressure_shift(config: dict, seed: int, out_dir: Path) -> ScenarioResult:
    """
    Shift and width on a pressure grid, local slopes, probe-power dependence
    """
    del seed
    context = build_context(config)
    at = config["shift"]["slope_pressure"]
    window = config["analysis"]["slope_window"]
    pressures = np.round(np.arange(2, 71) * 0.01, 6)
    shifts, widths = [], []
    for pressure in pressures:
        moved = context.with_conditions(context.cond.with_pressure(float(pressure)))
        shifts.append(moved.shift)
        widths.append(moved.hwhm)
    write_csv(
        out_dir / "pressure_shift.csv",
        {"pressure_Pa": pressures, "shift_Hz": shifts, "hwhm_Hz": widths},
    )

    samples = list(zip(pressures.tolist(), shifts))
    slope = pressure_slope(samples, at, window)
    far = pressure_slope(samples, 0.6, window)

    chain = build_chain(config, context)
    halved = replace(
        chain,
        context=context.with_conditions(
            context.cond.with_probe_power(0.5 * context.cond.probe_power)
        ),
    )
    moved = halved.lock_point() - chain.lock_point()

    expected = config["shift"]["slope"]
    results = {
        "slope_Hz_per_Pa": slope,
        "slope_at_0.6Pa_Hz_per_Pa": far,
        "probe_halving_lock_shift_Hz": moved,
    }
    checks = {
        "slope_matches_calibration": _within(slope, expected, 0.02 * abs(expected)),
        "slope_weakens_at_higher_pressure": bool(abs(far) < abs(slope)),
        "probe_halving_moves_lock_1kHz": _within(abs(moved), 1e3, 1.0),
    }
    return ScenarioResult(results, checks)


def _path_offsets(config: dict, context) -> dict:
    """
    Residual RAM lock shift of each probe modulation path after cancellation
    """
    rejection = config["probe"]["ram_rejection_db"]
    base = build_modulation(config).rejected(rejection)
    return {
        "eom": ram_lock_shift(replace(base, mode=ModulationMode.PHASE), context).hz,
        "aom": ram_lock_shift(
            replace(base, mode=ModulationMode.FREQUENCY), context
        ).hz,
    }


@scenario("repeatability", "Day-to-day scatter of synthesized measurement sets")
def repeatability_scenario(config: dict, seed: int, out_dir: Path) -> ScenarioResult:
    """
    Distribution of the scatter of set means over many synthetic campaigns
    """
    context = build_context(config)
    setup = build_repeatability(config)
    offsets = _path_offsets(config, context)
    trial_seeds = _seeds(seed, config["repeatability"]["trials"])

    spreads = []
    for index, trial_seed in enumerate(trial_seeds):
        report = repeatability(
            simulate_measurement_sets(context, setup, trial_seed, offsets)
        )
        if index == 0:
            report.to_json(out_dir / "report.json")
        spreads.append(report.std_of_set_means)
    write_csv(
        out_dir / "set_mean_scatter.csv",
        {"trial": np.arange(len(spreads)), "std_of_set_means_Hz": spreads},
    )

    typical = median(spreads)
    results = {
        "trials": len(spreads),
        "median_std_of_set_means_Hz": typical,
        "path_offsets_Hz": offsets,
    }
    checks = {"set_mean_scatter_in_band": bool(500.0 <= typical <= 1200.0)}
    return ScenarioResult(results, checks)


def _noiseless(config: dict) -> dict:
    quiet = {section: dict(keys) for section, keys in config.items()}
    for key in quiet["noise"]:
        quiet["noise"][key] = 0.0
    quiet["servo"]["discriminator_noise"] = 0.0
    quiet["comb"]["ref_instability_1s"] = 0.0
    return quiet


@scenario("full-pipeline", "Absolute frequency of the locked laser, end to end")
def full_pipeline(config: dict, seed: int, out_dir: Path) -> ScenarioResult:
    """
    Reconstruct the absolute frequency without noise and with the configured
    noise
    """
    configured = freq_from_khz_string(config["line"]["absolute_khz"])
    servo = config["servo"]
    gate = config["counter"]["gate"] + config["counter"]["dead_time"]

    quiet = _locked_run(
        _noiseless(config), seed, servo["settle"] + NOISELESS_GATES * gate
    ).measurement
    noisy = _locked_run(config, seed, servo["duration"]).measurement
    noisy.write_report(out_dir / "measurement.json")
    noisy.record.to_csv(out_dir / "counted.csv")

    difference = (noisy.frequency - configured).hz
    results = {
        "absolute_kHz": format_khz(noisy.frequency),
        "configured_kHz": format_khz(configured),
        "noiseless_absolute_kHz": format_khz(quiet.frequency),
        "p": noisy.p,
        "difference_Hz": difference,
        "standard_error_Hz": noisy.standard_error,
    }
    checks = {
        "noiseless_run_exact": bool(quiet.frequency == configured),
        "noisy_run_within_3_standard_errors": bool(
            abs(difference) <= 3.0 * noisy.standard_error
        ),
    }
    return ScenarioResult(results, checks)
