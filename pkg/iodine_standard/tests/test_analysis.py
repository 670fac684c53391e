"""
Test Allan deviation, dispersion fits, pressure slope and repeatability
"""
import json
import math
from dataclasses import replace

import numpy as np
from pytest import raises

from iodine_standard.analysis import (
    DispersionGuess,
    MeasurementSet,
    RepeatabilitySetup,
    allan_deviation,
    allan_slope,
    dispersion_model,
    fit_dispersion,
    guess_dispersion,
    pressure_slope,
    repeatability,
    simulate_measurement_sets,
)
from iodine_standard.errors import InsufficientDataError
from iodine_standard.freqcore import (
    FrequencyOffset,
    SeriesKind,
    TimeSeries,
    freq_from_khz_string,
)

HWHM = 45e3


def _fractional(values, dt: float = 1.0) -> TimeSeries:
    return TimeSeries(values, dt, SeriesKind.FRACTIONAL_FREQUENCY)


def _loop_allan(values, factor: int, overlapping: bool) -> float:
    """
    Sum-by-sum reference Allan deviation
    """
    count = len(values)
    total, terms = 0.0, 0
    starts = range(count - 2 * factor + 1) if overlapping else range(
        0, (count // factor - 1) * factor, factor
    )
    for start in starts:
        first = sum(values[start + i] for i in range(factor)) / factor
        second = sum(values[start + factor + i] for i in range(factor)) / factor
        total += (second - first) ** 2
        terms += 1
    return math.sqrt(total / (2 * terms))


def test_allan_of_constant_is_zero():
    """
    A constant record has no two-sample variance
    """
    result = allan_deviation(_fractional(np.full(100, 3e-13)), [1, 2, 5, 10])
    assert np.allclose(result.sigmas, 0.0, atol=1e-24), "Constant record"
    assert result.taus == [1.0, 2.0, 5.0, 10.0], "Taus kept"
    assert result.n_samples == [99, 49, 19, 9], "Differences per tau"


def test_allan_scales_with_record():
    """
    Scaling the record scales the deviation
    """
    values = np.random.default_rng(1).normal(0.0, 1.0, 1000)
    base = allan_deviation(_fractional(values), [1, 4, 16])
    scaled = allan_deviation(_fractional(3.0 * values), [1, 4, 16])
    assert np.allclose(np.asarray(scaled.sigmas), 3.0 * np.asarray(base.sigmas))


def test_allan_matches_reference_sums():
    """
    Both estimators agree with the plain double loop
    """
    values = list(np.random.default_rng(2).normal(0.0, 7.2e-13, 64))
    series = _fractional(values)
    for overlapping in (False, True):
        result = allan_deviation(series, range(1, 22), overlapping=overlapping)
        expected = [_loop_allan(values, factor, overlapping) for factor in range(1, 22)]
        assert np.allclose(
            result.sigmas, expected, rtol=0, atol=1e-25
        ), "Overlapping={0}".format(overlapping)


def test_allan_white_noise_slope():
    """
    White frequency noise falls as tau^-1/2
    """
    series = _fractional(np.random.default_rng(3).normal(0.0, 1.0, 100000))
    result = allan_deviation(series, [1, 2, 4, 8, 16, 32, 64, 100], overlapping=True)
    assert abs(result.sigmas[0] - 1.0) < 0.02, "sigma(1) of unit white noise"
    assert abs(allan_slope(result, 1, 100) + 0.5) < 0.05, "White-FM slope"


def test_allan_errors():
    """
    Long taus and non-multiples are rejected
    """
    series = _fractional(np.zeros(10), dt=0.5)
    with raises(InsufficientDataError):
        allan_deviation(series, [2.0])
    with raises(ValueError):
        allan_deviation(series, [0.75])
    with raises(InsufficientDataError):
        allan_slope(allan_deviation(series, [0.5, 1.0]), 0.5, 1.0)


def test_dispersion_model_shape():
    """
    The model peaks one HWHM below the center and dips one above
    """
    values = dispersion_model([-HWHM, 0.0, HWHM], 0.0, HWHM, 2.0, 0.1)
    assert np.allclose(values, [1.1, 0.1, -0.9]), "Extrema and center"


def test_guess_dispersion():
    """
    The extrema give center, amplitude sign and size
    """
    detunings = np.linspace(-2e5, 2e5, 401)
    values = dispersion_model(detunings, 0.0, HWHM, 2e-3, 0.0)
    guess = guess_dispersion(detunings, values, HWHM)
    assert abs(guess.center) <= 1e3, "Center between the extrema"
    assert math.isclose(guess.amplitude, 2e-3, rel_tol=1e-3), "Positive amplitude"
    flipped = guess_dispersion(detunings, -values, HWHM)
    assert flipped.amplitude < 0, "Inverted signal"
    with raises(ValueError):
        DispersionGuess(0.0, 0.0, 1.0)


def test_fit_recovers_parameters(tmp_path):
    """
    A noiseless scan is fitted to its generating parameters
    """
    detunings = 6433.5 + np.linspace(-1.35e5, 1.35e5, 101)
    values = dispersion_model(detunings, 6433.5, HWHM, 2e-3, 1e-5)
    guess = DispersionGuess(center=2e4, hwhm=30e3, amplitude=1e-3)
    fit = fit_dispersion(detunings, values, guess)
    assert fit.converged, "Converged"
    assert abs(fit.center - 6433.5) < 1e-3, "Center {0}".format(fit.center)
    assert math.isclose(fit.hwhm, HWHM, rel_tol=1e-6), "HWHM {0}".format(fit.hwhm)
    assert math.isclose(fit.amplitude, 2e-3, rel_tol=1e-6), "Amplitude"
    assert math.isclose(fit.baseline, 1e-5, rel_tol=1e-5), "Baseline"
    assert fit.residual_rms < 1e-12, "Residual"

    report = json.loads(fit.to_json(tmp_path / "fit.json").read_text())
    assert set(report) == {
        "center_Hz",
        "hwhm_Hz",
        "amplitude",
        "baseline",
        "residual_rms",
        "converged",
    }, "Report fields"


def test_fit_is_shift_equivariant():
    """
    Moving the scan moves the fitted center by the same amount
    """
    detunings = np.linspace(-1.5e5, 1.5e5, 121)
    values = dispersion_model(detunings, 1e3, HWHM, 1.0, 0.0)
    guess = DispersionGuess(0.0, HWHM, 1.0)
    fit = fit_dispersion(detunings, values, guess)
    moved = fit_dispersion(
        detunings + 1e6, values, DispersionGuess(1e6, HWHM, 1.0)
    )
    assert abs(moved.center - fit.center - 1e6) < 1e-3, "Center follows the scan"
    assert math.isclose(moved.hwhm, fit.hwhm, rel_tol=1e-9), "Width unchanged"


def test_fit_needs_data():
    """
    Short, narrow or empty scans are refused
    """
    guess = DispersionGuess(0.0, HWHM, 1.0)
    few = np.linspace(-2e5, 2e5, 5)
    with raises(InsufficientDataError):
        fit_dispersion(few, dispersion_model(few, 0.0, HWHM, 1.0, 0.0), guess)
    narrow = np.linspace(-5e4, 5e4, 50)
    with raises(InsufficientDataError):
        fit_dispersion(narrow, dispersion_model(narrow, 0.0, HWHM, 1.0, 0.0), guess)
    wide = np.linspace(-2e5, 2e5, 50)
    with raises(InsufficientDataError):
        fit_dispersion(wide, np.zeros(50), guess)
    with raises(ValueError):
        fit_dispersion(wide, np.zeros(49), guess)


def test_pressure_slope():
    """
    A local regression recovers a linear slope
    """
    pressures = np.arange(1, 71) * 0.01
    samples = [(p, 3.0 - 2e4 * p) for p in pressures]
    slope = pressure_slope(samples, 0.33, 0.05)
    assert math.isclose(slope, -2e4, rel_tol=1e-6), "Linear slope"
    with raises(InsufficientDataError):
        pressure_slope(samples, 0.33, 0.001)


def test_repeatability_of_two_sets():
    """
    Set means 0 and 1 kHz apart scatter by 707 Hz
    """
    line = freq_from_khz_string("597366498654.62")
    low = MeasurementSet("a", [line, line])
    high = MeasurementSet("b", [line + FrequencyOffset.from_hz(1e3)] * 2)
    report = repeatability([low, high])
    assert abs(report.std_of_set_means - 1e3 / math.sqrt(2)) < 1e-9, "Scatter"
    assert report.grand_mean == line + FrequencyOffset.from_hz(500), "Grand mean"
    assert report.set_means == [line, line + FrequencyOffset.from_hz(1e3)], "Means"
    assert report.to_dict()["grand_mean_kHz"] == "597366498655.12", "Report"

    reordered = repeatability([high, low])
    assert reordered.grand_mean == report.grand_mean, "Order does not matter"
    assert reordered.std_of_set_means == report.std_of_set_means, "Same scatter"


def test_within_set_spread():
    """
    Spread and deviation of a single day's readings
    """
    line = freq_from_khz_string("597366498654.62")
    readings = [line + FrequencyOffset.from_hz(hz) for hz in (0.0, 10.0, 20.0)]
    report = repeatability([MeasurementSet("d", readings), MeasurementSet("e", [line])])
    spread = report.within_set_spreads[0]
    assert spread.peak_to_peak_hz == 20.0, "Peak to peak"
    assert math.isclose(spread.std_hz, 10.0), "Sample deviation"
    assert spread.count == 3, "Count"
    assert report.within_set_spreads[1].std_hz == 0.0, "Single reading"
    with raises(InsufficientDataError):
        repeatability([MeasurementSet("d", readings)])
    with raises(ValueError):
        MeasurementSet("empty", [])


def test_simulated_sets(context):
    """
    Synthesized days follow the seed, a week apart
    """
    setup = RepeatabilitySetup(sets=4, per_set=5)
    offsets = {"eom": 100.0, "aom": -100.0}
    sets = simulate_measurement_sets(context, setup, seed=9, path_offsets=offsets)
    assert len(sets) == 4, "Set count"
    assert all(len(s.values) == 5 for s in sets), "Readings per set"
    assert sets[0].label == "2001-03-05 (eom)", "First label"
    assert sets[1].label == "2001-03-12 (aom)", "Weekly, AOM on the second day"
    again = simulate_measurement_sets(context, setup, seed=9, path_offsets=offsets)
    assert [s.values for s in sets] == [s.values for s in again], "Seeded"
    with raises(ValueError):
        RepeatabilitySetup(sets=1)


def test_aom_used_on_one_day_only(context):
    """
    Only the scheduled day goes through the AOM path
    """
    setup = RepeatabilitySetup(sets=6, per_set=2, aom_day=3)
    sets = simulate_measurement_sets(context, setup, seed=4)
    paths = [s.label.split(" ")[1] for s in sets]
    assert paths == ["(eom)"] * 3 + ["(aom)"] + ["(eom)"] * 2, "One AOM day"
    never = simulate_measurement_sets(context, replace(setup, aom_day=-1), seed=4)
    assert all(s.label.endswith("(eom)") for s in never), "No AOM day"
    with raises(ValueError):
        RepeatabilitySetup(sets=4, aom_day=4)
    with raises(ValueError):
        RepeatabilitySetup(sets=4, aom_day=-2)
