"""
Test the line model: Doppler width, broadening, shift and profiles
"""
import math

import numpy as np
from pytest import raises

from iodine_standard.freqcore import FrequencyOffset, freq_from_khz_string
from iodine_standard.lineshape import (
    BroadeningModel,
    CellConditions,
    HyperfineLine,
    ShiftModel,
    center_shift,
    doppler_sigma,
    hwhm,
    natural_decay_rates,
    saturation_profile,
    sweeps,
    write_profile_csv,
)

LINE_KHZ = "597366498654.62"


def test_doppler_width(line):
    """
    Room-temperature I2 at 502 nm has a Doppler sigma near 197 MHz
    """
    sigma = doppler_sigma(line.unperturbed_center.hz)
    assert 196e6 < sigma < 199e6, "Doppler sigma {0:g} Hz unexpected".format(sigma)
    assert line.doppler_sigma == sigma, "Line should default to the computed width"
    assert math.isclose(
        doppler_sigma(1e14, temperature=1200.0), 2.0 * doppler_sigma(1e14)
    ), "Width scales with the square root of temperature"


def test_decay_rates(line):
    """
    Decay rates split the natural width with the configured ratio
    """
    gamma_e, gamma_g = natural_decay_rates(10e3, 4.0)
    assert math.isclose(gamma_e + gamma_g, 4 * math.pi * 10e3), "Total decay rate"
    assert math.isclose(gamma_e / gamma_g, 4.0), "Decay ratio"
    assert math.isclose(line.asymmetry, 0.6), "Asymmetry (4 - 1) / (4 + 1)"


def test_zero_decay_rates_have_no_asymmetry():
    """
    Asymmetry is undefined without decay
    """
    line = HyperfineLine(freq_from_khz_string(LINE_KHZ), 10e3, 0.0, 0.0)
    with raises(ValueError):
        _ = line.asymmetry


def test_broadening_anchors():
    """
    The broadening line passes through 32 kHz at 0.066 Pa and 45 kHz at 0.33 Pa
    """
    model = BroadeningModel.from_anchors()
    assert math.isclose(model.at(0.066), 32e3), "Low anchor"
    assert math.isclose(model.at(0.33), 45e3), "High anchor"
    assert math.isclose(model.pressure_broadening, 13e3 / 0.264), "Slope"
    assert math.isclose(
        hwhm(model, CellConditions(pressure=0.2)), model.at(0.2)
    ), "hwhm follows the model"


def test_pressure_slope_calibration(line, model):
    """
    The central-difference slope at 0.33 Pa is -38.4 kHz/Pa
    """
    step = 1e-3

    def slope(pressure):
        high = model.shift_hz(pressure + step, 400e-6, line.asymmetry)
        low = model.shift_hz(pressure - step, 400e-6, line.asymmetry)
        return (high - low) / (2 * step)

    assert (
        abs(slope(0.33) / -38.4e3 - 1.0) < 0.005
    ), "Slope at 0.33 Pa is {0:g} Hz/Pa".format(slope(0.33))
    assert abs(slope(0.6)) < abs(slope(0.33)), "Nonlinear part should fade"


def test_default_shift(context, line, model):
    """
    At the reference conditions the shift is about +6.43 kHz
    """
    assert abs(context.shift - 6433.5) < 0.5, "Shift {0:g} Hz".format(context.shift)
    assert center_shift(model, line, context.cond) == FrequencyOffset.from_hz(
        context.shift
    ), "Rounded shift should match"


def test_halving_weak_beam_power(line, model):
    """
    Halving the probe power raises the center by 1 kHz
    """
    full = model.shift_hz(0.33, 400e-6, line.asymmetry)
    half = model.shift_hz(0.33, 200e-6, line.asymmetry)
    assert math.isclose(half - full, 1e3), "Power shift {0:g} Hz".format(half - full)


def test_linear_only_model():
    """
    With the whole slope linear, the shift is exactly slope * P
    """
    model = ShiftModel.calibrated(
        BroadeningModel.from_anchors(), 0.0, linear_fraction=1.0
    )
    assert math.isclose(model.shift_hz(0.5, 400e-6, 0.0), -38.4e3 * 0.5), "Linear"
    with raises(ValueError):
        ShiftModel.calibrated(BroadeningModel.from_anchors(), 0.0)


def test_shift_rejects_zero_pressure(line, model):
    """
    The nonlinear term needs a positive pressure
    """
    with raises(ValueError):
        model.shift_hz(0.0, 400e-6, line.asymmetry)


def test_conditions_validation():
    """
    Every cell condition must be positive
    """
    with raises(ValueError):
        CellConditions(pressure=0.0)
    with raises(ValueError):
        CellConditions(probe_power=-1.0)
    moved = CellConditions().with_pressure(0.1).with_probe_power(1e-4)
    assert moved.pressure == 0.1 and moved.probe_power == 1e-4, "Fluent copies"
    assert CellConditions().pressure == 0.33, "Original untouched"


def test_complex_response_at_center(context):
    """
    At the shifted center the phase vanishes and the dip removes absorption
    """
    attenuation, phase = context.complex_response(context.shift)
    assert math.isclose(attenuation, 1.0 - 0.01), "Dip depth"
    assert abs(phase) < 1e-15, "Phase at center"
    blocked, _ = context.without_pump().complex_response(context.shift)
    assert math.isclose(blocked, 1.0), "No dip without the pump"


def test_dispersion_is_odd(context):
    """
    The dip phase is odd about the shifted center
    """
    offsets = np.linspace(1e3, 2e5, 50)
    _, above = context.complex_response(context.shift + offsets)
    _, below = context.complex_response(context.shift - offsets)
    assert np.allclose(above, -below, atol=1e-12), "Phase should be odd"


def test_saturation_profile(line, model, tmp_path):
    """
    The profile dips at the shifted center and its dispersion crosses zero there
    """
    cond = CellConditions()
    shift = model.shift_hz(cond.pressure, cond.probe_power, line.asymmetry)
    detunings = shift + np.linspace(-2e5, 2e5, 401)
    profile = saturation_profile(line, model, cond, detunings)
    assert int(np.argmin(profile.absorption)) == 200, "Absorption minimum at center"
    assert abs(profile.dispersion[200]) < 1e-15, "Dispersion zero at center"
    assert math.isclose(
        profile.dispersion[200 + 45], -profile.dispersion[200 - 45], rel_tol=1e-6
    ), "Dispersion is odd"

    path = write_profile_csv(tmp_path / "profile.csv", detunings, profile)
    header = path.read_text().splitlines()[0]
    assert header == "detuning_Hz,absorption,dispersion", "Profile header"


def test_sweeps_average_noise():
    """
    Averaging sweeps reduces noise by the square root of their number
    """
    values = np.zeros(100000)
    assert np.array_equal(sweeps(values, 3), values), "No noise, no change"
    averaged = sweeps(values, 4, noise_rms=1.0, seed=5)
    assert abs(np.std(averaged) - 0.5) < 0.01, "Noise of four averaged sweeps"
    assert np.array_equal(averaged, sweeps(values, 4, 1.0, 5)), "Seeded"
    with raises(ValueError):
        sweeps(values, 0)
