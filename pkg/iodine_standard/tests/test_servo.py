"""
Test laser noise, prestabilization and the PI lock
"""
import logging
import math
from dataclasses import replace

import numpy as np
from pytest import raises
from scipy.signal import welch

from iodine_standard.analysis import allan_deviation
from iodine_standard.freqcore import SeriesKind, TimeSeries
from iodine_standard.servo import (
    NoiseModel,
    PiConfig,
    PrestabConfig,
    close_lock,
    flicker_noise,
    prestabilize,
    simulate_free_laser,
)
from iodine_standard.sigchain import (
    Discriminator,
    ErrorChain,
    ModulationConfig,
    ram_lock_shift,
)


def _quiet_laser(duration: float = 5.0, rate: float = 1e3) -> TimeSeries:
    return TimeSeries(
        np.zeros(int(duration * rate)), 1 / rate, SeriesKind.FREQUENCY_OFFSET
    )


def test_flicker_noise_spectrum():
    """
    Flicker samples have a 1/f density at the requested level
    """
    assert not np.any(flicker_noise(np.random.default_rng(0), 0.0, 10)), "Zero noise"

    values = flicker_noise(np.random.default_rng(2), 1.0, 2**16)
    freqs, psd = welch(values, fs=1.0, nperseg=4096)
    band = (freqs >= 5e-3) & (freqs <= 0.1)
    slope = np.polyfit(np.log(freqs[band]), np.log(psd[band]), 1)[0]
    assert abs(slope + 1.0) < 0.2, "Log slope {0:.3f}".format(slope)
    level = np.median(psd[band] * freqs[band])
    assert abs(level - 1.0) < 0.3, "h-1 estimate {0:.3f}".format(level)


def test_free_laser():
    """
    The free laser carries white noise at its density plus the drift
    """
    noise = NoiseModel(white_freq_psd=2.0, flicker_freq_coeff=0.0)
    laser = simulate_free_laser(noise, 100.0, 100.0, seed=1)
    assert laser.kind == SeriesKind.FREQUENCY_OFFSET, "Kind"
    assert len(laser) == 10000, "Samples"
    assert abs(np.var(laser.values) / 100.0 - 1.0) < 0.05, "Variance h0 * rate / 2"
    assert np.array_equal(
        laser.values, simulate_free_laser(noise, 100.0, 100.0, seed=1).values
    ), "Seeded"

    drifting = simulate_free_laser(
        NoiseModel(0.0, 0.0, linear_drift=3.0), 2.0, 10.0, seed=0
    )
    assert np.allclose(drifting.values, 3.0 * drifting.times()), "Pure drift"
    with raises(ValueError):
        simulate_free_laser(noise, 1e-4, 100.0, seed=0)
    with raises(ValueError):
        NoiseModel(white_freq_psd=-1.0)


def test_prestabilize():
    """
    Slow offsets are suppressed down to the floor, fast ones pass
    """
    cfg = PrestabConfig(unity_gain_freq=1e6, suppression_floor=60.0)
    constant = TimeSeries(np.full(1000, 100.0), 1e-3, SeriesKind.FREQUENCY_OFFSET)
    assert np.allclose(prestabilize(constant, cfg).values, 0.1), "DC at the floor"

    cfg = PrestabConfig(unity_gain_freq=10.0, suppression_floor=60.0)
    expected = 100.0 * 0.1 / math.sqrt(1.01)
    assert np.allclose(
        prestabilize(constant, cfg).values, expected
    ), "DC suppressed as the lowest resolved frequency"

    times = np.arange(1000) * 1e-3
    fast = constant.with_values(np.cos(2 * math.pi * 400.0 * times))
    passed = prestabilize(fast, cfg).values
    assert abs(np.std(passed) / np.std(fast.values) - 1.0) < 0.01, "400 Hz passes"

    corner = constant.with_values(np.cos(2 * math.pi * 10.0 * times))
    ratio = np.std(prestabilize(corner, cfg).values) / np.std(corner.values)
    assert abs(20 * math.log10(ratio) + 3.01) < 0.3, "3 dB at the unity-gain frequency"

    slow = constant.with_values(np.cos(2 * math.pi * 1.0 * times))
    wide = PrestabConfig(unity_gain_freq=100.0, suppression_floor=80.0)
    ratio = np.std(prestabilize(slow, wide).values) / np.std(slow.values)
    assert abs(20 * math.log10(ratio) + 40.0) < 1.0, "20 dB per decade"

    with raises(ValueError):
        prestabilize(constant.with_values(constant.values, SeriesKind.DETECTOR), cfg)
    with raises(ValueError):
        PrestabConfig(unity_gain_freq=0.0)


def test_prestabilize_without_loop_gain():
    """
    A vanishing unity-gain frequency leaves the record untouched
    """
    times = np.arange(1000) * 1e-3
    series = TimeSeries(
        100.0 + np.sin(2 * math.pi * 3.0 * times), 1e-3, SeriesKind.FREQUENCY_OFFSET
    )
    output = prestabilize(series, PrestabConfig(unity_gain_freq=1e-12))
    assert np.allclose(output.values, series.values, rtol=1e-9), "Output = input"
    assert math.isclose(output.mean(), series.mean(), rel_tol=1e-9), "Mean kept"


def test_pi_config():
    """
    Controller settings are validated
    """
    assert PiConfig().dt == 1e-3, "Update interval"
    with raises(ValueError):
        PiConfig(update_rate=0.0)
    with raises(ValueError):
        PiConfig(kp=-1.0)


def test_lock_settles_on_lock_point(context):
    """
    Without noise the loop pulls the laser onto the discriminator zero
    """
    chain = ErrorChain(context)
    result = close_lock(
        _quiet_laser(),
        chain,
        PiConfig(discriminator_noise=0.0),
        context.shift + 2e3,
    )
    assert abs(result.locked.values[-1] - result.lock_point) < 1.0, "Steady state"
    assert abs(result.lock_point - context.shift) < 1.0, "Lock point at the center"
    assert result.in_lock.all(), "Never left the capture range"

    summary = result.summary()
    assert summary["in_lock_fraction"] == 1.0, "In-lock fraction"
    assert abs(summary["error_mean_Hz"]) < 1e-3, "Error settles to zero"
    assert set(summary) == {
        "lock_point_Hz",
        "mean_offset_Hz",
        "error_mean_Hz",
        "error_sem_Hz",
        "in_lock_fraction",
    }, "Summary keys"


def test_lock_follows_free_noise(context):
    """
    Slow laser drift is removed by the integrator
    """
    laser = _quiet_laser(10.0)
    drifting = laser.with_values(50.0 * laser.times())
    result = close_lock(
        drifting, ErrorChain(context), PiConfig(discriminator_noise=0.0), context.shift
    )
    residual = result.locked.tail(0.5).values - result.lock_point
    assert np.max(np.abs(residual)) < 5.0, "A 50 Hz/s drift is tracked"


def test_lock_noise_is_seeded(context):
    """
    The measurement noise follows the seed
    """
    chain = ErrorChain(context)
    first = close_lock(_quiet_laser(1.0), chain, PiConfig(), context.shift, seed=3)
    second = close_lock(_quiet_laser(1.0), chain, PiConfig(), context.shift, seed=3)
    assert np.array_equal(first.locked.values, second.locked.values), "Same seed"
    third = close_lock(_quiet_laser(1.0), chain, PiConfig(), context.shift, seed=4)
    assert not np.array_equal(first.locked.values, third.locked.values), "New seed"


def test_out_of_capture_warning(context, caplog):
    """
    Starting beyond one HWHM is allowed but reported
    """
    with caplog.at_level(logging.WARNING, logger="iodine_standard"):
        close_lock(
            _quiet_laser(1.0),
            ErrorChain(context),
            PiConfig(discriminator_noise=0.0),
            context.shift + 2 * context.hwhm,
        )
    assert "outside the capture range" in caplog.text, "Warning expected"


def test_lock_needs_matching_rate(context):
    """
    The laser record must be sampled at the loop rate
    """
    with raises(ValueError):
        close_lock(_quiet_laser(1.0, 2e3), ErrorChain(context), PiConfig(), 0.0)


def _drift_offset(context, ki: float, rate: float = 50.0) -> float:
    """
    Steady-state lock offset under a linear drift, against a drift-free lock
    """
    chain = ErrorChain(context)
    pi = PiConfig(ki=ki, discriminator_noise=0.0)
    laser = _quiet_laser(10.0)
    still = close_lock(laser, chain, pi, context.shift)
    ramp = laser.with_values(rate * laser.times())
    drifting = close_lock(ramp, chain, pi, context.shift)
    return drifting.locked.tail(0.5).mean() - still.locked.values[-1]


def test_doubling_ki_halves_drift_offset(context):
    """
    The integrator leaves an offset of drift / ki
    """
    offset = _drift_offset(context, 200.0)
    doubled = _drift_offset(context, 400.0)
    assert abs(offset / doubled - 2.0) < 0.2, "Ratio {0:.3f}".format(offset / doubled)
    assert abs(abs(offset) - 50.0 / 200.0) < 0.025, "Offset {0:.4f} Hz".format(offset)


def test_lock_reduces_allan_deviation(context):
    """
    At averaging times of a second and more the locked laser is quieter
    """
    free = simulate_free_laser(NoiseModel(), 30.0, 1e3, seed=5)
    result = close_lock(free, ErrorChain(context), PiConfig(), context.shift, seed=6)
    taus = [1.0, 2.0, 5.0]
    free_sigmas = allan_deviation(free, taus).sigmas
    locked_sigmas = allan_deviation(result.locked, taus).sigmas
    for tau, locked, unlocked in zip(taus, locked_sigmas, free_sigmas):
        assert locked <= unlocked, "Locked {0:g} above free {1:g} at {2:g} s".format(
            locked, unlocked, tau
        )


def test_uncancelled_ram_moves_the_lock(context):
    """
    With RAM left in, the locked laser sits where the FM zero crossing moved
    """
    modulation = ModulationConfig().with_ram(1e-3)
    pi = PiConfig(discriminator_noise=0.0)
    laser = _quiet_laser(2.0)
    clean = ErrorChain(context, discriminator=Discriminator.FM, double_demod=False)
    with_ram = replace(clean, modulation=modulation)

    moved = close_lock(laser, with_ram, pi, context.shift).locked.tail(0.5).mean()
    reference = close_lock(laser, clean, pi, context.shift).locked.tail(0.5).mean()
    expected = ram_lock_shift(modulation, context).hz
    assert expected != 0.0, "RAM should shift the zero crossing"
    assert abs((moved - reference) / expected - 1.0) < 0.1, "Moved {0:.2f} Hz".format(
        moved - reference
    )
