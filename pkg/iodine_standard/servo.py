"""
Laser noise synthesis, prestabilization and the long-term iodine lock
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.signal import fftconvolve

from iodine_standard.freqcore import SeriesKind, TimeSeries
from iodine_standard.sigchain import ErrorChain
from iodine_standard.utils import debug, debug_object, logger

# Frequency-equivalent discriminator noise giving sigma_y(1 s) = 7.2e-13 at
# 597 THz once locked; fitted, not predicted.
CALIBRATED_DISCRIMINATOR_NOISE = 608.3

GRID_STEPS_PER_HWHM = 200
GRID_HALF_SPAN = 6
LOCK_RANGE = 3


@dataclass(frozen=True)
class NoiseModel:
    """
    Free-running laser frequency noise

    Attributes
    ----------
    white_freq_psd : float
        h0, one-sided white-FM density, Hz^2/Hz
    flicker_freq_coeff : float
        h-1, flicker-FM coefficient, Hz^2
    linear_drift : float
        Hz/s
    """

    white_freq_psd: float = 4e6
    flicker_freq_coeff: float = 1e6
    linear_drift: float = 0.0

    def __post_init__(self):
        if min(self.white_freq_psd, self.flicker_freq_coeff, self.linear_drift) < 0:
            raise ValueError("Noise levels cannot be negative")


@dataclass(frozen=True)
class PrestabConfig:
    """
    Cavity prestabilization seen as a first-order noise-shaping loop

    Attributes
    ----------
    unity_gain_freq : float
        Hz
    suppression_floor : float
        Largest suppression, dB
    """

    unity_gain_freq: float = 1e5
    suppression_floor: float = 60.0

    def __post_init__(self):
        if not self.unity_gain_freq > 0:
            raise ValueError("unity_gain_freq must be positive")
        if self.suppression_floor < 0:
            raise ValueError("suppression_floor cannot be negative")


@dataclass(frozen=True)
class PiConfig:
    """
    Long-term loop controller

    Attributes
    ----------
    kp : float
        Proportional gain, Hz per Hz of normalized error
    ki : float
        Integral gain, Hz/s per Hz of normalized error
    update_rate : float
        Loop update rate, Hz
    correction_limit : float
        Largest correction the PZT can apply, Hz
    discriminator_noise : float
        Frequency-equivalent measurement noise, Hz/sqrt(Hz)
    """

    kp: float = 0.1
    ki: float = 200.0
    update_rate: float = 1e3
    correction_limit: float = 5e6
    discriminator_noise: float = CALIBRATED_DISCRIMINATOR_NOISE

    def __post_init__(self):
        if not self.update_rate > 0:
            raise ValueError("update_rate must be positive")
        if not self.correction_limit > 0:
            raise ValueError("correction_limit must be positive")
        if self.kp < 0 or self.ki < 0 or self.discriminator_noise < 0:
            raise ValueError("Gains and noise cannot be negative")

    @property
    def dt(self) -> float:
        """
        Update interval, s
        """
        return 1.0 / self.update_rate


def flicker_noise(rng, coefficient: float, samples: int) -> np.ndarray:
    """
    Flicker-FM samples with one-sided PSD coefficient / f

    Fractional differencing of white noise with exponent 1/2; the white
    variance pi * h-1 makes the density independent of the sample rate.
    """
    if coefficient == 0:
        return np.zeros(samples)
    taps = np.ones(samples)
    k = np.arange(1, samples)
    taps[1:] = np.cumprod((k - 0.5) / k)
    white = rng.normal(0.0, math.sqrt(math.pi * coefficient), samples)
    return fftconvolve(white, taps)[:samples]


def simulate_free_laser(
    noise: NoiseModel, duration: float, rate: float, seed: int
) -> TimeSeries:
    """
    Frequency offset of the unlocked laser

    Parameters
    ----------
    noise : NoiseModel
        Noise levels
    duration : float
        Record length, s
    rate : float
        Sample rate, Hz
    seed : int
        Random seed

    Returns
    -------
    TimeSeries
        Offset in Hz
    """
    samples = int(round(duration * rate))
    if samples < 1:
        raise ValueError("Record too short for one sample")
    rng = np.random.default_rng(seed)
    series = TimeSeries(np.zeros(samples), 1.0 / rate, SeriesKind.FREQUENCY_OFFSET)

    values = np.zeros(samples)
    if noise.white_freq_psd:
        values += rng.normal(0.0, math.sqrt(noise.white_freq_psd * rate / 2.0), samples)
    values += flicker_noise(rng, noise.flicker_freq_coeff, samples)
    if noise.linear_drift:
        values += noise.linear_drift * series.times()
    return series.with_values(values)


def prestabilize(series: TimeSeries, cfg: PrestabConfig) -> TimeSeries:
    """
    Apply the suppression (i f/f_ug) / (1 + i f/f_ug), floored, in the frequency domain

    Parameters
    ----------
    series : TimeSeries
        Frequency-offset record
    cfg : PrestabConfig
        Loop settings

    Returns
    -------
    TimeSeries
        Suppressed record
    """
    if series.kind != SeriesKind.FREQUENCY_OFFSET:
        raise ValueError("Prestabilization applies to frequency-offset records")

    freqs = np.fft.rfftfreq(len(series), series.dt)
    ratio = 1j * freqs / cfg.unity_gain_freq
    response = ratio / (1.0 + ratio)
    floor = 10.0 ** (-cfg.suppression_floor / 20.0)
    magnitude = np.abs(response)
    low = magnitude < floor
    response[low] = floor * np.exp(1j * np.angle(response[low]))
    # DC follows the lowest resolved frequency
    lowest = freqs[1] if freqs.size > 1 else 1.0 / series.duration
    gain = lowest / cfg.unity_gain_freq
    response[0] = max(gain / math.hypot(1.0, gain), floor)

    spectrum = np.fft.rfft(series.values) * response
    return series.with_values(np.fft.irfft(spectrum, n=len(series)))


class _ErrorTable:
    """
    Discriminator curve tabulated around the lock point, normalized to Hz
    """

    def __init__(self, chain: ErrorChain):
        width = chain.context.hwhm
        self.step = width / GRID_STEPS_PER_HWHM
        half = GRID_HALF_SPAN * GRID_STEPS_PER_HWHM
        self.start = chain.context.shift - half * self.step
        self.lock_point = chain.lock_point()
        self.slope = chain.slope(self.lock_point)
        if self.slope == 0:
            raise ValueError("Discriminator has zero slope at its lock point")
        grid = self.start + self.step * np.arange(2 * half + 1)
        self.values = (np.asarray(chain.error(grid)) / self.slope).tolist()
        self.last = len(self.values) - 1

    def __call__(self, detuning: float) -> float:
        position = (detuning - self.start) / self.step
        index = int(math.floor(position))
        if index < 0 or index >= self.last:
            return 0.0
        frac = position - index
        return self.values[index] + frac * (self.values[index + 1] - self.values[index])


class LockResult(NamedTuple):
    """
    Outcome of a closed-loop run
    """

    locked: TimeSeries
    in_lock: np.ndarray
    error: TimeSeries
    lock_point: float

    def summary(self) -> dict:
        """
        Lock point, mean and standard error of the second half
        """
        half = self.error.tail(0.5).values
        locked = self.locked.tail(0.5).values
        return {
            "lock_point_Hz": self.lock_point,
            "mean_offset_Hz": float(np.mean(locked)),
            "error_mean_Hz": float(np.mean(half)),
            "error_sem_Hz": float(np.std(half, ddof=1) / math.sqrt(half.size)),
            "in_lock_fraction": float(np.mean(self.in_lock)),
        }


# pylint: disable=too-many-locals
def close_lock(
    laser: TimeSeries,
    chain: ErrorChain,
    pi: PiConfig,
    start_detuning: float,
    seed: int = 0,
) -> LockResult:
    """
    Lock the laser to the error signal with a PI controller

    The error is the discriminator output scaled by its slope at the lock
    point, plus white measurement noise, so both are in Hz. Leaving three
    HWHM of the shifted center flags the sample as unlocked.

    Parameters
    ----------
    laser : TimeSeries
        Free (or prestabilized) laser offset, sampled at pi.update_rate
    chain : ErrorChain
        Error signal path
    pi : PiConfig
        Controller
    start_detuning : float
        Where the free laser sits relative to the unperturbed center, Hz
    seed = 0 : int
        Random seed for the measurement noise

    Returns
    -------
    LockResult
        Locked offset from the unperturbed center, lock flags, error record
    """
    if not math.isclose(laser.rate, pi.update_rate, rel_tol=1e-9):
        raise ValueError("Laser record must be sampled at the loop update rate")

    context = chain.context
    if abs(start_detuning - context.shift) > context.hwhm:
        logger.warning(
            "Lock started %.1f Hz from the line center, outside the capture range",
            start_detuning - context.shift,
        )

    table = _ErrorTable(chain)
    debug_object(
        "servo",
        "close_lock",
        {
            "lock_point": "{0:.4f} Hz".format(table.lock_point),
            "slope": "{0:.4g} /Hz".format(table.slope),
            "kp": pi.kp,
            "ki": pi.ki,
        },
    )

    rng = np.random.default_rng(seed)
    noise = rng.normal(
        0.0, pi.discriminator_noise * math.sqrt(pi.update_rate / 2.0), len(laser)
    ).tolist()
    free = (start_detuning + laser.values).tolist()
    limit = pi.correction_limit
    integral_step = pi.ki * pi.dt
    capture = LOCK_RANGE * context.hwhm
    center = context.shift

    locked = [0.0] * len(free)
    errors = [0.0] * len(free)
    in_lock = [False] * len(free)
    integral = 0.0
    command = 0.0
    for index, offset in enumerate(free):
        detuning = offset + command
        error = table(detuning) + noise[index]
        integral += integral_step * error
        command = max(-limit, min(limit, -(pi.kp * error + integral)))

        locked[index] = detuning
        errors[index] = error
        in_lock[index] = abs(detuning - center) < capture

    flags = np.array(in_lock)
    if not flags[-1]:
        logger.warning("Laser left the capture range during the lock")
    debug("servo", "close_lock", "in lock {0:.1%}".format(flags.mean()))
    return LockResult(
        laser.with_values(locked, SeriesKind.FREQUENCY_OFFSET),
        flags,
        laser.with_values(errors, SeriesKind.FREQUENCY_OFFSET),
        table.lock_point,
    )
