"""
Narrow-band adaptive noise cancelling with a two-weight LMS notch

The in-phase/quadrature LMS canceller driven by a reference at f0 is,
from a zero start, exactly the second-order filter

    H(z) = (z^2 - 2 z cos w0 + 1) / (z^2 - 2 (1 - mu) z cos w0 + 1 - 2 mu)

so block processing runs through lfilter; the per-sample recursion is kept
for streaming use and for the clamped-actuator case.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.signal import lfilter, welch

from iodine_standard.errors import (
    DivergenceError,
    InsufficientDataError,
    UndersampledError,
)
from iodine_standard.freqcore import SeriesKind, TimeSeries
from iodine_standard.utils import debug, write_csv

WEIGHT_LIMIT = 1e6
MIN_SEGMENTS = 8
RESOLUTION_PER_BAND = 4


def notch_bandwidth(mu: float, rate: float) -> float:
    """
    Full width of the notch at -3 dB, in Hz
    """
    return mu * rate / math.pi


def mu_for_bandwidth(bandwidth: float, rate: float) -> float:
    """
    Adaptation step giving a notch of the given full width

    Parameters
    ----------
    bandwidth : float
        Notch FWHM in Hz
    rate : float
        Sample rate in Hz
    """
    mu = math.pi * bandwidth / rate
    if not 0 < mu < 1:
        raise ValueError(
            "A {0:g} Hz notch is not reachable at {1:g} S/s".format(bandwidth, rate)
        )
    return mu


@dataclass(frozen=True)
class CancellerConfig:
    """
    Notch settings

    Attributes
    ----------
    ref_freq : float
        Frequency to cancel, Hz
    rate : float
        Sample rate, Hz
    mu : float
        Adaptation step per sample, 0 < mu < 1
    clamp : float
        Largest correction the actuator can apply, None for unlimited
    """

    ref_freq: float = 125e3
    rate: float = 1e6
    mu: float = math.pi * 1e3 / 1e6
    clamp: float = None

    def __post_init__(self):
        if not 0 < self.mu < 1:
            raise ValueError("mu must lie in (0, 1), got {0}".format(self.mu))
        if not self.rate > 4.0 * self.ref_freq:
            raise UndersampledError(
                "Sample rate {0:g} Hz is too low for a {1:g} Hz reference".format(
                    self.rate, self.ref_freq
                )
            )
        if self.clamp is not None and not self.clamp > 0:
            raise ValueError("clamp must be positive")

    @property
    def bandwidth(self) -> float:
        """
        Notch FWHM in Hz
        """
        return notch_bandwidth(self.mu, self.rate)


class LmsNotch:
    """
    Streaming two-weight LMS canceller

    Attributes
    ----------
    cfg : CancellerConfig
        Notch settings
    w_cos : float
        In-phase weight
    w_sin : float
        Quadrature weight
    phase : float
        Reference phase of the next sample, rad
    """

    def __init__(self, cfg: CancellerConfig) -> "LmsNotch":
        self.cfg = cfg
        self.w_cos = 0.0
        self.w_sin = 0.0
        self.phase = 0.0
        self._step = 2.0 * math.pi * cfg.ref_freq / cfg.rate

    def lms_step(self, sample: float) -> float:
        """
        Cancel one sample and adapt

        Parameters
        ----------
        sample : float
            Input sample

        Returns
        -------
        float
            Input minus the current correction
        """
        cos_ref, sin_ref = math.cos(self.phase), math.sin(self.phase)
        applied = self.w_cos * cos_ref + self.w_sin * sin_ref
        if self.cfg.clamp is not None:
            applied = max(-self.cfg.clamp, min(self.cfg.clamp, applied))
        output = sample - applied

        gain = 2.0 * self.cfg.mu * output
        self.w_cos += gain * cos_ref
        self.w_sin += gain * sin_ref
        if not math.hypot(self.w_cos, self.w_sin) <= WEIGHT_LIMIT:
            raise DivergenceError(
                "LMS weights diverged (w_cos={0:g}, w_sin={1:g}) at mu={2:g}".format(
                    self.w_cos, self.w_sin, self.cfg.mu
                )
            )

        self.phase = math.fmod(self.phase + self._step, 2.0 * math.pi)
        return output

    def process(self, block) -> np.ndarray:
        """
        Run the recursion over a block of samples
        """
        return np.array([self.lms_step(float(sample)) for sample in block])


def cancel(signal: TimeSeries, cfg: CancellerConfig) -> TimeSeries:
    """
    Canceller output for a whole record, starting from zero weights

    Parameters
    ----------
    signal : TimeSeries
        Input record, sampled at cfg.rate
    cfg : CancellerConfig
        Notch settings

    Returns
    -------
    TimeSeries
        The cancelled record
    """
    if not math.isclose(signal.rate, cfg.rate, rel_tol=1e-9):
        raise ValueError(
            "Record rate {0:g} does not match canceller rate {1:g}".format(
                signal.rate, cfg.rate
            )
        )
    if cfg.clamp is not None:
        return signal.with_values(LmsNotch(cfg).process(signal.values))

    cos_w0 = math.cos(2.0 * math.pi * cfg.ref_freq / cfg.rate)
    numerator = [1.0, -2.0 * cos_w0, 1.0]
    denominator = [1.0, -2.0 * (1.0 - cfg.mu) * cos_w0, 1.0 - 2.0 * cfg.mu]
    return signal.with_values(lfilter(numerator, denominator, signal.values))


def correction(signal: TimeSeries, cfg: CancellerConfig) -> TimeSeries:
    """
    The correction the canceller applies (input minus output)
    """
    return signal.with_values(signal.values - cancel(signal, cfg).values)


def _segment_length(rate: float, bandwidth: float) -> int:
    length = 1
    while rate / length > bandwidth / RESOLUTION_PER_BAND:
        length *= 2
    return length


class Spectrum(NamedTuple):
    """
    One-sided power spectral density
    """

    freqs: np.ndarray
    psd: np.ndarray


def power_spectrum(signal: TimeSeries, bandwidth: float) -> Spectrum:
    """
    Welch PSD resolving a band of the given width

    Hann window, 50% overlap, segment length the smallest power of two whose
    bin width is at most a quarter of the band.

    Throws
    ------
    InsufficientDataError
        The record cannot give 8 segments at that resolution
    """
    if not bandwidth > 2.0 / signal.duration:
        raise InsufficientDataError(
            "A {0:g} s record cannot resolve a {1:g} Hz band".format(
                signal.duration, bandwidth
            )
        )
    length = _segment_length(signal.rate, bandwidth)
    if len(signal) < (MIN_SEGMENTS + 1) * length // 2:
        raise InsufficientDataError(
            "{0} samples give fewer than {1} segments of {2}".format(
                len(signal), MIN_SEGMENTS, length
            )
        )
    freqs, psd = welch(
        signal.values,
        fs=signal.rate,
        window="hann",
        nperseg=length,
        noverlap=length // 2,
        detrend=False,
        scaling="density",
    )
    return Spectrum(freqs, psd)


def band_power(signal: TimeSeries, ref_freq: float, bandwidth: float) -> float:
    """
    Power within ref_freq +/- bandwidth/2

    Parameters
    ----------
    signal : TimeSeries
        The record
    ref_freq : float
        Band center, Hz
    bandwidth : float
        Band width, Hz
    """
    spectrum = power_spectrum(signal, bandwidth)
    in_band = np.abs(spectrum.freqs - ref_freq) <= bandwidth / 2.0
    resolution = spectrum.freqs[1] - spectrum.freqs[0]
    return float(np.sum(spectrum.psd[in_band]) * resolution)


def notch_depth(
    before: TimeSeries, after: TimeSeries, ref_freq: float, bandwidth: float
) -> float:
    """
    Band-power rejection between two records

    Parameters
    ----------
    before : TimeSeries
        Record without cancelling
    after : TimeSeries
        Record with cancelling, same length and rate
    ref_freq : float
        Band center, Hz
    bandwidth : float
        Band width, Hz

    Returns
    -------
    float
        10 log10(P_before / P_after), in dB
    """
    if len(before) != len(after) or not math.isclose(before.dt, after.dt):
        raise ValueError("Records must have equal length and rate")
    if np.array_equal(before.values, after.values):
        return 0.0
    depth = 10.0 * math.log10(
        band_power(before, ref_freq, bandwidth) / band_power(after, ref_freq, bandwidth)
    )
    debug("canceller", "notch_depth", "{0:.2f} dB at {1:g} Hz".format(depth, ref_freq))
    return depth


def white_noise(rng, psd: float, rate: float, samples: int) -> np.ndarray:
    """
    Gaussian samples with one-sided spectral density psd
    """
    return rng.normal(0.0, math.sqrt(psd * rate / 2.0), samples)


@dataclass(frozen=True)
class IntensityNoiseSetup:
    """
    Beam-intensity stabilization experiment, PSDs in units of the detector floor

    Attributes
    ----------
    canceller : CancellerConfig
        Notch at 125 kHz
    duration : float
        Record length, s
    technical_psd : float
        Laser technical intensity noise
    sensor_psd : float
        Noise of the in-loop detector, written onto the beam by the loop
    floor_psd : float
        Electronic floor of the out-of-loop detector
    band : float
        Band used for the band-power comparison, Hz
    """

    canceller: CancellerConfig = field(default_factory=CancellerConfig)
    duration: float = 4.0
    technical_psd: float = 3981.0
    sensor_psd: float = 6.94
    floor_psd: float = 1.0
    band: float = 16.0


class NotchMeasurement(NamedTuple):
    """
    Outcome of the beam-intensity experiment
    """

    rejection_db: float
    above_floor_db: float
    open_loop: TimeSeries
    closed_loop: TimeSeries
    floor: TimeSeries


def measure_intensity_notch(setup: IntensityNoiseSetup, seed: int) -> NotchMeasurement:
    """
    Out-of-loop detector records with and without the canceller

    The canceller sees technical plus sensor noise and subtracts its
    correction from the beam; the second detector adds its own floor.

    Parameters
    ----------
    setup : IntensityNoiseSetup
        Noise levels and notch
    seed : int
        Random seed

    Returns
    -------
    NotchMeasurement
        Rejection and residual above the floor, with the records
    """
    cfg = setup.canceller
    samples = int(round(setup.duration * cfg.rate))
    rng = np.random.default_rng(seed)
    technical = white_noise(rng, setup.technical_psd, cfg.rate, samples)
    sensor = white_noise(rng, setup.sensor_psd, cfg.rate, samples)
    floor = white_noise(rng, setup.floor_psd, cfg.rate, samples)

    sensed = TimeSeries(technical + sensor, 1.0 / cfg.rate, SeriesKind.DETECTOR)
    beam = technical - correction(sensed, cfg).values

    open_loop = sensed.with_values(technical + floor)
    closed_loop = sensed.with_values(beam + floor)
    floor_only = sensed.with_values(floor)

    rejection = notch_depth(open_loop, closed_loop, cfg.ref_freq, setup.band)
    above = 10.0 * math.log10(
        band_power(closed_loop, cfg.ref_freq, setup.band)
        / band_power(floor_only, cfg.ref_freq, setup.band)
    )
    debug(
        "canceller",
        "measure_intensity_notch",
        "rejection {0:.2f} dB, {1:.2f} dB above floor".format(rejection, above),
    )
    return NotchMeasurement(rejection, above, open_loop, closed_loop, floor_only)


@dataclass(frozen=True)
class RamNoiseSetup:
    """
    Probe RAM rejection at the FM frequency

    Attributes
    ----------
    canceller : CancellerConfig
        Notch at 2.5 MHz
    duration : float
        Record length, s
    ram_depth : float
        RAM tone amplitude (relative intensity)
    sensor_psd : float
        In-loop detector noise, relative intensity squared per Hz
    band : float
        Band used for the comparison, Hz
    settle : float
        Initial stretch discarded while the weights converge, s
    """

    canceller: CancellerConfig = field(
        default_factory=lambda: CancellerConfig(ref_freq=2.5e6, rate=20e6, mu=1e-3)
    )
    duration: float = 0.1
    ram_depth: float = 1e-3
    sensor_psd: float = 1.6e-14
    band: float = 1e3
    settle: float = 5e-3


def measure_ram_rejection(setup: RamNoiseSetup, seed: int) -> float:
    """
    Depth by which the canceller removes the RAM tone, in dB

    Parameters
    ----------
    setup : RamNoiseSetup
        Tone, noise and notch
    seed : int
        Random seed
    """
    cfg = setup.canceller
    samples = int(round(setup.duration * cfg.rate))
    rng = np.random.default_rng(seed)
    times = np.arange(samples) / cfg.rate
    tone = setup.ram_depth * np.cos(
        2.0 * math.pi * cfg.ref_freq * times + rng.uniform(0.0, 2.0 * math.pi)
    )
    sensor = white_noise(rng, setup.sensor_psd, cfg.rate, samples)

    sensed = TimeSeries(tone + sensor, 1.0 / cfg.rate, SeriesKind.DETECTOR)
    beam = tone - correction(sensed, cfg).values

    start = int(round(setup.settle * cfg.rate))
    before = TimeSeries(tone[start:], sensed.dt, SeriesKind.DETECTOR)
    after = TimeSeries(beam[start:], sensed.dt, SeriesKind.DETECTOR)
    return notch_depth(before, after, cfg.ref_freq, setup.band)


def write_psd_csv(path: Path, signal: TimeSeries, bandwidth: float) -> Path:
    """
    Export freq_Hz, psd_dB (dB re 1 unit^2/Hz)
    """
    spectrum = power_spectrum(signal, bandwidth)
    psd_db = 10.0 * np.log10(np.maximum(spectrum.psd, np.finfo(float).tiny))
    return write_csv(path, {"freq_Hz": spectrum.freqs, "psd_dB": psd_db})
