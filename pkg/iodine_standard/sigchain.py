"""
Detection chain: FM spectroscopy, lock-in demodulation, RAM, modulation transfer

Two fidelity levels share the same physics. The analytic baseband path
evaluates the beat components of the transmitted sideband comb directly; the
time-domain path synthesizes the photocurrent sample by sample and runs it
through the streaming lock-in.
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.optimize import brentq
from scipy.signal import lfilter
from scipy.special import jv

from iodine_standard.errors import NoZeroCrossingError, RegimeError, UndersampledError
from iodine_standard.freqcore import FrequencyOffset, SeriesKind, TimeSeries
from iodine_standard.lineshape import LineContext
from iodine_standard.utils import debug

DISPERSION_PHASE = math.pi / 2
RESOLVED_SIDEBAND_RATIO = 10.0
MT_PHASE_POINTS = 64
BRACKET_POINTS = 41


class ModulationMode(Enum):
    """
    How the probe is modulated
    """

    PHASE = "phase"
    FREQUENCY = "frequency"


@dataclass(frozen=True)
class ModulationConfig:
    """
    Probe modulation for FM spectroscopy

    Attributes
    ----------
    probe_mod_freq : float
        Modulation frequency in Hz
    index : float
        Modulation index beta
    mode : ModulationMode
        EOM phase modulation or AOM frequency modulation
    ram_depth : float
        Relative intensity modulation m at probe_mod_freq
    ram_phase : float
        RAM phase relative to the demodulation reference, rad
    aom_extra_ram : float
        Additional RAM depth when modulating through the AOM
    """

    probe_mod_freq: float = 2.5e6
    index: float = 1.0
    mode: ModulationMode = ModulationMode.PHASE
    ram_depth: float = 0.0
    ram_phase: float = 0.0
    aom_extra_ram: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "mode", ModulationMode(self.mode))
        if not self.probe_mod_freq > 0:
            raise ValueError("probe_mod_freq must be positive")
        if self.index < 0:
            raise ValueError("Modulation index cannot be negative")
        if self.ram_depth < 0 or self.aom_extra_ram < 0:
            raise ValueError("RAM depth cannot be negative")
        if not self.effective_ram_depth < 1:
            raise ValueError("Total RAM depth must stay below 1")

    @classmethod
    def from_deviation(cls, deviation: float, probe_mod_freq: float = 2.5e6, **kwargs):
        """
        Frequency modulation through the AOM, beta = deviation / f_mod

        Parameters
        ----------
        deviation : float
            Peak frequency deviation in Hz
        probe_mod_freq = 2.5 MHz : float
            Modulation frequency in Hz
        """
        return cls(
            probe_mod_freq=probe_mod_freq,
            index=deviation / probe_mod_freq,
            mode=ModulationMode.FREQUENCY,
            **kwargs
        )

    @property
    def effective_ram_depth(self) -> float:
        """
        RAM depth including the AOM contribution when modulating through it
        """
        extra = self.aom_extra_ram if self.mode == ModulationMode.FREQUENCY else 0.0
        return self.ram_depth + extra

    def rejected(self, rejection_db: float) -> "ModulationConfig":
        """
        Copy with RAM reduced by a canceller rejection (power dB)

        Parameters
        ----------
        rejection_db : float
            Rejection of the RAM tone power, in dB
        """
        factor = 10.0 ** (-rejection_db / 20.0)
        return replace(
            self,
            ram_depth=self.ram_depth * factor,
            aom_extra_ram=self.aom_extra_ram * factor,
        )

    def with_ram(self, depth: float, phase: float = None) -> "ModulationConfig":
        """
        Copy with another RAM depth (and optionally phase)
        """
        return replace(
            self, ram_depth=depth, ram_phase=self.ram_phase if phase is None else phase
        )


@dataclass(frozen=True)
class PumpModConfig:
    """
    Pump-side modulation used for the long-term lock

    Attributes
    ----------
    mt_mod_freq : float
        Pump frequency modulation for modulation transfer, Hz
    chop_freq : float
        Pump amplitude chopping for double demodulation, Hz
    aom_probe_shift : float
        Probe AOM shift, Hz
    aom_pump_shift : float
        Pump AOM shift, Hz
    mt_deviation : float
        Excursion of the dip resonance under the pump modulation, Hz
    mt_amplitude : float
        Scale of the modulation-transfer error signal
    background_offset : float
        Pump-independent residual offset of the error signal
    chop_samples : int
        Samples per chop period for the second demodulation (even)
    """

    mt_mod_freq: float = 125e3
    chop_freq: float = 200.0
    aom_probe_shift: float = 250e6
    aom_pump_shift: float = 80e6
    mt_deviation: float = 30e3
    mt_amplitude: float = 1.0
    background_offset: float = 0.0
    chop_samples: int = 400

    def __post_init__(self):
        if not 0 < self.chop_freq * RESOLVED_SIDEBAND_RATIO <= self.mt_mod_freq:
            raise ValueError("Chop frequency must sit well below the MT frequency")
        if self.chop_samples < 2 or self.chop_samples % 2:
            raise ValueError("chop_samples must be an even number >= 2")
        if self.mt_deviation < 0:
            raise ValueError("mt_deviation cannot be negative")

    def with_offset(self, offset: float) -> "PumpModConfig":
        """
        Copy with another background offset
        """
        return replace(self, background_offset=offset)


@dataclass(frozen=True)
class LockInConfig:
    """
    Lock-in amplifier settings

    Attributes
    ----------
    ref_freq : float
        Reference frequency, Hz
    ref_phase : float
        Reference phase, rad
    time_constant : float
        Single-pole low-pass time constant, s
    """

    ref_freq: float
    ref_phase: float = 0.0
    time_constant: float = 0.1

    def __post_init__(self):
        if not self.time_constant > 0:
            raise ValueError("time_constant must be positive")
        if not self.ref_freq > 0:
            raise ValueError("ref_freq must be positive")


def sideband_amplitudes(index: float, max_order: int) -> np.ndarray:
    """
    Bessel amplitudes J_0..J_n of a modulated carrier

    Parameters
    ----------
    index : float
        Modulation index beta >= 0
    max_order : int
        Highest order n >= 1

    Returns
    -------
    numpy.ndarray
        J_k(beta) for k = 0..n
    """
    if index < 0:
        raise ValueError("Modulation index cannot be negative")
    if max_order < 1:
        raise ValueError("max_order must be at least 1")
    return jv(np.arange(max_order + 1), index)


def _sideband_orders(index: float) -> np.ndarray:
    reach = max(6, int(math.ceil(index)) + 8)
    return np.arange(-reach, reach + 1)


def _check_regime(context: LineContext, mod: ModulationConfig) -> None:
    if mod.probe_mod_freq <= RESOLVED_SIDEBAND_RATIO * context.hwhm:
        raise RegimeError(
            "Modulation at {0:.0f} Hz does not resolve a {1:.0f} Hz HWHM line".format(
                mod.probe_mod_freq, context.hwhm
            )
        )


def beat_components(detuning, context: LineContext, mod: ModulationConfig) -> tuple:
    """
    DC, first and second harmonic of the transmitted probe intensity

    Parameters
    ----------
    detuning : float|numpy.ndarray
        Carrier detuning from the unperturbed center, Hz
    context : LineContext
        Absorber model
    mod : ModulationConfig
        Probe modulation

    Returns
    -------
    tuple
        (c0, c1, c2): intensity = c0 + 2 Re(c1 e^{i W t} + c2 e^{2 i W t}) + ...
    """
    orders = _sideband_orders(mod.index)
    amplitudes = jv(orders, mod.index)
    carrier = np.asarray(detuning, dtype=float)[..., None]
    attenuation, phase = context.complex_response(
        carrier + orders * mod.probe_mod_freq
    )
    fields = amplitudes * np.exp(-(attenuation + 1j * phase))

    c0 = np.sum(np.abs(fields) ** 2, axis=-1)
    c1 = np.sum(fields[..., 1:] * np.conj(fields[..., :-1]), axis=-1)
    c2 = np.sum(fields[..., 2:] * np.conj(fields[..., :-2]), axis=-1)
    return c0, c1, c2


def _first_harmonic(detuning, context, mod, phase):
    c0, c1, c2 = beat_components(detuning, context, mod)
    depth = mod.effective_ram_depth
    ram = mod.ram_phase + phase
    total = c1 + 0.5 * depth * (np.exp(1j * ram) * c0 + np.exp(-1j * ram) * c2)
    return c0, c1, c2, total


def fm_demod_signal(
    detuning,
    context: LineContext,
    mod: ModulationConfig,
    phase: float = DISPERSION_PHASE,
):
    """
    Lock-in output of FM spectroscopy at the probe modulation frequency

    Parameters
    ----------
    detuning : float|numpy.ndarray
        Carrier detuning from the unperturbed center, Hz
    context : LineContext
        Absorber model
    mod : ModulationConfig
        Probe modulation, including RAM
    phase = pi/2 : float
        Detection phase; pi/2 selects the dispersive quadrature

    Returns
    -------
    float|numpy.ndarray
        Demodulated signal
    """
    _check_regime(context, mod)
    _, _, _, total = _first_harmonic(detuning, context, mod, phase)
    result = 2.0 * np.real(total * np.exp(-1j * phase))
    return float(result) if np.ndim(result) == 0 else result


def transmitted_power(detuning, context: LineContext, mod: ModulationConfig):
    """
    Mean transmitted probe power, relative to the input
    """
    return beat_components(detuning, context, mod)[0]


def ram_baseline(detuning, context: LineContext, mod: ModulationConfig):
    """
    Baseline added by RAM to the demodulated signal, m cos(phase) times transmission
    """
    return (
        mod.effective_ram_depth
        * math.cos(mod.ram_phase)
        * transmitted_power(detuning, context, mod)
    )


def zero_crossing(func, center: float, half_width: float) -> float:
    """
    Root of a discriminator bracketed around a center

    Parameters
    ----------
    func : callable
        Scalar function of detuning
    center : float
        Expected root, Hz
    half_width : float
        Search half-interval, Hz

    Returns
    -------
    float
        Detuning of the zero crossing
    """
    grid = center + half_width * np.linspace(-1.0, 1.0, BRACKET_POINTS)
    values = np.array([func(x) for x in grid], dtype=float)
    zeros = np.flatnonzero(values == 0)
    if zeros.size:
        return float(grid[zeros[np.argmin(np.abs(grid[zeros] - center))]])

    changes = np.flatnonzero(np.sign(values[:-1]) != np.sign(values[1:]))
    if not changes.size:
        raise NoZeroCrossingError(
            "No zero crossing within {0:.1f} +/- {1:.1f} Hz".format(center, half_width)
        )
    # nearest to the center
    index = changes[np.argmin(np.abs(grid[changes] + grid[changes + 1] - 2 * center))]
    return brentq(
        func,
        grid[index],
        grid[index + 1],
        xtol=1e-7,
        rtol=4 * np.finfo(float).eps,
        maxiter=200,
    )


def ram_lock_shift(
    mod: ModulationConfig, context: LineContext, phase: float = DISPERSION_PHASE
) -> FrequencyOffset:
    """
    Displacement of the FM zero crossing caused by RAM

    Parameters
    ----------
    mod : ModulationConfig
        Probe modulation, including RAM
    context : LineContext
        Absorber model
    phase = pi/2 : float
        Detection phase

    Returns
    -------
    FrequencyOffset
        Lock-point shift
    """
    if mod.effective_ram_depth == 0:
        return FrequencyOffset(0)

    clean = replace(mod, ram_depth=0.0, aom_extra_ram=0.0)
    span = 2.0 * context.hwhm
    with_ram = zero_crossing(
        lambda d: fm_demod_signal(d, context, mod, phase), context.shift, span
    )
    without = zero_crossing(
        lambda d: fm_demod_signal(d, context, clean, phase), context.shift, span
    )
    debug(
        "sigchain",
        "ram_lock_shift",
        "m={0:g} shift={1:.4f} Hz".format(mod.effective_ram_depth, with_ram - without),
    )
    return FrequencyOffset.from_hz(with_ram - without)


class LockIn:
    """
    Streaming lock-in amplifier: mix with 2 cos(2 pi f t + phi), single-pole low-pass

    Attributes
    ----------
    cfg : LockInConfig
        Reference and filter settings
    dt : float
        Sample interval of the input
    samples_seen : int
        Samples processed so far (sets the reference phase of the next block)
    """

    def __init__(self, cfg: LockInConfig, dt: float) -> "LockIn":
        """
        Parameters
        ----------
        cfg : LockInConfig
            Reference and filter settings
        dt : float
            Input sample interval, s
        """
        if not 1.0 / dt > 4.0 * cfg.ref_freq:
            raise UndersampledError(
                "Sample rate {0:g} Hz is too low for a {1:g} Hz reference".format(
                    1.0 / dt, cfg.ref_freq
                )
            )
        self.cfg = cfg
        self.dt = dt
        self.samples_seen = 0
        alpha = -math.expm1(-dt / cfg.time_constant)
        self._b = np.array([alpha])
        self._a = np.array([1.0, alpha - 1.0])
        self._state = np.zeros(1)

    def process(self, block) -> np.ndarray:
        """
        Demodulate the next block of samples

        Parameters
        ----------
        block : array-like
            Consecutive input samples

        Returns
        -------
        numpy.ndarray
            Filtered output, one per input sample
        """
        block = np.asarray(block, dtype=float)
        index = self.samples_seen + np.arange(block.size)
        reference = 2.0 * np.cos(
            2.0 * math.pi * self.cfg.ref_freq * index * self.dt + self.cfg.ref_phase
        )
        out, self._state = lfilter(self._b, self._a, block * reference, zi=self._state)
        self.samples_seen += block.size
        return out


def lock_in(signal: TimeSeries, cfg: LockInConfig) -> TimeSeries:
    """
    Demodulate a whole record

    Parameters
    ----------
    signal : TimeSeries
        Input record
    cfg : LockInConfig
        Reference and filter settings

    Returns
    -------
    TimeSeries
        Demodulated record on the same time base
    """
    return TimeSeries(
        LockIn(cfg, signal.dt).process(signal.values), signal.dt, SeriesKind.DEMODULATED
    )


# pylint: disable=too-many-arguments,too-many-locals
def photocurrent(
    detuning: float,
    context: LineContext,
    mod: ModulationConfig,
    phase: float = DISPERSION_PHASE,
    rate: float = 20e6,
    duration: float = 2e-3,
    noise_psd: float = 0.0,
    seed: int = 0,
) -> TimeSeries:
    """
    Sampled photodetector output for a fixed carrier detuning

    The detector is ideal and linear with additive white noise of one-sided
    spectral density noise_psd (signal units squared per Hz).
    """
    c0, c1, c2 = beat_components(detuning, context, mod)
    times = np.arange(int(round(rate * duration))) / rate
    omega = 2.0 * math.pi * mod.probe_mod_freq
    optical = c0 + 2.0 * np.real(
        c1 * np.exp(1j * omega * times) + c2 * np.exp(2j * omega * times)
    )
    ram = 1.0 + mod.effective_ram_depth * np.cos(omega * times + mod.ram_phase + phase)
    values = optical * ram
    if noise_psd > 0:
        rng = np.random.default_rng(seed)
        values = values + rng.normal(0.0, math.sqrt(noise_psd * rate / 2.0), times.size)
    return TimeSeries(values, 1.0 / rate, SeriesKind.DETECTOR)


# pylint: disable=too-many-arguments
def fm_demod_time_domain(
    detuning: float,
    context: LineContext,
    mod: ModulationConfig,
    phase: float = DISPERSION_PHASE,
    time_constant: float = 1e-4,
    rate: float = 20e6,
    duration: float = 2e-3,
    noise_psd: float = 0.0,
    seed: int = 0,
) -> float:
    """
    FM signal obtained by sampling the photocurrent and running the lock-in

    Returns the mean of the second half of the lock-in output, which must
    agree with fm_demod_signal once the filter has settled.
    """
    _check_regime(context, mod)
    record = photocurrent(
        detuning, context, mod, phase, rate, duration, noise_psd, seed
    )
    output = lock_in(record, LockInConfig(mod.probe_mod_freq, phase, time_constant))
    return output.tail(0.5).mean()


def modulation_transfer_error(detuning, context: LineContext, pump: PumpModConfig):
    """
    First-harmonic modulation-transfer error signal

    The pump modulation sweeps the dip resonance by +/- mt_deviation; the
    probe absorption is projected on the first harmonic. The result is odd
    about the shifted center with positive slope, plus the pump-independent
    background offset.

    Parameters
    ----------
    detuning : float|numpy.ndarray
        Laser detuning from the unperturbed center, Hz
    context : LineContext
        Absorber model
    pump : PumpModConfig
        Pump modulation settings

    Returns
    -------
    float|numpy.ndarray
        Error signal
    """
    offset = np.asarray(detuning, dtype=float) - context.shift
    if np.any(np.abs(offset) >= context.line.doppler_sigma):
        raise RegimeError("Modulation transfer is evaluated within the Doppler width")

    angles = 2.0 * math.pi * np.arange(MT_PHASE_POINTS) / MT_PHASE_POINTS
    cosines = np.cos(angles)
    x = (offset[..., None] + pump.mt_deviation * cosines) / context.hwhm
    harmonic = -2.0 * np.mean(cosines / (1.0 + x ** 2), axis=-1)
    result = pump.mt_amplitude * context.dip_depth * harmonic + pump.background_offset
    return float(result) if np.ndim(result) == 0 else result


class Discriminator(Enum):
    """
    Which error signal drives the lock
    """

    FM = "fm"
    MODULATION_TRANSFER = "modulation-transfer"


@dataclass(frozen=True)
class ErrorChain:
    """
    A complete error-signal path for the long-term lock

    Attributes
    ----------
    context : LineContext
        Absorber model
    modulation : ModulationConfig
        Probe modulation (FM discriminator and RAM)
    pump : PumpModConfig
        Pump modulation (MT discriminator, chopping, background offset)
    discriminator : Discriminator
        FM or modulation transfer
    double_demod : bool
        Whether the 200 Hz pump chop and second lock-in are used
    phase : float
        FM detection phase
    """

    context: LineContext
    modulation: ModulationConfig = field(default_factory=ModulationConfig)
    pump: PumpModConfig = field(default_factory=PumpModConfig)
    discriminator: Discriminator = Discriminator.MODULATION_TRANSFER
    double_demod: bool = True
    phase: float = DISPERSION_PHASE

    def __post_init__(self):
        object.__setattr__(self, "discriminator", Discriminator(self.discriminator))
        probe = self.modulation.probe_mod_freq
        if self.pump.mt_mod_freq * RESOLVED_SIDEBAND_RATIO > probe:
            raise ValueError("MT frequency must sit well below the probe modulation")

    def single(self, detuning, pump_on: bool = True):
        """
        First-demodulation output with the pump on or blocked
        """
        context = self.context if pump_on else self.context.without_pump()
        if self.discriminator == Discriminator.FM:
            return fm_demod_signal(detuning, context, self.modulation, self.phase)
        return modulation_transfer_error(detuning, context, self.pump)

    def error(self, detuning):
        """
        The error signal the servo sees
        """
        if self.double_demod:
            return double_demod_error(detuning, self)
        return self.single(detuning)

    def lock_point(self) -> float:
        """
        Zero crossing of the error signal, Hz from the unperturbed center
        """
        return zero_crossing(self.error, self.context.shift, 2.0 * self.context.hwhm)

    def slope(self, at: float) -> float:
        """
        Discriminator slope (error units per Hz) by central difference
        """
        step = 1e-3 * self.context.hwhm
        return (self.error(at + step) - self.error(at - step)) / (2.0 * step)

    def peak_error(self) -> float:
        """
        Largest |error| of the pump-dependent part over +/- 3 HWHM
        """
        grid = self.context.shift + self.context.hwhm * np.linspace(-3.0, 3.0, 601)
        clean = replace(self, pump=self.pump.with_offset(0.0), double_demod=False)
        return float(np.max(np.abs(clean.single(grid))))

    def with_offset(self, offset: float) -> "ErrorChain":
        """
        Copy with another pump-independent background offset
        """
        return replace(self, pump=self.pump.with_offset(offset))


def double_demod_error(detuning, chain: ErrorChain):
    """
    Second demodulation at the pump chop frequency

    The pump is on during the first half of each chop period and the second
    lock-in multiplies by a +/-1 square reference, so pump-independent
    contributions average out and the pump-dependent part is halved.

    Parameters
    ----------
    detuning : float|numpy.ndarray
        Laser detuning from the unperturbed center, Hz
    chain : ErrorChain
        Error path providing the first-demodulation outputs

    Returns
    -------
    float|numpy.ndarray
        Error signal
    """
    samples = chain.pump.chop_samples
    pump_on = (np.arange(samples) < samples // 2).astype(float)
    reference = 2.0 * pump_on - 1.0

    with_pump = np.asarray(chain.single(detuning, True))
    blocked = np.asarray(chain.single(detuning, False))
    result = blocked * np.mean(reference) + (with_pump - blocked) * np.mean(
        pump_on * reference
    )
    return float(result) if np.ndim(result) == 0 else result
