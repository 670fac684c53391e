"""
Femtosecond-comb measurement: mode grid, f0-free mixing, counting, mode number

The beat with the nearest comb mode is mixed with the f-2f beat so f0
cancels; what is counted is laser - p * f_rep.
"""

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from iodine_standard.errors import AmbiguousModeError, InsufficientDataError
from iodine_standard.freqcore import (
    MHZ_PER_HZ,
    FrequencyOffset,
    OpticalFrequency,
    SeriesKind,
    TimeSeries,
    format_khz,
)
from iodine_standard.utils import debug, write_csv, write_json

MODE_MARGIN = 0.4


@dataclass(frozen=True)
class CombConfig:
    """
    Comb parameters; the default f_rep and f0 are arbitrary choices

    Attributes
    ----------
    f_rep : OpticalFrequency
        Repetition rate
    f_0 : OpticalFrequency
        Carrier-envelope offset
    ref_instability_1s : float
        Fractional instability of the RF reference at 1 s
    """

    f_rep: OpticalFrequency = field(
        default_factory=lambda: OpticalFrequency.from_hz(1e9)
    )
    f_0: OpticalFrequency = field(
        default_factory=lambda: OpticalFrequency.from_hz(140e6)
    )
    ref_instability_1s: float = 7.2e-14

    def __post_init__(self):
        if self.f_rep.millihertz <= 0:
            raise ValueError("f_rep must be positive")
        if not 0 <= self.f_0.millihertz < self.f_rep.millihertz:
            raise ValueError("f_0 must lie in [0, f_rep)")
        if self.ref_instability_1s < 0:
            raise ValueError("ref_instability_1s cannot be negative")

    def with_f_rep(self, f_rep: OpticalFrequency) -> "CombConfig":
        """
        Copy with another repetition rate (f0 kept, or wrapped into range)
        """
        offset = OpticalFrequency(self.f_0.millihertz % f_rep.millihertz)
        return replace(self, f_rep=f_rep, f_0=offset)


@dataclass(frozen=True)
class CounterConfig:
    """
    Frequency counter

    Attributes
    ----------
    gate : float
        Gate time, s
    resolution_mhz : int
        Resolution in millihertz
    dead_time : float
        Dead time between gates, s
    """

    gate: float = 1.0
    resolution_mhz: int = 1
    dead_time: float = 0.0

    def __post_init__(self):
        if not self.gate > 0:
            raise ValueError("Gate time must be positive")
        if self.resolution_mhz < 1 or self.dead_time < 0:
            raise ValueError("Invalid counter resolution or dead time")


def mode_freq(p: int, comb: CombConfig) -> OpticalFrequency:
    """
    f0 + p * f_rep
    """
    if p < 0:
        raise ValueError("Mode number cannot be negative")
    return comb.f_0 + comb.f_rep * p


def beat_and_mix(laser: OpticalFrequency, comb: CombConfig) -> tuple:
    """
    Mode number and f0-free mixer output laser - p * f_rep

    Parameters
    ----------
    laser : OpticalFrequency
        Laser frequency
    comb : CombConfig
        Comb parameters

    Returns
    -------
    tuple
        (p, FrequencyOffset) with |mixed| <= f_rep / 2
    """
    f_rep = comb.f_rep.millihertz
    p = (laser.millihertz + f_rep // 2) // f_rep
    if p < 0:
        raise ValueError("Laser frequency lies below the comb span")
    return p, laser - OpticalFrequency(p * f_rep)


def beat_note(laser: OpticalFrequency, comb: CombConfig) -> tuple:
    """
    Nearest physical comb mode (including f0) and the signed beat with it

    Returns
    -------
    tuple
        (mode number, FrequencyOffset laser - mode)
    """
    f_rep = comb.f_rep.millihertz
    p = (laser.millihertz - comb.f_0.millihertz + f_rep // 2) // f_rep
    return p, laser - mode_freq(p, comb)


class CountedRecord(NamedTuple):
    """
    Counter output: magnitudes plus the sign the counter cannot see

    The sign stays +1 until resolved by stepping f_rep.
    """

    counts: TimeSeries
    sign: int = 1

    def signed(self) -> TimeSeries:
        """
        Counts with the sign applied
        """
        return self.counts.with_values(self.sign * self.counts.values)

    def to_csv(self, path: Path) -> Path:
        """
        Export gate_index, counted_Hz
        """
        return write_csv(
            path,
            {
                "gate_index": np.arange(len(self.counts)),
                "counted_Hz": self.counts.values,
            },
        )


# pylint: disable=too-many-arguments,too-many-locals
def count(
    mixed_true: FrequencyOffset,
    laser_series: TimeSeries,
    comb: CombConfig,
    counter: CounterConfig,
    mode_number: int,
    seed: int,
) -> CountedRecord:
    """
    Gate-averaged mixer frequency with reference noise, quantized

    Parameters
    ----------
    mixed_true : FrequencyOffset
        Mixer output for the nominal laser frequency
    laser_series : TimeSeries
        Laser deviation from nominal, Hz
    comb : CombConfig
        Comb (reference noise acts on p * f_rep)
    counter : CounterConfig
        Gate, resolution, dead time
    mode_number : int
        p
    seed : int
        Random seed for the reference noise

    Returns
    -------
    CountedRecord
        Magnitude of each gate's count in Hz, sign unresolved
    """
    gate_samples = int(round(counter.gate / laser_series.dt))
    dead_samples = int(round(counter.dead_time / laser_series.dt))
    if gate_samples < 1:
        raise ValueError("Gate is shorter than the laser sample interval")
    period = gate_samples + dead_samples
    gates = (len(laser_series) + dead_samples) // period
    if gates < 1:
        raise InsufficientDataError(
            "{0:.3f} s of data cannot fill one {1:g} s gate".format(
                laser_series.duration, counter.gate
            )
        )

    starts = np.arange(gates) * period
    index = starts[:, None] + np.arange(gate_samples)
    averages = laser_series.values[index].mean(axis=1)

    rng = np.random.default_rng(seed)
    sigma = comb.ref_instability_1s * math.sqrt(1.0 / counter.gate)
    reference = -rng.normal(0.0, sigma, gates) * mode_number * comb.f_rep.hz

    step = counter.resolution_mhz
    deviation_mhz = (averages + reference) * MHZ_PER_HZ
    counted_mhz = mixed_true.millihertz + step * np.rint(deviation_mhz / step).astype(
        np.int64
    )
    debug("comb", "count", "{0} gates of {1:g} s".format(gates, counter.gate))
    return CountedRecord(
        TimeSeries(
            np.abs(counted_mhz) / MHZ_PER_HZ,
            counter.gate + counter.dead_time,
            SeriesKind.COUNTED_HERTZ,
        )
    )


def resolve_sign(
    magnitude: float, magnitude_stepped: float, f_rep_step: float, mode_number: int
) -> int:
    """
    Sign of the mixer output from a small f_rep step

    Raising f_rep by f_rep_step moves laser - p * f_rep by -p * f_rep_step.
    A positive output c predicts a stepped magnitude |c - p * step| and a
    negative one c + p * step; the closer prediction wins, so a step that
    carries the output through zero is still resolved.

    Parameters
    ----------
    magnitude : float
        |count| at f_rep, Hz
    magnitude_stepped : float
        |count| at f_rep + f_rep_step, Hz
    f_rep_step : float
        Positive step
    mode_number : int
        p

    Returns
    -------
    int
        +1 or -1; +1 when both predictions agree (zero output)

    Throws
    ------
    ValueError
        Neither prediction matches the stepped magnitude
    """
    expected = mode_number * f_rep_step
    if not expected > 0:
        raise ValueError("f_rep step and mode number must be positive")
    positive = abs(abs(magnitude - expected) - magnitude_stepped)
    negative = abs(magnitude + expected - magnitude_stepped)
    if min(positive, negative) > 0.5 * expected:
        raise ValueError(
            "Stepped count {0:g} Hz fits neither sign of {1:g} Hz".format(
                magnitude_stepped, magnitude
            )
        )
    return 1 if positive <= negative else -1


class ModeNumber(NamedTuple):
    """
    Mode number estimate and how far the raw quotient was from an integer
    """

    p: int
    residual: float


def determine_mode_number(
    count_a: float,
    f_rep_a: OpticalFrequency,
    count_b: float,
    f_rep_b: OpticalFrequency,
    count_uncertainty: float = None,
) -> ModeNumber:
    """
    p = round((c_a - c_b) / (f_rep_b - f_rep_a))

    Parameters
    ----------
    count_a : float
        Signed mean count at f_rep_a, Hz
    f_rep_a : OpticalFrequency
        First repetition rate
    count_b : float
        Signed mean count at f_rep_b, Hz
    f_rep_b : OpticalFrequency
        Second repetition rate
    count_uncertainty = None : float
        Standard uncertainty of each mean, Hz; enables the margin check

    Throws
    ------
    AmbiguousModeError
        The quotient is too far from an integer, or the f_rep change is too
        small for the count uncertainty
    """
    delta = (f_rep_b - f_rep_a).hz
    if delta == 0:
        raise ValueError("The two repetition rates must differ")
    raw = (count_a - count_b) / delta

    if count_uncertainty is not None:
        combined = count_uncertainty * math.sqrt(2.0)
        if abs(delta) < 2.0 * combined / MODE_MARGIN:
            raise AmbiguousModeError(
                "An f_rep change of {0:g} Hz cannot resolve p with {1:g} Hz count "
                "uncertainty".format(delta, count_uncertainty),
                raw,
            )

    p = int(round(raw))
    residual = abs(raw - p)
    if residual >= MODE_MARGIN:
        raise AmbiguousModeError(
            "Mode number {0:.3f} is ambiguous; widen the f_rep change or average "
            "longer".format(raw),
            raw,
        )
    return ModeNumber(p, residual)


def reconstruct(counted_mean: float, p: int, comb: CombConfig) -> OpticalFrequency:
    """
    p * f_rep + counted mean, to the millihertz
    """
    return comb.f_rep * p + FrequencyOffset.from_hz(round(counted_mean, 3))


class AbsoluteMeasurement(NamedTuple):
    """
    Reconstructed absolute frequency and its ingredients
    """

    frequency: OpticalFrequency
    p: int
    f_rep: OpticalFrequency
    mean_counted: float
    standard_error: float
    record: CountedRecord

    def report(self) -> dict:
        """
        Fields of the reconstruction report
        """
        return {
            "p": self.p,
            "f_rep_Hz": self.f_rep.hz,
            "mean_counted_Hz": self.mean_counted,
            "absolute_kHz": format_khz(self.frequency),
            "n_gates": len(self.record.counts),
        }

    def write_report(self, path: Path) -> Path:
        """
        Write the report as JSON
        """
        return write_json(path, self.report())


# pylint: disable=too-many-arguments
def _count_with_sign(
    nominal: OpticalFrequency,
    p: int,
    laser_series: TimeSeries,
    comb: CombConfig,
    counter: CounterConfig,
    seeds: list,
    sign_step: float,
) -> CountedRecord:
    main = count(
        nominal - comb.f_rep * p, laser_series, comb, counter, p, seeds[0]
    )
    stepped_comb = comb.with_f_rep(comb.f_rep + FrequencyOffset.from_hz(sign_step))
    stepped = count(
        nominal - stepped_comb.f_rep * p,
        laser_series,
        stepped_comb,
        counter,
        p,
        seeds[1],
    )
    sign = resolve_sign(main.counts.mean(), stepped.counts.mean(), sign_step, p)
    return main._replace(sign=sign)


# pylint: disable=too-many-arguments,too-many-locals
def measure_absolute_frequency(
    nominal: OpticalFrequency,
    laser_series: TimeSeries,
    comb: CombConfig,
    counter: CounterConfig,
    seed: int,
    f_rep_step: float = 10e3,
    sign_step: float = 100.0,
) -> AbsoluteMeasurement:
    """
    Count at two repetition rates, find p, resolve signs, reconstruct

    The same comb mode is followed while f_rep changes, so both counts are
    laser - p * f_rep for one p. Each count's sign comes from a further
    sign_step change of f_rep.

    Parameters
    ----------
    nominal : OpticalFrequency
        Laser frequency the deviation series refers to
    laser_series : TimeSeries
        Laser deviation from nominal, Hz
    comb : CombConfig
        Comb
    counter : CounterConfig
        Counter
    seed : int
        Random seed
    f_rep_step = 10 kHz : float
        Repetition rate change used for the mode number
    sign_step = 100 Hz : float
        Repetition rate change used for the sign

    Returns
    -------
    AbsoluteMeasurement
        The reconstruction and its ingredients
    """
    seeds = np.random.SeedSequence(seed).spawn(4)
    p, _ = beat_and_mix(nominal, comb)
    record = _count_with_sign(
        nominal, p, laser_series, comb, counter, seeds[:2], sign_step
    )

    moved = comb.with_f_rep(comb.f_rep + FrequencyOffset.from_hz(f_rep_step))
    moved_record = _count_with_sign(
        nominal, p, laser_series, moved, counter, seeds[2:], sign_step
    )

    signed = record.signed().values
    mean = float(np.mean(signed))
    sem = (
        float(np.std(signed, ddof=1) / math.sqrt(signed.size))
        if signed.size > 1
        else 0.0
    )
    mode = determine_mode_number(
        mean,
        comb.f_rep,
        moved_record.signed().mean(),
        moved.f_rep,
        sem if sem > 0 else None,
    )

    result = AbsoluteMeasurement(
        reconstruct(mean, mode.p, comb), mode.p, comb.f_rep, mean, sem, record
    )
    debug(
        "comb",
        "measure_absolute_frequency",
        "p={0} mean={1:.3f} Hz -> {2} kHz".format(
            mode.p, mean, format_khz(result.frequency)
        ),
    )
    return result
