"""
Statistics and fitting: Allan deviation, dispersion fits, pressure slope, repeatability
"""

import math
from dataclasses import dataclass, field, replace
from datetime import date, timedelta
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple

import allantools
import numpy as np
from scipy.optimize import least_squares

from iodine_standard.errors import ConvergenceError, InsufficientDataError
from iodine_standard.freqcore import (
    FrequencyOffset,
    OpticalFrequency,
    TimeSeries,
    format_khz,
)
from iodine_standard.lineshape import CellConditions, LineContext
from iodine_standard.utils import debug, logger, write_csv, write_json

MIN_ALLAN_AVERAGES = 3
MIN_FIT_POINTS = 8
MIN_FIT_SPAN_HWHM = 3.0
FIT_XTOL = 1e-8
FIT_MAX_ITERATIONS = 200


class AllanResult(NamedTuple):
    """
    Allan deviation at a list of averaging times
    """

    taus: list
    sigmas: list
    n_samples: list

    def to_csv(self, path: Path) -> Path:
        """
        Export tau_s, sigma
        """
        return write_csv(path, {"tau_s": self.taus, "sigma": self.sigmas})


def _averaging_factor(tau: float, dt: float) -> int:
    factor = int(round(tau / dt))
    if factor < 1 or not math.isclose(factor * dt, tau, rel_tol=1e-9):
        raise ValueError("tau {0:g} s is not a multiple of {1:g} s".format(tau, dt))
    return factor


def allan_deviation(y: TimeSeries, taus, overlapping: bool = False) -> AllanResult:
    """
    Two-sample deviation of a fractional-frequency record

    Parameters
    ----------
    y : TimeSeries
        Fractional offsets, one per gate
    taus : list
        Averaging times, each a whole number of gates
    overlapping = False : bool
        Use every start index instead of adjacent blocks

    Returns
    -------
    AllanResult
        taus, sigmas and the number of differences used at each tau

    Throws
    ------
    InsufficientDataError
        Fewer than 3 averages fit at one of the taus
    """
    factors = sorted({_averaging_factor(float(tau), y.dt) for tau in taus})
    for factor in factors:
        blocks = len(y) // factor
        if blocks < MIN_ALLAN_AVERAGES:
            raise InsufficientDataError(
                "Only {0} averages of {1:g} s in a {2:g} s record".format(
                    blocks, factor * y.dt, y.duration
                )
            )

    estimator = allantools.oadev if overlapping else allantools.adev
    # taus in samples
    used, sigmas, _, counts = estimator(
        y.values, rate=1.0, data_type="freq", taus=np.asarray(factors, dtype=float)
    )
    if len(used) != len(factors):
        raise InsufficientDataError(
            "Allan deviation unavailable at some of {0}".format(factors)
        )
    return AllanResult(
        [factor * y.dt for factor in factors],
        [float(sigma) for sigma in sigmas],
        [int(n) for n in counts],
    )


def allan_slope(result: AllanResult, tau_min: float, tau_max: float) -> float:
    """
    Log-log slope of sigma(tau) between two averaging times
    """
    taus = np.asarray(result.taus)
    sigmas = np.asarray(result.sigmas)
    chosen = (taus >= tau_min) & (taus <= tau_max) & (sigmas > 0)
    if np.count_nonzero(chosen) < 2:
        raise InsufficientDataError("Need two non-zero points to fit a slope")
    return float(np.polyfit(np.log(taus[chosen]), np.log(sigmas[chosen]), 1)[0])


def dispersion_model(detunings, center, hwhm, amplitude, baseline):
    """
    baseline + amplitude * (-x / (1 + x^2)), x = (f - center) / hwhm
    """
    x = (np.asarray(detunings, dtype=float) - center) / hwhm
    return baseline - amplitude * x / (1.0 + x ** 2)


@dataclass(frozen=True)
class DispersionGuess:
    """
    Starting point of a dispersion fit
    """

    center: float
    hwhm: float
    amplitude: float
    baseline: float = 0.0

    def __post_init__(self):
        if not self.hwhm > 0:
            raise ValueError("Initial hwhm must be positive")


def guess_dispersion(detunings, values, hwhm: float) -> DispersionGuess:
    """
    Initial guess from the extrema of a scan

    The model peaks at x = -1 and dips at x = +1, so the order of the
    extrema gives the sign of the amplitude.
    """
    detunings = np.asarray(detunings, dtype=float)
    values = np.asarray(values, dtype=float)
    high, low = int(np.argmax(values)), int(np.argmin(values))
    sign = 1.0 if detunings[high] < detunings[low] else -1.0
    return DispersionGuess(
        center=0.5 * (detunings[high] + detunings[low]),
        hwhm=hwhm,
        amplitude=sign * (values[high] - values[low]),
        baseline=float(np.median(values)),
    )


@dataclass(frozen=True)
class DispersionFit:
    """
    Fitted dispersion lineshape

    Attributes
    ----------
    center : float
        Hz, in the units of the scan detunings
    hwhm : float
        Hz, positive
    amplitude : float
        Scale of -x/(1+x^2)
    baseline : float
        Constant offset
    residual_rms : float
        RMS of the residuals
    converged : bool
        Whether the step tolerance was met
    """

    center: float
    hwhm: float
    amplitude: float
    baseline: float
    residual_rms: float
    converged: bool = field(default=True)

    def to_json(self, path: Path) -> Path:
        """
        Write the fit as a JSON report
        """
        return write_json(
            path,
            {
                "center_Hz": self.center,
                "hwhm_Hz": self.hwhm,
                "amplitude": self.amplitude,
                "baseline": self.baseline,
                "residual_rms": self.residual_rms,
                "converged": self.converged,
            },
        )


# pylint: disable=too-many-locals
def fit_dispersion(detunings, values, initial: DispersionGuess) -> DispersionFit:
    """
    Levenberg-Marquardt fit of the dispersion model

    Frequencies are scaled by the initial HWHM around the scan mean and
    values by their largest magnitude before fitting.

    Parameters
    ----------
    detunings : array-like
        Scan frequencies, Hz
    values : array-like
        Measured signal
    initial : DispersionGuess
        Start, within a factor 3 of the truth

    Returns
    -------
    DispersionFit
        The fitted parameters

    Throws
    ------
    InsufficientDataError
        Too few points, or a scan narrower than 3 HWHM
    ConvergenceError
        The minimizer failed
    """
    detunings = np.asarray(detunings, dtype=float)
    values = np.asarray(values, dtype=float)
    if detunings.size != values.size:
        raise ValueError("Detunings and values differ in length")
    if detunings.size < MIN_FIT_POINTS:
        raise InsufficientDataError(
            "A dispersion fit needs {0} points, got {1}".format(
                MIN_FIT_POINTS, detunings.size
            )
        )
    span = np.ptp(detunings)
    if span < MIN_FIT_SPAN_HWHM * initial.hwhm:
        raise InsufficientDataError(
            "Scan spans {0:.1f} Hz, less than 3 HWHM of {1:.1f} Hz".format(
                span, initial.hwhm
            )
        )
    scale_v = float(np.max(np.abs(values)))
    if scale_v == 0:
        raise InsufficientDataError("Scan carries no signal")

    origin = float(np.mean(detunings))
    scale_f = initial.hwhm
    x = (detunings - origin) / scale_f
    y = values / scale_v

    def residuals(params):
        return dispersion_model(x, *params) - y

    start = [
        (initial.center - origin) / scale_f,
        1.0,
        initial.amplitude / scale_v,
        initial.baseline / scale_v,
    ]
    result = least_squares(
        residuals,
        start,
        method="lm",
        xtol=FIT_XTOL,
        ftol=1e-14,
        gtol=1e-14,
        max_nfev=FIT_MAX_ITERATIONS * (len(start) + 1),
    )
    if result.status < 0 or not np.all(np.isfinite(result.x)):
        raise ConvergenceError("Dispersion fit failed: {0}".format(result.message))
    converged = result.status > 0
    if not converged:
        logger.warning("Dispersion fit stopped after %d evaluations", result.nfev)

    center, width, amplitude, baseline = result.x
    if width < 0:
        width, amplitude = -width, -amplitude
    fit = DispersionFit(
        center=origin + center * scale_f,
        hwhm=width * scale_f,
        amplitude=amplitude * scale_v,
        baseline=baseline * scale_v,
        residual_rms=float(np.sqrt(np.mean(result.fun ** 2))) * scale_v,
        converged=converged,
    )
    debug("analysis", "fit_dispersion", "hwhm={0:.1f} Hz".format(fit.hwhm))
    return fit


def pressure_slope(samples, at: float, window: float) -> float:
    """
    Local linear regression of shift against pressure

    Parameters
    ----------
    samples : list
        (pressure Pa, shift Hz) pairs
    at : float
        Pressure of interest, Pa
    window : float
        Half-width of the pressure window, Pa

    Returns
    -------
    float
        Hz/Pa
    """
    pairs = np.asarray(samples, dtype=float).reshape(-1, 2)
    chosen = pairs[np.abs(pairs[:, 0] - at) <= window * (1.0 + 1e-12)]
    if len(chosen) < 3 or np.ptp(chosen[:, 0]) == 0:
        raise InsufficientDataError(
            "Need three distinct pressures within {0:g} Pa of {1:g} Pa".format(
                window, at
            )
        )
    return float(np.polyfit(chosen[:, 0], chosen[:, 1], 1)[0])


@dataclass(frozen=True)
class MeasurementSet:
    """
    One day's absolute-frequency measurements

    Attributes
    ----------
    label : string
        Date-like label
    values : tuple
        OpticalFrequency readings
    conditions : CellConditions
        Conditions of the day
    """

    label: str
    values: tuple
    conditions: CellConditions = field(default_factory=CellConditions)

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if not self.values:
            raise ValueError("Measurement set '{0}' is empty".format(self.label))


def _exact_mean(millihertz) -> Fraction:
    items = list(millihertz)
    return Fraction(sum(items), len(items))


def _to_frequency(value: Fraction) -> OpticalFrequency:
    return OpticalFrequency(round(value))


def _sample_std(values) -> float:
    """
    Sample standard deviation of exact values, in the same units
    """
    values = list(values)
    if len(values) < 2:
        return 0.0
    mean = sum(values, Fraction(0)) / len(values)
    variance = sum(((v - mean) ** 2 for v in values), Fraction(0)) / (len(values) - 1)
    return math.sqrt(variance)


@dataclass(frozen=True)
class SetSpread:
    """
    Statistics of one measurement set
    """

    label: str
    mean: OpticalFrequency
    peak_to_peak_hz: float
    std_hz: float
    count: int


@dataclass(frozen=True)
class RepeatabilityReport:
    """
    Set-wise statistics

    Attributes
    ----------
    set_means : list
        OpticalFrequency mean of each set, to the millihertz
    grand_mean : OpticalFrequency
        Unweighted mean of the exact set means
    std_of_set_means : float
        Sample standard deviation of the set means, Hz
    within_set_spreads : list
        SetSpread for each set
    """

    set_means: list
    grand_mean: OpticalFrequency
    std_of_set_means: float
    within_set_spreads: list

    def to_dict(self) -> dict:
        """
        JSON-ready summary
        """
        return {
            "grand_mean_kHz": format_khz(self.grand_mean),
            "std_of_set_means_Hz": self.std_of_set_means,
            "sets": [
                {
                    "label": spread.label,
                    "mean_kHz": format_khz(spread.mean),
                    "spread_Hz": spread.peak_to_peak_hz,
                    "std_Hz": spread.std_hz,
                    "n": spread.count,
                }
                for spread in self.within_set_spreads
            ],
        }

    def to_json(self, path: Path) -> Path:
        """
        Write the summary as JSON
        """
        return write_json(path, self.to_dict())


def repeatability(sets: list) -> RepeatabilityReport:
    """
    Per-set means and spreads, grand mean and scatter of the set means

    Means are exact rationals in millihertz, so the grand mean does not
    depend on the order of the sets.

    Parameters
    ----------
    sets : list
        At least two MeasurementSet

    Returns
    -------
    RepeatabilityReport
        The statistics
    """
    if len(sets) < 2:
        raise InsufficientDataError("Repeatability needs at least two sets")

    exact_means, spreads = [], []
    for measurement in sets:
        readings = [value.millihertz for value in measurement.values]
        mean = _exact_mean(readings)
        exact_means.append(mean)
        spreads.append(
            SetSpread(
                label=measurement.label,
                mean=_to_frequency(mean),
                peak_to_peak_hz=(max(readings) - min(readings)) / 1000.0,
                std_hz=_sample_std(Fraction(r) for r in readings) / 1000.0,
                count=len(readings),
            )
        )

    grand = sum(exact_means, Fraction(0)) / len(exact_means)
    return RepeatabilityReport(
        set_means=[_to_frequency(mean) for mean in exact_means],
        grand_mean=_to_frequency(grand),
        std_of_set_means=_sample_std(exact_means) / 1000.0,
        within_set_spreads=spreads,
    )


@dataclass(frozen=True)
class RepeatabilitySetup:
    """
    How measurement days are synthesized

    Attributes
    ----------
    sets : int
        Number of days
    per_set : int
        Measurements per day
    pressure_sigma : float
        Day-to-day scatter of the cell pressure, Pa
    within_set_sigma : float
        Scatter of measurements within one day, Hz
    probe_power_range : tuple
        Probe power drawn uniformly per day, W
    pump_power_range : tuple
        Pump power drawn uniformly per day, W
    first_day : string
        ISO date of the first set
    aom_day : int
        Index of the single day measured through the AOM path, -1 for none;
        every other day uses the EOM path
    """

    sets: int = 4
    per_set: int = 10
    pressure_sigma: float = 0.022
    within_set_sigma: float = 65.0
    probe_power_range: tuple = (300e-6, 500e-6)
    pump_power_range: tuple = (2e-3, 3.4e-3)
    first_day: str = "2001-03-05"
    aom_day: int = 1

    def __post_init__(self):
        if self.sets < 2 or self.per_set < 1:
            raise ValueError("Need at least two sets of at least one measurement")
        if not -1 <= self.aom_day < self.sets:
            raise ValueError(
                "AOM day {0} outside the {1} sets".format(self.aom_day, self.sets)
            )

    def path(self, day: int) -> str:
        """
        Probe modulation path used on a day
        """
        return "aom" if day == self.aom_day else "eom"


def simulate_measurement_sets(
    context: LineContext,
    setup: RepeatabilitySetup,
    seed: int,
    path_offsets: dict = None,
) -> list:
    """
    Synthesize measurement days whose scatter comes from the cell conditions

    Each day draws a pressure and probe/pump powers and uses the probe
    modulation path the setup schedules for it. The day's lock point is the
    line shift under those conditions plus the path's systematic offset.

    Parameters
    ----------
    context : LineContext
        Nominal line and conditions
    setup : RepeatabilitySetup
        Scatter parameters
    seed : int
        Random seed
    path_offsets = None : dict
        Lock-point offset in Hz per modulation path ("eom", "aom")

    Returns
    -------
    list
        MeasurementSet per day
    """
    offsets = path_offsets or {"eom": 0.0, "aom": 0.0}
    rng = np.random.default_rng(seed)
    start = date.fromisoformat(setup.first_day)
    nominal = context.cond
    sets = []
    for day in range(setup.sets):
        pressure = nominal.pressure + rng.normal(0.0, setup.pressure_sigma)
        pressure = max(pressure, 0.1 * nominal.pressure)
        cond = replace(
            nominal,
            pressure=pressure,
            probe_power=rng.uniform(*setup.probe_power_range),
            pump_power=rng.uniform(*setup.pump_power_range),
        )
        path = setup.path(day)
        center = context.with_conditions(cond).shift + offsets[path]
        readings = center + rng.normal(0.0, setup.within_set_sigma, setup.per_set)
        values = tuple(
            context.line.unperturbed_center + FrequencyOffset.from_hz(round(r, 3))
            for r in readings
        )
        label = "{0} ({1})".format((start + timedelta(days=7 * day)).isoformat(), path)
        sets.append(MeasurementSet(label, values, cond))
    return sets
