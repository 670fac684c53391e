"""
Line model of the a7 hyperfine component of R(26)62-0

Covers the Doppler-broadened background, the saturated-absorption (Lamb)
dip, pressure broadening and the line-center shift with its nonlinear
low-pressure term.
"""

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy import constants
from scipy.special import dawsn

from iodine_standard.freqcore import FrequencyOffset, OpticalFrequency
from iodine_standard.utils import write_csv

IODINE_MASS_U = 254.0
ROOM_TEMPERATURE = 300.0

LOW_ANCHOR = (0.066, 32e3)
HIGH_ANCHOR = (0.33, 45e3)

PRESSURE_SLOPE = -38.4e3
SLOPE_PRESSURE = 0.33


def doppler_sigma(
    carrier_hz: float,
    mass_u: float = IODINE_MASS_U,
    temperature: float = ROOM_TEMPERATURE,
) -> float:
    """
    Gaussian standard deviation of the Doppler profile

    Parameters
    ----------
    carrier_hz : float
        Optical frequency in Hz
    mass_u = 254 : float
        Molecular mass in unified atomic mass units
    temperature = 300 : float
        Gas temperature in K

    Returns
    -------
    float
        sigma in Hz, f0 * sqrt(kT / Mc^2)
    """
    rest_energy = mass_u * constants.atomic_mass * constants.c ** 2
    return carrier_hz * math.sqrt(constants.k * temperature / rest_energy)


def natural_decay_rates(natural_hwhm: float = 10e3, ratio: float = 4.0) -> tuple:
    """
    Split a natural HWHM into excited and ground decay rates

    Parameters
    ----------
    natural_hwhm = 10 kHz : float
        (gamma_e + gamma_g) / 4 pi, in Hz
    ratio = 4 : float
        gamma_e / gamma_g

    Returns
    -------
    tuple
        (gamma_e, gamma_g) in 1/s
    """
    total = 4.0 * math.pi * natural_hwhm
    gamma_g = total / (1.0 + ratio)
    return total - gamma_g, gamma_g


@dataclass(frozen=True)
class HyperfineLine:
    """
    The modeled hyperfine component

    Attributes
    ----------
    unperturbed_center : OpticalFrequency
        Zero-pressure, reference-power line center
    natural_hwhm : float
        Natural half-width in Hz
    gamma_e : float
        Excited-state decay rate in 1/s
    gamma_g : float
        Ground-state decay rate in 1/s
    doppler_sigma : float
        Doppler standard deviation in Hz
    """

    unperturbed_center: OpticalFrequency
    natural_hwhm: float = 10e3
    gamma_e: float = field(default_factory=lambda: natural_decay_rates()[0])
    gamma_g: float = field(default_factory=lambda: natural_decay_rates()[1])
    doppler_sigma: float = None

    def __post_init__(self):
        if self.doppler_sigma is None:
            object.__setattr__(
                self, "doppler_sigma", doppler_sigma(self.unperturbed_center.hz)
            )
        if not self.natural_hwhm > 0:
            raise ValueError("natural_hwhm must be positive")
        if self.gamma_e < 0 or self.gamma_g < 0:
            raise ValueError("Decay rates cannot be negative")
        if not self.doppler_sigma > 0:
            raise ValueError("doppler_sigma must be positive")

    @property
    def asymmetry(self) -> float:
        """
        (gamma_e - gamma_g) / (gamma_e + gamma_g)
        """
        total = self.gamma_e + self.gamma_g
        if total == 0:
            raise ValueError(
                "Decay-rate asymmetry undefined with gamma_e = gamma_g = 0"
            )
        return (self.gamma_e - self.gamma_g) / total


@dataclass(frozen=True)
class CellConditions:
    """
    Operating conditions of the low-pressure cell

    Attributes
    ----------
    pressure : float
        Iodine pressure in Pa
    probe_power : float
        Probe power in W
    pump_power : float
        Saturating beam power in W
    beam_diameter : float
        Beam diameter in m
    cell_length : float
        Cell length in m
    """

    pressure: float = 0.33
    probe_power: float = 400e-6
    pump_power: float = 2.7e-3
    beam_diameter: float = 6e-3
    cell_length: float = 4.0

    def __post_init__(self):
        for name in (
            "pressure",
            "probe_power",
            "pump_power",
            "beam_diameter",
            "cell_length",
        ):
            if not getattr(self, name) > 0:
                raise ValueError("Cell condition '{0}' must be positive".format(name))

    def with_pressure(self, pressure: float) -> "CellConditions":
        """
        Copy at another pressure
        """
        return replace(self, pressure=pressure)

    def with_probe_power(self, probe_power: float) -> "CellConditions":
        """
        Copy at another probe power
        """
        return replace(self, probe_power=probe_power)


@dataclass(frozen=True)
class BroadeningModel:
    """
    Affine pressure broadening HWHM(P) = w0 + k P

    Attributes
    ----------
    zero_pressure_hwhm : float
        w0 in Hz (transit, natural and residual contributions)
    pressure_broadening : float
        k in Hz/Pa
    """

    zero_pressure_hwhm: float
    pressure_broadening: float

    def __post_init__(self):
        if not self.pressure_broadening > 0:
            raise ValueError("pressure_broadening must be positive")
        if not self.zero_pressure_hwhm > 0:
            raise ValueError("zero_pressure_hwhm must be positive")

    @classmethod
    def from_anchors(cls, low: tuple = LOW_ANCHOR, high: tuple = HIGH_ANCHOR):
        """
        The unique line through two (pressure, HWHM) points

        Parameters
        ----------
        low : tuple
            (Pa, Hz) at the lower pressure
        high : tuple
            (Pa, Hz) at the higher pressure
        """
        slope = (high[1] - low[1]) / (high[0] - low[0])
        return cls(low[1] - slope * low[0], slope)

    def at(self, pressure: float):
        """
        HWHM in Hz at a pressure (array-friendly)
        """
        return self.zero_pressure_hwhm + self.pressure_broadening * pressure


def hwhm(model: BroadeningModel, cond: CellConditions) -> float:
    """
    Line half-width at the cell pressure

    Parameters
    ----------
    model : BroadeningModel
        Broadening calibration
    cond : CellConditions
        Cell state

    Returns
    -------
    float
        HWHM in Hz
    """
    if cond.pressure < 0:
        raise ValueError("Pressure cannot be negative")
    return float(model.at(cond.pressure))


@dataclass(frozen=True)
class ShiftModel:
    """
    Line-center shift: linear pressure term, nonlinear r/HWHM term, probe power

    Attributes
    ----------
    broadening : BroadeningModel
        Supplies HWHM(P) for the nonlinear term
    linear_coeff : float
        Hz/Pa
    nonlinear_amplitude : float
        Hz^2, scales r / HWHM(P)
    power_coeff : float
        Hz per octave of probe power
    power_sign : int
        +1 or -1
    reference_probe_power : float
        Probe power with no power shift, in W
    """

    broadening: BroadeningModel
    linear_coeff: float
    nonlinear_amplitude: float
    power_coeff: float = 1e3
    power_sign: int = -1
    reference_probe_power: float = 400e-6

    def __post_init__(self):
        if self.power_sign not in (1, -1):
            raise ValueError("power_sign must be +1 or -1")
        if not self.reference_probe_power > 0:
            raise ValueError("reference_probe_power must be positive")

    # pylint: disable=too-many-arguments
    @classmethod
    def calibrated(
        cls,
        broadening: BroadeningModel,
        asymmetry: float,
        slope: float = PRESSURE_SLOPE,
        at: float = SLOPE_PRESSURE,
        linear_fraction: float = 0.6,
        power_coeff: float = 1e3,
        power_sign: int = -1,
        reference_probe_power: float = 400e-6,
    ) -> "ShiftModel":
        """
        Pick linear and nonlinear terms so d(shift)/dP equals slope at a pressure

        Parameters
        ----------
        broadening : BroadeningModel
            Broadening calibration
        asymmetry : float
            r = (gamma_e - gamma_g) / (gamma_e + gamma_g), non-zero
        slope = -38.4 kHz/Pa : float
            Target local slope in Hz/Pa
        at = 0.33 Pa : float
            Pressure where the slope is imposed
        linear_fraction = 0.6 : float
            Share of the slope carried by the linear term
        """
        if asymmetry == 0 and linear_fraction != 1:
            raise ValueError("A nonlinear share needs a non-zero decay asymmetry")

        width = broadening.at(at)
        linear = linear_fraction * slope
        amplitude = 0.0
        if linear_fraction != 1:
            amplitude = (
                -(1.0 - linear_fraction)
                * slope
                * width ** 2
                / (asymmetry * broadening.pressure_broadening)
            )
        return cls(
            broadening,
            linear,
            amplitude,
            power_coeff,
            power_sign,
            reference_probe_power,
        )

    def shift_hz(self, pressure, probe_power: float, asymmetry: float):
        """
        Shift in Hz (array-friendly in pressure)

        Parameters
        ----------
        pressure : float|numpy.ndarray
            Pa, strictly positive
        probe_power : float
            W
        asymmetry : float
            Decay-rate asymmetry r
        """
        if np.any(np.asarray(pressure) <= 0):
            raise ValueError("Shift model needs a strictly positive pressure")
        power_term = (
            self.power_coeff
            * self.power_sign
            * math.log2(probe_power / self.reference_probe_power)
        )
        return (
            self.linear_coeff * pressure
            + self.nonlinear_amplitude * asymmetry / self.broadening.at(pressure)
            + power_term
        )


def center_shift(
    model: ShiftModel, line: HyperfineLine, cond: CellConditions
) -> FrequencyOffset:
    """
    Line-center displacement under given cell conditions

    Parameters
    ----------
    model : ShiftModel
        Shift calibration
    line : HyperfineLine
        Supplies the decay asymmetry
    cond : CellConditions
        Cell state

    Returns
    -------
    FrequencyOffset
        Shift rounded to the millihertz
    """
    return FrequencyOffset.from_hz(
        model.shift_hz(cond.pressure, cond.probe_power, line.asymmetry)
    )


@dataclass(frozen=True)
class LineContext:
    """
    Everything the detection chain needs to know about the absorber

    Attributes
    ----------
    line : HyperfineLine
        The hyperfine component
    shift_model : ShiftModel
        Shift and (through it) broadening calibration
    cond : CellConditions
        Cell state
    dip_contrast : float
        Lamb-dip depth relative to the Doppler depth
    doppler_depth : float
        Peak field attenuation of the Doppler background
    """

    line: HyperfineLine
    shift_model: ShiftModel
    cond: CellConditions = field(default_factory=CellConditions)
    dip_contrast: float = 0.01
    doppler_depth: float = 1.0

    @property
    def hwhm(self) -> float:
        """
        Lamb-dip HWHM in Hz
        """
        return hwhm(self.shift_model.broadening, self.cond)

    @property
    def shift(self) -> float:
        """
        Line-center shift in Hz, unrounded
        """
        return float(
            self.shift_model.shift_hz(
                self.cond.pressure, self.cond.probe_power, self.line.asymmetry
            )
        )

    @property
    def dip_depth(self) -> float:
        """
        Absolute dip depth in field-attenuation units
        """
        return self.dip_contrast * self.doppler_depth

    def with_conditions(self, cond: CellConditions) -> "LineContext":
        """
        Copy under other cell conditions
        """
        return replace(self, cond=cond)

    def without_pump(self) -> "LineContext":
        """
        Copy with the saturating beam blocked (no Lamb dip)
        """
        return replace(self, dip_contrast=0.0)

    def complex_response(self, detuning, include_dip: bool = True) -> tuple:
        """
        Field attenuation and phase seen by light at a detuning

        The dip is a Lorentzian reduction of absorption with its dispersive
        partner; the background is a Gaussian with its Dawson-function
        partner. Both are centered on the shifted line center.

        Parameters
        ----------
        detuning : float|numpy.ndarray
            Hz from the unperturbed center
        include_dip = True : bool
            Whether the saturating beam is on

        Returns
        -------
        tuple
            (attenuation, phase) arrays
        """
        offset = np.asarray(detuning, dtype=float) - self.shift
        scaled = offset / (math.sqrt(2.0) * self.line.doppler_sigma)
        attenuation = self.doppler_depth * np.exp(-(scaled ** 2))
        phase = self.doppler_depth * (2.0 / math.sqrt(math.pi)) * dawsn(scaled)
        if include_dip and self.dip_contrast:
            x = offset / self.hwhm
            lorentz = 1.0 / (1.0 + x ** 2)
            attenuation = attenuation - self.dip_depth * lorentz
            phase = phase - self.dip_depth * x * lorentz
        return attenuation, phase


class Profile(NamedTuple):
    """
    Saturated-absorption scan
    """

    absorption: np.ndarray
    dispersion: np.ndarray


# pylint: disable=too-many-arguments
def saturation_profile(
    line: HyperfineLine,
    shift_model: ShiftModel,
    cond: CellConditions,
    detunings,
    contrast: float = 0.01,
) -> Profile:
    """
    Doppler background with a Lamb dip, and the dip's dispersion

    Parameters
    ----------
    line : HyperfineLine
        The hyperfine component
    shift_model : ShiftModel
        Shift model, also supplying the broadening
    cond : CellConditions
        Cell state
    detunings : array-like
        Hz from the unperturbed center
    contrast = 0.01 : float
        Dip depth relative to the Doppler depth

    Returns
    -------
    Profile
        Normalized absorption and dispersion D(x) = -x/(1+x^2) times contrast
    """
    context = LineContext(line, shift_model, cond, contrast, 1.0)
    offset = np.asarray(detunings, dtype=float) - context.shift
    x = offset / context.hwhm
    lorentz = 1.0 / (1.0 + x ** 2)
    background = np.exp(-0.5 * (offset / line.doppler_sigma) ** 2)
    return Profile(background - contrast * lorentz, -contrast * x * lorentz)


def write_profile_csv(path: Path, detunings, profile: Profile) -> Path:
    """
    Export a profile as detuning_Hz, absorption, dispersion
    """
    return write_csv(
        path,
        {
            "detuning_Hz": np.asarray(detunings, dtype=float),
            "absorption": profile.absorption,
            "dispersion": profile.dispersion,
        },
    )


def sweeps(values, count: int = 3, noise_rms: float = 0.0, seed: int = 0) -> np.ndarray:
    """
    Average of repeated scans of the same curve with additive white noise

    Parameters
    ----------
    values : array-like
        Noiseless scan
    count = 3 : int
        Number of sweeps averaged
    noise_rms = 0 : float
        Per-point noise of a single sweep
    seed = 0 : int
        Random seed
    """
    if count < 1:
        raise ValueError("At least one sweep is needed")
    values = np.asarray(values, dtype=float)
    if not noise_rms:
        return values.copy()
    rng = np.random.default_rng(seed)
    return np.mean(values + rng.normal(0.0, noise_rms, (count, values.size)), axis=0)
