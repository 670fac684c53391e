"""
Exact frequency values and sampled records

Absolute optical frequencies (~6e14 Hz) are held as integer millihertz so
offsets of a few mHz survive every addition and subtraction.
"""

from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation, ROUND_HALF_EVEN, localcontext
from enum import Enum
from functools import total_ordering
from pathlib import Path

import numpy as np

from iodine_standard.errors import PrecisionError
from iodine_standard.utils import write_csv

MHZ_PER_HZ = 1000
MHZ_PER_KHZ = 1_000_000


@total_ordering
@dataclass(frozen=True, eq=True)
class _Millihertz:
    """
    Shared integer-millihertz arithmetic

    Attributes
    ----------
    millihertz : int
        Signed count of 1e-3 Hz
    """

    millihertz: int

    def __post_init__(self):
        if isinstance(self.millihertz, bool) or not isinstance(
            self.millihertz, (int, np.integer)
        ):
            raise TypeError(
                "millihertz must be an integer, got {0}".format(
                    type(self.millihertz).__name__
                )
            )
        object.__setattr__(self, "millihertz", int(self.millihertz))

    @classmethod
    def from_hz(cls, hertz: float) -> "_Millihertz":
        """
        Build from a value in hertz, rounded to the nearest millihertz

        Parameters
        ----------
        hertz : float|int|str
            Value in Hz; strings and ints are converted exactly
        """
        value = Decimal(str(hertz)) * MHZ_PER_HZ
        return cls(int(value.to_integral_value(rounding=ROUND_HALF_EVEN)))

    @property
    def hz(self) -> float:
        """
        Value in hertz as a float (loses mHz resolution above ~1e13 Hz)
        """
        return self.millihertz / MHZ_PER_HZ

    def __lt__(self, other):
        if not isinstance(other, _Millihertz):
            return NotImplemented
        return self.millihertz < other.millihertz


class FrequencyOffset(_Millihertz):
    """
    A signed frequency difference (beat notes, mixer outputs, shifts)
    """

    def __add__(self, other):
        if isinstance(other, OpticalFrequency):
            return OpticalFrequency(self.millihertz + other.millihertz)
        if isinstance(other, FrequencyOffset):
            return FrequencyOffset(self.millihertz + other.millihertz)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, FrequencyOffset):
            return FrequencyOffset(self.millihertz - other.millihertz)
        return NotImplemented

    def __mul__(self, factor):
        if isinstance(factor, (int, np.integer)) and not isinstance(factor, bool):
            return FrequencyOffset(self.millihertz * int(factor))
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return FrequencyOffset(-self.millihertz)

    def __abs__(self):
        return FrequencyOffset(abs(self.millihertz))


class OpticalFrequency(_Millihertz):
    """
    An absolute frequency; RF quantities such as f_rep and f0 use it too
    """

    def __add__(self, other):
        if isinstance(other, _Millihertz):
            return OpticalFrequency(self.millihertz + other.millihertz)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, OpticalFrequency):
            return FrequencyOffset(self.millihertz - other.millihertz)
        if isinstance(other, FrequencyOffset):
            return OpticalFrequency(self.millihertz - other.millihertz)
        return NotImplemented

    def __mul__(self, factor):
        if isinstance(factor, (int, np.integer)) and not isinstance(factor, bool):
            return OpticalFrequency(self.millihertz * int(factor))
        return NotImplemented

    __rmul__ = __mul__


def freq_from_khz_string(text: str) -> OpticalFrequency:
    """
    Parse a decimal kHz string exactly

    Parameters
    ----------
    text : string
        Decimal number in kHz, e.g. "597366498654.62"

    Returns
    -------
    OpticalFrequency
        The exact value

    Throws
    ------
    PrecisionError
        The text is not a number, or has digits below 1 mHz
    """
    try:
        value = Decimal(str(text).strip().replace(" ", "").replace("_", ""))
    except InvalidOperation as error:
        raise PrecisionError("Cannot parse '{0}' as kHz".format(text)) from error

    if not value.is_finite():
        raise PrecisionError("Cannot parse '{0}' as kHz".format(text))

    scaled = value * MHZ_PER_KHZ
    if scaled != scaled.to_integral_value():
        raise PrecisionError(
            "'{0}' kHz has digits below 1 mHz and cannot be held exactly".format(text)
        )

    return OpticalFrequency(int(scaled))


def format_khz(freq: _Millihertz) -> str:
    """
    Fixed-point kHz with two decimals, as quoted in reports

    Parameters
    ----------
    freq : OpticalFrequency|FrequencyOffset
        The value to format
    """
    value = (Decimal(freq.millihertz) / MHZ_PER_KHZ).quantize(
        Decimal("0.01"), rounding=ROUND_HALF_EVEN
    )
    return "{0:f}".format(value)


def format_khz_exact(freq: _Millihertz) -> str:
    """
    Fixed-point kHz carrying every millihertz digit, for data files

    Parameters
    ----------
    freq : OpticalFrequency|FrequencyOffset
        The value to format
    """
    sign = "-" if freq.millihertz < 0 else ""
    whole, frac = divmod(abs(freq.millihertz), MHZ_PER_KHZ)
    return "{0}{1}.{2:06d}".format(sign, whole, frac)


def fractional_offset(freq: OpticalFrequency, ref: OpticalFrequency) -> float:
    """
    Fractional deviation (f - ref) / ref

    The difference is taken on integers and divided with 40 significant
    digits before the final rounding to float.

    Parameters
    ----------
    freq : OpticalFrequency
        The frequency under test
    ref : OpticalFrequency
        The reference, must be positive

    Returns
    -------
    float
        Dimensionless offset
    """
    if ref.millihertz <= 0:
        raise ValueError("Reference frequency must be positive, got {0}".format(ref))

    with localcontext() as context:
        context.prec = 40
        ratio = Decimal(freq.millihertz - ref.millihertz) / Decimal(ref.millihertz)
    return float(ratio)


class SeriesKind(Enum):
    """
    What the values of a record mean
    """

    DETECTOR = "detector"
    DEMODULATED = "demodulated"
    FRACTIONAL_FREQUENCY = "fractional-frequency"
    COUNTED_HERTZ = "counted-hertz"
    FREQUENCY_OFFSET = "frequency-offset"


@dataclass(frozen=True)
class TimeSeries:
    """
    A uniformly sampled real record

    Attributes
    ----------
    values : numpy.ndarray
        The samples
    dt : float
        Sample interval, or gate time for counted records, in seconds
    kind : SeriesKind
        Provenance of the values
    """

    values: np.ndarray = field(repr=False)
    dt: float
    kind: SeriesKind

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 1:
            raise ValueError("A time series needs at least one sample")
        if not self.dt > 0:
            raise ValueError(
                "Sample interval must be positive, got {0}".format(self.dt)
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kind", SeriesKind(self.kind))

    def __len__(self) -> int:
        return self.values.size

    @property
    def rate(self) -> float:
        """
        Samples per second
        """
        return 1.0 / self.dt

    @property
    def duration(self) -> float:
        """
        Record length in seconds
        """
        return self.values.size * self.dt

    def times(self) -> np.ndarray:
        """
        Sample times starting at zero
        """
        return np.arange(self.values.size) * self.dt

    def mean(self) -> float:
        """
        Mean of the samples
        """
        return float(np.mean(self.values))

    def with_values(self, values, kind: SeriesKind = None) -> "TimeSeries":
        """
        Same timing, new samples

        Parameters
        ----------
        values : array-like
            Replacement samples
        kind = None : SeriesKind
            New provenance, defaults to the current one
        """
        return TimeSeries(values, self.dt, kind if kind else self.kind)

    def tail(self, fraction: float) -> "TimeSeries":
        """
        The last fraction of the record

        Parameters
        ----------
        fraction : float
            Share of the record to keep, in (0, 1]
        """
        start = int(self.values.size * (1.0 - fraction))
        return self.with_values(self.values[start:])

    def to_csv(self, path: Path, value_column: str = "value") -> Path:
        """
        Export as time_s plus one value column

        Parameters
        ----------
        path : Path
            Destination file
        value_column = "value" : string
            Header of the value column
        """
        return write_csv(path, {"time_s": self.times(), value_column: self.values})
