"""
Test exact frequency arithmetic and time series
"""
import numpy as np
from pytest import raises

from iodine_standard.errors import PrecisionError
from iodine_standard.freqcore import (
    FrequencyOffset,
    OpticalFrequency,
    SeriesKind,
    TimeSeries,
    format_khz,
    format_khz_exact,
    fractional_offset,
    freq_from_khz_string,
)


def test_parse_line_frequency():
    """
    The reported line frequency is held exactly in millihertz
    """
    freq = freq_from_khz_string("597366498654.62")
    assert freq.millihertz == 597366498654620000, "Wrong millihertz count"
    assert format_khz(freq) == "597366498654.62", "Report format changed the value"
    assert (
        format_khz_exact(freq) == "597366498654.620000"
    ), "Exact format should carry every millihertz"


def test_parse_tolerates_separators():
    """
    Spaces and underscores group digits
    """
    assert freq_from_khz_string("597 366 498 654.62") == freq_from_khz_string(
        "597_366_498_654.62"
    ), "Digit grouping should not change the value"


def test_parse_rejects_sub_millihertz():
    """
    Digits below 1 mHz cannot be represented
    """
    with raises(PrecisionError):
        freq_from_khz_string("1.0000001")
    with raises(PrecisionError):
        freq_from_khz_string("not a number")
    with raises(PrecisionError):
        freq_from_khz_string("inf")


def test_millihertz_steps_survive():
    """
    One millihertz added to an optical frequency is not lost
    """
    base = freq_from_khz_string("597366498654.62")
    step = FrequencyOffset(1)
    assert (base + step) - base == step, "1 mHz offset lost"
    assert (base + step).millihertz - base.millihertz == 1, "Integer difference wrong"


def test_offset_and_frequency_types():
    """
    Differences of frequencies are offsets, offsets shift frequencies
    """
    first = OpticalFrequency.from_hz(1e9)
    second = OpticalFrequency.from_hz(1.25e9)
    difference = second - first
    assert isinstance(difference, FrequencyOffset), "Difference should be an offset"
    assert difference.hz == 2.5e8, "Difference value"
    assert isinstance(first + difference, OpticalFrequency), "Shifted type"
    assert first + difference == second, "Shifted value"
    assert isinstance(first - difference, OpticalFrequency), "Lowered type"
    assert -difference == FrequencyOffset.from_hz(-2.5e8), "Negation"
    assert abs(-difference) == difference, "Absolute value"
    assert first * 3 == OpticalFrequency.from_hz(3e9), "Integer scaling"
    assert first < second, "Ordering"


def test_scaling_rejects_floats():
    """
    Only integer factors keep the value exact
    """
    with raises(TypeError):
        OpticalFrequency.from_hz(1e9) * 1.5
    with raises(TypeError):
        OpticalFrequency(1.5)
    with raises(TypeError):
        OpticalFrequency(True)


def test_from_hz_rounds_to_nearest():
    """
    Hertz values round half-even to the millihertz
    """
    assert FrequencyOffset.from_hz(0.0015).millihertz == 2, "Half rounds to even"
    assert FrequencyOffset.from_hz(0.0025).millihertz == 2, "Half rounds to even"
    assert FrequencyOffset.from_hz(-1.2344).millihertz == -1234, "Negative rounding"
    assert FrequencyOffset.from_hz("12.345").millihertz == 12345, "String input"


def test_format_negative_offset():
    """
    Offsets format with their sign
    """
    offset = FrequencyOffset(-1234567)
    assert format_khz_exact(offset) == "-1.234567", "Exact negative format"
    assert format_khz(offset) == "-1.23", "Rounded negative format"


def test_fractional_offset():
    """
    Fractional offset of a 7.2e-13 step at the line frequency
    """
    ref = freq_from_khz_string("597366498654.62")
    step = FrequencyOffset.from_hz(430.0)
    ratio = fractional_offset(ref + step, ref)
    assert abs(ratio - 430.0 / ref.hz) < 1e-25, "Fractional offset inaccurate"
    assert fractional_offset(ref, ref) == 0.0, "Zero offset"
    with raises(ValueError):
        fractional_offset(ref, OpticalFrequency(0))


def test_time_series_basics(tmp_path):
    """
    Timing helpers and CSV export
    """
    series = TimeSeries([1.0, 2.0, 3.0, 4.0], 0.5, SeriesKind.FREQUENCY_OFFSET)
    assert len(series) == 4, "Length"
    assert series.rate == 2.0, "Rate"
    assert series.duration == 2.0, "Duration"
    assert np.allclose(series.times(), [0.0, 0.5, 1.0, 1.5]), "Times"
    assert series.mean() == 2.5, "Mean"
    assert np.array_equal(series.tail(0.5).values, [3.0, 4.0]), "Tail"

    fractional = series.with_values([0, 0, 0, 0], SeriesKind.FRACTIONAL_FREQUENCY)
    assert fractional.kind == SeriesKind.FRACTIONAL_FREQUENCY, "Kind replaced"
    assert fractional.dt == 0.5, "Timing kept"

    path = series.to_csv(tmp_path / "series.csv", "offset_Hz")
    lines = path.read_text().splitlines()
    assert lines[0] == "time_s,offset_Hz", "Header"
    assert lines[1] == "0,1", "First row"
    assert len(lines) == 5, "Row count"


def test_time_series_is_read_only():
    """
    Samples cannot be modified in place
    """
    series = TimeSeries(np.zeros(3), 1.0, "detector")
    assert series.kind == SeriesKind.DETECTOR, "Kind parsed from its value"
    with raises(ValueError):
        series.values[0] = 1.0


def test_time_series_validation():
    """
    Empty records and non-positive intervals are rejected
    """
    with raises(ValueError):
        TimeSeries([], 1.0, SeriesKind.DETECTOR)
    with raises(ValueError):
        TimeSeries([1.0], 0.0, SeriesKind.DETECTOR)
    with raises(ValueError):
        TimeSeries([[1.0, 2.0]], 1.0, SeriesKind.DETECTOR)
