"""
Shared fixtures: the default absorber model
"""
from pytest import fixture

from iodine_standard.freqcore import freq_from_khz_string
from iodine_standard.lineshape import (
    BroadeningModel,
    CellConditions,
    HyperfineLine,
    LineContext,
    ShiftModel,
)

LINE_KHZ = "597366498654.62"


@fixture(name="line")
def fixture_line():
    """
    The hyperfine component with default decay rates
    """
    return HyperfineLine(freq_from_khz_string(LINE_KHZ))


@fixture(name="model")
def fixture_model(line):
    """
    Shift model calibrated to -38.4 kHz/Pa at 0.33 Pa
    """
    return ShiftModel.calibrated(BroadeningModel.from_anchors(), line.asymmetry)


@fixture(name="context")
def fixture_context(line, model):
    """
    Default absorber context
    """
    return LineContext(line, model, CellConditions())
