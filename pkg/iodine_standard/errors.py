"""
Exceptions raised by the frequency standard toolkit

Each one also derives from the builtin a caller would naturally catch,
so code written against ValueError/RuntimeError keeps working
"""


class FrequencyStandardError(Exception):
    """
    Base class for every error raised by this package
    """


class PrecisionError(FrequencyStandardError, ValueError):
    """
    A value cannot be represented exactly in millihertz
    """


class ConfigError(FrequencyStandardError, ValueError):
    """
    Invalid configuration file, key or override
    """


class RegimeError(FrequencyStandardError, ValueError):
    """
    A model was asked to work outside its domain of validity
    """


class UndersampledError(FrequencyStandardError, ValueError):
    """
    A record is sampled too slowly for the requested reference frequency
    """


class InsufficientDataError(FrequencyStandardError, ValueError):
    """
    Not enough samples/points for the requested statistic
    """


class NoZeroCrossingError(FrequencyStandardError, RuntimeError):
    """
    A discriminator has no zero crossing in the searched interval
    """


class DivergenceError(FrequencyStandardError, RuntimeError):
    """
    An adaptive filter or loop ran away
    """


class ConvergenceError(FrequencyStandardError, RuntimeError):
    """
    An iterative fit did not converge
    """


class AmbiguousModeError(FrequencyStandardError, RuntimeError):
    """
    The comb mode number cannot be rounded unambiguously
    """

    def __init__(self, message: str, estimate: float = None):
        super().__init__(message)
        self.estimate = estimate


class UnknownScenarioError(FrequencyStandardError, NameError):
    """
    No scenario is registered under the requested name
    """
