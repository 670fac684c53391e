"""
Configuration: defaults, TOML loading, overrides, validation, and domain objects
"""

import hashlib
import json
import math
from os import getenv
from pathlib import Path
from typing import NamedTuple

from iodine_standard.analysis import RepeatabilitySetup
from iodine_standard.canceller import (
    CancellerConfig,
    IntensityNoiseSetup,
    RamNoiseSetup,
    mu_for_bandwidth,
)
from iodine_standard.comb import CombConfig, CounterConfig
from iodine_standard.errors import ConfigError, PrecisionError
from iodine_standard.freqcore import (
    FrequencyOffset,
    OpticalFrequency,
    freq_from_khz_string,
)
from iodine_standard.lineshape import (
    BroadeningModel,
    CellConditions,
    HyperfineLine,
    LineContext,
    ShiftModel,
    doppler_sigma,
    natural_decay_rates,
)
from iodine_standard.servo import NoiseModel, PiConfig, PrestabConfig
from iodine_standard.sigchain import ErrorChain, ModulationConfig, PumpModConfig
from iodine_standard.utils import edit_distance

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

OUT_DIR_VARIABLE = "IODINE_STANDARD_OUT"
SUGGESTION_DISTANCE = 2


class Setting(NamedTuple):
    """
    A configurable value

    Attributes
    ----------
    default
        Value used when the file does not set it
    kind : type
        float, int, bool, str or list
    low : float
        Smallest allowed value, inclusive
    high : float
        Largest allowed value, inclusive
    positive : bool
        Whether the value must be strictly positive
    choices : tuple
        Allowed values for strings
    """

    default: object
    kind: type = float
    low: float = None
    high: float = None
    positive: bool = False
    choices: tuple = None


def _positive(default, kind=float) -> Setting:
    return Setting(default, kind, positive=True)


def _non_negative(default, kind=float) -> Setting:
    return Setting(default, kind, low=0)


DEFAULTS = {
    "line": {
        "absolute_khz": Setting("597366498654.62", str),
        "natural_hwhm": _positive(10e3),
        "decay_ratio": _positive(4.0),
        "mass_u": _positive(254.0),
        "temperature": _positive(300.0),
    },
    "cell": {
        "pressure": _positive(0.33),
        "probe_power": _positive(400e-6),
        "pump_power": _positive(2.7e-3),
        "beam_diameter": _positive(6e-3),
        "cell_length": _positive(4.0),
    },
    "broadening": {
        "low_pressure": _positive(0.066),
        "low_hwhm": _positive(32e3),
        "high_pressure": _positive(0.33),
        "high_hwhm": _positive(45e3),
    },
    "shift": {
        "slope": Setting(-38.4e3),
        "slope_pressure": _positive(0.33),
        "linear_fraction": Setting(0.6, low=0, high=1),
        "power_coeff": _non_negative(1e3),
        "power_sign": Setting(-1, int, choices=(-1, 1)),
        "reference_probe_power": _positive(400e-6),
    },
    "probe": {
        "mod_freq": _positive(2.5e6),
        "index": _non_negative(1.0),
        "mode": Setting("phase", str, choices=("phase", "frequency")),
        "ram_depth": Setting(0.0, low=0, high=0.5),
        "ram_phase": Setting(0.0),
        "aom_extra_ram": Setting(0.0, low=0, high=0.5),
        "ram_rejection_db": _non_negative(45.0),
        "dip_contrast": Setting(0.01, low=0, high=1),
        "doppler_depth": _positive(1.0),
    },
    "pump": {
        "mt_mod_freq": _positive(125e3),
        "chop_freq": _positive(200.0),
        "aom_probe_shift": Setting(250e6),
        "aom_pump_shift": Setting(80e6),
        "mt_deviation": _non_negative(30e3),
        "mt_amplitude": _positive(1.0),
        "background_offset": Setting(0.0),
        "chop_samples": Setting(400, int, low=2),
    },
    "lockin": {
        "time_constant": _positive(0.1),
        "td_time_constant": _positive(1e-4),
        "td_rate": _positive(20e6),
        "td_duration": _positive(2e-3),
        "detector_noise_psd": _non_negative(0.0),
    },
    "canceller": {
        "intensity_ref_freq": _positive(125e3),
        "intensity_rate": _positive(1e6),
        "intensity_notch_fwhm": _positive(1e3),
        "intensity_duration": _positive(4.0),
        "technical_psd": _non_negative(3981.0),
        "sensor_psd": _non_negative(6.94),
        "floor_psd": _positive(1.0),
        "intensity_band": _positive(16.0),
        "ram_ref_freq": _positive(2.5e6),
        "ram_rate": _positive(20e6),
        "ram_mu": Setting(1e-3, low=1e-9, high=0.999),
        "ram_duration": _positive(0.1),
        "ram_depth": Setting(1e-3, low=0, high=0.5),
        "ram_sensor_psd": _non_negative(1.6e-14),
        "ram_band": _positive(1e3),
        "ram_settle": _non_negative(5e-3),
        "clamp": _non_negative(0.0),
    },
    "noise": {
        "white_freq_psd": _non_negative(4e6),
        "flicker_freq_coeff": _non_negative(1e6),
        "linear_drift": _non_negative(0.0),
    },
    "prestab": {
        "unity_gain_freq": _positive(1e5),
        "suppression_floor": _non_negative(60.0),
    },
    "servo": {
        "kp": _non_negative(0.1),
        "ki": _non_negative(200.0),
        "update_rate": _positive(1e3),
        "correction_limit": _positive(5e6),
        "discriminator_noise": _non_negative(608.3),
        "discriminator": Setting(
            "modulation-transfer", str, choices=("modulation-transfer", "fm")
        ),
        "double_demod": Setting(True, bool),
        "start_offset": Setting(2e3),
        "duration": _positive(1000.0),
        "settle": _non_negative(1.0),
    },
    "comb": {
        "f_rep_hz": _positive(1e9),
        "f0_hz": _non_negative(140e6),
        "ref_instability_1s": _non_negative(7.2e-14),
        "f_rep_step": _positive(10e3),
        "sign_step": _positive(100.0),
        "mode_trials": Setting(1000, int, low=1),
        "mode_count_noise": _non_negative(100.0),
    },
    "counter": {
        "gate": _positive(1.0),
        "resolution_mhz": Setting(1, int, low=1),
        "dead_time": _non_negative(0.0),
    },
    "analysis": {
        "scan_points": Setting(161, int, low=8),
        "scan_half_span": Setting(4.0, low=1.5),
        "scan_noise": _non_negative(0.02),
        "sweeps": Setting(3, int, low=1),
        "fit_seeds": Setting(100, int, low=1),
        "allan_taus": Setting([1, 2, 5, 10, 20, 30, 50, 100], list),
        "overlapping": Setting(False, bool),
        "slope_window": _positive(0.05),
        "allan_gates": Setting(1000, int, low=3),
    },
    "repeatability": {
        "sets": Setting(4, int, low=2),
        "per_set": Setting(10, int, low=1),
        "pressure_sigma": _non_negative(0.022),
        "within_set_sigma": _non_negative(65.0),
        "aom_day": Setting(1, int, low=-1),
        "trials": Setting(200, int, low=1),
    },
}


def default_config() -> dict:
    """
    The effective configuration with nothing overridden
    """
    return {
        section: {key: _copy(setting.default) for key, setting in keys.items()}
        for section, keys in DEFAULTS.items()
    }


def _copy(value):
    return list(value) if isinstance(value, list) else value


def default_out_dir() -> Path:
    """
    Output directory from IODINE_STANDARD_OUT, else ./out
    """
    return Path(getenv(OUT_DIR_VARIABLE) or "out")


def load_config(path: Path) -> dict:
    """
    Read a TOML file

    Parameters
    ----------
    path : Path
        The file; None reads nothing

    Returns
    -------
    dict
        Raw sections and keys
    """
    if path is None:
        return {}
    try:
        with open(path, "rb") as handle:
            return tomllib.load(handle)
    except OSError as error:
        raise ConfigError(
            "Cannot read config '{0}': {1}".format(path, error)
        ) from error
    except tomllib.TOMLDecodeError as error:
        raise ConfigError(
            "Cannot parse config '{0}': {1}".format(path, error)
        ) from error


def suggest_key(dotted: str) -> str:
    """
    Nearest known dotted key within edit distance 2, or None
    """
    best, best_distance = None, SUGGESTION_DISTANCE + 1
    for section, keys in DEFAULTS.items():
        for key in keys:
            candidate = "{0}.{1}".format(section, key)
            distance = min(
                edit_distance(dotted, candidate),
                edit_distance(dotted.split(".")[-1], key),
            )
            if distance < best_distance:
                best, best_distance = candidate, distance
    return best


def _unknown_message(dotted: str) -> str:
    suggestion = suggest_key(dotted)
    if suggestion:
        return "Unknown key '{0}', did you mean '{1}'?".format(dotted, suggestion)
    return "Unknown key '{0}'".format(dotted)


def _check_value(dotted: str, setting: Setting, value) -> str:
    """
    Returns a message if the value has the wrong type or range, else None
    """
    kind = setting.kind
    if kind is float:
        valid = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif kind is int:
        valid = isinstance(value, int) and not isinstance(value, bool)
    else:
        valid = isinstance(value, kind)
    if not valid:
        return "'{0}' must be of type {1}, got {2!r}".format(
            dotted, kind.__name__, value
        )

    if setting.choices is not None and value not in setting.choices:
        return "'{0}' must be one of {1}, got {2!r}".format(
            dotted, list(setting.choices), value
        )
    if kind in (int, float):
        if isinstance(value, float) and not math.isfinite(value):
            return "'{0}' must be finite".format(dotted)
        if setting.positive and not value > 0:
            return "'{0}' must be positive, got {1!r}".format(dotted, value)
        if setting.low is not None and value < setting.low:
            return "'{0}' must be >= {1}, got {2!r}".format(dotted, setting.low, value)
        if setting.high is not None and value > setting.high:
            return "'{0}' must be <= {1}, got {2!r}".format(dotted, setting.high, value)
    return None


class ValidationReport(NamedTuple):
    """
    Outcome of checking a configuration
    """

    unknown_keys: list
    range_errors: list
    effective: dict

    @property
    def ok(self) -> bool:
        """
        True when nothing was flagged
        """
        return not self.unknown_keys and not self.range_errors

    def to_dict(self) -> dict:
        """
        JSON-ready form
        """
        return {
            "unknown_keys": self.unknown_keys,
            "range_errors": self.range_errors,
            "effective": self.effective,
        }


def merge_config(raw: dict) -> ValidationReport:
    """
    Lay raw sections over the defaults and check every key

    Parameters
    ----------
    raw : dict
        Sections from a file and/or overrides

    Returns
    -------
    ValidationReport
        Unknown keys, range errors and the effective configuration
    """
    effective = default_config()
    unknown, errors = [], []
    for section, keys in raw.items():
        if section not in DEFAULTS or not isinstance(keys, dict):
            unknown.append(_unknown_message(section))
            continue
        for key, value in keys.items():
            dotted = "{0}.{1}".format(section, key)
            if key not in DEFAULTS[section]:
                unknown.append(_unknown_message(dotted))
                continue
            problem = _check_value(dotted, DEFAULTS[section][key], value)
            if problem:
                errors.append(problem)
            elif DEFAULTS[section][key].kind is float:
                effective[section][key] = float(value)
            else:
                effective[section][key] = _copy(value)
    return ValidationReport(unknown, errors, effective)


def validate_config(path: Path) -> ValidationReport:
    """
    Check a config file without running anything
    """
    return merge_config(load_config(path))


def parse_override(text: str) -> tuple:
    """
    Split "section.key=value", parsing the value as TOML (bare words as strings)

    Returns
    -------
    tuple
        (section, key, value)
    """
    if "=" not in text:
        raise ConfigError(
            "Override '{0}' is not of the form section.key=value".format(text)
        )
    dotted, raw_value = (part.strip() for part in text.split("=", 1))
    if dotted.count(".") != 1:
        raise ConfigError("Override key '{0}' must be section.key".format(dotted))
    section, key = dotted.split(".")
    try:
        value = tomllib.loads("value = {0}".format(raw_value))["value"]
    except tomllib.TOMLDecodeError:
        value = raw_value
    return section, key, value


def apply_overrides(raw: dict, overrides: list) -> dict:
    """
    Copy of raw sections with --set overrides applied

    Parameters
    ----------
    raw : dict
        Sections from the config file
    overrides : list
        "section.key=value" strings

    Throws
    ------
    ConfigError
        An override names an unknown key
    """
    merged = {
        section: dict(keys) for section, keys in raw.items() if isinstance(keys, dict)
    }
    for text in overrides or []:
        section, key, value = parse_override(text)
        if section not in DEFAULTS or key not in DEFAULTS[section]:
            raise ConfigError(_unknown_message("{0}.{1}".format(section, key)))
        merged.setdefault(section, {})[key] = value
    return merged


def effective_config(path: Path = None, overrides: list = None) -> dict:
    """
    The configuration a run uses

    Throws
    ------
    ConfigError
        Unknown keys or invalid values
    """
    report = merge_config(apply_overrides(load_config(path), overrides))
    if not report.ok:
        raise ConfigError("; ".join(report.unknown_keys + report.range_errors))
    try:
        freq_from_khz_string(report.effective["line"]["absolute_khz"])
    except PrecisionError as error:
        raise ConfigError("line.absolute_khz: {0}".format(error)) from error
    return report.effective


def config_hash(config: dict) -> str:
    """
    SHA-256 of the canonical JSON form
    """
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def build_line(config: dict) -> HyperfineLine:
    """
    The hyperfine line, its center placed so the configured frequency is the
    locked frequency at the configured reference conditions
    """
    section = config["line"]
    locked = freq_from_khz_string(section["absolute_khz"])
    gamma_e, gamma_g = natural_decay_rates(
        section["natural_hwhm"], section["decay_ratio"]
    )
    sigma = doppler_sigma(locked.hz, section["mass_u"], section["temperature"])
    provisional = HyperfineLine(
        locked, section["natural_hwhm"], gamma_e, gamma_g, sigma
    )
    shift = build_shift_model(config, provisional.asymmetry).shift_hz(
        config["cell"]["pressure"], config["cell"]["probe_power"], provisional.asymmetry
    )
    return HyperfineLine(
        locked - FrequencyOffset.from_hz(shift),
        section["natural_hwhm"],
        gamma_e,
        gamma_g,
        sigma,
    )


def build_broadening(config: dict) -> BroadeningModel:
    """
    Broadening through the two configured anchors
    """
    section = config["broadening"]
    return BroadeningModel.from_anchors(
        (section["low_pressure"], section["low_hwhm"]),
        (section["high_pressure"], section["high_hwhm"]),
    )


def build_shift_model(config: dict, asymmetry: float) -> ShiftModel:
    """
    Shift model calibrated to the configured slope
    """
    section = config["shift"]
    return ShiftModel.calibrated(
        build_broadening(config),
        asymmetry,
        slope=section["slope"],
        at=section["slope_pressure"],
        linear_fraction=section["linear_fraction"],
        power_coeff=section["power_coeff"],
        power_sign=section["power_sign"],
        reference_probe_power=section["reference_probe_power"],
    )


def build_conditions(config: dict) -> CellConditions:
    """
    Cell conditions
    """
    return CellConditions(**config["cell"])


def build_context(config: dict) -> LineContext:
    """
    Everything the detection chain needs about the absorber
    """
    line = build_line(config)
    return LineContext(
        line,
        build_shift_model(config, line.asymmetry),
        build_conditions(config),
        config["probe"]["dip_contrast"],
        config["probe"]["doppler_depth"],
    )


def build_modulation(config: dict) -> ModulationConfig:
    """
    Probe modulation
    """
    section = config["probe"]
    return ModulationConfig(
        probe_mod_freq=section["mod_freq"],
        index=section["index"],
        mode=section["mode"],
        ram_depth=section["ram_depth"],
        ram_phase=section["ram_phase"],
        aom_extra_ram=section["aom_extra_ram"],
    )


def build_pump(config: dict) -> PumpModConfig:
    """
    Pump modulation
    """
    return PumpModConfig(**config["pump"])


def build_chain(config: dict, context: LineContext = None) -> ErrorChain:
    """
    Error path of the long-term lock
    """
    return ErrorChain(
        context or build_context(config),
        build_modulation(config),
        build_pump(config),
        config["servo"]["discriminator"],
        config["servo"]["double_demod"],
    )


def build_noise(config: dict) -> NoiseModel:
    """
    Free-running laser noise
    """
    return NoiseModel(**config["noise"])


def build_prestab(config: dict) -> PrestabConfig:
    """
    Prestabilization loop
    """
    return PrestabConfig(**config["prestab"])


def build_pi(config: dict) -> PiConfig:
    """
    Long-term loop controller
    """
    section = config["servo"]
    return PiConfig(
        kp=section["kp"],
        ki=section["ki"],
        update_rate=section["update_rate"],
        correction_limit=section["correction_limit"],
        discriminator_noise=section["discriminator_noise"],
    )


def build_comb(config: dict) -> CombConfig:
    """
    Comb parameters
    """
    section = config["comb"]
    return CombConfig(
        OpticalFrequency.from_hz(section["f_rep_hz"]),
        OpticalFrequency.from_hz(section["f0_hz"]),
        section["ref_instability_1s"],
    )


def build_counter(config: dict) -> CounterConfig:
    """
    Counter
    """
    return CounterConfig(**config["counter"])


def _clamp(config: dict) -> float:
    return config["canceller"]["clamp"] or None


def build_intensity_setup(config: dict) -> IntensityNoiseSetup:
    """
    The 125 kHz beam-intensity experiment
    """
    section = config["canceller"]
    canceller = CancellerConfig(
        ref_freq=section["intensity_ref_freq"],
        rate=section["intensity_rate"],
        mu=mu_for_bandwidth(section["intensity_notch_fwhm"], section["intensity_rate"]),
        clamp=_clamp(config),
    )
    return IntensityNoiseSetup(
        canceller=canceller,
        duration=section["intensity_duration"],
        technical_psd=section["technical_psd"],
        sensor_psd=section["sensor_psd"],
        floor_psd=section["floor_psd"],
        band=section["intensity_band"],
    )


def build_ram_setup(config: dict) -> RamNoiseSetup:
    """
    The 2.5 MHz RAM experiment
    """
    section = config["canceller"]
    canceller = CancellerConfig(
        ref_freq=section["ram_ref_freq"],
        rate=section["ram_rate"],
        mu=section["ram_mu"],
        clamp=_clamp(config),
    )
    return RamNoiseSetup(
        canceller=canceller,
        duration=section["ram_duration"],
        ram_depth=section["ram_depth"],
        sensor_psd=section["ram_sensor_psd"],
        band=section["ram_band"],
        settle=section["ram_settle"],
    )


def build_repeatability(config: dict) -> RepeatabilitySetup:
    """
    Measurement-day synthesis
    """
    section = config["repeatability"]
    return RepeatabilitySetup(
        sets=section["sets"],
        per_set=section["per_set"],
        pressure_sigma=section["pressure_sigma"],
        within_set_sigma=section["within_set_sigma"],
        aom_day=section["aom_day"],
    )
