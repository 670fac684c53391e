"""
Generic utility functions
"""

import json
import logging
import math
import pprint
from os import getenv
from pathlib import Path
from uuid import NAMESPACE_URL, uuid5

import pandas as pd

LOGGER_NAME = "iodine_standard"
logger = logging.getLogger(LOGGER_NAME)

arguments = {}

CSV_FLOAT_FORMAT = "%.12g"


def set_args(args: dict) -> None:
    """
    Updates the global arguments with the given ones

    Parameters
    ----------
    args : dict
        Arguments to add, typically the parsed command line
    """
    arguments.update(args)


def get_id(config_hash: str, scenario: str, seed: int) -> str:
    """
    Returns a run ID that is stable for a given config, scenario and seed

    Parameters
    ----------
    config_hash : string
        Hash of the effective configuration
    scenario : string
        Scenario name
    seed : int
        Master seed of the run

    Returns
    -------
    string
        A name-based UUID
    """
    return str(uuid5(NAMESPACE_URL, "{0}/{1}/{2}".format(config_hash, scenario, seed)))


def do_debug() -> bool:
    """
    Whether to show debug messages

    Returns
    -------
    bool
        True if the command line asked for it or SHOW_DEBUG is set
    """
    return bool(arguments.get("debug")) or getenv("SHOW_DEBUG") in ("1", "true")


def configure_logging(debug_enabled: bool = False) -> None:
    """
    Attach a stream handler to the package logger

    Parameters
    ----------
    debug_enabled = False : bool
        Log at DEBUG level instead of INFO
    """
    if debug_enabled:
        set_args({"debug": True})
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
        logger.addHandler(handler)
    logger.setLevel(logging.DEBUG if do_debug() else logging.INFO)


# pylint: disable=bad-continuation
# black auto-format disagrees
def debug(cls: str, method: str, msg: str, max_width: int = 24) -> None:
    """
    Log a debug message, tagged with where it came from

    Parameters
    ----------
    cls : string
        The class or module this is called from
    method : string
        The method this is called from
    msg : string
        The message to log
    max_width = 24 : int
        The descriptor width, for padding
    """
    if not do_debug():
        return

    msg = str(msg).replace("\n", "\n" + (" " * (max_width + 3)))  # 3 is " | "
    descriptor = "{0}[{1}]".format(cls, method).rjust(max_width)
    logger.debug("%s | %s", descriptor, msg)


def debug_object(cls: str, method: str, obj: dict) -> None:
    """
    Debugs a dictionary, one aligned key per line

    Parameters
    ----------
    cls : string
        The class this is called from
    method : string
        The method this is called from
    obj : dict
        An object to debug
    """
    if not do_debug() or not obj:
        return

    max_key_len = max([len(k) for k in obj.keys()])
    message = "\n".join(
        ["{0} = {1}".format(k.rjust(max_key_len), v) for k, v in obj.items()]
    )
    debug(cls, method, message)


def edit_distance(first: str, second: str) -> int:
    """
    Levenshtein distance between two strings

    Parameters
    ----------
    first : string
        One string
    second : string
        The other string

    Returns
    -------
    int
        Minimum number of single-character edits
    """
    previous = list(range(len(second) + 1))
    for i, char_a in enumerate(first, 1):
        current = [i]
        for j, char_b in enumerate(second, 1):
            current.append(
                min(
                    previous[j] + 1,
                    current[j - 1] + 1,
                    previous[j - 1] + (char_a != char_b),
                )
            )
        previous = current
    return previous[-1]


def write_csv(path: Path, columns: dict) -> Path:
    """
    Write equal-length columns to a CSV file with a fixed float format

    Parameters
    ----------
    path : Path
        Destination file
    columns : dict
        Column name to sequence of values, in output order

    Returns
    -------
    Path
        The written file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(columns).to_csv(
        path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n"
    )
    return path


def write_json(path: Path, data: dict) -> Path:
    """
    Write a dictionary as indented, key-sorted JSON

    Parameters
    ----------
    path : Path
        Destination file
    data : dict
        JSON-serializable data

    Returns
    -------
    Path
        The written file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_jsonable(data), indent=2, sort_keys=True) + "\n")
    return path


def to_jsonable(thing):
    """
    Convert numpy scalars/arrays and nested containers to plain JSON types

    Parameters
    ----------
    thing
        The value to convert
    """
    if isinstance(thing, dict):
        return {str(k): to_jsonable(v) for k, v in thing.items()}
    if isinstance(thing, (list, tuple)):
        return [to_jsonable(v) for v in thing]
    if hasattr(thing, "tolist"):
        return to_jsonable(thing.tolist())
    if isinstance(thing, float) and not math.isfinite(thing):
        return str(thing)
    return thing


def get_object_differences(
    expected: dict, actual, properties: list, rel_tol: float = 1e-9
) -> dict:
    """
    Checks for differences between expected values and an object or dict

    Parameters
    ----------
    expected : dict
        Expected values by property name
    actual : object|dict
        The thing to compare
    properties : list
        The properties to compare
    rel_tol = 1e-9 : float
        Relative tolerance for float comparison

    Returns
    -------
    dict
        Any properties differing, with their expected and actual values
    """
    differences = {}
    for prop in properties:
        want = expected[prop]
        got = (
            actual.get(prop, "[No such property]")
            if isinstance(actual, dict)
            else getattr(actual, prop, "[No such property]")
        )

        if isinstance(want, dict):
            nested = get_object_differences(want, got, want.keys(), rel_tol)
            if nested:
                differences[prop] = nested
        elif isinstance(want, float) and isinstance(got, (int, float)):
            if not math.isclose(want, got, rel_tol=rel_tol, abs_tol=1e-15):
                differences[prop] = {"expected": want, "actual": got}
        elif want != got:
            differences[prop] = {"expected": want, "actual": got}

    return differences


def assert_objects_equal(expected: dict, actual, properties, capsys) -> None:
    """
    Assert an object's properties match the expected values

    Parameters
    ----------
    expected : dict
        Expected values
    actual
        Object or dict under test
    properties : list
        Properties to check
    capsys
        A capsys fixture, used to print mismatches
    """
    differences = get_object_differences(expected, actual, list(properties))
    if differences:
        with capsys.disabled():
            pprint.pprint(differences)
    assert not differences, "Value mismatch in '{0}'".format(
        "', '".join(differences.keys())
    )
