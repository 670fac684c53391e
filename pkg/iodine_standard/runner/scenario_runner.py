"""
Command-line runner: resolves the configuration, runs scenarios and writes
their summaries
"""

import argparse
import json
import sys
import zlib
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from iodine_standard import __version__
from iodine_standard.errors import (
    ConfigError,
    FrequencyStandardError,
    UnknownScenarioError,
)
from iodine_standard.runner.scenarios import register_all
from iodine_standard.runner.settings import (
    config_hash,
    default_out_dir,
    effective_config,
    validate_config,
)
from iodine_standard.utils import (
    configure_logging,
    debug,
    get_id,
    logger,
    set_args,
    write_json,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_CHECK = 3

SUMMARY_FILE = "summary.json"
PLOT_FILE = "plots.gp"


def scenario_seed(seed: int, name: str) -> int:
    """
    Master seed of one scenario, independent of which others run with it

    Parameters
    ----------
    seed : int
        Seed given on the command line
    name : string
        Scenario name

    Returns
    -------
    int
        Derived seed
    """
    sequence = np.random.SeedSequence([seed, zlib.crc32(name.encode("utf-8"))])
    return int(sequence.generate_state(1)[0])


def write_plot_script(directory: Path) -> Path:
    """
    Gnuplot script drawing the first two columns of every CSV in a directory
    """
    lines = [
        'set datafile separator ","',
        "set key autotitle columnhead",
        "set terminal pngcairo size 900,600",
    ]
    for csv in sorted(Path(directory).glob("*.csv")):
        lines.append("set output '{0}.png'".format(csv.stem))
        lines.append("plot '{0}' using 1:2 with lines".format(csv.name))
    path = Path(directory) / PLOT_FILE
    path.write_text("\n".join(lines) + "\n")
    return path


class ScenarioRunner:
    """
    Runs named scenarios against one effective configuration

    Attributes
    ----------
    config : dict
        Effective configuration
    out_dir : Path
        Each scenario writes into out_dir/<name>
    seed : int
        Master seed
    jobs : int
        Scenarios run concurrently
    plots : bool
        Whether to write a gnuplot script next to the data
    """

    # pylint: disable=too-many-arguments
    def __init__(
        self,
        config: dict,
        out_dir: Path,
        seed: int = 0,
        jobs: int = 1,
        plots: bool = False,
    ) -> "ScenarioRunner":
        if jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        self.config = config
        self.out_dir = Path(out_dir)
        self.seed = seed
        self.jobs = jobs
        self.plots = plots
        self.config_hash = config_hash(config)

    def run_one(self, name: str) -> dict:
        """
        Run a single scenario and write its summary

        Parameters
        ----------
        name : string
            Registered scenario name

        Returns
        -------
        dict
            The summary written to summary.json
        """
        func = register_all().get_scenario(name)
        directory = self.out_dir / name
        directory.mkdir(parents=True, exist_ok=True)
        seed = scenario_seed(self.seed, name)
        debug("ScenarioRunner", "run_one", "{0} (seed {1})".format(name, seed))

        result = func(self.config, seed, directory)
        summary = {
            "scenario": name,
            "seed": self.seed,
            "scenario_seed": seed,
            "config_hash": self.config_hash,
            "version": "v{0}".format(__version__),
            "run_id": get_id(self.config_hash, name, self.seed),
            "results": result.results,
            "checks": result.checks,
            "passed": all(result.checks.values()),
        }
        write_json(directory / SUMMARY_FILE, summary)
        if self.plots:
            write_plot_script(directory)
        return summary

    def run(self, names: list) -> list:
        """
        Run scenarios, in parallel when jobs > 1

        Returns
        -------
        list
            Summaries, in the order the names were given
        """
        if self.jobs == 1 or len(names) < 2:
            return [self.run_one(name) for name in names]

        with ProcessPoolExecutor(max_workers=self.jobs) as executor:
            futures = [
                executor.submit(
                    _run_one,
                    self.config,
                    self.out_dir,
                    self.seed,
                    self.plots,
                    name,
                )
                for name in names
            ]
            return [future.result() for future in futures]


# pylint: disable=too-many-arguments
def _run_one(config: dict, out_dir: Path, seed: int, plots: bool, name: str) -> dict:
    return ScenarioRunner(config, out_dir, seed, 1, plots).run_one(name)


def failed_checks(summaries: list) -> list:
    """
    "scenario: check" for every check that did not pass
    """
    return [
        "{0}: {1}".format(summary["scenario"], check)
        for summary in summaries
        for check, passed in summary["checks"].items()
        if not passed
    ]


def parse_args(argv: list = None) -> argparse.Namespace:
    """
    Parse command-line arguments
    """
    tracker = register_all()
    listing = "\n".join(
        "  {0:<16} {1}".format(name, tracker.descriptions[name])
        for name in tracker.names()
    )
    parser = argparse.ArgumentParser(
        description="Simulate an iodine-stabilized laser frequency standard",
        epilog="Scenarios:\n" + listing,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument(
        "-s",
        "--scenario",
        type=str,
        default="all",
        help='Comma-separated scenario names, or "all"',
    )
    parser.add_argument("-c", "--config", type=Path, help="TOML configuration file")
    parser.add_argument(
        "-o", "--out", type=Path, help="Output directory (default $IODINE_STANDARD_OUT)"
    )
    parser.add_argument("--seed", type=int, default=0, help="Master random seed")
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="Override one configuration value; may be repeated",
    )
    parser.add_argument(
        "-j", "--jobs", type=int, default=1, help="Scenarios to run in parallel"
    )
    parser.add_argument(
        "--check", action="store_true", help="Exit with 3 if any check fails"
    )
    parser.add_argument(
        "--plots", action="store_true", help="Also write gnuplot scripts"
    )
    parser.add_argument(
        "--validate",
        type=Path,
        metavar="CONFIG",
        help="Only validate a configuration file and print the report",
    )
    parser.add_argument(
        "-d", "--debug", action="store_true", help="Whether to print debug messages"
    )
    return parser.parse_args(argv)


def validate(path: Path) -> int:
    """
    Print the validation report of a config file

    Returns
    -------
    int
        Exit status
    """
    report = validate_config(path)
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    for message in report.unknown_keys:
        logger.warning("%s", message)
    for message in report.range_errors:
        logger.error("%s", message)
    return EXIT_OK if report.ok else EXIT_CONFIG


def main(argv: list = None) -> int:
    """
    Entry point of the iodine-standard command

    Parameters
    ----------
    argv = None : list
        Arguments, defaulting to the process command line

    Returns
    -------
    int
        0 on success, 1 for configuration errors, 2 for runtime errors and
        3 when --check is given and a check failed
    """
    args = parse_args(argv)
    set_args({"debug": args.debug})
    configure_logging(args.debug)

    try:
        if args.validate:
            return validate(args.validate)
        config = effective_config(args.config, args.set)
        names = register_all().resolve(args.scenario)
        runner = ScenarioRunner(
            config, args.out or default_out_dir(), args.seed, args.jobs, args.plots
        )
        summaries = runner.run(names)
    except (ConfigError, UnknownScenarioError) as error:
        logger.error("%s", error)
        return EXIT_CONFIG
    except (FrequencyStandardError, OSError, ValueError) as error:
        logger.error("%s", error)
        return EXIT_RUNTIME

    for summary in summaries:
        logger.info(
            "%s: %s", summary["scenario"], "passed" if summary["passed"] else "FAILED"
        )
    failed = failed_checks(summaries)
    for check in failed:
        logger.warning("Check failed: %s", check)
    if args.check and failed:
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
