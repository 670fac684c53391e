"""
Test the command-line runner: outputs, determinism and exit codes
"""
import json

from pytest import fixture

from iodine_standard.runner.scenario_runner import (
    EXIT_CHECK,
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_RUNTIME,
    PLOT_FILE,
    SUMMARY_FILE,
    ScenarioRunner,
    failed_checks,
    main,
    scenario_seed,
)
from iodine_standard.runner.scenario_tracker import ScenarioTracker
from iodine_standard.runner.settings import effective_config

FAST = ["--set", "comb.mode_trials=50", "--set", "repeatability.trials=5"]


@fixture(autouse=True)
def setup():
    """
    Start every test from an empty registry
    """
    ScenarioTracker().reset()


def _summary(out_dir, name: str) -> dict:
    return json.loads((out_dir / name / SUMMARY_FILE).read_text())


def _tree(directory) -> dict:
    return {
        str(path.relative_to(directory)): path.read_bytes()
        for path in sorted(directory.rglob("*"))
        if path.is_file()
    }


def test_scenario_seed():
    """
    Scenario seeds depend on the master seed and the name only
    """
    assert scenario_seed(0, "allan") == scenario_seed(0, "allan"), "Stable"
    assert scenario_seed(0, "allan") != scenario_seed(1, "allan"), "Master seed"
    assert scenario_seed(0, "allan") != scenario_seed(0, "lock-run"), "Name"


def test_summary_fields(tmp_path):
    """
    Each scenario writes a summary with its provenance
    """
    assert main(["-s", "pressure-shift", "-o", str(tmp_path)]) == EXIT_OK
    summary = _summary(tmp_path, "pressure-shift")
    assert set(summary) == {
        "scenario",
        "seed",
        "scenario_seed",
        "config_hash",
        "version",
        "run_id",
        "results",
        "checks",
        "passed",
    }, "Summary fields"
    assert summary["seed"] == 0, "Master seed"
    assert summary["version"].startswith("v"), "Version tag"
    assert summary["passed"] == all(summary["checks"].values()), "Passed flag"
    assert (tmp_path / "pressure-shift" / "pressure_shift.csv").exists(), "Data file"


def test_deterministic_outputs(tmp_path):
    """
    The same seed and config give byte-identical outputs
    """
    args = ["-s", "pressure-shift,allan,comb-measure", "--seed", "5"] + FAST
    assert main(args + ["-o", str(tmp_path / "first")]) == EXIT_OK
    assert main(args + ["-o", str(tmp_path / "second")]) == EXIT_OK
    first, second = _tree(tmp_path / "first"), _tree(tmp_path / "second")
    assert first, "Something was written"
    assert first == second, "Outputs differ between identical runs"


def test_parallel_matches_serial(tmp_path):
    """
    Running scenarios in parallel does not change their outputs
    """
    config = effective_config(None, ["comb.mode_trials=50"])
    names = ["allan", "comb-measure"]
    serial = ScenarioRunner(config, tmp_path / "serial", seed=2).run(names)
    parallel = ScenarioRunner(config, tmp_path / "parallel", seed=2, jobs=2).run(names)
    assert [s["scenario"] for s in parallel] == names, "Order kept"
    assert serial == parallel, "Summaries differ"
    assert _tree(tmp_path / "serial") == _tree(tmp_path / "parallel"), "Files differ"


def test_plots(tmp_path):
    """
    --plots writes a gnuplot script next to the data
    """
    assert main(["-s", "allan", "-o", str(tmp_path), "--plots"]) == EXIT_OK
    script = (tmp_path / "allan" / PLOT_FILE).read_text()
    assert "plot 'allan.csv'" in script, "Script should draw the CSV"


def test_full_pipeline_noiseless_exact(tmp_path):
    """
    Without noise the pipeline returns the configured frequency exactly
    """
    args = ["-s", "full-pipeline", "-o", str(tmp_path), "--set", "servo.duration=20"]
    assert main(args) == EXIT_OK
    summary = _summary(tmp_path, "full-pipeline")
    assert summary["checks"]["noiseless_run_exact"], "Noiseless run should be exact"
    assert (
        summary["results"]["noiseless_absolute_kHz"] == "597366498654.62"
    ), "Configured frequency"
    assert summary["results"]["p"] == 597366, "Mode number"


def test_lock_run_outputs(tmp_path):
    """
    A short lock writes its records and reports its checks
    """
    args = ["-s", "lock-run", "-o", str(tmp_path), "--set", "servo.duration=40"]
    assert main(args) == EXIT_OK
    for name in ("locked.csv", "counted.csv", "measurement.json", "allan.csv"):
        assert (tmp_path / "lock-run" / name).exists(), "{0} missing".format(name)
    checks = _summary(tmp_path, "lock-run")["checks"]
    assert checks["stayed_in_lock"], "Lost lock"
    assert checks["double_demod_ignores_background"], "Background leaked through"
    assert checks["single_demod_follows_background"], "Single demodulation moved"


def test_config_errors(tmp_path):
    """
    Configuration problems exit with 1
    """
    out = ["-o", str(tmp_path)]
    assert main(["-s", "nope"] + out) == EXIT_CONFIG, "Unknown scenario"
    assert main(["--set", "cell.pressure=-1"] + out) == EXIT_CONFIG, "Bad value"
    assert main(["--set", "cell.presure=0.2"] + out) == EXIT_CONFIG, "Unknown key"
    assert main(["-s", "allan", "-j", "0"] + out) == EXIT_CONFIG, "Bad job count"
    assert main(["-c", str(tmp_path / "missing.toml")] + out) == EXIT_CONFIG


def test_runtime_error(tmp_path):
    """
    A run too short to leave anything after settling exits with 2
    """
    args = ["-s", "lock-run", "-o", str(tmp_path), "--set", "servo.duration=0.5"]
    assert main(args) == EXIT_RUNTIME


def test_check_exit_code(tmp_path):
    """
    Failed checks only change the exit code under --check
    """
    args = ["-s", "pressure-shift", "-o", str(tmp_path)]
    weak = ["--set", "shift.power_coeff=500"]
    assert main(args + weak) == EXIT_OK, "Failures are reported, not fatal"
    assert main(args + weak + ["--check"]) == EXIT_CHECK, "--check fails the run"
    assert main(args + ["--check"]) == EXIT_OK, "Calibrated run passes"


def test_validate(tmp_path, capsys):
    """
    --validate prints the report and exits with 0 or 1
    """
    good = tmp_path / "good.toml"
    good.write_text("[cell]\npressure = 0.2\n")
    assert main(["--validate", str(good)]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["effective"]["cell"]["pressure"] == 0.2, "Effective value"

    bad = tmp_path / "bad.toml"
    bad.write_text("[cell]\npresure = 0.2\n")
    assert main(["--validate", str(bad)]) == EXIT_CONFIG
    report = json.loads(capsys.readouterr().out)
    assert report["unknown_keys"], "Unknown key reported"


def test_failed_checks():
    """
    Failed checks are listed as scenario: check
    """
    summaries = [
        {"scenario": "a", "checks": {"x": True, "y": False}},
        {"scenario": "b", "checks": {"z": False}},
    ]
    assert failed_checks(summaries) == ["a: y", "b: z"], "Failures"


def test_comb_measure_checks_identity_across_span(tmp_path):
    """
    comb-measure recovers the laser exactly wherever it sits between two teeth
    """
    args = ["-s", "comb-measure", "-o", str(tmp_path)] + FAST
    assert main(args) == EXIT_OK
    checks = _summary(tmp_path, "comb-measure")["checks"]
    assert checks["identity_across_span"], "Identity should hold across the span"


def test_repeatability_aom_day_setting(tmp_path):
    """
    The AOM day is configurable and must name one of the sets or -1
    """
    out = ["-s", "repeatability", "-o", str(tmp_path)] + FAST
    assert main(out + ["--set", "repeatability.aom_day=-1"]) == EXIT_OK
    assert main(out + ["--set", "repeatability.aom_day=-2"]) == EXIT_CONFIG
