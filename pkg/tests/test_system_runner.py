import json
import os

import numpy as np
import pytest

from core.config_manager import parse_text
from core.errors import EXIT_CONFIG_ERROR, EXIT_NUMERICAL_ERROR, EXIT_OK
from core.system_runner import SystemRunner, run
from data import exporters
from ui.cli import main

SMALL_RUN = """
[system]
preset = harmonic
n_points = 64
n_ground = 6
n_excited = 6

[pulse]
t_final = 2000
n_steps = 400
fwhm = 300
peak = 0.01
spectral_cut = 0.1

[functional]
variant = assembly
n_max = 2

[krotov]
lambda = 50
max_iterations = 2
check_monotonicity = false

[cooling]
initial_levels = 1-3
n_cycles = 10

[output]
directory = {out}
"""


@pytest.fixture
def config_file(tmp_path):
    def write(extra: str = "", name: str = "run.ini"):
        path = tmp_path / name
        path.write_text(SMALL_RUN.format(out=tmp_path / "out") + extra)
        return str(path)
    return write


def test_solve_writes_harmonic_levels(tmp_path, config_file):
    assert main(["solve", "--config", config_file()]) == EXIT_OK
    frame, meta = exporters.read_csv(str(tmp_path / "out" / "levels.csv"))
    assert len(meta["config_hash"]) == 64
    assert "energy=hartree" in meta["units"]
    ground = frame[frame["surface"] == "ground"]
    np.testing.assert_allclose(ground["energy"], 0.01 * (np.arange(6) + 0.5), rtol=1e-5)


def test_pipeline_writes_every_artifact(tmp_path, config_file):
    assert main(["pipeline", "--config", config_file()]) == EXIT_OK
    out = tmp_path / "out"
    for name in ("levels.csv", "fc_map.csv", "emission.csv", "guess_pulse.csv", "guess_spectrum.csv",
                 "convergence.csv", "optimized_pulse.csv", "optimized_spectrum.csv",
                 "optimization_summary.json", "cooling_history_optimized.csv", "cooling_history_guess.csv",
                 "cooling_history_spectral_cut.csv", "cooling_summary.csv", "cooling_summary.json"):
        assert (out / name).exists(), name
    assert not (out / exporters.INCOMPLETE_MARKER).exists()

    convergence, _ = exporters.read_csv(str(out / "convergence.csv"))
    assert list(convergence["iteration"]) == [0, 1, 2]
    summary = json.loads((out / "optimization_summary.json").read_text())
    assert summary["iterations"] == 2
    assert summary["stop_reason"]
    assert summary["optimized_energy"]["unit"] == "uJ"
    cooling = json.loads((out / "cooling_summary.json").read_text())
    assert set(cooling["runs"]) == {"optimized", "guess", "spectral_cut"}


@pytest.mark.slow
def test_repeated_runs_are_byte_identical(tmp_path, config_file):
    path = config_file()
    out = tmp_path / "out"
    names = ("levels.csv", "fc_map.csv", "emission.csv", "convergence.csv", "optimized_pulse.csv",
             "cooling_history_optimized.csv")
    assert main(["pipeline", "--config", path]) == EXIT_OK
    first = {name: (out / name).read_bytes() for name in names}
    assert main(["pipeline", "--config", path]) == EXIT_OK
    for name in names:
        assert (out / name).read_bytes() == first[name], name


def test_optimized_pulse_survives_reload(tmp_path, config_file):
    config = parse_text(open(config_file()).read())
    runner = SystemRunner(config)
    runner.run("optimize")
    reloaded = exporters.read_pulse(str(tmp_path / "out" / "optimized_pulse.csv"))
    np.testing.assert_array_equal(reloaded.envelope, runner._result.pulse.envelope)
    assert reloaded.omega_L == runner._result.pulse.omega_L

    # cool 阶段单独运行时读取已写出的优化脉冲
    assert run("cool", config) == EXIT_OK


def test_bad_config_exit_code(config_file):
    path = config_file(name="bad.ini")
    with open(path) as f:
        text = f.read().replace("n_max = 2\n", "n_max = 2\nlambda_ss = -1\n")
    with open(path, "w") as f:
        f.write(text)
    assert main(["solve", "--config", path]) == EXIT_CONFIG_ERROR
    assert main(["solve", "--config", "does-not-exist.ini"]) == EXIT_CONFIG_ERROR


def test_cool_without_optimized_pulse_marks_output_incomplete(tmp_path, config_file):
    assert main(["cool", "--config", config_file()]) == EXIT_CONFIG_ERROR
    marker = tmp_path / "out" / exporters.INCOMPLETE_MARKER
    assert marker.exists()
    assert "stage: cool" in marker.read_text()

    # 成功的运行清除标记
    assert main(["solve", "--config", config_file()]) == EXIT_OK
    assert not marker.exists()


def test_oversized_time_step_is_a_numerical_error(tmp_path, config_file):
    path = config_file(name="coarse.ini")
    with open(path) as f:
        text = f.read().replace("t_final = 2000\nn_steps = 400", "t_final = 200000\nn_steps = 4")
    with open(path, "w") as f:
        f.write(text)
    assert main(["optimize", "--config", path]) == EXIT_NUMERICAL_ERROR
    assert (tmp_path / "out" / exporters.INCOMPLETE_MARKER).exists()


def test_command_line_overrides(tmp_path, config_file):
    out = tmp_path / "override"
    assert main(["optimize", "--config", config_file(), "--out", str(out), "--max-iter", "1",
                 "--variant", "sym"]) == EXIT_OK
    summary = json.loads((out / "optimization_summary.json").read_text())
    assert summary["iterations"] == 1
    assert "J_sym" in summary["final"]
    assert not os.path.exists(tmp_path / "out" / "convergence.csv")


def test_unknown_command_is_rejected(config_file):
    with pytest.raises(SystemExit):
        main(["anneal", "--config", config_file()])
