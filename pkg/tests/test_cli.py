from __future__ import annotations

import json
import subprocess
import sys

import pytest

from qpulse.cli import main
from qpulse.results import read_table

SWEEP = """
protocol = "arp"
run = "sweep"

[pulse]
theta = "5 pi"
tau0 = "100 fs"
alpha_norm = 0.8

[[sweep.axes]]
name = "theta"
min = 1
max = 5
count = 3
normalization = "theta_in_pi"

[[sweep.axes]]
name = "alpha"
min = -2
max = 2
count = 2
normalization = "alpha_over_tau0_sq"
"""


def write(tmp_path, text, name="exp"):
    p = tmp_path / f"{name}.toml"
    p.write_text(text)
    return str(p)


def stderr_errors(err):
    return [json.loads(l) for l in err.splitlines() if l.startswith("{")]


def test_recipes_lists_bundled_figures(capsys):
    assert main(["recipes"]) == 0
    assert "fig3" in capsys.readouterr().out.split()


def test_pulse_writes_spectrum_and_envelope(tmp_path, capsys):
    assert main(["pulse", "--recipe", "fig2b", "--out", str(tmp_path), "--format", "json"]) == 0
    out = capsys.readouterr().out.split()
    assert [p.rsplit("/", 1)[1] for p in out] == ["fig2b_spectrum.json", "fig2b_envelope.json"]
    spec = read_table(out[0])
    assert spec.columns == ("omega_offset_THz", "re_amplitude", "im_amplitude")
    assert read_table(out[1]).columns == ("t_ps", "re_omega_rad_per_ps", "im_omega_rad_per_ps")


def test_evolve_with_plot(tmp_path, capsys):
    assert main(["evolve", "--recipe", "fig2a", "--out", str(tmp_path), "--plot"]) == 0
    paths = capsys.readouterr().out.split()
    assert paths[0].endswith("fig2a_trajectory.csv")
    svg = (tmp_path / "fig2a_trajectory.svg").read_text()
    assert svg.lstrip().startswith("<?xml") and "<svg" in svg


def test_sweep_from_config_with_workers_and_plot(tmp_path, capsys):
    cfg = write(tmp_path, SWEEP)
    out = tmp_path / "o"
    assert main(["run", "--config", cfg, "--out", str(out), "--workers", "2", "--plot"]) == 0
    t = read_table(out / "exp_sweep.csv")
    assert len(t.rows) == 6
    assert (out / "exp_sweep.svg").stat().st_size > 0
    # the same run on one worker produces an identical file
    out1 = tmp_path / "o1"
    assert main(["sweep", "--config", cfg, "--out", str(out1)]) == 0
    assert (out / "exp_sweep.csv").read_text() == (out1 / "exp_sweep.csv").read_text()


@pytest.mark.parametrize(
    "argv_tail,match",
    [
        (["--recipe", "nope"], "unknown recipe"),
        ([], "exactly one"),
        (["--recipe", "fig3", "--workers", "0"], "workers"),
    ],
)
def test_config_errors_exit_1_with_json(argv_tail, match, capsys):
    assert main(["sweep", *argv_tail]) == 1
    errs = stderr_errors(capsys.readouterr().err)
    assert errs and errs[-1]["error"] == "config" and match in errs[-1]["message"]


def test_bad_config_file_exits_1(tmp_path, capsys):
    cfg = write(tmp_path, SWEEP.replace('protocol = "arp"', 'protocol = ""'))
    assert main(["run", "--config", cfg]) == 1
    assert "rabi" in stderr_errors(capsys.readouterr().err)[-1]["message"]


def test_usage_error_exits_1(capsys):
    assert main(["frobnicate"]) == 1


def test_unwritable_output_exits_1(tmp_path, capsys):
    blocker = tmp_path / "f"
    blocker.write_text("")
    assert main(["pulse", "--recipe", "fig2a", "--out", str(blocker / "x")]) == 1
    assert stderr_errors(capsys.readouterr().err)[-1]["error"] == "config"


def test_numerical_failure_exits_2(tmp_path, capsys):
    text = SWEEP.replace("alpha_norm = 0.8", "alpha_norm = 200").replace('run = "sweep"', 'run = "evolve"')
    cfg = write(tmp_path, text + "\n[numerics]\nn_samples = 1024\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path)]) == 2
    err = stderr_errors(capsys.readouterr().err)[-1]
    assert err["error"] == "numerical" and "time window" in err["message"]


def test_validate_passes(capsys):
    assert main(["validate"]) == 0
    lines = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    assert lines and all(l["passed"] for l in lines)
    names = {l["check"] for l in lines}
    assert {"parseval", "notch_zero", "rhs_purity", "determinism_across_workers"} <= names


def test_console_script_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "qpulse.cli", "--version"], capture_output=True, text=True
    )
    assert proc.returncode == 0 and proc.stdout.strip() == "qpulse-sim 0.1.0"
