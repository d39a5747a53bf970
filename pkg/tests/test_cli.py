import json

import pytest
from click.testing import CliRunner

from wvlab.cli import cli

STRONG_KICK = """
name: strong
beam: {sigma: 1.075mm, wavelength: 780nm}
wv: {phi: 0.38, lever_arm: 0.34m, power: 1.45mW}
st: {focal_length: 1m, power: 400uW}
drive: {kind: sine, amplitude: 100.0, frequency: 7Hz}
run: {master_seed: 1}
"""


@pytest.fixture
def runner():
    return CliRunner()


def _summary(path):
    return json.loads((path / "summary.json").read_text(encoding="utf-8"))


def test_presets_command_lists_scenarios(runner):
    result = runner.invoke(cli, ["presets"])
    assert result.exit_code == 0
    assert "fig7" in result.output and "silent" in result.output


def test_analytic_fisher_shares(runner, tmp_path):
    result = runner.invoke(cli, ["fisher", "--scenario", "fig6", "--analytic-only", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    csv = (tmp_path / "fisher.csv").read_bytes()
    assert b"\r\n" in csv and csv.startswith(b"phi,")
    summary = _summary(tmp_path)
    assert summary["schema_version"] == 1
    assert summary["summary"]["points"] == 20
    assert summary["summary"]["fit"]["c_dark"] == pytest.approx(1.0, abs=1e-6)
    assert summary["outputs"] == {"fisher": "fisher.csv"}


def test_phi_option_overrides_the_sweep(runner, tmp_path):
    result = runner.invoke(
        cli, ["fisher", "--scenario", "fig6", "--analytic-only", "--phi", "0.3", "--phi", "0.6", "--out", str(tmp_path)]
    )
    assert result.exit_code == 0, result.output
    assert _summary(tmp_path)["summary"]["points"] == 2


def test_bad_phi_is_a_config_error(runner, tmp_path):
    result = runner.invoke(cli, ["fisher", "--scenario", "fig6", "--analytic-only", "--phi", "0.3nm", "--out", str(tmp_path)])
    assert result.exit_code == 2


@pytest.mark.parametrize("phi", ["4.0", "0"])
def test_out_of_range_phi_is_a_config_error(runner, tmp_path, phi):
    result = runner.invoke(cli, ["fisher", "--scenario", "fig6", "--analytic-only", "--phi", phi, "--out", str(tmp_path)])
    assert result.exit_code == 2
    assert "wv.phi" in result.output


def test_invalid_scenario_exits_with_two(runner, tmp_path):
    path = tmp_path / "broken.yaml"
    path.write_text(STRONG_KICK.replace("phi: 0.38", "phi: 4.0"), encoding="utf-8")
    result = runner.invoke(cli, ["fisher", "--scenario", str(path), "--analytic-only", "--out", str(tmp_path / "out")])
    assert result.exit_code == 2
    assert "wv.phi" in result.output


def test_strict_mode_rejects_a_strong_kick(runner, tmp_path):
    path = tmp_path / "strong.yaml"
    path.write_text(STRONG_KICK, encoding="utf-8")
    args = ["fisher", "--scenario", str(path), "--analytic-only", "--out", str(tmp_path / "out")]
    assert runner.invoke(cli, args + ["--strict"]).exit_code == 3
    assert runner.invoke(cli, args).exit_code == 0


def test_geometry_sweep(runner, tmp_path):
    result = runner.invoke(cli, ["sweep", "--scenario", "fig5", "--axis", "geometry", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    summary = _summary(tmp_path)["summary"]
    assert summary["below_one"] is True
    assert summary["max_value"] == pytest.approx(0.2013, abs=5e-4)
    assert (tmp_path / "geometry.csv").exists()


def test_modulation_sweep_without_amplitudes_is_a_config_error(runner, tmp_path):
    result = runner.invoke(cli, ["sweep", "--scenario", "silent", "--out", str(tmp_path)])
    assert result.exit_code == 2


def test_silent_spectrum(runner, tmp_path):
    result = runner.invoke(cli, ["spectrum", "--scenario", "silent", "--save-traces", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    summary = _summary(tmp_path)["summary"]
    assert summary["peaks"] == []
    assert (tmp_path / "trace_st.csv").read_text(encoding="utf-8").startswith("t_s,volts_vtotal_4")


def test_outputs_do_not_depend_on_threads(runner, tmp_path):
    outputs = []
    for threads in ("1", "3"):
        out = tmp_path / threads
        args = ["estimate", "--scenario", "crb", "--repetitions", "3", "--threads", threads, "--out", str(out)]
        result = runner.invoke(cli, args)
        assert result.exit_code == 0, result.output
        outputs.append(((out / "estimates.json").read_bytes(), (out / "summary.json").read_bytes()))
    assert outputs[0] == outputs[1]


def test_seed_override_changes_the_run(runner, tmp_path):
    base = ["estimate", "--scenario", "crb", "--out"]
    runner.invoke(cli, base + [str(tmp_path / "a")])
    runner.invoke(cli, base + [str(tmp_path / "b"), "--seed", "12"])
    first = _summary(tmp_path / "a")
    second = _summary(tmp_path / "b")
    assert first["seed"] == 11 and second["seed"] == 12
    assert first["summary"]["channels"] != second["summary"]["channels"]


def test_bad_thread_setting_exits_with_two(runner, tmp_path):
    result = runner.invoke(
        cli, ["fisher", "--scenario", "fig6", "--analytic-only", "--out", str(tmp_path)], env={"WVLAB_THREADS": "x"}
    )
    assert result.exit_code == 2
    assert "WVLAB_THREADS" in result.output
