"""CLI surface: subcommand wiring, output lines, exit codes."""

from __future__ import annotations

import json
from pathlib import Path

import pytest
import yaml
from click.testing import CliRunner
from fastapi.testclient import TestClient

from actionsim import cli
from actionsim.client import ServiceClient
from actionsim.service import create_app


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


def test_version_flag(runner):
    result = runner.invoke(cli.main, ["--version"])
    assert result.exit_code == 0
    assert "0.1.0" in result.output


def test_synth_generates_a_corpus(runner, tmp_path):
    out = tmp_path / "corpus"
    result = runner.invoke(cli.main, ["synth", "--out", str(out), "--seed", "3"])
    assert result.exit_code == 0, result.output
    assert result.output.startswith("corpus ready: ")
    manifest = out / "manifest.yaml"
    assert manifest.exists()
    assert str(manifest) in result.output


def test_run_prints_per_variant_lines(runner, make_config):
    config = make_config(rates_hz=[120, 30], overlay="off")
    result = runner.invoke(cli.main, ["run", "-c", str(config)])
    assert result.exit_code == 0, result.output
    lines = result.output.splitlines()
    assert lines[0] == "120hz-raw-full: accuracy 100.00"
    assert lines[1] == "120hz-raw-partial: accuracy 100.00"
    assert lines[2] == "30hz-raw-full: accuracy 100.00"
    assert lines[3].startswith("30hz-raw-partial: -- (")
    assert lines[4].startswith("run complete: ")


def test_stage_commands_chain_to_a_report(runner, make_config):
    config = make_config(rates_hz=[120], overlay="off", observation="full")
    run_dir = None
    for stage in ("ingest", "caption", "judge", "evaluate", "report"):
        result = runner.invoke(cli.main, [stage, "-c", str(config)])
        assert result.exit_code == 0, result.output
        assert result.output.splitlines()[-1].startswith(f"{stage} complete: ")
        run_dir = result.output.splitlines()[-1].split(": ", 1)[1]
    assert (Path(run_dir) / "report.md").exists()


def test_rate_and_mode_overrides(runner, make_config):
    config = make_config()  # grid defaults to 3 rates x 2 overlays x 2 observations
    result = runner.invoke(
        cli.main,
        ["run", "-c", str(config), "--rate", "120", "--overlay", "off",
         "--observation", "full"],
    )
    assert result.exit_code == 0, result.output
    lines = result.output.splitlines()
    assert len(lines) == 2
    assert lines[0] == "120hz-raw-full: accuracy 100.00"


def test_missing_config_file_fails_fast(runner, tmp_path):
    result = runner.invoke(cli.main, ["run", "-c", str(tmp_path / "absent.yaml")])
    assert result.exit_code == 2
    assert "does not exist" in result.output


def test_invalid_rate_is_a_clean_cli_error(runner, make_config):
    config = make_config(rates_hz=[50])
    result = runner.invoke(cli.main, ["run", "-c", str(config)])
    assert result.exit_code == 1
    assert "does not divide" in result.output
    assert "Traceback" not in result.output


def test_verify_reports_all_checks_passing(runner):
    result = runner.invoke(cli.main, ["verify", "--seed", "1"])
    assert result.exit_code == 0, result.output
    lines = result.output.splitlines()
    assert len(lines) >= 7
    assert all(line.startswith("[PASS] ") for line in lines)
    names = {line.split()[1] for line in lines}
    assert {"ncp_equivalence", "affine_invariance", "decimation_laws"} <= names


def test_verify_flags_tampered_artifacts(runner, make_config):
    config = make_config(rates_hz=[120], overlay="off", observation="full")
    assert runner.invoke(cli.main, ["judge", "-c", str(config)]).exit_code == 0

    out_dir = Path(yaml.safe_load(Path(config).read_text())["out_dir"])
    matrix_path = next(out_dir.glob("run-*/variants/*/matrix.json"))
    payload = json.loads(matrix_path.read_text())
    payload["values"][0][1] = 0.0  # stale values_sha256 now lies about the data
    matrix_path.write_text(json.dumps(payload))

    result = runner.invoke(cli.main, ["verify", "-c", str(config)])
    assert result.exit_code == 1
    assert "[FAIL] matrix_provenance" in result.output
    assert "[PASS] cache_integrity" in result.output


def test_evaluate_via_server(runner, make_config, monkeypatch):
    config = make_config(rates_hz=[120], overlay="off", observation="full")
    assert runner.invoke(cli.main, ["judge", "-c", str(config)]).exit_code == 0

    http = TestClient(create_app())
    monkeypatch.setattr(
        cli, "ServiceClient", lambda base_url: ServiceClient(http=http)
    )
    result = runner.invoke(
        cli.main, ["evaluate", "-c", str(config), "--server", "http://service"]
    )
    assert result.exit_code == 0, result.output
    lines = result.output.splitlines()
    assert lines[0] == "120hz-raw-full: accuracy 100.00"
    assert lines[1].startswith("evaluate complete: ")

    run_dir = lines[1].split(": ", 1)[1]
    payload = json.loads(
        (Path(run_dir) / "variants" / "120hz-raw-full" / "evaluation.json").read_text()
    )
    assert payload["primary"]["self_mode"] == "include_self"
    assert payload["alternate"]["self_mode"] == "leave_one_out"


def test_evaluate_via_server_requires_judged_matrices(runner, make_config, monkeypatch):
    config = make_config(rates_hz=[120], overlay="off", observation="full")
    http = TestClient(create_app())
    monkeypatch.setattr(
        cli, "ServiceClient", lambda base_url: ServiceClient(http=http)
    )
    result = runner.invoke(
        cli.main, ["evaluate", "-c", str(config), "--server", "http://service"]
    )
    assert result.exit_code == 1
    assert "run `judge` first" in result.output
