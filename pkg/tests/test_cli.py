from __future__ import annotations

import json
import socket
from pathlib import Path

import pytest
from click.testing import CliRunner

from coachkit.cli import main

FIXTURES = Path(__file__).parent / "fixtures" / "artist_fair"
GOLDEN = Path(__file__).parent / "golden" / "artist_fair"

GOLDEN_FILES = [
    "novice_dashboard.json",
    "novice_dashboard.txt",
    "mentor_dashboard.json",
    "mentor_dashboard.txt",
    "agenda.json",
    "agenda.txt",
    "session.json",
]


@pytest.fixture
def runner():
    return CliRunner()


def test_seed_models_then_validate_roundtrip(runner, tmp_path):
    result = runner.invoke(main, ["seed-models", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    for kind, name in (("project", "project_model.json"), ("risk", "risk_model.json")):
        check = runner.invoke(main, ["validate", "--model", str(tmp_path / name), "--kind", kind])
        assert check.exit_code == 0, check.output


def test_seed_models_refuses_overwrite_without_force(runner, tmp_path):
    assert runner.invoke(main, ["seed-models", "--out", str(tmp_path)]).exit_code == 0
    refused = runner.invoke(main, ["seed-models", "--out", str(tmp_path)])
    assert refused.exit_code == 1
    assert "error:" in refused.output
    forced = runner.invoke(main, ["seed-models", "--out", str(tmp_path), "--force"])
    assert forced.exit_code == 0


def test_validate_invalid_model_exits_1_with_field_errors(runner, tmp_path):
    document = {
        "schema_version": 1,
        "version": 1,
        "risks": [
            {"id": "a", "name": "A", "description": "there is a risk", "examples": [], "enabled": True, "created_by": "s", "revision": 0},
            {"id": "a", "name": "B", "description": "no token here", "examples": [], "enabled": True, "created_by": "s", "revision": 0},
        ],
    }
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(document), encoding="utf-8")
    result = runner.invoke(main, ["validate", "--model", str(path), "--kind", "risk"])
    assert result.exit_code == 1
    assert "duplicate id" in result.output
    assert "risk" in result.output


def test_validate_missing_file_exits_2(runner, tmp_path):
    result = runner.invoke(main, ["validate", "--model", str(tmp_path / "nope.json"), "--kind", "risk"])
    assert result.exit_code == 2


def test_run_session_matches_goldens(runner, tmp_path):
    out = tmp_path / "run"
    result = runner.invoke(
        main,
        [
            "run-session",
            "--transcript",
            str(FIXTURES / "transcript.json"),
            "--backend",
            f"scripted:{FIXTURES / 'script.json'}",
            "--out",
            str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    for name in GOLDEN_FILES:
        assert (out / name).read_bytes() == (GOLDEN / name).read_bytes(), f"{name} drifted"


def test_run_session_is_fully_offline(runner, tmp_path, monkeypatch):
    def no_network(*args, **kwargs):
        raise AssertionError("network syscall attempted during offline run")

    monkeypatch.setattr(socket.socket, "connect", no_network)
    monkeypatch.setattr(socket, "create_connection", no_network)
    out = tmp_path / "run"
    result = runner.invoke(
        main,
        [
            "run-session",
            "--transcript",
            str(FIXTURES / "transcript.json"),
            "--backend",
            f"scripted:{FIXTURES / 'script.json'}",
            "--out",
            str(out),
        ],
    )
    assert result.exit_code == 0, result.output


def test_run_session_agenda_unknown_risk_exits_1(runner, tmp_path):
    fixture = json.loads((FIXTURES / "transcript.json").read_text("utf-8"))
    fixture["agenda"]["selected"] = ["raising-capital"]  # never diagnosed in this scenario
    path = tmp_path / "transcript.json"
    path.write_text(json.dumps(fixture), encoding="utf-8")
    result = runner.invoke(
        main,
        [
            "run-session",
            "--transcript",
            str(path),
            "--backend",
            f"scripted:{FIXTURES / 'script.json'}",
            "--out",
            str(tmp_path / "out"),
        ],
    )
    assert result.exit_code == 1
    assert "unknown_risk" in result.output


def test_run_session_with_rule_mock(runner, tmp_path):
    result = runner.invoke(
        main,
        [
            "run-session",
            "--transcript",
            str(FIXTURES / "transcript.json"),
            "--backend",
            "mock",
            "--out",
            str(tmp_path / "out"),
        ],
    )
    assert result.exit_code == 0, result.output
    session = json.loads((tmp_path / "out" / "session.json").read_text("utf-8"))
    assert session["phase"] == "complete"


def test_run_session_script_mismatch_exits_1(runner, tmp_path):
    script = {"entries": [{"task": "risk_diagnosis", "response": "{}"}]}
    path = tmp_path / "script.json"
    path.write_text(json.dumps(script), encoding="utf-8")
    result = runner.invoke(
        main,
        [
            "run-session",
            "--transcript",
            str(FIXTURES / "transcript.json"),
            "--backend",
            f"scripted:{path}",
            "--out",
            str(tmp_path / "out"),
        ],
    )
    assert result.exit_code == 1
    assert "script_mismatch" in result.output


def test_export_from_store(runner, tmp_path):
    from coachkit.api import CoachService
    from coachkit.gateway import rule_mock
    from coachkit.runner import CoachEngine, StepClock
    from coachkit.store import FileStore
    from conftest import drive_session

    store = FileStore(tmp_path / "store")
    service = CoachService(store, rule_mock())
    project_model, _ = service.current_project_model()
    risk_model, _ = service.current_risk_model()
    engine = CoachEngine(rule_mock(), project_model, risk_model, clock=StepClock())
    session, _ = drive_session(engine, session_id="stored-1")
    service.save_session(session)

    out = tmp_path / "exports"
    result = runner.invoke(
        main,
        ["export", "--session", "stored-1", "--out", str(out), "--store", str(tmp_path / "store")],
    )
    assert result.exit_code == 0, result.output
    assert (out / "novice_dashboard.txt").exists()
    assert (out / "mentor_dashboard.txt").exists()


def test_export_unknown_session_exits_1(runner, tmp_path):
    result = runner.invoke(
        main,
        ["export", "--session", "ghost", "--out", str(tmp_path / "o"), "--store", str(tmp_path / "s")],
    )
    assert result.exit_code == 1
    assert "not_found" in result.output
