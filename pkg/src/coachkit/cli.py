"""Operator tooling: seed and validate models, replay sessions offline,
export dashboards, and launch the service.

Exit codes: 0 success, 1 domain or validation error, 2 infrastructure error.
Errors print one machine-parsable line on stderr: ``error: <code>: <message>``.
"""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path

import click

from . import registry
from .api import CoachService, serve as run_server
from .config import load_config
from .dashboards import build_mentor_dashboard, build_novice_dashboard, render_export
from .errors import (
    BackendRefused,
    CoachError,
    FixtureParseError,
    IoError,
    MigrationRequired,
    Timeout,
    TransportError,
    ValidationError,
)
from .gateway import TextBackend, load_rule_tables, load_script, rule_mock
from .pipeline import StrategySuggestion
from .runner import CoachEngine, StepClock
from .session import ActionKind, Phase, next_action
from .store import FileStore

_INFRA_ERRORS = (IoError, MigrationRequired, Timeout, TransportError, BackendRefused)


def _fail(exc: Exception) -> None:
    if isinstance(exc, CoachError):
        click.echo(f"error: {exc.code}: {exc}", err=True)
        sys.exit(2 if isinstance(exc, _INFRA_ERRORS) else 1)
    if isinstance(exc, OSError):
        click.echo(f"error: io_error: {exc}", err=True)
        sys.exit(2)
    raise exc


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _dump(value) -> str:
    return json.dumps(value, indent=2, ensure_ascii=False) + "\n"


@click.group()
def main() -> None:
    """Coaching-engine operator commands."""


@main.command("seed-models")
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--force", is_flag=True, help="Overwrite existing model files.")
def seed_models_cmd(out_dir: Path, force: bool) -> None:
    """Write the shipped project and risk model documents."""
    try:
        project_model, risk_model = registry.seed_default_models()
        targets = {
            out_dir / "project_model.json": project_model.to_dict(),
            out_dir / "risk_model.json": risk_model.to_dict(),
        }
        existing = [str(p) for p in targets if p.exists()]
        if existing and not force:
            raise FixtureParseError(
                f"refusing to overwrite {', '.join(existing)} (use --force)"
            )
        for path, document in targets.items():
            _write(path, _dump(document))
        click.echo(f"seeded models in {out_dir}")
    except Exception as exc:
        _fail(exc)


@main.command("validate")
@click.option("--model", "model_path", required=True, type=click.Path(path_type=Path))
@click.option("--kind", required=True, type=click.Choice(["project", "risk"]))
def validate_cmd(model_path: Path, kind: str) -> None:
    """Validate a model document; exit 0 if valid."""
    try:
        try:
            document = json.loads(model_path.read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise FixtureParseError(f"{model_path} is not valid JSON: {exc}") from exc
        model = registry.validate_model(document, kind)
        count = len(model.areas) if kind == "project" else len(model.risks)  # type: ignore[union-attr]
        click.echo(f"valid {kind} model, version {model.version}, {count} entries")
    except ValidationError as exc:
        for path, message in exc.errors:
            click.echo(f"error: validation: {path}: {message}", err=True)
        sys.exit(1)
    except Exception as exc:
        _fail(exc)


def _backend_from_spec(spec: str, config_path: Path | None) -> TextBackend:
    if spec.startswith("scripted:"):
        return load_script(spec.split(":", 1)[1])
    if spec.startswith("mock:"):
        return rule_mock(load_rule_tables(spec.split(":", 1)[1]))
    if spec == "mock":
        return rule_mock()
    if spec == "live":
        if config_path is None:
            raise FixtureParseError("live backend needs --config with endpoint settings")
        from .config import build_backend

        return build_backend(load_config(config_path).backend)
    raise FixtureParseError(f"unknown backend spec {spec!r}")


def _load_transcript(path: Path) -> dict:
    try:
        raw = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise FixtureParseError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or "answers" not in raw or "agenda" not in raw:
        raise FixtureParseError(f"{path} must contain 'answers' and 'agenda'")
    return raw


@main.command("run-session")
@click.option("--transcript", "transcript_path", required=True, type=click.Path(path_type=Path))
@click.option("--backend", "backend_spec", required=True)
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None)
def run_session_cmd(
    transcript_path: Path, backend_spec: str, out_dir: Path, config_path: Path | None
) -> None:
    """Drive a full session non-interactively from a transcript fixture and
    write both dashboards plus the agenda document."""
    try:
        fixture_bytes = transcript_path.read_bytes()
        fixture = _load_transcript(transcript_path)
        backend = _backend_from_spec(backend_spec, config_path)
        audit: list[dict] = []
        project_model, risk_model = registry.seed_default_models()
        engine = CoachEngine(
            backend,
            project_model,
            risk_model,
            clock=StepClock(),
            audit_sink=audit.append,
        )
        session_id = "sess-" + hashlib.sha256(fixture_bytes).hexdigest()[:12]
        session = engine.start(fixture.get("novice_id", "novice-local"), session_id=session_id)
        answers = {k: list(v) for k, v in fixture["answers"].items()}
        reflections = dict(fixture.get("reflections", {}))
        agenda_doc = None
        for _ in range(1000):  # generous upper bound; the dialogue is finite
            action = next_action(session, project_model)
            if action.kind == ActionKind.ASK_AREA_QUESTION:
                area = project_model.area(action.target)
                if not session.awaiting_area_answer(area):
                    engine.advance(session)
                    continue
                queue = answers.get(area.id) or []
                if not queue:
                    raise FixtureParseError(f"transcript has no answer left for area {area.id!r}")
                engine.record_novice_answer(session, queue.pop(0))
            elif action.kind == ActionKind.RUN_DIAGNOSIS:
                engine.advance(session)
            elif action.kind == ActionKind.ASK_REFLECTION_QUESTION:
                if session.reflection_for(action.target) is None:
                    engine.advance(session)
                    continue
                text = reflections.get(
                    action.target, "I have not thought this one through yet."
                )
                engine.record_novice_answer(session, text)
            elif action.kind == ActionKind.AWAIT_PRIORITIZATION:
                agenda = fixture["agenda"]
                agenda_doc = engine.finish(
                    session, agenda.get("selected", []), agenda.get("notes", "")
                )
            else:  # DONE
                break
        if agenda_doc is None:
            raise FixtureParseError("session never reached prioritization")
        strategies = engine.strategies(session, None)
        novice_dashboard = build_novice_dashboard(session, risk_model)
        mentor_dashboard = build_mentor_dashboard(session, risk_model, None, strategies)
        _write(out_dir / "session.json", _dump(session.to_dict()))
        _write(out_dir / "novice_dashboard.json", _dump(novice_dashboard.to_dict()))
        _write(out_dir / "novice_dashboard.txt", render_export(novice_dashboard))
        _write(out_dir / "mentor_dashboard.json", _dump(mentor_dashboard.to_dict()))
        _write(out_dir / "mentor_dashboard.txt", render_export(mentor_dashboard))
        _write(out_dir / "agenda.json", _dump(agenda_doc.to_dict()))
        _write(out_dir / "agenda.txt", agenda_doc.to_text())
        _write(
            out_dir / "gateway_audit.jsonl",
            "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in audit),
        )
        click.echo(f"session {session.id} complete; outputs in {out_dir}")
    except Exception as exc:
        _fail(exc)


@main.command("export")
@click.option("--session", "session_id", required=True)
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--store", "store_root", required=True, type=click.Path(path_type=Path))
def export_cmd(session_id: str, out_dir: Path, store_root: Path) -> None:
    """Export dashboards for a stored session."""
    try:
        store = FileStore(store_root)
        service = CoachService(store, rule_mock())
        session = service.load_session(session_id)
        _, risk_model = service.pinned_models(session)
        wrote = []
        if session.phase in (Phase.REFLECTING, Phase.PRIORITIZING, Phase.COMPLETE):
            dashboard = build_novice_dashboard(session, risk_model)
            _write(out_dir / "novice_dashboard.json", _dump(dashboard.to_dict()))
            _write(out_dir / "novice_dashboard.txt", render_export(dashboard))
            wrote.append("novice dashboard")
        if session.phase == Phase.COMPLETE:
            stored = service.load_goals(session_id) or {}
            strategies = [
                StrategySuggestion(
                    risk_id=s["risk_id"],
                    coaching_questions=tuple(s["coaching_questions"]),
                    hypothesized_root_causes=tuple(s["hypothesized_root_causes"]),
                    rationale=s["rationale"],
                )
                for s in stored.get("strategies", [])
            ]
            mentor_dashboard = build_mentor_dashboard(session, risk_model, None, strategies)
            _write(out_dir / "mentor_dashboard.json", _dump(mentor_dashboard.to_dict()))
            _write(out_dir / "mentor_dashboard.txt", render_export(mentor_dashboard))
            wrote.append("mentor dashboard")
        if not wrote:
            raise FixtureParseError(
                f"session {session_id} is in phase {session.phase.value}; nothing to export yet"
            )
        click.echo(f"exported {', '.join(wrote)} to {out_dir}")
    except Exception as exc:
        _fail(exc)


@main.command("serve")
@click.option("--config", "config_path", required=True, type=click.Path(path_type=Path))
def serve_cmd(config_path: Path) -> None:
    """Run the HTTP service."""
    try:
        run_server(load_config(config_path))
    except Exception as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
