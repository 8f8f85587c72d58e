"""Uniform contract to text-generation backends.

Three interchangeable backends: a live OpenAI-compatible HTTP backend, a
scripted playback backend for golden tests, and a keyword-driven rule mock
that doubles as the diagnosis oracle in equivalence tests. The pipeline runs
unmodified against any of them.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import httpx

from .errors import (
    BackendRefused,
    FixtureParseError,
    ScriptMismatch,
    Timeout,
    TransportError,
    UncoveredTask,
)
from .prompts import RenderedPrompt, TaskKind


@dataclass(frozen=True)
class CompletionRequest:
    task: TaskKind
    prompt: RenderedPrompt
    max_output_units: int = 1024
    deadline: float = 30.0  # seconds
    attempt: int = 0

    def __post_init__(self) -> None:
        if self.deadline <= 0:
            raise ValueError("deadline must be positive")
        if self.attempt < 0:
            raise ValueError("attempt must be nonnegative")


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    backend_id: str
    latency: float
    truncated: bool = False


class TextBackend:
    """Interface all backends implement."""

    backend_id = "backend"

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        raise NotImplementedError


def audit_record(
    request: CompletionRequest,
    response: CompletionResponse | None,
    error: Exception | None = None,
) -> dict[str, Any]:
    """Per-call audit line: enough to verify later what the model was shown."""
    record: dict[str, Any] = {
        "task": request.task.value,
        "prompt_sha256": hashlib.sha256(request.prompt.full_text().encode("utf-8")).hexdigest(),
        "template_hash": request.prompt.template_hash,
        "attempt": request.attempt,
    }
    if response is not None:
        record.update(
            backend_id=response.backend_id,
            latency=response.latency,
            truncated=response.truncated,
            ok=True,
        )
    else:
        record.update(ok=False, error=type(error).__name__ if error else "unknown")
    return record


# ---------------------------------------------------------------------------
# Live backend (OpenAI-compatible chat completions)


class LiveBackend(TextBackend):
    """HTTP backend; endpoint, model name, and credential from configuration.
    Transient transport failures are retried twice with exponential backoff."""

    RETRIES = 2

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str = "",
        *,
        temperature: float = 0.0,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.temperature = temperature
        self.backend_id = f"live:{model}"
        self._sleep = sleep
        self._client = httpx.Client(transport=transport) if transport else httpx.Client()

    def close(self) -> None:
        self._client.close()

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        prompt = request.prompt
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": prompt.system_instructions},
                {
                    "role": "user",
                    "content": (
                        "=== KNOWLEDGE ===\n"
                        f"{prompt.knowledge_block}\n"
                        "=== CONTEXT ===\n"
                        f"{prompt.context_block}\n"
                        "=== TASK ===\n"
                        f"{prompt.user_block}"
                    ),
                },
            ],
            "temperature": self.temperature,
            "max_tokens": request.max_output_units,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        url = f"{self.endpoint}/chat/completions"
        started = time.monotonic()
        last_exc: Exception | None = None
        for attempt in range(self.RETRIES + 1):
            try:
                reply = self._client.post(
                    url, json=body, headers=headers, timeout=request.deadline
                )
                break
            except httpx.TimeoutException as exc:
                raise Timeout(f"backend call exceeded {request.deadline}s", task=request.task.value) from exc
            except httpx.TransportError as exc:
                last_exc = exc
                if attempt < self.RETRIES:
                    self._sleep(0.5 * 2**attempt)
        else:
            raise TransportError(
                f"backend unreachable after {self.RETRIES + 1} attempts: {last_exc}",
                task=request.task.value,
            ) from last_exc
        latency = time.monotonic() - started
        if reply.status_code < 200 or reply.status_code >= 300:
            raise BackendRefused(
                f"backend returned {reply.status_code}",
                status=reply.status_code,
                body=reply.text,
            )
        try:
            payload = reply.json()
            choice = payload["choices"][0]
            text = choice["message"]["content"]
            truncated = choice.get("finish_reason") == "length"
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise BackendRefused(
                "backend reply is not a chat completion", status=reply.status_code, body=reply.text
            ) from exc
        return CompletionResponse(
            text=text, backend_id=self.backend_id, latency=latency, truncated=truncated
        )


# ---------------------------------------------------------------------------
# Scripted backend (deterministic playback for golden tests)


class ScriptedBackend(TextBackend):
    """Replays canned responses in order. Each request's task kind must match
    the next fixture entry; any drift is a hard error so golden tests catch
    pipeline reorderings immediately."""

    backend_id = "scripted"

    def __init__(self, entries: list[tuple[TaskKind, str]]):
        self._entries = list(entries)
        self._cursor = 0
        self._lock = threading.Lock()

    @property
    def remaining(self) -> int:
        return len(self._entries) - self._cursor

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        with self._lock:
            if self._cursor >= len(self._entries):
                raise ScriptMismatch(
                    f"script exhausted after {len(self._entries)} entries "
                    f"(extra request: {request.task.value})",
                    task=request.task.value,
                )
            expected_task, text = self._entries[self._cursor]
            if expected_task != request.task:
                raise ScriptMismatch(
                    f"script entry {self._cursor} expects task {expected_task.value!r} "
                    f"but got {request.task.value!r}",
                    task=request.task.value,
                )
            self._cursor += 1
        return CompletionResponse(text=text, backend_id=self.backend_id, latency=0.0)


def load_script(path: str | Path) -> ScriptedBackend:
    """Parse a script fixture: {"entries": [{"task": ..., "response": ...}]}."""
    try:
        raw = json.loads(Path(path).read_text("utf-8"))
    except OSError as exc:
        raise FixtureParseError(f"cannot read script fixture {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FixtureParseError(f"script fixture {path} is not valid JSON: {exc}") from exc
    entries_raw = raw.get("entries") if isinstance(raw, dict) else None
    if not isinstance(entries_raw, list):
        raise FixtureParseError(f"script fixture {path} must have an 'entries' list")
    entries: list[tuple[TaskKind, str]] = []
    for i, entry in enumerate(entries_raw):
        if not isinstance(entry, dict) or "task" not in entry or "response" not in entry:
            raise FixtureParseError(f"script entry {i} must have 'task' and 'response'")
        try:
            task = TaskKind(entry["task"])
        except ValueError as exc:
            raise FixtureParseError(f"script entry {i} has unknown task {entry['task']!r}") from exc
        if not isinstance(entry["response"], str):
            raise FixtureParseError(f"script entry {i} response must be a string")
        entries.append((task, entry["response"]))
    return ScriptedBackend(entries)


# ---------------------------------------------------------------------------
# Rule-based mock backend (the diagnosis oracle)

_SEGMENT_LINE_RE = re.compile(r"^\[(\d+)\] (.*)$")
_RISK_LINE_RE = re.compile(r"^risk: (\S+)$", re.MULTILINE)
_AGENDA_LINE_RE = re.compile(r"^- risk: (\S+) \| name: (.*?) \| reflection:", re.MULTILINE)


def _dumps(value: Any) -> str:
    return json.dumps(value, ensure_ascii=False)


@dataclass
class RuleMockBackend(TextBackend):
    """Deterministic keyword-driven backend.

    Output is a pure function of (task kind, request content): tagging and
    diagnosis rules regex-match novice text and context lines; reflection and
    strategy tables key off the target risk id. Schema-valid JSON always.
    """

    tables: dict[TaskKind, Any] = field(default_factory=dict)
    backend_id: str = "rule-mock"

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        handler = {
            TaskKind.CONTEXT_TAGGING: self._tagging,
            TaskKind.QUESTION_PERSONALIZATION: self._personalization,
            TaskKind.RISK_DIAGNOSIS: self._diagnosis,
            TaskKind.REFLECTION_QUESTIONS: self._reflection,
            TaskKind.STRATEGY_SUGGESTION: self._strategy,
            TaskKind.AGENDA_SYNTHESIS: self._agenda,
        }[request.task]
        if request.task not in self.tables:
            raise UncoveredTask(
                f"rule mock has no table for task {request.task.value!r}",
                task=request.task.value,
            )
        text = handler(request.prompt, self.tables[request.task])
        return CompletionResponse(text=text, backend_id=self.backend_id, latency=0.0)

    def _tagging(self, prompt: RenderedPrompt, rules: list[dict[str, str]]) -> str:
        entries = []
        for line in prompt.user_block.splitlines():
            match = _SEGMENT_LINE_RE.match(line)
            if not match:
                continue
            seq, text = int(match.group(1)), match.group(2)
            for rule in rules:
                if re.search(rule["pattern"], text, re.IGNORECASE):
                    entries.append({"key": rule["key"], "value": text, "source_seq": seq})
        return _dumps({"entries": entries})

    def _personalization(self, prompt: RenderedPrompt, rules: list[dict[str, str]]) -> str:
        for rule in rules:
            if re.search(rule["pattern"], prompt.context_block, re.IGNORECASE):
                return _dumps({"question": rule["question"]})
        return _dumps({"question": ""})

    def _diagnosis(self, prompt: RenderedPrompt, rules: list[dict[str, str]]) -> str:
        lines = [l for l in prompt.context_block.splitlines() if ": " in l]
        diagnoses = []
        for rule in rules:
            matched = [l for l in lines if re.search(rule["pattern"], l, re.IGNORECASE)]
            if matched:
                diagnoses.append(
                    {
                        "risk_id": rule["risk_id"],
                        "rationale": f'Your context "{matched[0]}" points at this risk.',
                        "evidence_keys": [l.split(": ", 1)[0] for l in matched],
                    }
                )
        return _dumps({"diagnoses": diagnoses})

    def _reflection(self, prompt: RenderedPrompt, rules: list[dict[str, Any]]) -> str:
        match = _RISK_LINE_RE.search(prompt.user_block)
        risk_id = match.group(1) if match else ""
        for rule in rules:
            if rule["risk_id"] == risk_id:
                return _dumps({"questions": list(rule["questions"])})
        return _dumps({"questions": []})

    def _strategy(self, prompt: RenderedPrompt, rules: list[dict[str, Any]]) -> str:
        match = _RISK_LINE_RE.search(prompt.user_block)
        risk_id = match.group(1) if match else ""
        for rule in rules:
            if rule["risk_id"] == risk_id:
                return _dumps(
                    {
                        "risk_id": risk_id,
                        "coaching_questions": list(rule["coaching_questions"]),
                        "hypothesized_root_causes": list(rule["root_causes"]),
                        "rationale": f"Derived from the playbook entry for {risk_id}.",
                    }
                )
        return _dumps(
            {
                "risk_id": risk_id,
                "coaching_questions": [f"What would you need to learn to retire the {risk_id} risk?"],
                "hypothesized_root_causes": ["unclear evidence"],
                "rationale": f"No playbook entry for {risk_id}; generic probe.",
            }
        )

    def _agenda(self, prompt: RenderedPrompt, _table: Any) -> str:
        items = [
            {"risk_id": risk_id, "discussion_goal": f"Agree on concrete next steps for {name}."}
            for risk_id, name in _AGENDA_LINE_RE.findall(prompt.user_block)
        ]
        return _dumps({"items": items})


# Keyword tables for the shipped risk model; used by the demo `serve` mode and
# anywhere a deterministic stand-in backend is wanted without a script.
DEFAULT_RULES: dict[TaskKind, Any] = {
    TaskKind.CONTEXT_TAGGING: [
        {"pattern": r"problem|solve|building|platform|marketplace|app\b", "key": "Problem"},
        {"pattern": r"solution|product|service", "key": "Solution"},
        {"pattern": r"customer|user|artist|player|client", "key": "Customers"},
        {"pattern": r"focus|working on|currently", "key": "Focus"},
        {"pattern": r"learn|insight|found out|discovered", "key": "Learning"},
        {"pattern": r"stuck|slow|obstacle|roadblock|no idea|struggl", "key": "Obstacles"},
        {"pattern": r"plan|goal|next|by (january|february|march|april|may|june|july)", "key": "Goals"},
        {"pattern": r"meeting|outcome|success metric|advice", "key": "Desired outcome"},
        {"pattern": r"nervous|excited|worried|afraid|confident|feel", "key": "Emotions"},
    ],
    TaskKind.QUESTION_PERSONALIZATION: [
        {
            "pattern": r"artist|fair",
            "question": "What specific part of connecting artists with fairs are you working on right now?",
        },
        {
            "pattern": r"app|platform|product",
            "question": "What specific aspect of your product are you focusing on at the moment?",
        },
    ],
    TaskKind.RISK_DIAGNOSIS: [
        {"pattern": r"distribut|channel|reach|into .* hands", "risk_id": "distribution-channels"},
        {"pattern": r"need|pain point|interview", "risk_id": "customers-and-needs"},
        {"pattern": r"value proposition|willing to pay|worth paying|why .* better", "risk_id": "value-propositions"},
        {"pattern": r"assum|untested|unvalidated", "risk_id": "identify-risky-assumptions"},
        {"pattern": r"test|metric|measure", "risk_id": "testing"},
        {"pattern": r"perfect|polish|not ready to show", "risk_id": "perfectionism"},
        {"pattern": r"busy work|vague goal|no deadline", "risk_id": "planning"},
        {"pattern": r"fundrais|venture capital|investor", "risk_id": "raising-capital"},
        {"pattern": r"co-?founder|team|alignment", "risk_id": "teamwork"},
        {"pattern": r"competitor|existing solution|alternative", "risk_id": "existing-solutions"},
        {"pattern": r"brand|messaging|announce", "risk_id": "communicate-with-customers"},
    ],
    TaskKind.REFLECTION_QUESTIONS: [
        {
            "risk_id": "distribution-channels",
            "questions": [
                "How do you plan to get your product into your customers' hands, and what evidence do you have that this path works?"
            ],
        },
        {
            "risk_id": "value-propositions",
            "questions": [
                "What evidence would convince a skeptic that your solution actually solves the customer's problem?"
            ],
        },
    ],
    TaskKind.STRATEGY_SUGGESTION: [
        {
            "risk_id": "distribution-channels",
            "coaching_questions": ["Which single channel could you test this month, and how?"],
            "root_causes": ["no channel experiments run yet"],
        },
        {
            "risk_id": "value-propositions",
            "coaching_questions": ["Who has told you, in their own words, what this is worth to them?"],
            "root_causes": ["value framed from the founder's perspective"],
        },
    ],
    TaskKind.AGENDA_SYNTHESIS: {},
}


def load_rule_tables(path: str | Path) -> dict[TaskKind, Any]:
    """Parse a rule-table fixture keyed by task kind values."""
    try:
        raw = json.loads(Path(path).read_text("utf-8"))
    except OSError as exc:
        raise FixtureParseError(f"cannot read rule table {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FixtureParseError(f"rule table {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise FixtureParseError(f"rule table {path} must be an object keyed by task kind")
    tables: dict[TaskKind, Any] = {}
    for key, value in raw.items():
        try:
            tables[TaskKind(key)] = value
        except ValueError as exc:
            raise FixtureParseError(f"rule table has unknown task kind {key!r}") from exc
    return tables


def rule_mock(tables: dict[TaskKind, Any] | None = None) -> RuleMockBackend:
    return RuleMockBackend(tables=dict(tables if tables is not None else DEFAULT_RULES))
