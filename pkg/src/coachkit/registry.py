"""Expert coaching knowledge: the project model and the editable risk model.

Both models are immutable values. Every mentor edit is copy-on-write: it
returns a new model with ``version`` bumped by one, plus an audit entry with
before/after snapshots. Risks are never deleted, only disabled, so past
sessions keep resolvable risk ids.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Any

from .errors import DuplicateId, UnknownArea, UnknownRisk, ValidationError

SCHEMA_VERSION = 1

SLUG_RE = re.compile(r"^[a-z0-9]+(-[a-z0-9]+)*$")

AUDIT_ACTIONS = ("add_risk", "revise_risk", "set_enabled", "revise_area")


def slugify(name: str) -> str:
    """Lowercase, spaces to hyphens, punctuation stripped. Collisions are the
    caller's problem: predictable ids beat auto-suffixing for mentors."""
    cleaned = re.sub(r"[^a-z0-9\s-]", "", name.lower())
    return re.sub(r"[\s-]+", "-", cleaned).strip("-")


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


def _iso(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


@dataclass(frozen=True)
class ProjectArea:
    id: str
    name: str
    description: str
    example_question: str
    order: int
    required: bool = True

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "name": self.name,
            "description": self.description,
            "example_question": self.example_question,
            "order": self.order,
            "required": self.required,
        }


@dataclass(frozen=True)
class ProjectModel:
    version: int
    areas: tuple[ProjectArea, ...]

    def area(self, area_id: str) -> ProjectArea:
        for area in self.areas:
            if area.id == area_id:
                return area
        raise UnknownArea(f"no such area: {area_id!r}")

    def area_ids(self) -> list[str]:
        return [a.id for a in self.areas]

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "version": self.version,
            "areas": [a.to_dict() for a in self.areas],
        }


@dataclass(frozen=True)
class RiskDefinition:
    id: str
    name: str
    description: str
    examples: tuple[str, ...] = ()
    enabled: bool = True
    created_by: str = "seed"
    revision: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "name": self.name,
            "description": self.description,
            "examples": list(self.examples),
            "enabled": self.enabled,
            "created_by": self.created_by,
            "revision": self.revision,
        }


@dataclass(frozen=True)
class RiskModel:
    version: int
    risks: tuple[RiskDefinition, ...]

    def risk(self, risk_id: str) -> RiskDefinition:
        for risk in self.risks:
            if risk.id == risk_id:
                return risk
        raise UnknownRisk(f"no such risk: {risk_id!r}")

    def has(self, risk_id: str) -> bool:
        return any(r.id == risk_id for r in self.risks)

    def enabled_risks(self) -> tuple[RiskDefinition, ...]:
        return tuple(r for r in self.risks if r.enabled)

    def enabled_ids(self) -> list[str]:
        return [r.id for r in self.risks if r.enabled]

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "version": self.version,
            "risks": [r.to_dict() for r in self.risks],
        }


@dataclass(frozen=True)
class AuditEntry:
    """One committed mentor edit; entries are append-only and never mutated."""

    seq: int
    timestamp: str
    author: str
    action: str
    target_id: str
    before: dict[str, Any] | None
    after: dict[str, Any] | None

    def to_dict(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "timestamp": self.timestamp,
            "author": self.author,
            "action": self.action,
            "target_id": self.target_id,
            "before": self.before,
            "after": self.after,
        }

    def to_line(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)

    @staticmethod
    def from_line(line: str) -> "AuditEntry":
        raw = json.loads(line)
        return AuditEntry(**raw)


# Seed knowledge: the expert project and risk models shipped with the system.
# Text is the canonical wording mentors reviewed; keep byte-for-byte stable.

_SEED_AREAS = [
    (
        "Project information",
        "The overview of a novice’s venture, including information about the problem this venture aims to solve, and the proposed solution to solve that problem.",
        "What is the problem you are trying to solve, and what is your proposed solution to solve this problem?",
        True,
    ),
    (
        "Current Focus",
        "The specific aspect of the venture that the novice is currently focusing on and taking action on.",
        "What specific aspects of your venture are you currently focusing on? What actions are you taking to make progress on that?",
        True,
    ),
    (
        "Learning",
        "The most useful and critical learning that the novice has gained recently about their venture.",
        "Is there any learning that has been particularly beneficial or critical for your venture?",
        True,
    ),
    (
        "Obstacles",
        "Obstacles or roadblocks that are slowing the novice down.",
        "Is there anything that is currently slowing you down?",
        True,
    ),
    (
        "Plan",
        "Goals that the novice plans to accomplish in the next few weeks.",
        "What goals are you planning to accomplish in the next few weeks?",
        True,
    ),
    (
        "Coaching outcome",
        "Specific outcome that the novice is looking to achieve through the next meeting with the mentor.",
        "Looking ahead, what is a success metric that will make your next coaching meeting worthwhile?",
        True,
    ),
    (
        "Emotions",
        "Emotions that the novice is currently experiencing with their project.",
        "How would you describe your feelings lately? Excited? Nervous?",
        False,
    ),
]

_SEED_RISKS = [
    (
        "Communicate with customers",
        "If novices do not clearly articulate and communicate their brand promise and how the product delivers on it, there is a risk that customers may perceive the solution as inadequate.",
    ),
    (
        "Customers and needs",
        "If novices cannot articulate customers' needs that are supported by evidence, there is a risk they will misconstrue the root cause(s) of that need and design ineffective solutions.",
    ),
    (
        "Distribution channels",
        "If novices do not know how they will distribute the solutions or if they lack evidence that their strategy will work, there is a risk of designing something that never goes into customers' hands.",
    ),
    (
        "Existing solutions",
        "If novices have not thoroughly researched existing solutions, and cannot articulate why their solution is superior to those existing solutions, there is a risk that the customer will not adopt it.",
    ),
    (
        "Identify risky assumptions",
        "If novices have not identified and validated risky assumptions in their ideas and concepts, there is a risk of these unvalidated assumptions hindering their company's growth and adoption.",
    ),
    (
        "Perfectionism",
        "If novices have built a product but have been delaying showing the product to customers, there is a risk that they are being perfectionist.",
    ),
    (
        "Planning",
        "If novices' goals are not actionable, feasible, and measurable, or based on important risks, there is a risk that they may end up doing busy work that does not produce value nor help them progress.",
    ),
    (
        "Raising capital",
        "If novices are overly focused on raising venture capital, there is a risk that raising money is the trophy they seek at the expense of building a great product and business.",
    ),
    (
        "Teamwork",
        "If there is a lack of cohesion or alignment on buy-ins and expectations among team members, there is a risk for teamwork to negatively affect the venture's progress.",
    ),
    (
        "Testing",
        "When novices test their products, if they do not have valid processes and measurable, specific metrics for success, there is a risk of not making progress toward a solution the customers want.",
    ),
    (
        "Value propositions",
        "If novices cannot explain and provide evidence of how their solution will solve the customer's problem, there is a risk that it will not.",
    ),
]


def seed_default_models() -> tuple[ProjectModel, RiskModel]:
    """Build the shipped expert models: 7 project areas, 11 risks, all enabled."""
    areas = tuple(
        ProjectArea(
            id=slugify(name),
            name=name,
            description=description,
            example_question=question,
            order=i,
            required=required,
        )
        for i, (name, description, question, required) in enumerate(_SEED_AREAS)
    )
    risks = tuple(
        RiskDefinition(id=slugify(name), name=name, description=description)
        for name, description in _SEED_RISKS
    )
    return ProjectModel(version=1, areas=areas), RiskModel(version=1, risks=risks)


# ---------------------------------------------------------------------------
# Validation

def _check_risk_definition(risk: Any, path: str, errors: list[tuple[str, str]]) -> None:
    if not isinstance(risk, dict):
        errors.append((path, "risk must be an object"))
        return
    for name in ("id", "name", "description"):
        value = risk.get(name)
        if not isinstance(value, str) or not value.strip():
            errors.append((f"{path}.{name}", f"{name} must be a nonempty string"))
    risk_id = risk.get("id")
    if isinstance(risk_id, str) and risk_id and not SLUG_RE.match(risk_id):
        errors.append((f"{path}.id", f"id {risk_id!r} is not in lowercase-slug form"))
    description = risk.get("description")
    if isinstance(description, str) and "risk" not in description.lower():
        errors.append(
            (f"{path}.description", "description must state a condition and a consequence (missing the token 'risk')")
        )
    examples = risk.get("examples", [])
    if not isinstance(examples, list) or any(not isinstance(x, str) for x in examples):
        errors.append((f"{path}.examples", "examples must be a list of strings"))
    if not isinstance(risk.get("enabled", True), bool):
        errors.append((f"{path}.enabled", "enabled must be a boolean"))
    created_by = risk.get("created_by", "seed")
    if not isinstance(created_by, str) or not created_by:
        errors.append((f"{path}.created_by", "created_by must be a nonempty string"))
    revision = risk.get("revision", 0)
    if not isinstance(revision, int) or isinstance(revision, bool) or revision < 0:
        errors.append((f"{path}.revision", "revision must be a nonnegative integer"))


def _validate_risk_document(document: dict[str, Any]) -> RiskModel:
    errors: list[tuple[str, str]] = []
    version = document.get("version")
    if not isinstance(version, int) or isinstance(version, bool) or version < 1:
        errors.append(("version", "version must be a positive integer"))
    risks_raw = document.get("risks")
    if not isinstance(risks_raw, list) or not risks_raw:
        errors.append(("risks", "risks must be a nonempty list"))
        raise ValidationError(errors)
    seen: set[str] = set()
    for i, risk in enumerate(risks_raw):
        path = f"risks[{i}]"
        _check_risk_definition(risk, path, errors)
        if isinstance(risk, dict):
            risk_id = risk.get("id")
            if isinstance(risk_id, str):
                if risk_id in seen:
                    errors.append((f"{path}.id", f"duplicate id {risk_id!r}"))
                seen.add(risk_id)
    if errors:
        raise ValidationError(errors)
    return RiskModel(
        version=version,
        risks=tuple(
            RiskDefinition(
                id=r["id"],
                name=r["name"],
                description=r["description"],
                examples=tuple(r.get("examples", [])),
                enabled=r.get("enabled", True),
                created_by=r.get("created_by", "seed"),
                revision=r.get("revision", 0),
            )
            for r in risks_raw
        ),
    )


def _validate_project_document(document: dict[str, Any]) -> ProjectModel:
    errors: list[tuple[str, str]] = []
    version = document.get("version")
    if not isinstance(version, int) or isinstance(version, bool) or version < 1:
        errors.append(("version", "version must be a positive integer"))
    areas_raw = document.get("areas")
    if not isinstance(areas_raw, list) or not areas_raw:
        errors.append(("areas", "areas must be a nonempty list"))
        raise ValidationError(errors)
    seen: set[str] = set()
    orders: list[Any] = []
    for i, area in enumerate(areas_raw):
        path = f"areas[{i}]"
        if not isinstance(area, dict):
            errors.append((path, "area must be an object"))
            continue
        for name in ("id", "name", "description", "example_question"):
            value = area.get(name)
            if not isinstance(value, str) or not value.strip():
                errors.append((f"{path}.{name}", f"{name} must be a nonempty string"))
        area_id = area.get("id")
        if isinstance(area_id, str) and area_id:
            if not SLUG_RE.match(area_id):
                errors.append((f"{path}.id", f"id {area_id!r} is not in lowercase-slug form"))
            if area_id in seen:
                errors.append((f"{path}.id", f"duplicate id {area_id!r}"))
            seen.add(area_id)
        if not isinstance(area.get("required", True), bool):
            errors.append((f"{path}.required", "required must be a boolean"))
        orders.append(area.get("order"))
    if any(not isinstance(o, int) or isinstance(o, bool) or o < 0 for o in orders):
        errors.append(("areas", "order values must be nonnegative integers"))
    elif sorted(orders) != list(range(len(orders))):
        errors.append(("areas", f"order values {orders} are not a permutation of 0..{len(orders) - 1}"))
    if errors:
        raise ValidationError(errors)
    areas = tuple(
        sorted(
            (
                ProjectArea(
                    id=a["id"],
                    name=a["name"],
                    description=a["description"],
                    example_question=a["example_question"],
                    order=a["order"],
                    required=a.get("required", True),
                )
                for a in areas_raw
            ),
            key=lambda a: a.order,
        )
    )
    return ProjectModel(version=version, areas=areas)


def validate_model(document: dict[str, Any], kind: str) -> ProjectModel | RiskModel:
    """Validate a parsed model document; returns a typed model or raises
    ValidationError with every violation found, never a partial model."""
    if not isinstance(document, dict):
        raise ValidationError([("", "document must be an object")])
    schema_version = document.get("schema_version", SCHEMA_VERSION)
    if schema_version != SCHEMA_VERSION:
        raise ValidationError([("schema_version", f"unsupported schema_version {schema_version!r}")])
    if kind == "risk":
        return _validate_risk_document(document)
    if kind == "project":
        return _validate_project_document(document)
    raise ValidationError([("kind", f"unknown model kind {kind!r}")])


# ---------------------------------------------------------------------------
# Mentor edits (copy-on-write; each returns the new model plus an audit entry)

def _audit(
    seq: int,
    author: str,
    action: str,
    target_id: str,
    before: dict[str, Any] | None,
    after: dict[str, Any] | None,
    now: datetime | None,
) -> AuditEntry:
    return AuditEntry(
        seq=seq,
        timestamp=_iso(now or _utcnow()),
        author=author,
        action=action,
        target_id=target_id,
        before=before,
        after=after,
    )


def add_risk(
    model: RiskModel,
    definition: RiskDefinition,
    author: str,
    *,
    seq: int = 0,
    now: datetime | None = None,
) -> tuple[RiskModel, AuditEntry]:
    if model.has(definition.id):
        raise DuplicateId(f"risk id {definition.id!r} already exists")
    added = replace(definition, revision=0, created_by=author)
    _check_new_risk(added)
    new_model = RiskModel(version=model.version + 1, risks=model.risks + (added,))
    entry = _audit(seq, author, "add_risk", added.id, None, added.to_dict(), now)
    return new_model, entry


def _check_new_risk(risk: RiskDefinition) -> None:
    errors: list[tuple[str, str]] = []
    _check_risk_definition(risk.to_dict(), "risk", errors)
    if errors:
        raise ValidationError(errors)


_RISK_PATCHABLE = ("name", "description", "examples", "enabled")


def revise_risk(
    model: RiskModel,
    risk_id: str,
    patch: dict[str, Any],
    author: str,
    *,
    seq: int = 0,
    now: datetime | None = None,
) -> tuple[RiskModel, AuditEntry]:
    before = model.risk(risk_id)
    unknown = set(patch) - set(_RISK_PATCHABLE)
    if unknown:
        raise ValidationError([(f"patch.{k}", "field is not revisable") for k in sorted(unknown)])
    updates = dict(patch)
    if "examples" in updates:
        updates["examples"] = tuple(updates["examples"])
    after = replace(before, revision=before.revision + 1, **updates)
    _check_new_risk(after)
    new_model = RiskModel(
        version=model.version + 1,
        risks=tuple(after if r.id == risk_id else r for r in model.risks),
    )
    entry = _audit(seq, author, "revise_risk", risk_id, before.to_dict(), after.to_dict(), now)
    return new_model, entry


def set_enabled(
    model: RiskModel,
    risk_id: str,
    value: bool,
    author: str,
    *,
    seq: int = 0,
    now: datetime | None = None,
) -> tuple[RiskModel, AuditEntry]:
    """Disable instead of delete: past sessions keep referencing the id.
    Toggling is operational, not a content edit, so revision stays put."""
    before = model.risk(risk_id)
    after = replace(before, enabled=bool(value))
    new_model = RiskModel(
        version=model.version + 1,
        risks=tuple(after if r.id == risk_id else r for r in model.risks),
    )
    entry = _audit(seq, author, "set_enabled", risk_id, before.to_dict(), after.to_dict(), now)
    return new_model, entry


_AREA_PATCHABLE = ("name", "description", "example_question", "required")


def revise_area(
    model: ProjectModel,
    area_id: str,
    patch: dict[str, Any],
    author: str,
    *,
    seq: int = 0,
    now: datetime | None = None,
) -> tuple[ProjectModel, AuditEntry]:
    before = model.area(area_id)
    unknown = set(patch) - set(_AREA_PATCHABLE)
    if unknown:
        raise ValidationError([(f"patch.{k}", "field is not revisable") for k in sorted(unknown)])
    after = replace(before, **patch)
    errors: list[tuple[str, str]] = []
    for name in ("name", "description", "example_question"):
        if not isinstance(getattr(after, name), str) or not getattr(after, name).strip():
            errors.append((f"area.{name}", f"{name} must be a nonempty string"))
    if not isinstance(after.required, bool):
        errors.append(("area.required", "required must be a boolean"))
    if errors:
        raise ValidationError(errors)
    new_model = ProjectModel(
        version=model.version + 1,
        areas=tuple(after if a.id == area_id else a for a in model.areas),
    )
    entry = _audit(seq, author, "revise_area", area_id, before.to_dict(), after.to_dict(), now)
    return new_model, entry


# ---------------------------------------------------------------------------
# Diffing

@dataclass(frozen=True)
class RiskModelDiff:
    """Change set between two risk models. Carries full definitions for added
    risks so applying the diff to the left model reproduces the right one."""

    added: tuple[RiskDefinition, ...]
    removed: tuple[str, ...]
    revised: dict[str, dict[str, tuple[Any, Any]]]

    def is_empty(self) -> bool:
        return not self.added and not self.removed and not self.revised


def diff_models(a: RiskModel, b: RiskModel) -> RiskModelDiff:
    a_by_id = {r.id: r for r in a.risks}
    b_by_id = {r.id: r for r in b.risks}
    added = tuple(r for r in b.risks if r.id not in a_by_id)
    removed = tuple(r.id for r in a.risks if r.id not in b_by_id)
    revised: dict[str, dict[str, tuple[Any, Any]]] = {}
    for risk_id, old in a_by_id.items():
        new = b_by_id.get(risk_id)
        if new is None or new == old:
            continue
        deltas = {
            field_name: (getattr(old, field_name), getattr(new, field_name))
            for field_name in ("name", "description", "examples", "enabled", "created_by", "revision")
            if getattr(old, field_name) != getattr(new, field_name)
        }
        if deltas:
            revised[risk_id] = deltas
    return RiskModelDiff(added=added, removed=removed, revised=revised)


def apply_diff(a: RiskModel, diff: RiskModelDiff) -> RiskModel:
    risks: list[RiskDefinition] = []
    removed = set(diff.removed)
    for risk in a.risks:
        if risk.id in removed:
            continue
        deltas = diff.revised.get(risk.id)
        if deltas:
            risk = replace(risk, **{name: after for name, (_, after) in deltas.items()})
        risks.append(risk)
    risks.extend(diff.added)
    return RiskModel(version=a.version, risks=tuple(risks))
