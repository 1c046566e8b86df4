"""Requirements domain model.

Holds the structured representation of a natural-language requirement:
acceptance criteria with binary verdicts, the derived three-class
requirement state, and ingestion from the line-oriented block format
(``REQ:`` / ``DESC:`` / ``AC:`` / ``DATA:``).  A model-backed extractor
accepts free-form text through the pluggable adapter contract and
validates the reply against the requirement JSON schema.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Any

import jsonschema

if TYPE_CHECKING:
    from .protocol import ModelAdapter


class Verdict(str, Enum):
    """Per-criterion outcome. Unknown until a run has verified it."""

    MET = "met"
    UNMET = "unmet"
    UNKNOWN = "unknown"


class RequirementState(str, Enum):
    MET = "met"
    PARTIALLY_MET = "partially_met"
    UNMET = "unmet"
    UNVERIFIED = "unverified"
    FAILED = "failed"


class MalformedBlock(ValueError):
    """Block-format input is unusable; nothing is ingested."""


class EmptyVerdicts(ValueError):
    pass


class UnknownVerdictPresent(ValueError):
    pass


class SchemaViolation(ValueError):
    """Extractor reply failed validation even after one re-prompt."""


class AdapterUnavailable(RuntimeError):
    """Extractor adapter missing or failed to produce a reply."""


@dataclass
class AcceptanceCriterion:
    id: str
    text: str
    verdict: Verdict = Verdict.UNKNOWN
    explanation: str = ""
    evidence: list[int] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "text": self.text,
            "verdict": self.verdict.value,
            "explanation": self.explanation,
            "evidence": list(self.evidence),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "AcceptanceCriterion":
        return cls(
            id=data["id"],
            text=data["text"],
            verdict=Verdict(data.get("verdict", "unknown")),
            explanation=data.get("explanation", ""),
            evidence=[int(i) for i in data.get("evidence", [])],
        )


@dataclass
class Requirement:
    id: str
    title: str
    description: str = ""
    criteria: list[AcceptanceCriterion] = field(default_factory=list)
    test_data: list[tuple[str, str]] = field(default_factory=list)
    state: RequirementState = RequirementState.UNVERIFIED

    def criterion(self, ac_id: str) -> AcceptanceCriterion:
        for ac in self.criteria:
            if ac.id == ac_id:
                return ac
        raise KeyError(ac_id)

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "title": self.title,
            "description": self.description,
            "criteria": [ac.to_dict() for ac in self.criteria],
            "test_data": [{"key": k, "value": v} for k, v in self.test_data],
            "state": self.state.value,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Requirement":
        return cls(
            id=data["id"],
            title=data["title"],
            description=data.get("description", ""),
            criteria=[AcceptanceCriterion.from_dict(c) for c in data.get("criteria", [])],
            test_data=[(d["key"], d["value"]) for d in data.get("test_data", [])],
            state=RequirementState(data.get("state", "unverified")),
        )


@dataclass
class VerificationSetup:
    id: str
    app_ref: str
    requirement_ids: list[str]
    created_at: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "app_ref": self.app_ref,
            "requirement_ids": list(self.requirement_ids),
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "VerificationSetup":
        return cls(
            id=data["id"],
            app_ref=data["app_ref"],
            requirement_ids=list(data["requirement_ids"]),
            created_at=data["created_at"],
        )


def derive_requirement_state(verdicts: list[Verdict]) -> RequirementState:
    """Three-class state from binary criterion verdicts.

    Met when every criterion is met, unmet when every criterion is unmet,
    partially met otherwise.
    """
    if not verdicts:
        raise EmptyVerdicts("requirement has no criterion verdicts")
    if any(v is Verdict.UNKNOWN for v in verdicts):
        raise UnknownVerdictPresent("state is only derivable once all verdicts are known")
    if all(v is Verdict.MET for v in verdicts):
        return RequirementState.MET
    if all(v is Verdict.UNMET for v in verdicts):
        return RequirementState.UNMET
    return RequirementState.PARTIALLY_MET


def parse_requirements_structured(raw: str) -> list[Requirement]:
    """Parse block-format text into requirements.

    Ids are ordinal (``req-1``, ``ac-1`` within each requirement) so
    fixtures and golden files stay stable. All verdicts start unknown.
    """
    requirements: list[Requirement] = []
    current: Requirement | None = None

    def close(req: Requirement | None) -> None:
        if req is None:
            return
        if not req.criteria:
            raise MalformedBlock(f"requirement {req.id!r} ({req.title!r}) has no AC lines")
        requirements.append(req)

    for lineno, line in enumerate(raw.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            close(current)
            current = None
            continue
        prefix, _, rest = stripped.partition(":")
        prefix = prefix.strip().upper()
        rest = rest.strip()
        if prefix == "REQ":
            close(current)
            current = Requirement(id=f"req-{len(requirements) + 1}", title=rest)
        elif prefix == "DESC":
            if current is None:
                raise MalformedBlock(f"line {lineno}: DESC before any REQ")
            current.description = rest if not current.description else f"{current.description} {rest}"
        elif prefix == "AC":
            if current is None:
                raise MalformedBlock(f"line {lineno}: AC before any REQ")
            current.criteria.append(AcceptanceCriterion(id=f"ac-{len(current.criteria) + 1}", text=rest))
        elif prefix == "DATA":
            if current is None:
                raise MalformedBlock(f"line {lineno}: DATA before any REQ")
            for pair in rest.split(","):
                pair = pair.strip()
                if not pair:
                    continue
                key, sep, value = pair.partition("=")
                if not sep:
                    raise MalformedBlock(f"line {lineno}: DATA entry {pair!r} is not key=value")
                current.test_data.append((key.strip(), value.strip()))
        else:
            raise MalformedBlock(f"line {lineno}: unrecognized line {stripped!r}")

    close(current)
    return requirements


def render_requirements_block(requirements: list[Requirement]) -> str:
    """Inverse of :func:`parse_requirements_structured` (modulo whitespace)."""
    blocks: list[str] = []
    for req in requirements:
        lines = [f"REQ: {req.title}"]
        if req.description:
            lines.append(f"DESC: {req.description}")
        for ac in req.criteria:
            lines.append(f"AC: {ac.text}")
        if req.test_data:
            lines.append("DATA: " + ", ".join(f"{k}={v}" for k, v in req.test_data))
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


# Contract for the model-backed extractor: the adapter replies with a
# finish(...) action whose payload is a JSON array of these objects.
REQUIREMENT_JSON_SCHEMA: dict[str, Any] = {
    "type": "array",
    "items": {
        "type": "object",
        "properties": {
            "title": {"type": "string"},
            "description": {"type": "string"},
            "criteria": {
                "type": "array",
                "minItems": 1,
                "items": {
                    "type": "object",
                    "properties": {"text": {"type": "string"}},
                    "required": ["text"],
                },
            },
            "test_data": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {"key": {"type": "string"}, "value": {"type": "string"}},
                    "required": ["key", "value"],
                },
            },
        },
        "required": ["title", "criteria"],
    },
}

_EXTRACTION_PROMPT = """\
Extract every requirement from the text below as structured JSON.
Reply with finish(<json>) where <json> is an array of objects shaped as
{"title": str, "description": str, "criteria": [{"text": str}], "test_data": [{"key": str, "value": str}]}.
Infer missing details from context; every requirement needs at least one acceptance criterion.

Text:
"""


def extract_requirements_llm(raw: str, adapter: "ModelAdapter") -> list[Requirement]:
    """Free-form text to requirements through a model adapter.

    The reply payload must validate against REQUIREMENT_JSON_SCHEMA; one
    re-prompt carrying the validation error is allowed before giving up.
    """
    from .protocol import ActionKind, parse_action

    if adapter is None:
        raise AdapterUnavailable("no extraction adapter configured")

    prompt = _EXTRACTION_PROMPT + raw
    last_error = ""
    for _attempt in range(2):
        try:
            reply = adapter(prompt if not last_error else f"{prompt}\n\n[error] {last_error}", b"", [])
        except Exception as exc:
            raise AdapterUnavailable(f"extraction adapter failed: {exc}") from exc
        try:
            action = parse_action(reply.action_text)
            if action.kind is not ActionKind.FINISH:
                raise ValueError("reply did not end with finish(<json>)")
            payload = json.loads(action.summary_json)
            jsonschema.validate(payload, REQUIREMENT_JSON_SCHEMA)
        except (ValueError, jsonschema.ValidationError) as exc:
            last_error = str(exc).splitlines()[0]
            continue
        return _requirements_from_payload(payload)
    raise SchemaViolation(f"extractor reply failed validation twice: {last_error}")


def _requirements_from_payload(payload: list[dict[str, Any]]) -> list[Requirement]:
    requirements = []
    for ordinal, item in enumerate(payload, start=1):
        requirements.append(
            Requirement(
                id=f"req-{ordinal}",
                title=item["title"],
                description=item.get("description", ""),
                criteria=[
                    AcceptanceCriterion(id=f"ac-{i}", text=c["text"])
                    for i, c in enumerate(item["criteria"], start=1)
                ],
                test_data=[(d["key"], d["value"]) for d in item.get("test_data", [])],
            )
        )
    return requirements
