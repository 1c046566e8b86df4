"""Agent-side protocol for the verification loop.

Covers the action grammar the model speaks (one action per turn, last
line of the reply), prompt assembly, the adapter contract, and parsing
of the final structured verdict summary. Parsing and formatting are
exact inverses so replies can be round-tripped and fuzzed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable

from .requirements import Requirement, RequirementState, Verdict, derive_requirement_state


class ActionKind(str, Enum):
    CLICK = "click"
    DOUBLE_CLICK = "double_click"
    SCROLL = "scroll"
    TYPE = "type"
    KEYPRESS = "keypress"
    WAIT = "wait"
    FINISH = "finish"


# argument carriers per kind, used to validate "exactly the fields of the
# active kind are populated"
_KIND_FIELDS = {
    ActionKind.CLICK: ("x", "y"),
    ActionKind.DOUBLE_CLICK: ("x", "y"),
    ActionKind.SCROLL: ("x", "y", "dx", "dy"),
    ActionKind.TYPE: ("text",),
    ActionKind.KEYPRESS: ("key",),
    ActionKind.WAIT: ("millis",),
    ActionKind.FINISH: ("summary_json",),
}


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    x: int | None = None
    y: int | None = None
    dx: int | None = None
    dy: int | None = None
    text: str | None = None
    key: str | None = None
    millis: int | None = None
    summary_json: str | None = None

    def __post_init__(self) -> None:
        active = _KIND_FIELDS[self.kind]
        for name in ("x", "y", "dx", "dy", "text", "key", "millis", "summary_json"):
            value = getattr(self, name)
            if name in active and value is None:
                raise ValueError(f"{self.kind.value} action requires {name}")
            if name not in active and value is not None:
                raise ValueError(f"{self.kind.value} action must not set {name}")
        if self.kind is ActionKind.WAIT and self.millis < 0:
            raise ValueError("wait millis must be non-negative")

    @classmethod
    def click(cls, x: int, y: int) -> "Action":
        return cls(ActionKind.CLICK, x=x, y=y)

    @classmethod
    def double_click(cls, x: int, y: int) -> "Action":
        return cls(ActionKind.DOUBLE_CLICK, x=x, y=y)

    @classmethod
    def scroll(cls, x: int, y: int, dx: int, dy: int) -> "Action":
        return cls(ActionKind.SCROLL, x=x, y=y, dx=dx, dy=dy)

    @classmethod
    def type_text(cls, text: str) -> "Action":
        return cls(ActionKind.TYPE, text=text)

    @classmethod
    def keypress(cls, key: str) -> "Action":
        return cls(ActionKind.KEYPRESS, key=key)

    @classmethod
    def wait(cls, millis: int) -> "Action":
        return cls(ActionKind.WAIT, millis=millis)

    @classmethod
    def finish(cls, summary_json: str) -> "Action":
        return cls(ActionKind.FINISH, summary_json=summary_json)


@dataclass(frozen=True)
class UsageStats:
    input_tokens: int = 0
    output_tokens: int = 0

    def __post_init__(self) -> None:
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValueError("token counts must be non-negative")

    def __add__(self, other: "UsageStats") -> "UsageStats":
        return UsageStats(
            self.input_tokens + other.input_tokens,
            self.output_tokens + other.output_tokens,
        )

    def to_dict(self) -> dict[str, int]:
        return {"input_tokens": self.input_tokens, "output_tokens": self.output_tokens}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "UsageStats":
        return cls(int(data.get("input_tokens", 0)), int(data.get("output_tokens", 0)))


@dataclass(frozen=True)
class AdapterReply:
    """Raw model turn: the action is still unparsed text.

    Parsing happens in the run loop so malformed actions can be observed,
    re-prompted once, and reported instead of crashing the adapter.
    """

    reasoning: str
    action_text: str
    usage: UsageStats = UsageStats()


@dataclass(frozen=True)
class ModelReply:
    """A parsed model turn as recorded in trajectories."""

    reasoning: str
    action: Action
    usage: UsageStats = UsageStats()


# (reasoning, canonical action text) pairs, oldest first
History = list[tuple[str, str]]

# callable contract: (prompt, observation bytes, history) -> AdapterReply
ModelAdapter = Callable[[str, bytes, History], AdapterReply]


class ActionParseError(ValueError):
    """Base for action grammar violations; aborts the step, one re-prompt."""


class UnknownVerb(ActionParseError):
    pass


class BadArity(ActionParseError):
    pass


class NonNumericCoordinate(ActionParseError):
    pass


def parse_action(text: str) -> Action:
    """Parse one line of the canonical action grammar."""
    line = text.strip()
    open_idx = line.find("(")
    if open_idx < 0 or not line.endswith(")"):
        raise UnknownVerb(f"not an action call: {line!r}")
    verb = line[:open_idx].strip()
    body = line[open_idx + 1 : -1]
    try:
        kind = ActionKind(verb)
    except ValueError:
        raise UnknownVerb(f"unknown action verb {verb!r}") from None

    if kind is ActionKind.FINISH:
        return Action.finish(body)

    if kind in (ActionKind.TYPE, ActionKind.KEYPRESS):
        try:
            literal = json.loads(body)
        except json.JSONDecodeError:
            raise BadArity(f"{verb} expects one quoted string argument") from None
        if not isinstance(literal, str):
            raise BadArity(f"{verb} expects one quoted string argument")
        return Action.type_text(literal) if kind is ActionKind.TYPE else Action.keypress(literal)

    parts = [p.strip() for p in body.split(",")] if body.strip() else []
    expected = len(_KIND_FIELDS[kind])
    if len(parts) != expected:
        raise BadArity(f"{verb} expects {expected} arguments, got {len(parts)}")
    values = []
    for part in parts:
        try:
            values.append(int(part))
        except ValueError:
            raise NonNumericCoordinate(f"{verb} argument {part!r} is not an integer") from None
    if kind is ActionKind.WAIT:
        if values[0] < 0:
            raise NonNumericCoordinate("wait millis must be non-negative")
        return Action.wait(values[0])
    if kind is ActionKind.SCROLL:
        return Action.scroll(*values)
    if kind is ActionKind.DOUBLE_CLICK:
        return Action.double_click(*values)
    return Action.click(*values)


def format_action(action: Action) -> str:
    """Canonical one-line form; parse_action(format_action(a)) == a."""
    k = action.kind
    if k in (ActionKind.CLICK, ActionKind.DOUBLE_CLICK):
        return f"{k.value}({action.x}, {action.y})"
    if k is ActionKind.SCROLL:
        return f"scroll({action.x}, {action.y}, {action.dx}, {action.dy})"
    if k is ActionKind.TYPE:
        return f"type({json.dumps(action.text, ensure_ascii=False)})"
    if k is ActionKind.KEYPRESS:
        return f"keypress({json.dumps(action.key, ensure_ascii=False)})"
    if k is ActionKind.WAIT:
        return f"wait({action.millis})"
    return f"finish({action.summary_json})"


SUMMARY_JSON_SCHEMA_TEXT = (
    '{"requirement_id": str, "overall": "met"|"partially_met"|"unmet", '
    '"criteria": [{"id": str, "verdict": "met"|"unmet", "explanation": str, '
    '"evidence": [int]}], "narrative": str}'
)


@dataclass(frozen=True)
class CriterionFinding:
    id: str
    verdict: Verdict
    explanation: str = ""
    evidence: tuple[int, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "verdict": self.verdict.value,
            "explanation": self.explanation,
            "evidence": list(self.evidence),
        }


@dataclass(frozen=True)
class VerdictSummary:
    requirement_id: str
    overall: RequirementState
    criteria: tuple[CriterionFinding, ...]
    narrative: str = ""

    def finding(self, ac_id: str) -> CriterionFinding:
        for entry in self.criteria:
            if entry.id == ac_id:
                return entry
        raise KeyError(ac_id)

    def to_dict(self) -> dict[str, Any]:
        return {
            "requirement_id": self.requirement_id,
            "overall": self.overall.value,
            "criteria": [c.to_dict() for c in self.criteria],
            "narrative": self.narrative,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "VerdictSummary":
        return cls(
            requirement_id=data["requirement_id"],
            overall=RequirementState(data["overall"]),
            criteria=tuple(
                CriterionFinding(
                    id=c["id"],
                    verdict=Verdict(c["verdict"]),
                    explanation=c.get("explanation", ""),
                    evidence=tuple(int(i) for i in c.get("evidence", [])),
                )
                for c in data["criteria"]
            ),
            narrative=data.get("narrative", ""),
        )


class SummaryParseError(ValueError):
    """Base for finish-payload violations; maps the run to failed after one re-prompt."""


class JsonSyntax(SummaryParseError):
    pass


class MissingCriterion(SummaryParseError):
    pass


class ExtraCriterion(SummaryParseError):
    pass


class BadVerdictToken(SummaryParseError):
    pass


def parse_summary(raw: str, req: Requirement) -> VerdictSummary:
    """Validate a finish payload against the requirement's criteria.

    The overall state is always recomputed from the per-criterion
    verdicts; the model's own overall claim is advisory only.
    """
    try:
        payload = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise JsonSyntax(f"finish payload is not JSON: {exc}") from None
    if not isinstance(payload, dict) or not isinstance(payload.get("criteria"), list):
        raise JsonSyntax("finish payload must be an object with a criteria array")

    findings: dict[str, CriterionFinding] = {}
    for entry in payload["criteria"]:
        if not isinstance(entry, dict) or "id" not in entry:
            raise JsonSyntax("each criteria entry must be an object with an id")
        ac_id = str(entry["id"])
        token = entry.get("verdict")
        if token not in (Verdict.MET.value, Verdict.UNMET.value):
            raise BadVerdictToken(f"criterion {ac_id}: verdict {token!r} is not met/unmet")
        evidence = entry.get("evidence", [])
        if not isinstance(evidence, list) or any(
            not isinstance(i, int) or isinstance(i, bool) or i < 0 for i in evidence
        ):
            raise JsonSyntax(f"criterion {ac_id}: evidence must be non-negative step indices")
        findings[ac_id] = CriterionFinding(
            id=ac_id,
            verdict=Verdict(token),
            explanation=str(entry.get("explanation", "")),
            evidence=tuple(evidence),
        )

    expected = [ac.id for ac in req.criteria]
    missing = [ac_id for ac_id in expected if ac_id not in findings]
    if missing:
        raise MissingCriterion(f"summary omits criteria: {', '.join(missing)}")
    extra = [ac_id for ac_id in findings if ac_id not in expected]
    if extra:
        raise ExtraCriterion(f"summary names unknown criteria: {', '.join(extra)}")

    ordered = tuple(findings[ac_id] for ac_id in expected)
    overall = derive_requirement_state([f.verdict for f in ordered])
    return VerdictSummary(
        requirement_id=req.id,
        overall=overall,
        criteria=ordered,
        narrative=str(payload.get("narrative", "")),
    )


def build_verification_prompt(req: Requirement, app_ref: str) -> str:
    """Deterministic prompt: byte-identical output for identical inputs."""
    lines = [
        "You are a GUI verification agent. Work fully autonomously; never ask the user for anything.",
        "Use as few actions as possible to gather the evidence you need.",
        "",
        f"Requirement: {req.title}",
    ]
    if req.description:
        lines.append(req.description)
    lines.append("")
    lines.append("Acceptance criteria (evaluate each one individually):")
    for ac in req.criteria:
        lines.append(f"- {ac.id}: {ac.text}")
    if req.test_data:
        lines.append("")
        lines.append("Test data:")
        for key, value in req.test_data:
            lines.append(f"- {key} = {value}")
    lines.extend(
        [
            "",
            f"Application under test: {app_ref}",
            "",
            "Reply with one action per turn as the last line, using:",
            'click(x, y), double_click(x, y), scroll(x, y, dx, dy), type("text"), keypress("key"), wait(ms).',
            "When every criterion is decided, reply with finish(<json>) where <json> matches:",
            SUMMARY_JSON_SCHEMA_TEXT,
            "Justify each verdict with concrete evidence: the step indices that show it.",
        ]
    )
    return "\n".join(lines)
