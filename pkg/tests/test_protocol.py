"""Action grammar, prompt assembly, and summary parsing."""

from __future__ import annotations

import json
import random

import pytest

from guiverify.protocol import (
    Action,
    ActionKind,
    BadArity,
    BadVerdictToken,
    ExtraCriterion,
    JsonSyntax,
    MissingCriterion,
    NonNumericCoordinate,
    UnknownVerb,
    build_verification_prompt,
    format_action,
    parse_action,
    parse_summary,
)
from guiverify.requirements import (
    RequirementState,
    Verdict,
    derive_requirement_state,
    parse_requirements_structured,
)


def sample_requirement(n_acs: int = 3, test_data: bool = True):
    lines = ["REQ: Sample requirement", "DESC: What the feature should do."]
    lines.extend(f"AC: criterion number {i}" for i in range(n_acs))
    if test_data:
        lines.append("DATA: amount=12.50, note=Lunch")
    return parse_requirements_structured("\n".join(lines))[0]


class TestActionGrammar:
    def test_click(self):
        assert parse_action("click(120, 45)") == Action.click(120, 45)

    def test_type(self):
        assert parse_action('type("12.50")') == Action.type_text("12.50")

    def test_negative_coordinates_parse(self):
        assert parse_action("click(-5, 10)") == Action.click(-5, 10)

    def test_scroll(self):
        assert parse_action("scroll(10, 20, 0, -40)") == Action.scroll(10, 20, 0, -40)

    def test_unknown_verb(self):
        with pytest.raises(UnknownVerb):
            parse_action("swipe(1,2)")

    def test_no_parens(self):
        with pytest.raises(UnknownVerb):
            parse_action("just some prose")

    def test_bad_arity(self):
        with pytest.raises(BadArity):
            parse_action("click(1)")
        with pytest.raises(BadArity):
            parse_action("scroll(1, 2)")
        with pytest.raises(BadArity):
            parse_action("type(unquoted)")

    def test_non_numeric(self):
        with pytest.raises(NonNumericCoordinate):
            parse_action("click(a, 10)")
        with pytest.raises(NonNumericCoordinate):
            parse_action("wait(-5)")

    def test_format_click(self):
        assert format_action(Action.click(10, 10)) == "click(10, 10)"

    def test_format_finish(self):
        payload = '{"requirement_id": "req-1"}'
        assert format_action(Action.finish(payload)) == f"finish({payload})"

    def test_finish_payload_with_parens(self):
        raw = 'finish({"narrative": "clicked (twice)"})'
        action = parse_action(raw)
        assert action.kind is ActionKind.FINISH
        assert action.summary_json == '{"narrative": "clicked (twice)"}'
        assert format_action(action) == raw


def random_action(rng: random.Random) -> Action:
    kind = rng.choice(list(ActionKind))
    if kind in (ActionKind.CLICK, ActionKind.DOUBLE_CLICK):
        return Action(kind, x=rng.randint(-500, 2000), y=rng.randint(-500, 2000))
    if kind is ActionKind.SCROLL:
        return Action.scroll(
            rng.randint(0, 2000), rng.randint(0, 2000), rng.randint(-300, 300), rng.randint(-300, 300)
        )
    if kind in (ActionKind.TYPE, ActionKind.KEYPRESS):
        alphabet = 'abcXYZ 0123 αβγ ,()"\\\'{}[]\t'
        text = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 24)))
        return Action.type_text(text) if kind is ActionKind.TYPE else Action.keypress(text or "enter")
    if kind is ActionKind.WAIT:
        return Action.wait(rng.randint(0, 60_000))
    payload = json.dumps({"k": rng.randint(0, 9), "s": "x" * rng.randint(0, 5)})
    return Action.finish(payload)


def test_round_trip_identity_over_random_actions():
    rng = random.Random(20240817)
    for _ in range(1000):
        action = random_action(rng)
        assert parse_action(format_action(action)) == action


class TestPrompt:
    def test_lists_each_criterion_once(self):
        req = sample_requirement(3)
        prompt = build_verification_prompt(req, "fixture:budget")
        for ac in req.criteria:
            assert prompt.count(f"- {ac.id}: {ac.text}") == 1

    def test_contains_contract_pieces(self):
        req = sample_requirement()
        prompt = build_verification_prompt(req, "fixture:budget")
        assert "autonomously" in prompt
        assert "as few actions as possible" in prompt
        assert req.description in prompt
        assert "- amount = 12.50" in prompt
        assert "fixture:budget" in prompt
        assert '"overall": "met"|"partially_met"|"unmet"' in prompt

    def test_empty_test_data_omits_section(self):
        req = sample_requirement(test_data=False)
        prompt = build_verification_prompt(req, "app")
        assert "Test data" not in prompt

    def test_deterministic_bytes(self):
        req = sample_requirement()
        first = build_verification_prompt(req, "fixture:budget")
        second = build_verification_prompt(req, "fixture:budget")
        assert first.encode() == second.encode()


def summary_payload(req, verdicts: dict[str, str], overall: str = "met") -> str:
    return json.dumps(
        {
            "requirement_id": req.id,
            "overall": overall,
            "criteria": [
                {"id": ac_id, "verdict": verdict, "explanation": "because", "evidence": [0]}
                for ac_id, verdict in verdicts.items()
            ],
            "narrative": "done",
        }
    )


class TestSummaryParsing:
    def test_all_met(self):
        req = sample_requirement(3)
        payload = summary_payload(req, {ac.id: "met" for ac in req.criteria})
        summary = parse_summary(payload, req)
        assert summary.overall is RequirementState.MET
        assert [c.id for c in summary.criteria] == [ac.id for ac in req.criteria]

    def test_overall_recomputed(self):
        req = sample_requirement(3)
        verdicts = {ac.id: "met" for ac in req.criteria}
        verdicts[req.criteria[1].id] = "unmet"
        summary = parse_summary(summary_payload(req, verdicts, overall="met"), req)
        assert summary.overall is RequirementState.PARTIALLY_MET

    def test_missing_criterion(self):
        req = sample_requirement(3)
        verdicts = {ac.id: "met" for ac in req.criteria[:-1]}
        with pytest.raises(MissingCriterion):
            parse_summary(summary_payload(req, verdicts), req)

    def test_extra_criterion(self):
        req = sample_requirement(2)
        verdicts = {ac.id: "met" for ac in req.criteria}
        verdicts["ac-99"] = "met"
        with pytest.raises(ExtraCriterion):
            parse_summary(summary_payload(req, verdicts), req)

    def test_bad_verdict_token(self):
        req = sample_requirement(2)
        verdicts = {req.criteria[0].id: "met", req.criteria[1].id: "partially"}
        with pytest.raises(BadVerdictToken):
            parse_summary(summary_payload(req, verdicts), req)

    def test_not_json(self):
        req = sample_requirement(2)
        with pytest.raises(JsonSyntax):
            parse_summary("definitely not json", req)

    def test_negative_evidence_rejected(self):
        req = sample_requirement(1)
        payload = json.dumps(
            {
                "requirement_id": req.id,
                "overall": "met",
                "criteria": [{"id": "ac-1", "verdict": "met", "explanation": "", "evidence": [-1]}],
                "narrative": "",
            }
        )
        with pytest.raises(JsonSyntax):
            parse_summary(payload, req)

    def test_soundness_over_random_verdicts(self):
        rng = random.Random(7)
        for _ in range(200):
            req = sample_requirement(rng.randint(1, 6))
            verdicts = {ac.id: rng.choice(["met", "unmet"]) for ac in req.criteria}
            summary = parse_summary(summary_payload(req, verdicts, overall="unmet"), req)
            expected = derive_requirement_state(
                [Verdict(verdicts[ac.id]) for ac in req.criteria]
            )
            assert summary.overall is expected
