#!/usr/bin/env python3
"""Regenerate the bundled fixture apps, recordings, and gold labels.

Recordings are authored by actually stepping the simulator: every turn
pins the state digest it observed, so any later drift in the
environment or the app definitions fails loudly. After writing
everything, each requirement is run end-to-end through the runner and
the resulting states are checked against the gold labels.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

SRC = Path(__file__).resolve().parents[1] / "src"
sys.path.insert(0, str(SRC))

from guiverify.fixtures import repair_note_clearing  # noqa: E402
from guiverify.protocol import Action, format_action  # noqa: E402
from guiverify.replay import ScriptBook  # noqa: E402
from guiverify.requirements import parse_requirements_structured  # noqa: E402
from guiverify.runner import RunConfig, RunStatus, run_verification  # noqa: E402
from guiverify.simenv import SimEnvironment, app_digest, app_from_dict  # noqa: E402

FIXTURES = SRC / "guiverify" / "fixtures"


# --------------------------------------------------------------------------
# app definitions
# --------------------------------------------------------------------------

BUDGET_APP = {
    "app_id": "budget",
    "viewport": {"width": 360, "height": 640},
    "initial_screen": "main",
    "stores": {"expenses": []},
    "screens": [
        {
            "id": "main",
            "widgets": [
                {"id": "title", "kind": "label", "bounds": [10, 8, 200, 24], "label": "Budget Tracker"},
                {"id": "amount", "kind": "text_input", "bounds": [10, 44, 200, 28], "label": "Amount"},
                {"id": "note", "kind": "text_input", "bounds": [10, 84, 200, 28], "label": "Note"},
                {
                    "id": "add-btn",
                    "kind": "button",
                    "bounds": [10, 124, 140, 32],
                    "label": "Add expense",
                    "on_click": [
                        {"kind": "append", "store": "expenses", "fields": ["amount", "note"]},
                        {"kind": "clear_field", "widget": "amount"},
                        # seeded defect: the note field is not cleared here
                    ],
                },
                {"id": "expense-list", "kind": "list_view", "bounds": [10, 168, 340, 160], "store": "expenses"},
                {
                    "id": "to-summary",
                    "kind": "button",
                    "bounds": [10, 340, 140, 32],
                    "label": "Summary",
                    "on_click": [{"kind": "navigate", "target": "summary"}],
                },
            ],
        },
        {
            "id": "summary",
            "widgets": [
                {"id": "sum-title", "kind": "label", "bounds": [10, 8, 200, 24], "label": "Summary"},
                {"id": "sum-list", "kind": "list_view", "bounds": [10, 44, 340, 260], "store": "expenses"},
                {
                    "id": "back-btn",
                    "kind": "button",
                    "bounds": [10, 320, 140, 32],
                    "label": "Back",
                    "on_click": [{"kind": "navigate", "target": "main"}],
                },
            ],
        },
    ],
}

BUDGET_REQUIREMENTS = """\
REQ: Record an expense
DESC: Users can record a new expense from the main screen.
AC: The main screen shows an amount input field.
AC: Clicking the add button appends the expense to the list.
AC: The amount field is cleared after adding.
DATA: amount=12.50

REQ: Review expenses on a summary screen
DESC: A dedicated summary screen lists all recorded expenses.
AC: The main screen has a button that opens the summary screen.
AC: The summary screen lists previously added expenses.
DATA: amount=7.25

REQ: Expense note handling
DESC: An optional note can be attached to each expense.
AC: The main screen shows a note input field.
AC: The note field is cleared after adding an expense.
DATA: note=Lunch, amount=3.00

REQ: Budget limit warning
DESC: Users can set a monthly limit and get warned when exceeding it.
AC: The main screen shows a limit input field.
AC: A warning appears once expenses exceed the limit.
DATA: limit=100

REQ: Branding and navigation
DESC: The app presents clear branding and simple navigation.
AC: The main screen shows the application title.
AC: The summary screen has a button leading back to the main screen.
"""

TASKPAD_APP = {
    "app_id": "taskpad",
    "viewport": {"width": 400, "height": 600},
    "initial_screen": "home",
    "stores": {"tasks": []},
    "screens": [
        {
            "id": "home",
            "widgets": [
                {"id": "title", "kind": "label", "bounds": [12, 8, 220, 24], "label": "Taskpad"},
                {"id": "task", "kind": "text_input", "bounds": [12, 44, 220, 28], "label": "Task"},
                {"id": "priority", "kind": "text_input", "bounds": [12, 84, 220, 28], "label": "Priority"},
                {
                    "id": "add-task",
                    "kind": "button",
                    "bounds": [12, 124, 130, 32],
                    "label": "Add task",
                    "on_click": [
                        {"kind": "append", "store": "tasks", "fields": ["task", "priority"]},
                        {"kind": "clear_field", "widget": "task"},
                        # seeded defect: priority is left as typed
                    ],
                },
                {"id": "task-list", "kind": "list_view", "bounds": [12, 168, 370, 180], "store": "tasks"},
                {
                    "id": "to-stats",
                    "kind": "button",
                    "bounds": [12, 360, 130, 32],
                    "label": "Stats",
                    "on_click": [{"kind": "navigate", "target": "stats"}],
                },
            ],
        },
        {
            "id": "stats",
            "widgets": [
                {"id": "stats-title", "kind": "label", "bounds": [12, 8, 220, 24], "label": "Stats"},
                {"id": "stats-list", "kind": "list_view", "bounds": [12, 44, 370, 240], "store": "tasks"},
                {
                    "id": "home-btn",
                    "kind": "button",
                    "bounds": [12, 300, 130, 32],
                    "label": "Home",
                    "on_click": [{"kind": "navigate", "target": "home"}],
                },
            ],
        },
    ],
}

TASKPAD_REQUIREMENTS = """\
REQ: Capture a task
DESC: Users can capture a new task from the home screen.
AC: The home screen shows a task input field.
AC: Clicking the add button appends the task to the list.
AC: The task field is cleared after adding.
DATA: task=Buy milk

REQ: Review tasks on a stats screen
DESC: A dedicated stats screen lists all captured tasks.
AC: The home screen has a button that opens the stats screen.
AC: The stats screen lists previously captured tasks.
DATA: task=Water plants

REQ: Task priority capture
DESC: Tasks can carry a priority level.
AC: The home screen shows a priority input field.
AC: The priority field is cleared after adding a task.
DATA: priority=high, task=Email Sam

REQ: Due dates
DESC: Tasks can carry a due date and overdue tasks are highlighted.
AC: The home screen shows a due date input field.
AC: Overdue tasks are marked in the task list.
DATA: due=2024-01-01

REQ: Branding and navigation
DESC: The app presents clear branding and simple navigation.
AC: The home screen shows the application title.
AC: The stats screen has a button leading back to the home screen.
"""


# --------------------------------------------------------------------------
# plans: (requirement id, [turns], [criterion verdicts])
# a turn is (reasoning, action spec); action specs resolve widget centers
# --------------------------------------------------------------------------


def click(widget_id):
    return ("click", widget_id)


def type_text(text):
    return ("type", text)


def wait(ms=50):
    return ("wait", ms)


def budget_plans(defect_present: bool):
    note_verdict = "unmet" if defect_present else "met"
    note_explanation = (
        "After adding, the note input still contains the typed text; the add button only clears the amount field."
        if defect_present
        else "After adding, the note input is empty again."
    )
    return {
        "req-1": {
            "turns": [
                ("The amount input is visible on the main screen; I will focus it.", click("amount")),
                ("Entering the test amount.", type_text("12.50")),
                ("Submitting the expense with the add button.", click("add-btn")),
                ("Reviewing the updated screen: the list grew by one row and the amount field is empty.", wait()),
            ],
            "criteria": [
                ("ac-1", "met", "The main screen renders an amount input field.", [0]),
                ("ac-2", "met", "After clicking the add button the expense list shows the new 12.50 row.", [3]),
                ("ac-3", "met", "The amount input reads empty right after the add click.", [3]),
            ],
            "narrative": "Recorded a 12.50 expense end to end; every criterion held.",
        },
        "req-2": {
            "turns": [
                ("Adding one expense first so the summary has content.", click("amount")),
                ("Entering the test amount.", type_text("7.25")),
                ("Submitting the expense.", click("add-btn")),
                ("A Summary button is present on the main screen; opening it.", click("to-summary")),
                ("The summary screen lists the expense added earlier.", wait()),
            ],
            "criteria": [
                ("ac-1", "met", "The main screen has a Summary button that navigates to the summary screen.", [3]),
                ("ac-2", "met", "The summary list shows the 7.25 expense recorded before navigating.", [4]),
            ],
            "narrative": "Summary navigation works and the list carries over.",
        },
        "req-3": {
            "turns": [
                ("The note input is visible; focusing it.", click("note")),
                ("Entering the test note.", type_text("Lunch")),
                ("Also filling the amount so the expense is complete.", click("amount")),
                ("Entering the amount.", type_text("3.00")),
                ("Submitting the expense.", click("add-btn")),
                ("Checking both inputs after the add.", wait()),
            ],
            "criteria": [
                ("ac-1", "met", "The main screen renders a note input field.", [0]),
                ("ac-2", note_verdict, note_explanation, [5]),
            ],
            "narrative": "Note capture verified; see the per-criterion explanations.",
        },
        "req-4": {
            "turns": [
                ("Scanning the main screen: amount and note inputs only, no limit field.", wait()),
                ("Checking the summary screen for limit controls.", click("to-summary")),
                ("The summary screen shows the list and a back button; no limit or warning widgets.", wait()),
            ],
            "criteria": [
                ("ac-1", "unmet", "Neither screen offers a limit input field.", [0, 2]),
                ("ac-2", "unmet", "No warning element exists anywhere, so exceeding a limit cannot surface one.", [2]),
            ],
            "narrative": "Budget limit functionality is absent.",
        },
        "req-5": {
            "turns": [
                ("The title label is visible at the top of the main screen.", wait()),
                ("Opening the summary screen to inspect its navigation.", click("to-summary")),
                ("A Back button is present on the summary screen.", wait()),
                ("Clicking Back to confirm it returns home.", click("back-btn")),
                ("Back on the main screen; navigation is complete.", wait()),
            ],
            "criteria": [
                ("ac-1", "met", "The main screen shows the application title label.", [0]),
                ("ac-2", "met", "The summary screen's Back button returns to the main screen.", [2, 4]),
            ],
            "narrative": "Branding and round-trip navigation verified.",
        },
    }


def taskpad_plans():
    return {
        "req-1": {
            "turns": [
                ("The task input is visible on the home screen; focusing it.", click("task")),
                ("Entering the test task.", type_text("Buy milk")),
                ("Submitting with the add button.", click("add-task")),
                ("The task list shows the new row and the task field is empty.", wait()),
            ],
            "criteria": [
                ("ac-1", "met", "The home screen renders a task input field.", [0]),
                ("ac-2", "met", "After the add click the task list contains the Buy milk row.", [3]),
                ("ac-3", "met", "The task input reads empty right after adding.", [3]),
            ],
            "narrative": "Captured a task end to end.",
        },
        "req-2": {
            "turns": [
                ("Capturing one task first so the stats screen has content.", click("task")),
                ("Entering the test task.", type_text("Water plants")),
                ("Submitting the task.", click("add-task")),
                ("A Stats button exists on the home screen; opening it.", click("to-stats")),
                ("The stats screen lists the captured task.", wait()),
            ],
            "criteria": [
                ("ac-1", "met", "The home screen has a Stats button that navigates to the stats screen.", [3]),
                ("ac-2", "met", "The stats list shows the Water plants task captured before navigating.", [4]),
            ],
            "narrative": "Stats navigation works and the list carries over.",
        },
        "req-3": {
            "turns": [
                ("The priority input is visible; focusing it.", click("priority")),
                ("Entering the test priority.", type_text("high")),
                ("Also filling the task field.", click("task")),
                ("Entering the task.", type_text("Email Sam")),
                ("Submitting the task.", click("add-task")),
                ("Checking both inputs after the add.", wait()),
            ],
            "criteria": [
                ("ac-1", "met", "The home screen renders a priority input field.", [0]),
                (
                    "ac-2",
                    "unmet",
                    "After adding, the priority input still contains the typed text; only the task field is cleared.",
                    [5],
                ),
            ],
            "narrative": "Priority capture verified; clearing is defective.",
        },
        "req-4": {
            "turns": [
                ("Scanning the home screen: task and priority inputs only, no due date field.", wait()),
                ("Checking the stats screen for due date or overdue markers.", click("to-stats")),
                ("The stats screen shows the plain list; no date controls or markers.", wait()),
            ],
            "criteria": [
                ("ac-1", "unmet", "Neither screen offers a due date input field.", [0, 2]),
                ("ac-2", "unmet", "List rows carry no overdue marker anywhere.", [2]),
            ],
            "narrative": "Due date functionality is absent.",
        },
        "req-5": {
            "turns": [
                ("The title label is visible at the top of the home screen.", wait()),
                ("Opening the stats screen to inspect its navigation.", click("to-stats")),
                ("A Home button is present on the stats screen.", wait()),
                ("Clicking Home to confirm it returns.", click("home-btn")),
                ("Back on the home screen; navigation is complete.", wait()),
            ],
            "criteria": [
                ("ac-1", "met", "The home screen shows the application title label.", [0]),
                ("ac-2", "met", "The stats screen's Home button returns to the home screen.", [2, 4]),
            ],
            "narrative": "Branding and round-trip navigation verified.",
        },
    }


# --------------------------------------------------------------------------
# recording machinery
# --------------------------------------------------------------------------


def resolve_action(app, spec) -> Action:
    kind = spec[0]
    if kind == "click":
        x, y = app.widget(spec[1]).center()
        return Action.click(x, y)
    if kind == "type":
        return Action.type_text(spec[1])
    if kind == "wait":
        return Action.wait(spec[1])
    raise ValueError(f"unknown plan action {spec!r}")


def record_script(app, req_id: str, plan: dict, usage_base: int) -> list[dict]:
    env = SimEnvironment(app)
    entries = []
    for i, (reasoning, spec) in enumerate(plan["turns"]):
        observation = env.observe()
        action = resolve_action(app, spec)
        entries.append(
            {
                "reasoning": reasoning,
                "action": format_action(action),
                "usage": {"input_tokens": usage_base + 211 * i, "output_tokens": 48 + 9 * i},
                "expect_hash": observation.state_hash,
            }
        )
        env.execute(action)
    observation = env.observe()
    payload = {
        "requirement_id": req_id,
        "overall": _overall([v for _, v, _, _ in plan["criteria"]]),
        "criteria": [
            {"id": ac_id, "verdict": verdict, "explanation": explanation, "evidence": evidence}
            for ac_id, verdict, explanation, evidence in plan["criteria"]
        ],
        "narrative": plan["narrative"],
    }
    entries.append(
        {
            "reasoning": "All criteria are decided; emitting the structured summary.",
            "action": "finish(" + json.dumps(payload) + ")",
            "usage": {"input_tokens": usage_base + 211 * len(plan["turns"]), "output_tokens": 240},
            "expect_hash": observation.state_hash,
        }
    )
    return entries


def _overall(verdicts: list[str]) -> str:
    if all(v == "met" for v in verdicts):
        return "met"
    if all(v == "unmet" for v in verdicts):
        return "unmet"
    return "partially_met"


def write_scripts(app_data: dict, plans: dict, scripts_dir: Path, usage_base: int) -> None:
    app = app_from_dict(app_data)
    scripts_dir.mkdir(parents=True, exist_ok=True)
    for req_id, plan in plans.items():
        script = record_script(app, req_id, plan, usage_base)
        (scripts_dir / f"{req_id}.json").write_text(
            json.dumps(script, indent=2) + "\n", encoding="utf-8"
        )


def gold_from_plans(plans: dict) -> dict:
    gold = {}
    for req_id, plan in plans.items():
        gold[req_id] = {
            "state": _overall([v for _, v, _, _ in plan["criteria"]]),
            "criteria": {ac_id: verdict for ac_id, verdict, _, _ in plan["criteria"]},
        }
    return gold


def selfcheck(app_data: dict, requirements_text: str, scripts_dir: Path, gold: dict) -> None:
    app = app_from_dict(app_data)
    book = ScriptBook(scripts_dir)
    requirements = parse_requirements_structured(requirements_text)
    for req in requirements:
        adapter = book.adapter_for(req.id, app)
        run = run_verification(req, app, adapter, RunConfig(), app_ref=app.app_id)
        assert run.status is RunStatus.SUCCEEDED, f"{app.app_id}/{req.id}: {run.warnings}"
        expected = gold[req.id]
        assert req.state.value == expected["state"], (
            f"{app.app_id}/{req.id}: derived {req.state.value}, gold {expected['state']}"
        )
        for ac in req.criteria:
            assert ac.verdict.value == expected["criteria"][ac.id], (
                f"{app.app_id}/{req.id}/{ac.id}: {ac.verdict.value}"
            )


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)

    # budget: shipped (defective) build plus recordings for the repaired build
    budget_plans_shipped = budget_plans(defect_present=True)
    (FIXTURES / "budget.app.json").write_text(
        json.dumps(BUDGET_APP, indent=2) + "\n", encoding="utf-8"
    )
    (FIXTURES / "budget.requirements.txt").write_text(BUDGET_REQUIREMENTS, encoding="utf-8")
    write_scripts(BUDGET_APP, budget_plans_shipped, FIXTURES / "budget.scripts", usage_base=1900)
    budget_gold = gold_from_plans(budget_plans_shipped)
    (FIXTURES / "budget.gold.json").write_text(
        json.dumps(budget_gold, indent=2) + "\n", encoding="utf-8"
    )
    selfcheck(BUDGET_APP, BUDGET_REQUIREMENTS, FIXTURES / "budget.scripts", budget_gold)

    repaired = repair_note_clearing(json.loads(json.dumps(BUDGET_APP)))
    repaired_digest = app_digest(app_from_dict(repaired))
    variant_dir = FIXTURES / "budget.scripts" / "variants" / repaired_digest
    repaired_plans = budget_plans(defect_present=False)
    write_scripts(repaired, repaired_plans, variant_dir, usage_base=1900)
    selfcheck(repaired, BUDGET_REQUIREMENTS, FIXTURES / "budget.scripts", gold_from_plans(repaired_plans))

    # taskpad
    (FIXTURES / "taskpad.app.json").write_text(
        json.dumps(TASKPAD_APP, indent=2) + "\n", encoding="utf-8"
    )
    (FIXTURES / "taskpad.requirements.txt").write_text(TASKPAD_REQUIREMENTS, encoding="utf-8")
    write_scripts(TASKPAD_APP, taskpad_plans(), FIXTURES / "taskpad.scripts", usage_base=1500)
    taskpad_gold = gold_from_plans(taskpad_plans())
    (FIXTURES / "taskpad.gold.json").write_text(
        json.dumps(taskpad_gold, indent=2) + "\n", encoding="utf-8"
    )
    selfcheck(TASKPAD_APP, TASKPAD_REQUIREMENTS, FIXTURES / "taskpad.scripts", taskpad_gold)

    # canned extractor recording: free-form text in, structured requirements out
    extractor_payload = [
        {
            "title": req.title,
            "description": req.description,
            "criteria": [{"text": ac.text} for ac in req.criteria],
            "test_data": [{"key": k, "value": v} for k, v in req.test_data],
        }
        for req in parse_requirements_structured(BUDGET_REQUIREMENTS)
    ]
    extractor_script = [
        {
            "reasoning": "Structured the prose into titled requirements with acceptance criteria.",
            "action": "finish(" + json.dumps(extractor_payload) + ")",
            "usage": {"input_tokens": 2400, "output_tokens": 560},
        }
    ]
    (FIXTURES / "extractor.replay.json").write_text(
        json.dumps(extractor_script, indent=2) + "\n", encoding="utf-8"
    )

    print(f"fixtures written to {FIXTURES}")
    print(f"repaired budget digest: {repaired_digest}")


if __name__ == "__main__":
    main()
