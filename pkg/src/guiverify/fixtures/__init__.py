"""Bundled demo apps, recordings, and gold labels for offline runs."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

FIXTURE_APPS = ("budget", "taskpad")


def fixtures_dir() -> Path:
    return Path(__file__).resolve().parent


def fixture_path(name: str) -> Path:
    path = fixtures_dir() / name
    if not path.exists():
        raise FileNotFoundError(f"no bundled fixture named {name!r}")
    return path


def load_gold(app_name: str) -> dict[str, Any]:
    """Gold labels: requirement id -> expected state and per-AC verdicts."""
    with open(fixture_path(f"{app_name}.gold.json"), encoding="utf-8") as fh:
        return json.load(fh)


def requirements_text(app_name: str) -> str:
    return fixture_path(f"{app_name}.requirements.txt").read_text(encoding="utf-8")


def repair_note_clearing(app_data: dict[str, Any]) -> dict[str, Any]:
    """The known fix for the budget app's seeded defect.

    The shipped add button clears only the amount field; this adds the
    missing clear of the note field. Used by the demo fixer in the
    autonomous fix-and-verify loop and by the fixture generator to
    record the repaired build's replay scripts.
    """
    for screen in app_data["screens"]:
        for widget in screen["widgets"]:
            if widget["id"] != "add-btn":
                continue
            effects = widget.setdefault("on_click", [])
            patch = {"kind": "clear_field", "widget": "note"}
            if patch not in effects:
                effects.append(patch)
            return app_data
    raise KeyError("add-btn not found; not the budget app definition")
