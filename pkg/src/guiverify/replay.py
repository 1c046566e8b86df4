"""Deterministic replay adapters.

Scripts are recordings of model turns (reasoning, action text, token
usage) replayed in order; an entry may pin the state digest it expects
to observe so drift between the recording and the app under test fails
fast. A script book maps requirement ids to recordings, with per-app
variants keyed by the app-definition digest, the way one keeps separate
cassettes for different builds of the same app.
"""

from __future__ import annotations

import json
import random
import re
from pathlib import Path
from typing import Any

from .protocol import AdapterReply, History, UsageStats
from .simenv import SimApp, app_digest


class ScriptExhausted(RuntimeError):
    """The recording ended before the run finished."""


class HashAssertionFailed(AssertionError):
    """Observed state digest differs from the recorded one."""


_STATE_LINE = re.compile(rb"\[state ([0-9a-f]+) step (\d+)\]\s*$")


def observed_state_digest(observation: bytes) -> str | None:
    """Pull the state digest out of a simulated-environment observation."""
    match = _STATE_LINE.search(observation)
    return match.group(1).decode() if match else None


class ReplayAdapter:
    """Replays scripted turns in order; the bundled model backend."""

    def __init__(self, entries: list[dict[str, Any]], name: str = "replay"):
        self.entries = list(entries)
        self.name = name
        self.cursor = 0

    @classmethod
    def from_file(cls, path: str | Path) -> "ReplayAdapter":
        with open(path, encoding="utf-8") as fh:
            entries = json.load(fh)
        if not isinstance(entries, list):
            raise ValueError(f"replay script {path} must be a JSON list")
        return cls(entries, name=str(path))

    def __call__(self, prompt: str, observation: bytes, history: History) -> AdapterReply:
        if self.cursor >= len(self.entries):
            raise ScriptExhausted(
                f"{self.name}: script ended after {len(self.entries)} turns without finishing"
            )
        entry = self.entries[self.cursor]
        expected = entry.get("expect_hash")
        if expected is not None:
            observed = observed_state_digest(observation)
            if observed != expected:
                raise HashAssertionFailed(
                    f"{self.name}: turn {self.cursor}: expected state {expected}, observed {observed}"
                )
        self.cursor += 1
        return AdapterReply(
            reasoning=entry.get("reasoning", ""),
            action_text=entry["action"],
            usage=UsageStats.from_dict(entry.get("usage", {})),
        )


def scripted_agent(path: str | Path) -> ReplayAdapter:
    return ReplayAdapter.from_file(path)


class ScriptBook:
    """Directory of recordings: ``<req-id>.json`` plus per-app-build variants.

    Variants live under ``variants/<app digest>/<req-id>.json`` and win
    over the default recording when the digest of the app under test
    matches, so a patched app replays the recording made against it.
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    @classmethod
    def for_app_path(cls, app_path: str | Path) -> "ScriptBook":
        app_path = Path(app_path)
        stem = app_path.name
        if stem.endswith(".app.json"):
            stem = stem[: -len(".app.json")]
        else:
            stem = app_path.stem
        return cls(app_path.parent / f"{stem}.scripts")

    def script_path(self, requirement_id: str, app: SimApp | None = None) -> Path:
        if app is not None:
            variant = self.directory / "variants" / app_digest(app) / f"{requirement_id}.json"
            if variant.exists():
                return variant
        return self.directory / f"{requirement_id}.json"

    def adapter_for(self, requirement_id: str, app: SimApp | None = None) -> ReplayAdapter:
        path = self.script_path(requirement_id, app)
        if not path.exists():
            raise FileNotFoundError(f"no recording for {requirement_id!r} in {self.directory}")
        return ReplayAdapter.from_file(path)


class NoisyVerdictAdapter:
    """Wraps an adapter and flips criterion verdicts with probability p.

    Only the finish payload is touched; navigation turns pass through
    untouched. Used to measure verdict-level accuracy degradation under
    a known error rate.
    """

    def __init__(self, base, flip_p: float, seed: int):
        self.base = base
        self.flip_p = flip_p
        self.rng = random.Random(seed)

    def __call__(self, prompt: str, observation: bytes, history: History) -> AdapterReply:
        reply = self.base(prompt, observation, history)
        text = reply.action_text.strip()
        if not text.startswith("finish(") or not text.endswith(")"):
            return reply
        try:
            payload = json.loads(text[len("finish(") : -1])
        except json.JSONDecodeError:
            return reply
        if not isinstance(payload, dict) or not isinstance(payload.get("criteria"), list):
            return reply
        for entry in payload["criteria"]:
            if self.rng.random() < self.flip_p:
                entry["verdict"] = "unmet" if entry.get("verdict") == "met" else "met"
                entry["explanation"] = "(verdict flipped by noise wrapper) " + str(
                    entry.get("explanation", "")
                )
        flipped = "finish(" + json.dumps(payload, sort_keys=True) + ")"
        return AdapterReply(reasoning=reply.reasoning, action_text=flipped, usage=reply.usage)
