"""Deterministic simulated GUI environment.

Apps are declarative widget trees (screens of buttons, text inputs,
labels and list views) compiled into a small state machine. The
environment contract is observe / execute / reset; observations are
deterministic textual renders plus a 64-bit state digest, so golden
files and cross-run equivalence checks are exact. A pixel-rendering
backend could implement the same contract.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import jsonschema

LIST_ITEM_HEIGHT = 20


class WidgetKind(str, Enum):
    BUTTON = "button"
    TEXT_INPUT = "text_input"
    LABEL = "label"
    LIST_VIEW = "list_view"


class EffectKind(str, Enum):
    NAVIGATE = "navigate"
    APPEND = "append"
    SET_FIELD = "set_field"
    CLEAR_FIELD = "clear_field"


class SimEnvError(Exception):
    """Base for environment-side failures."""


class SchemaViolation(SimEnvError):
    pass


class DanglingTransition(SimEnvError):
    pass


class OverlappingBounds(SimEnvError):
    pass


class OutOfViewport(SimEnvError):
    pass


class FinishNotExecutable(SimEnvError):
    """Finish is a protocol-level action; the environment never runs it."""


@dataclass(frozen=True)
class Effect:
    kind: EffectKind
    target: str = ""  # screen id (navigate)
    store: str = ""  # store id (append)
    fields: tuple[str, ...] = ()  # source text inputs (append)
    value: str = ""  # literal (append without fields, set_field)
    widget: str = ""  # text input id (set_field / clear_field)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Effect":
        return cls(
            kind=EffectKind(data["kind"]),
            target=data.get("target", ""),
            store=data.get("store", ""),
            fields=tuple(data.get("fields", [])),
            value=data.get("value", ""),
            widget=data.get("widget", ""),
        )

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind.value}
        if self.target:
            out["target"] = self.target
        if self.store:
            out["store"] = self.store
        if self.fields:
            out["fields"] = list(self.fields)
        if self.value:
            out["value"] = self.value
        if self.widget:
            out["widget"] = self.widget
        return out


@dataclass(frozen=True)
class Widget:
    id: str
    kind: WidgetKind
    bounds: tuple[int, int, int, int]  # x, y, w, h in pixels
    label: str = ""
    value: str = ""  # initial text for text inputs
    store: str = ""  # bound store for list views
    on_click: tuple[Effect, ...] = ()

    def contains(self, x: int, y: int) -> bool:
        bx, by, bw, bh = self.bounds
        return bx <= x < bx + bw and by <= y < by + bh

    def center(self) -> tuple[int, int]:
        bx, by, bw, bh = self.bounds
        return bx + bw // 2, by + bh // 2


@dataclass(frozen=True)
class Screen:
    id: str
    widgets: tuple[Widget, ...]

    def widget(self, widget_id: str) -> Widget:
        for w in self.widgets:
            if w.id == widget_id:
                return w
        raise KeyError(widget_id)


@dataclass(frozen=True)
class SimApp:
    app_id: str
    viewport: tuple[int, int]  # width, height
    screens: dict[str, Screen]
    initial_screen: str
    stores: dict[str, tuple[str, ...]]

    def widget(self, widget_id: str) -> Widget:
        for screen in self.screens.values():
            for w in screen.widgets:
                if w.id == widget_id:
                    return w
        raise KeyError(widget_id)


@dataclass
class SimState:
    current_screen: str
    field_values: dict[str, str]
    store_values: dict[str, list[str]]
    focus: str | None = None
    scroll_offsets: dict[str, int] = field(default_factory=dict)
    step_count: int = 0

    def clone(self) -> "SimState":
        return SimState(
            current_screen=self.current_screen,
            field_values=dict(self.field_values),
            store_values={k: list(v) for k, v in self.store_values.items()},
            focus=self.focus,
            scroll_offsets=dict(self.scroll_offsets),
            step_count=self.step_count,
        )


@dataclass(frozen=True)
class Observation:
    rendering: str
    state_hash: str
    step_index: int

    def to_bytes(self) -> bytes:
        return f"{self.rendering}\n[state {self.state_hash} step {self.step_index}]".encode()


APP_JSON_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["app_id", "viewport", "initial_screen", "screens"],
    "properties": {
        "app_id": {"type": "string", "minLength": 1},
        "viewport": {
            "type": "object",
            "required": ["width", "height"],
            "properties": {
                "width": {"type": "integer", "minimum": 1},
                "height": {"type": "integer", "minimum": 1},
            },
        },
        "initial_screen": {"type": "string"},
        "stores": {
            "type": "object",
            "additionalProperties": {"type": "array", "items": {"type": "string"}},
        },
        "screens": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "widgets"],
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "widgets": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["id", "kind", "bounds"],
                            "properties": {
                                "id": {"type": "string", "minLength": 1},
                                "kind": {"enum": [k.value for k in WidgetKind]},
                                "bounds": {
                                    "type": "array",
                                    "minItems": 4,
                                    "maxItems": 4,
                                    "items": {"type": "integer"},
                                },
                                "label": {"type": "string"},
                                "value": {"type": "string"},
                                "store": {"type": "string"},
                                "on_click": {
                                    "type": "array",
                                    "items": {
                                        "type": "object",
                                        "required": ["kind"],
                                        "properties": {
                                            "kind": {"enum": [k.value for k in EffectKind]},
                                            "target": {"type": "string"},
                                            "store": {"type": "string"},
                                            "fields": {"type": "array", "items": {"type": "string"}},
                                            "value": {"type": "string"},
                                            "widget": {"type": "string"},
                                        },
                                    },
                                },
                            },
                        },
                    },
                },
            },
        },
    },
}


def _rects_overlap(a: tuple[int, int, int, int], b: tuple[int, int, int, int]) -> bool:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    return ax < bx + bw and bx < ax + aw and ay < by + bh and by < ay + ah


def app_from_dict(data: dict[str, Any]) -> SimApp:
    """Build and validate a SimApp from its JSON definition."""
    try:
        jsonschema.validate(data, APP_JSON_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise SchemaViolation(f"app definition invalid: {exc.message}") from None

    screens: dict[str, Screen] = {}
    for screen_data in data["screens"]:
        widgets = tuple(
            Widget(
                id=w["id"],
                kind=WidgetKind(w["kind"]),
                bounds=tuple(w["bounds"]),
                label=w.get("label", ""),
                value=w.get("value", ""),
                store=w.get("store", ""),
                on_click=tuple(Effect.from_dict(e) for e in w.get("on_click", [])),
            )
            for w in screen_data["widgets"]
        )
        if screen_data["id"] in screens:
            raise SchemaViolation(f"duplicate screen id {screen_data['id']!r}")
        screens[screen_data["id"]] = Screen(id=screen_data["id"], widgets=widgets)

    app = SimApp(
        app_id=data["app_id"],
        viewport=(data["viewport"]["width"], data["viewport"]["height"]),
        screens=screens,
        initial_screen=data["initial_screen"],
        stores={k: tuple(v) for k, v in data.get("stores", {}).items()},
    )
    _validate_app(app)
    return app


def _validate_app(app: SimApp) -> None:
    vw, vh = app.viewport
    if app.initial_screen not in app.screens:
        raise DanglingTransition(f"initial screen {app.initial_screen!r} does not exist")

    seen_ids: set[str] = set()
    for screen in app.screens.values():
        for w in screen.widgets:
            if w.id in seen_ids:
                raise SchemaViolation(f"widget id {w.id!r} is not unique")
            seen_ids.add(w.id)
            x, y, width, height = w.bounds
            if width < 1 or height < 1 or x < 0 or y < 0 or x + width > vw or y + height > vh:
                raise SchemaViolation(
                    f"widget {w.id!r} bounds {w.bounds} outside viewport {vw}x{vh}"
                )
            if w.kind is WidgetKind.LIST_VIEW and w.store and w.store not in app.stores:
                raise DanglingTransition(f"list view {w.id!r} binds missing store {w.store!r}")
        for i, a in enumerate(screen.widgets):
            for b in screen.widgets[i + 1 :]:
                if _rects_overlap(a.bounds, b.bounds):
                    raise OverlappingBounds(
                        f"widgets {a.id!r} and {b.id!r} overlap on screen {screen.id!r}"
                    )

    text_inputs = {
        w.id for s in app.screens.values() for w in s.widgets if w.kind is WidgetKind.TEXT_INPUT
    }
    for screen in app.screens.values():
        for w in screen.widgets:
            for effect in w.on_click:
                if effect.kind is EffectKind.NAVIGATE and effect.target not in app.screens:
                    raise DanglingTransition(
                        f"button {w.id!r} navigates to missing screen {effect.target!r}"
                    )
                if effect.kind is EffectKind.APPEND and effect.store not in app.stores:
                    raise DanglingTransition(
                        f"button {w.id!r} appends to missing store {effect.store!r}"
                    )
                if effect.kind is EffectKind.APPEND:
                    for f in effect.fields:
                        if f not in text_inputs:
                            raise DanglingTransition(
                                f"append on {w.id!r} reads missing field {f!r}"
                            )
                if effect.kind in (EffectKind.SET_FIELD, EffectKind.CLEAR_FIELD):
                    if effect.widget not in text_inputs:
                        raise DanglingTransition(
                            f"effect on {w.id!r} targets missing field {effect.widget!r}"
                        )


def load_app(path: str | Path) -> SimApp:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return app_from_dict(data)


def app_digest(app: SimApp) -> str:
    """Stable 16-hex digest of the app definition (not its runtime state)."""
    payload = {
        "app_id": app.app_id,
        "viewport": list(app.viewport),
        "initial_screen": app.initial_screen,
        "stores": {k: list(v) for k, v in sorted(app.stores.items())},
        "screens": [
            {
                "id": s.id,
                "widgets": [
                    {
                        "id": w.id,
                        "kind": w.kind.value,
                        "bounds": list(w.bounds),
                        "label": w.label,
                        "value": w.value,
                        "store": w.store,
                        "on_click": [e.to_dict() for e in w.on_click],
                    }
                    for w in s.widgets
                ],
            }
            for s in sorted(app.screens.values(), key=lambda s: s.id)
        ],
    }
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def state_hash(state: SimState) -> str:
    """64-bit digest over the full state, stable across processes."""
    canonical = json.dumps(
        {
            "screen": state.current_screen,
            "fields": state.field_values,
            "stores": state.store_values,
            "focus": state.focus,
            "scroll": state.scroll_offsets,
            "steps": state.step_count,
        },
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.blake2b(canonical.encode(), digest_size=8).hexdigest()


def reset(app: SimApp) -> SimState:
    """Fresh initial state; also the pre/post-run cleanup primitive."""
    field_values = {}
    scroll_offsets = {}
    for screen in app.screens.values():
        for w in screen.widgets:
            if w.kind is WidgetKind.TEXT_INPUT:
                field_values[w.id] = w.value
            elif w.kind is WidgetKind.LIST_VIEW:
                scroll_offsets[w.id] = 0
    return SimState(
        current_screen=app.initial_screen,
        field_values=field_values,
        store_values={k: list(v) for k, v in app.stores.items()},
        focus=None,
        scroll_offsets=scroll_offsets,
        step_count=0,
    )


def _apply_effects(state: SimState, app: SimApp, effects: tuple[Effect, ...]) -> None:
    for effect in effects:
        if effect.kind is EffectKind.NAVIGATE:
            state.current_screen = effect.target
            state.focus = None
        elif effect.kind is EffectKind.APPEND:
            if effect.fields:
                item = " | ".join(state.field_values.get(f, "") for f in effect.fields)
            else:
                item = effect.value
            state.store_values[effect.store].append(item)
        elif effect.kind is EffectKind.SET_FIELD:
            state.field_values[effect.widget] = effect.value
        elif effect.kind is EffectKind.CLEAR_FIELD:
            state.field_values[effect.widget] = ""


def execute(state: SimState, app: SimApp, action, warnings: list[str] | None = None) -> SimState:
    """Apply one agent action; returns the successor state.

    Click dispatches to the widget under the pointer (buttons fire their
    effects, text inputs take focus, anything else is inert). Type goes
    to the focused input. Every executed action advances step_count by
    exactly one. ``warnings`` collects non-fatal anomalies such as
    typing with no focused field.
    """
    from .protocol import ActionKind

    if action.kind is ActionKind.FINISH:
        raise FinishNotExecutable("finish is handled by the run loop, not the environment")

    vw, vh = app.viewport
    if action.kind in (ActionKind.CLICK, ActionKind.DOUBLE_CLICK, ActionKind.SCROLL):
        if not (0 <= action.x < vw and 0 <= action.y < vh):
            raise OutOfViewport(f"({action.x}, {action.y}) outside viewport {vw}x{vh}")

    new = state.clone()
    screen = app.screens[new.current_screen]

    if action.kind in (ActionKind.CLICK, ActionKind.DOUBLE_CLICK):
        hit = next((w for w in screen.widgets if w.contains(action.x, action.y)), None)
        if hit is None:
            pass
        elif hit.kind is WidgetKind.BUTTON:
            _apply_effects(new, app, hit.on_click)
        elif hit.kind is WidgetKind.TEXT_INPUT:
            new.focus = hit.id
    elif action.kind is ActionKind.TYPE:
        if new.focus is None:
            if warnings is not None:
                warnings.append("type() with no focused input; ignored")
        else:
            new.field_values[new.focus] = new.field_values.get(new.focus, "") + action.text
    elif action.kind is ActionKind.SCROLL:
        hit = next((w for w in screen.widgets if w.contains(action.x, action.y)), None)
        if hit is not None and hit.kind is WidgetKind.LIST_VIEW:
            items = new.store_values.get(hit.store, [])
            view_h = hit.bounds[3]
            max_offset = max(0, len(items) * LIST_ITEM_HEIGHT - view_h)
            current = new.scroll_offsets.get(hit.id, 0)
            new.scroll_offsets[hit.id] = min(max_offset, max(0, current + action.dy))
    # wait and keypress advance the clock only

    new.step_count += 1
    return new


def _render_widget(w: Widget, state: SimState) -> list[str]:
    x, y, width, height = w.bounds
    at = f"@({x},{y},{width},{height})"
    if w.kind is WidgetKind.LABEL:
        return [f'[label] {w.id} "{w.label}" {at}']
    if w.kind is WidgetKind.BUTTON:
        return [f'[button] {w.id} "{w.label}" {at}']
    if w.kind is WidgetKind.TEXT_INPUT:
        focus = " (focused)" if state.focus == w.id else ""
        value = state.field_values.get(w.id, "")
        return [f'[text_input] {w.id} label="{w.label}" value="{value}" {at}{focus}']
    items = state.store_values.get(w.store, [])
    offset = state.scroll_offsets.get(w.id, 0)
    first = offset // LIST_ITEM_HEIGHT
    visible = max(1, height // LIST_ITEM_HEIGHT)
    lines = [f"[list_view] {w.id} store={w.store} items={len(items)} offset={offset} {at}"]
    lines.extend(f"  | {item}" for item in items[first : first + visible])
    return lines


def observe(state: SimState, app: SimApp) -> Observation:
    """Deterministic textual render of the current screen, reading order (y, x)."""
    vw, vh = app.viewport
    screen = app.screens[state.current_screen]
    lines = [f"screen {screen.id} ({vw}x{vh})"]
    for w in sorted(screen.widgets, key=lambda w: (w.bounds[1], w.bounds[0])):
        lines.extend(_render_widget(w, state))
    return Observation(
        rendering="\n".join(lines),
        state_hash=state_hash(state),
        step_index=state.step_count,
    )


class SimEnvironment:
    """Owns one app instance's live state for the duration of a run."""

    def __init__(self, app: SimApp):
        self.app = app
        self.state = reset(app)
        self.warnings: list[str] = []

    def reset(self) -> SimState:
        self.state = reset(self.app)
        return self.state

    def observe(self) -> Observation:
        return observe(self.state, self.app)

    def execute(self, action) -> SimState:
        self.state = execute(self.state, self.app, action, warnings=self.warnings)
        return self.state

    def state_digest(self) -> str:
        return state_hash(self.state)
