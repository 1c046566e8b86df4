"""Store: durability, round-trips, index recovery."""

from __future__ import annotations

import json

import pytest

from guiverify.fixtures import fixture_path, requirements_text
from guiverify.replay import ScriptBook
from guiverify.requirements import parse_requirements_structured
from guiverify.runner import RunConfig, run_verification
from guiverify.simenv import load_app
from guiverify.store import StoreRoot, UnknownRun, UnknownSetup, run_from_lines, run_to_lines


@pytest.fixture()
def store(tmp_path):
    return StoreRoot(tmp_path / "store")


def make_run(requirement_ordinal: int = 1, setup_id: str = "setup-1", run_id: str = "run-1"):
    app = load_app(fixture_path("budget.app.json"))
    req = parse_requirements_structured(requirements_text("budget"))[requirement_ordinal - 1]
    adapter = ScriptBook.for_app_path(fixture_path("budget.app.json")).adapter_for(req.id, app)
    run = run_verification(req, app, adapter, RunConfig())
    run.run_id = run_id
    run.setup_id = setup_id
    run.requirement_id = req.id
    return run, req


def test_setup_ids_are_ordinal(store):
    reqs = parse_requirements_structured("REQ: a\nAC: b")
    assert store.create_setup("fixture:budget", reqs).id == "setup-1"
    assert store.create_setup("fixture:budget", reqs).id == "setup-2"


def test_setup_round_trip(store):
    reqs = parse_requirements_structured(requirements_text("budget"))
    setup = store.create_setup("fixture:budget", reqs)
    loaded_setup, loaded_reqs = store.get_setup(setup.id)
    assert loaded_setup == setup
    assert loaded_reqs == reqs


def test_unknown_setup(store):
    with pytest.raises(UnknownSetup):
        store.get_setup("setup-404")


def test_run_round_trip_equality(store):
    run, _ = make_run()
    store.persist_run(run)
    assert store.get_run(run.run_id) == run


def test_run_lines_shape():
    run, _ = make_run()
    lines = run_to_lines(run)
    assert lines[0]["type"] == "run"
    assert all(line["type"] == "step" for line in lines[1:-1])
    assert lines[-1]["type"] == "summary"
    assert run_from_lines(lines) == run


def test_unknown_run(store):
    with pytest.raises(UnknownRun):
        store.get_run("run-404")


def test_update_requirement_persists_verdicts(store):
    reqs = parse_requirements_structured(requirements_text("budget"))
    setup = store.create_setup("fixture:budget", reqs)
    run, verified = make_run(setup_id=setup.id)
    store.update_requirement(setup.id, verified)
    _, loaded = store.get_setup(setup.id)
    assert loaded[0] == verified
    assert loaded[0].state.value == "met"


def test_index_rebuild_reproduces_identical_index(store):
    reqs = parse_requirements_structured(requirements_text("budget"))
    setup = store.create_setup("fixture:budget", reqs)
    for i in (1, 2):
        run, _ = make_run(requirement_ordinal=i, setup_id=setup.id, run_id=f"run-{i}")
        store.persist_run(run)
    original = json.loads(json.dumps(store.index))
    (store.base_dir / "index.json").unlink()
    reopened = StoreRoot(store.base_dir)
    assert reopened.index == original


def test_corrupt_index_recovered_on_open(store):
    run, _ = make_run()
    store.persist_run(run)
    index_path = store.base_dir / "index.json"
    index_path.write_text("{ this is not json", encoding="utf-8")
    reopened = StoreRoot(store.base_dir)
    assert reopened.run_ids_for(run.setup_id, run.requirement_id) == [run.run_id]


def test_index_referencing_missing_run_triggers_rescan(store):
    run, _ = make_run()
    store.persist_run(run)
    index = json.loads((store.base_dir / "index.json").read_text(encoding="utf-8"))
    index["setups"]["setup-1"]["req-1"].append("run-ghost")
    (store.base_dir / "index.json").write_text(json.dumps(index), encoding="utf-8")
    reopened = StoreRoot(store.base_dir)
    assert reopened.run_ids_for("setup-1", "req-1") == [run.run_id]


def test_atomic_write_leaves_no_temp_files(store):
    run, _ = make_run()
    store.persist_run(run)
    leftovers = [p for p in store.base_dir.rglob("*.tmp")]
    assert leftovers == []


def test_interrupted_write_preserves_prior_content(store, monkeypatch):
    run, _ = make_run()
    store.persist_run(run)
    before = (store.base_dir / "runs" / f"{run.run_id}.jsonl").read_bytes()

    import guiverify.store as store_module

    def crashing_replace(src, dst):
        raise KeyboardInterrupt("simulated crash between temp write and rename")

    monkeypatch.setattr(store_module.os, "replace", crashing_replace)
    run.warnings.append("changed")
    with pytest.raises(KeyboardInterrupt):
        store.persist_run(run)
    monkeypatch.undo()
    after = (store.base_dir / "runs" / f"{run.run_id}.jsonl").read_bytes()
    assert after == before
