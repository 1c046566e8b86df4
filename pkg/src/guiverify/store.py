"""File-backed persistence for setups, requirements, and runs.

Everything is plain JSON under one base directory: one file per setup
(requirements embedded), one JSON-lines file per run (metadata first,
then steps, then the summary), and an index mapping setups to their
runs. Writes go through temp-file-plus-rename so a crash never leaves a
half-written file, and the index can always be rebuilt by rescanning.
"""

from __future__ import annotations

import errno
import json
import os
import tempfile
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from decimal import Decimal
from pathlib import Path
from typing import Any

from .protocol import UsageStats, VerdictSummary
from .requirements import Requirement, VerificationSetup
from .runner import FailureReason, RunStatus, TrajectoryStep, VerificationRun


class StorageFull(OSError):
    pass


class CorruptIndex(RuntimeError):
    """Index disagrees with the files on disk; recovered by rescan."""


class UnknownSetup(KeyError):
    pass


class UnknownRun(KeyError):
    pass


class UnknownRequirementInSetup(KeyError):
    def __init__(self, setup_id: str, requirement_id: str):
        super().__init__(f"{requirement_id} not in {setup_id}")
        self.setup_id = setup_id
        self.requirement_id = requirement_id


def _atomic_write(path: Path, payload: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except OSError as exc:
        if exc.errno == errno.ENOSPC:
            raise StorageFull(str(exc)) from exc
        raise


def run_to_lines(run: VerificationRun) -> list[dict[str, Any]]:
    lines: list[dict[str, Any]] = [{"type": "run", **run.meta_dict()}]
    lines.extend({"type": "step", **step.to_dict()} for step in run.trajectory)
    if run.summary is not None:
        lines.append({"type": "summary", **run.summary.to_dict()})
    return lines


def run_from_lines(lines: list[dict[str, Any]]) -> VerificationRun:
    if not lines or lines[0].get("type") != "run":
        raise ValueError("run log must start with a run metadata line")
    meta = lines[0]
    run = VerificationRun(
        run_id=meta["run_id"],
        requirement_id=meta["requirement_id"],
        setup_id=meta.get("setup_id", ""),
        status=RunStatus(meta["status"]),
        started_at=meta.get("started_at", ""),
        finished_at=meta.get("finished_at", ""),
        total_usage=UsageStats.from_dict(meta.get("total_usage", {})),
        cost=Decimal(meta.get("cost", "0.0000")),
        failure_reason=FailureReason(meta["failure_reason"]) if meta.get("failure_reason") else None,
        env_hash_after_cleanup=meta.get("env_hash_after_cleanup", ""),
        warnings=list(meta.get("warnings", [])),
    )
    for line in lines[1:]:
        if line.get("type") == "step":
            run.trajectory.append(TrajectoryStep.from_dict(line))
        elif line.get("type") == "summary":
            run.summary = VerdictSummary.from_dict(line)
    return run


@dataclass
class StoreRoot:
    """On-disk layout plus the in-memory index of setups and their runs."""

    base_dir: Path
    # setup_id -> requirement_id -> ordered run ids
    index: dict[str, dict[str, list[str]]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.base_dir = Path(self.base_dir)
        self._lock = threading.RLock()
        (self.base_dir / "setups").mkdir(parents=True, exist_ok=True)
        (self.base_dir / "runs").mkdir(parents=True, exist_ok=True)
        self._load_index()

    # -- paths ------------------------------------------------------------

    def _setup_path(self, setup_id: str) -> Path:
        return self.base_dir / "setups" / f"{setup_id}.json"

    def _run_path(self, run_id: str) -> Path:
        return self.base_dir / "runs" / f"{run_id}.jsonl"

    def _index_path(self) -> Path:
        return self.base_dir / "index.json"

    # -- index ------------------------------------------------------------

    def _load_index(self) -> None:
        path = self._index_path()
        if not path.exists():
            self.rebuild_index()
            return
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
            index = data["setups"]
            for runs_by_req in index.values():
                for run_ids in runs_by_req.values():
                    for run_id in run_ids:
                        if not self._run_path(run_id).exists():
                            raise CorruptIndex(f"indexed run {run_id} missing on disk")
            self.index = index
        except (ValueError, KeyError, CorruptIndex):
            self.rebuild_index()

    def rebuild_index(self) -> None:
        """Reconstruct the index purely from the files on disk."""
        with self._lock:
            index: dict[str, dict[str, list[str]]] = {}
            for setup_file in sorted((self.base_dir / "setups").glob("*.json")):
                setup_id = setup_file.stem
                index[setup_id] = {}
            entries = []
            for run_file in (self.base_dir / "runs").glob("*.jsonl"):
                try:
                    with open(run_file, encoding="utf-8") as fh:
                        meta = json.loads(fh.readline())
                except (OSError, ValueError):
                    continue
                if meta.get("type") != "run":
                    continue
                entries.append(meta)
            entries.sort(key=lambda m: (m.get("started_at", ""), m["run_id"]))
            for meta in entries:
                setup_runs = index.setdefault(meta.get("setup_id", ""), {})
                setup_runs.setdefault(meta["requirement_id"], []).append(meta["run_id"])
            self.index = index
            self._write_index()

    def _write_index(self) -> None:
        _atomic_write(
            self._index_path(),
            json.dumps({"setups": self.index}, indent=2, sort_keys=True),
        )

    # -- setups -----------------------------------------------------------

    def create_setup(self, app_ref: str, requirements: list[Requirement]) -> VerificationSetup:
        with self._lock:
            existing = {p.stem for p in (self.base_dir / "setups").glob("*.json")}
            ordinal = 1
            while f"setup-{ordinal}" in existing:
                ordinal += 1
            setup = VerificationSetup(
                id=f"setup-{ordinal}",
                app_ref=app_ref,
                requirement_ids=[r.id for r in requirements],
                created_at=datetime.now(timezone.utc).isoformat(),
            )
            if len(set(setup.requirement_ids)) != len(setup.requirement_ids):
                raise ValueError("requirement ids must be unique within a setup")
            self._write_setup(setup, requirements)
            self.index.setdefault(setup.id, {})
            self._write_index()
            return setup

    def _write_setup(self, setup: VerificationSetup, requirements: list[Requirement]) -> None:
        payload = {
            "setup": setup.to_dict(),
            "requirements": [r.to_dict() for r in requirements],
        }
        _atomic_write(self._setup_path(setup.id), json.dumps(payload, indent=2))

    def list_setups(self) -> list[VerificationSetup]:
        with self._lock:
            setups = []
            for path in sorted((self.base_dir / "setups").glob("*.json")):
                data = json.loads(path.read_text(encoding="utf-8"))
                setups.append(VerificationSetup.from_dict(data["setup"]))
            setups.sort(key=lambda s: (s.created_at, s.id))
            return setups

    def get_setup(self, setup_id: str) -> tuple[VerificationSetup, list[Requirement]]:
        path = self._setup_path(setup_id)
        if not path.exists():
            raise UnknownSetup(setup_id)
        data = json.loads(path.read_text(encoding="utf-8"))
        return (
            VerificationSetup.from_dict(data["setup"]),
            [Requirement.from_dict(r) for r in data["requirements"]],
        )

    def update_requirement(self, setup_id: str, requirement: Requirement) -> None:
        with self._lock:
            setup, requirements = self.get_setup(setup_id)
            replaced = False
            for i, existing in enumerate(requirements):
                if existing.id == requirement.id:
                    requirements[i] = requirement
                    replaced = True
            if not replaced:
                raise UnknownRequirementInSetup(setup_id, requirement.id)
            self._write_setup(setup, requirements)

    # -- runs ---------------------------------------------------------------

    def persist_run(self, run: VerificationRun) -> None:
        """Durably record a terminated run and index it."""
        with self._lock:
            lines = run_to_lines(run)
            payload = "\n".join(json.dumps(line, sort_keys=True) for line in lines) + "\n"
            _atomic_write(self._run_path(run.run_id), payload)
            setup_runs = self.index.setdefault(run.setup_id, {})
            req_runs = setup_runs.setdefault(run.requirement_id, [])
            if run.run_id not in req_runs:
                req_runs.append(run.run_id)
            self._write_index()

    def get_run(self, run_id: str) -> VerificationRun:
        path = self._run_path(run_id)
        if not path.exists():
            raise UnknownRun(run_id)
        with open(path, encoding="utf-8") as fh:
            lines = [json.loads(line) for line in fh if line.strip()]
        return run_from_lines(lines)

    def run_ids_for(self, setup_id: str, requirement_id: str) -> list[str]:
        with self._lock:
            return list(self.index.get(setup_id, {}).get(requirement_id, []))

    def run_files(self) -> list[Path]:
        return sorted((self.base_dir / "runs").glob("*.jsonl"))

    def next_run_ordinal(self) -> int:
        """One past the highest run-<n> already on disk; keeps ids unique."""
        highest = 0
        for path in (self.base_dir / "runs").glob("run-*.jsonl"):
            suffix = path.stem.rsplit("-", 1)[-1]
            if suffix.isdigit():
                highest = max(highest, int(suffix))
        return highest + 1
