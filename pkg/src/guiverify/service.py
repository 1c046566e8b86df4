"""Glue between the store, the scheduler, and adapter selection.

The service owns the live run registry and the already-running guard;
terminated runs are persisted and requirement verdicts written through
the store. App references resolve either to a file path or to a bundled
fixture (``fixture:<name>``); replay recordings are looked up next to
the app definition by convention.
"""

from __future__ import annotations

import threading
from pathlib import Path
from typing import Callable

from .fixtures import fixture_path
from .leasing import SlotPool
from .protocol import ModelAdapter
from .replay import ScriptBook
from .requirements import Requirement, VerificationSetup, parse_requirements_structured
from .runner import (
    RunConfig,
    RunJob,
    RunStatus,
    Scheduler,
    TERMINAL_STATUSES,
    UnknownRequirement,
    VerificationRun,
)
from .simenv import SimApp, load_app
from .store import StoreRoot, UnknownRun


class AlreadyRunning(RuntimeError):
    pass


class NeverVerified(RuntimeError):
    pass


# given (resolved app path, loaded app, requirement) -> adapter instance
AdapterFactory = Callable[[Path, SimApp, Requirement], ModelAdapter]


def replay_adapter_factory(app_path: Path, app: SimApp, requirement: Requirement) -> ModelAdapter:
    """Default backend: pick the recording matching this app build."""
    return ScriptBook.for_app_path(app_path).adapter_for(requirement.id, app)


def resolve_app_ref(app_ref: str) -> Path:
    if app_ref.startswith("fixture:"):
        return fixture_path(f"{app_ref[len('fixture:'):]}.app.json")
    return Path(app_ref)


class VerificationService:
    def __init__(
        self,
        store: StoreRoot,
        pool: SlotPool | None = None,
        cfg: RunConfig | None = None,
        adapter_factory: AdapterFactory = replay_adapter_factory,
    ):
        self.store = store
        self.cfg = cfg or RunConfig()
        self.pool = pool or SlotPool(size=8, lease_ttl_seconds=self.cfg.lease_ttl_seconds)
        self.adapter_factory = adapter_factory
        self.scheduler = Scheduler(self.pool, self.cfg, first_ordinal=store.next_run_ordinal())
        self._guard = threading.Lock()

    # -- setups -------------------------------------------------------------

    def create_setup(self, app_ref: str, requirements_text: str) -> VerificationSetup:
        requirements = parse_requirements_structured(requirements_text)
        return self.store.create_setup(app_ref, requirements)

    def list_requirements(self, setup_id: str) -> list[Requirement]:
        _, requirements = self.store.get_setup(setup_id)
        return requirements

    # -- run registry ---------------------------------------------------------

    def get_run(self, run_id: str) -> VerificationRun:
        try:
            return self.scheduler.get_run(run_id)
        except KeyError:
            return self.store.get_run(run_id)

    def observable_status(self, run: VerificationRun) -> RunStatus:
        """Terminal status is reported only once the run is persisted.

        A poller that sees a terminal status may immediately fetch the
        requirement verdicts; holding the status at running until the
        store write lands keeps that read coherent.
        """
        if run.status in TERMINAL_STATUSES and not self.scheduler.is_finalized(run.run_id):
            return RunStatus.RUNNING
        return run.status

    def run_status(self, run_id: str) -> dict:
        run = self.get_run(run_id)
        return {
            "run_id": run.run_id,
            "status": self.observable_status(run).value,
            "failure_reason": run.failure_reason.value if run.failure_reason else None,
        }

    def active_run_for(self, setup_id: str, requirement_id: str) -> VerificationRun | None:
        for run in self.scheduler.runs():
            if (
                run.setup_id == setup_id
                and run.requirement_id == requirement_id
                and run.status not in TERMINAL_STATUSES
            ):
                return run
        return None

    # -- verification ---------------------------------------------------------

    def verify(
        self,
        setup_id: str,
        requirement_ids: list[str],
        parallelism: int | None = None,
    ) -> list[str]:
        """Queue verification runs; returns run ids immediately."""
        setup, requirements = self.store.get_setup(setup_id)
        by_id = {r.id: r for r in requirements}
        for req_id in requirement_ids:
            if req_id not in by_id:
                raise UnknownRequirement(req_id)

        app_path = resolve_app_ref(setup.app_ref)
        app = load_app(app_path)

        with self._guard:
            for req_id in requirement_ids:
                if self.active_run_for(setup_id, req_id) is not None:
                    raise AlreadyRunning(f"{req_id} already has an active run")
            jobs = [
                RunJob(
                    requirement=by_id[req_id],
                    app=app,
                    adapter_factory=self._bind_adapter(app_path, app, by_id[req_id]),
                    setup_id=setup_id,
                    app_ref=setup.app_ref,
                )
                for req_id in requirement_ids
            ]
            return self.scheduler.schedule(jobs, parallelism, on_finished=self._on_finished)

    def _bind_adapter(self, app_path: Path, app: SimApp, req: Requirement):
        return lambda: self.adapter_factory(app_path, app, req)

    def _on_finished(self, run: VerificationRun, requirement: Requirement) -> None:
        self.store.persist_run(run)
        self.store.update_requirement(run.setup_id, requirement)

    def wait(self, run_ids: list[str], timeout: float = 60.0) -> None:
        self.scheduler.wait(run_ids, timeout)

    def verify_and_wait(
        self,
        setup_id: str,
        requirement_ids: list[str],
        parallelism: int | None = None,
        timeout: float = 60.0,
    ) -> list[VerificationRun]:
        run_ids = self.verify(setup_id, requirement_ids, parallelism)
        self.wait(run_ids, timeout)
        return [self.get_run(r) for r in run_ids]

    # -- lookups used by the tool server --------------------------------------

    def resolve_requirement(
        self, requirement_id: str, setup_id: str | None = None
    ) -> tuple[str, Requirement]:
        """Accepts bare ids (unique across setups) or ``<setup>/<req>``."""
        if "/" in requirement_id:
            setup_part, req_part = requirement_id.split("/", 1)
            _, requirements = self.store.get_setup(setup_part)
            for req in requirements:
                if req.id == req_part:
                    return setup_part, req
            raise UnknownRequirement(requirement_id)
        if setup_id is not None:
            _, requirements = self.store.get_setup(setup_id)
            for req in requirements:
                if req.id == requirement_id:
                    return setup_id, req
            raise UnknownRequirement(requirement_id)
        matches = []
        for setup in self.store.list_setups():
            _, requirements = self.store.get_setup(setup.id)
            for req in requirements:
                if req.id == requirement_id:
                    matches.append((setup.id, req))
        if not matches:
            raise UnknownRequirement(requirement_id)
        if len(matches) > 1:
            owners = ", ".join(s for s, _ in matches)
            raise UnknownRequirement(
                f"{requirement_id} is ambiguous across setups ({owners}); qualify as <setup>/<req>"
            )
        return matches[0]

    def latest_succeeded_run(self, setup_id: str, requirement_id: str) -> VerificationRun | None:
        for run_id in reversed(self.store.run_ids_for(setup_id, requirement_id)):
            try:
                run = self.store.get_run(run_id)
            except UnknownRun:
                continue
            if run.status is RunStatus.SUCCEEDED:
                return run
        return None

    def has_terminated_run(self, setup_id: str, requirement_id: str) -> bool:
        return bool(self.store.run_ids_for(setup_id, requirement_id))

    def feedback_for(self, requirement_id: str, setup_id: str | None = None) -> dict:
        """Actionable failure feedback from the latest successful run.

        Lists exactly the criteria the latest summary judged unmet, with
        their explanations and evidence step indices; empty when met.
        """
        owner, req = self.resolve_requirement(requirement_id, setup_id)
        if not self.has_terminated_run(owner, req.id):
            raise NeverVerified(f"{req.id} has never been verified")
        failed = []
        latest = self.latest_succeeded_run(owner, req.id)
        if latest is not None and latest.summary is not None:
            for finding in latest.summary.criteria:
                if finding.verdict.value == "unmet":
                    ac = req.criterion(finding.id)
                    failed.append(
                        {
                            "id": finding.id,
                            "text": ac.text,
                            "explanation": finding.explanation,
                            "evidence_steps": list(finding.evidence),
                        }
                    )
        return {"requirement_id": req.id, "state": req.state.value, "failed_criteria": failed}
