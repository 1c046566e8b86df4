"""Run lifecycle and parallel execution.

One verification run alternates model calls with environment steps and
records the trajectory. Malformed replies earn exactly one re-prompt
carrying the error text; a second consecutive malformed reply fails the
run. The environment is reset before and after every run, success or
not, and verdicts are written back to the requirement only from an
accepted summary.
"""

from __future__ import annotations

import json
import hashlib
import itertools
import queue
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from decimal import ROUND_HALF_EVEN, Decimal
from enum import Enum
from typing import Any, Callable

from .leasing import PoolExhaustedTimeout, SlotPool
from .protocol import (
    Action,
    ActionKind,
    ActionParseError,
    ModelAdapter,
    SummaryParseError,
    UsageStats,
    VerdictSummary,
    build_verification_prompt,
    format_action,
    parse_action,
    parse_summary,
)
from .requirements import Requirement, RequirementState
from .simenv import Observation, SimApp, SimEnvError, SimEnvironment


class RunStatus(str, Enum):
    QUEUED = "queued"
    LEASING = "leasing"
    RUNNING = "running"
    SUCCEEDED = "succeeded"
    FAILED = "failed"


_STATUS_ORDER = {
    RunStatus.QUEUED: 0,
    RunStatus.LEASING: 1,
    RunStatus.RUNNING: 2,
    RunStatus.SUCCEEDED: 3,
    RunStatus.FAILED: 3,
}

TERMINAL_STATUSES = (RunStatus.SUCCEEDED, RunStatus.FAILED)


class FailureReason(str, Enum):
    STEP_CAP_EXCEEDED = "step_cap_exceeded"
    SUMMARY_PARSE_FAILURE = "summary_parse_failure"
    ACTION_PARSE_FAILURE = "action_parse_failure"
    ENVIRONMENT_ERROR = "environment_error"
    ADAPTER_ERROR = "adapter_error"


class UnknownRequirement(KeyError):
    pass


@dataclass
class RunConfig:
    step_cap: int = 75  # comfortably above observed step counts per run
    lease_ttl_seconds: float = 600.0
    parallelism: int = 1
    rate_in_per_million: float = 3.0
    rate_out_per_million: float = 12.0


@dataclass
class TrajectoryStep:
    index: int
    observation: Observation
    reasoning: str
    action: Action
    usage: UsageStats

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "observation": {
                "rendering": self.observation.rendering,
                "state_hash": self.observation.state_hash,
                "step_index": self.observation.step_index,
            },
            "reasoning": self.reasoning,
            "action": format_action(self.action),
            "usage": self.usage.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TrajectoryStep":
        obs = data["observation"]
        return cls(
            index=data["index"],
            observation=Observation(
                rendering=obs["rendering"],
                state_hash=obs["state_hash"],
                step_index=obs["step_index"],
            ),
            reasoning=data["reasoning"],
            action=parse_action(data["action"]),
            usage=UsageStats.from_dict(data["usage"]),
        )


@dataclass
class VerificationRun:
    run_id: str
    requirement_id: str
    setup_id: str = ""
    status: RunStatus = RunStatus.QUEUED
    trajectory: list[TrajectoryStep] = field(default_factory=list)
    summary: VerdictSummary | None = None
    started_at: str = ""
    finished_at: str = ""
    total_usage: UsageStats = UsageStats()
    cost: Decimal = Decimal("0.0000")
    failure_reason: FailureReason | None = None
    env_hash_after_cleanup: str = ""
    warnings: list[str] = field(default_factory=list)

    def advance_status(self, status: RunStatus) -> None:
        if _STATUS_ORDER[status] < _STATUS_ORDER[self.status]:
            raise ValueError(f"status cannot move backward: {self.status} -> {status}")
        self.status = status

    def meta_dict(self) -> dict[str, Any]:
        return {
            "run_id": self.run_id,
            "requirement_id": self.requirement_id,
            "setup_id": self.setup_id,
            "status": self.status.value,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "total_usage": self.total_usage.to_dict(),
            "cost": str(self.cost),
            "failure_reason": self.failure_reason.value if self.failure_reason else None,
            "env_hash_after_cleanup": self.env_hash_after_cleanup,
            "warnings": list(self.warnings),
            "steps": len(self.trajectory),
        }


def compute_cost(usage: UsageStats, rates: tuple[float, float]) -> Decimal:
    """Token cost in dollars at per-million rates, half-even to 4 decimals."""
    rate_in, rate_out = rates
    if rate_in < 0 or rate_out < 0:
        raise ValueError("rates must be non-negative")
    total = (
        Decimal(usage.input_tokens) * Decimal(str(rate_in))
        + Decimal(usage.output_tokens) * Decimal(str(rate_out))
    ) / Decimal(1_000_000)
    return total.quantize(Decimal("0.0001"), rounding=ROUND_HALF_EVEN)


def trajectory_digest(run: VerificationRun) -> str:
    """Content digest of the trajectory; timestamps and ids excluded."""
    payload = [step.to_dict() for step in run.trajectory]
    if run.summary is not None:
        payload.append(run.summary.to_dict())
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def run_verification(
    req: Requirement,
    app: SimApp,
    adapter: ModelAdapter,
    cfg: RunConfig,
    *,
    app_ref: str = "",
    run: VerificationRun | None = None,
) -> VerificationRun:
    """Execute one verification episode against a fresh environment."""
    if run is None:
        run = VerificationRun(run_id="run-0", requirement_id=req.id)
    run.advance_status(RunStatus.RUNNING)
    run.started_at = _now()

    env = SimEnvironment(app)
    env.reset()  # pre-run cleanup: never start from a contaminated state
    prompt = build_verification_prompt(req, app_ref or app.app_id)
    history: list[tuple[str, str]] = []
    pending_usage = UsageStats()
    reprompt_error: str | None = None
    retry_used = False

    def fail(reason: FailureReason, note: str) -> None:
        run.failure_reason = reason
        run.warnings.append(note)
        run.advance_status(RunStatus.FAILED)

    try:
        while True:
            observation = env.observe()
            prompt_text = prompt if reprompt_error is None else f"{prompt}\n\n[error] {reprompt_error}"
            try:
                reply = adapter(prompt_text, observation.to_bytes(), history)
            except Exception as exc:
                fail(FailureReason.ADAPTER_ERROR, f"adapter raised: {exc}")
                break
            usage = reply.usage + pending_usage
            pending_usage = UsageStats()

            try:
                action = parse_action(reply.action_text)
            except ActionParseError as exc:
                if retry_used:
                    fail(FailureReason.ACTION_PARSE_FAILURE, f"unparseable action twice: {exc}")
                    break
                retry_used = True
                reprompt_error = str(exc)
                pending_usage = usage
                continue

            if action.kind is ActionKind.FINISH:
                try:
                    summary = parse_summary(action.summary_json, req)
                except SummaryParseError as exc:
                    if retry_used:
                        fail(FailureReason.SUMMARY_PARSE_FAILURE, f"invalid summary twice: {exc}")
                        break
                    retry_used = True
                    reprompt_error = str(exc)
                    pending_usage = usage
                    continue
                run.trajectory.append(
                    TrajectoryStep(
                        index=len(run.trajectory),
                        observation=observation,
                        reasoning=reply.reasoning,
                        action=action,
                        usage=usage,
                    )
                )
                run.summary = summary
                _write_back_verdicts(req, summary, len(run.trajectory))
                run.advance_status(RunStatus.SUCCEEDED)
                break

            retry_used = False
            reprompt_error = None
            if len(run.trajectory) >= cfg.step_cap:
                fail(
                    FailureReason.STEP_CAP_EXCEEDED,
                    f"step cap {cfg.step_cap} reached before finish",
                )
                break
            try:
                env.execute(action)
            except SimEnvError as exc:
                fail(FailureReason.ENVIRONMENT_ERROR, f"{type(exc).__name__}: {exc}")
                break
            run.trajectory.append(
                TrajectoryStep(
                    index=len(run.trajectory),
                    observation=observation,
                    reasoning=reply.reasoning,
                    action=action,
                    usage=usage,
                )
            )
            history.append((reply.reasoning, format_action(action)))
    finally:
        env.reset()  # post-run cleanup, unconditional
        run.env_hash_after_cleanup = env.state_digest()
        run.warnings.extend(env.warnings)
        if pending_usage != UsageStats():
            run.warnings.append(
                f"{pending_usage.input_tokens}+{pending_usage.output_tokens} tokens from a "
                "discarded malformed reply are not counted in total_usage"
            )
        run.total_usage = sum((s.usage for s in run.trajectory), UsageStats())
        run.cost = compute_cost(
            run.total_usage, (cfg.rate_in_per_million, cfg.rate_out_per_million)
        )
        run.finished_at = _now()
        if run.status is RunStatus.FAILED:
            req.state = RequirementState.FAILED

    return run


def _write_back_verdicts(req: Requirement, summary: VerdictSummary, trajectory_len: int) -> None:
    for finding in summary.criteria:
        ac = req.criterion(finding.id)
        ac.verdict = finding.verdict
        ac.explanation = finding.explanation
        ac.evidence = [i for i in finding.evidence if 0 <= i < trajectory_len]
    req.state = summary.overall


@dataclass
class RunJob:
    requirement: Requirement
    app: SimApp
    adapter_factory: Callable[[], ModelAdapter]
    setup_id: str = ""
    app_ref: str = ""


class Scheduler:
    """FIFO worker pool; at most ``parallelism`` runs progress at once."""

    def __init__(self, pool: SlotPool, cfg: RunConfig, first_ordinal: int = 1):
        self.pool = pool
        self.cfg = cfg
        self._lock = threading.Lock()
        self._runs: dict[str, VerificationRun] = {}
        self._finalized: set[str] = set()  # terminal AND post-run callbacks done
        self._seq = itertools.count(max(1, first_ordinal))
        self._done = threading.Condition(self._lock)

    def get_run(self, run_id: str) -> VerificationRun:
        with self._lock:
            if run_id not in self._runs:
                raise KeyError(run_id)
            return self._runs[run_id]

    def is_finalized(self, run_id: str) -> bool:
        """Terminal and post-run persistence callbacks completed."""
        with self._lock:
            return run_id in self._finalized or run_id not in self._runs

    def runs(self) -> list[VerificationRun]:
        with self._lock:
            return list(self._runs.values())

    def schedule(
        self,
        jobs: list[RunJob],
        parallelism: int | None = None,
        on_finished: Callable[[VerificationRun, Requirement], None] | None = None,
    ) -> list[str]:
        """Queue jobs and start workers; returns run ids immediately."""
        workers = parallelism if parallelism is not None else self.cfg.parallelism
        if workers < 1:
            raise ValueError("parallelism must be >= 1")
        work: queue.Queue[tuple[str, RunJob]] = queue.Queue()
        run_ids = []
        with self._lock:
            for job in jobs:
                run_id = f"run-{next(self._seq)}"
                run = VerificationRun(
                    run_id=run_id,
                    requirement_id=job.requirement.id,
                    setup_id=job.setup_id,
                )
                self._runs[run_id] = run
                run_ids.append(run_id)
                work.put((run_id, job))
        for _ in range(min(workers, len(jobs))):
            threading.Thread(target=self._drain, args=(work, on_finished), daemon=True).start()
        return run_ids

    def _drain(
        self,
        work: "queue.Queue[tuple[str, RunJob]]",
        on_finished: Callable[[VerificationRun, Requirement], None] | None,
    ) -> None:
        while True:
            try:
                run_id, job = work.get_nowait()
            except queue.Empty:
                return
            self._execute(run_id, job, on_finished)
            work.task_done()

    def _execute(
        self,
        run_id: str,
        job: RunJob,
        on_finished: Callable[[VerificationRun, Requirement], None] | None,
    ) -> None:
        run = self.get_run(run_id)
        run.advance_status(RunStatus.LEASING)
        while True:
            try:
                slot = self.pool.acquire(run_id, timeout=self.cfg.lease_ttl_seconds)
                break
            except PoolExhaustedTimeout:
                continue  # stay Leasing; statuses never move backward
        try:
            adapter = job.adapter_factory()
            run_verification(
                job.requirement,
                job.app,
                adapter,
                self.cfg,
                app_ref=job.app_ref,
                run=run,
            )
        except Exception as exc:  # defensive: a worker must never die silently
            run.warnings.append(f"internal error: {exc}")
            if run.status not in TERMINAL_STATUSES:
                run.failure_reason = FailureReason.ADAPTER_ERROR
                run.advance_status(RunStatus.FAILED)
        finally:
            self.pool.release(slot, run_id)
            if on_finished is not None:
                try:
                    on_finished(run, job.requirement)
                except Exception as exc:
                    run.warnings.append(f"on_finished callback failed: {exc}")
            with self._done:
                self._finalized.add(run_id)
                self._done.notify_all()

    def wait(self, run_ids: list[str], timeout: float = 60.0) -> None:
        end = time.monotonic() + timeout
        with self._done:
            while True:
                if all(r in self._finalized for r in run_ids):
                    return
                remaining = end - time.monotonic()
                if remaining <= 0:
                    raise TimeoutError(f"runs still active: {run_ids}")
                self._done.wait(min(remaining, 0.05))
