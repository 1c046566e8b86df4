"""JSON-RPC 2.0 tool server for external programming agents.

Exposes the verification capabilities as tools (list requirements,
start a run, fetch actionable feedback) over standard input/output and
over HTTP POST /mcp, plus the driver for the autonomous fix-and-verify
loop: verify, hand failure feedback to an external fixer, re-verify,
until the requirement is met or the iteration budget runs out.
"""

from __future__ import annotations

import json
import sys
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, TextIO

from .requirements import RequirementState
from .runner import UnknownRequirement
from .service import AlreadyRunning, NeverVerified, VerificationService
from .store import UnknownSetup

PARSE_ERROR = -32700
INVALID_REQUEST = -32600
METHOD_NOT_FOUND = -32601
INVALID_PARAMS = -32602
ERR_UNKNOWN_SETUP = -32000
ERR_UNKNOWN_REQUIREMENT = -32001
ERR_ALREADY_RUNNING = -32002
ERR_NEVER_VERIFIED = -32003

TOOL_SCHEMAS: dict[str, dict[str, Any]] = {
    "list_requirements": {
        "description": "Requirements of a setup with their current verification states.",
        "params": {
            "type": "object",
            "properties": {
                "setup_id": {"type": "string"},
                "status_filter": {
                    "type": "string",
                    "enum": [s.value for s in RequirementState],
                },
            },
            "required": ["setup_id"],
        },
    },
    "start_verification": {
        "description": "Queue a verification run for one requirement; returns the run id.",
        "params": {
            "type": "object",
            "properties": {
                "requirement_id": {"type": "string"},
                "setup_id": {"type": "string"},
            },
            "required": ["requirement_id"],
        },
    },
    "get_feedback": {
        "description": "Actionable explanations for the criteria that failed last verification.",
        "params": {
            "type": "object",
            "properties": {
                "requirement_id": {"type": "string"},
                "setup_id": {"type": "string"},
            },
            "required": ["requirement_id"],
        },
    },
}


class ToolError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def tool_list_requirements(
    service: VerificationService, setup_id: str, status_filter: str | None = None
) -> list[dict[str, Any]]:
    try:
        requirements = service.list_requirements(setup_id)
    except UnknownSetup:
        raise ToolError(ERR_UNKNOWN_SETUP, f"unknown setup {setup_id}")
    if status_filter is not None:
        wanted = RequirementState(status_filter)
        requirements = [r for r in requirements if r.state is wanted]
    return [
        {
            "id": r.id,
            "title": r.title,
            "state": r.state.value,
            "criteria": [{"id": ac.id, "verdict": ac.verdict.value} for ac in r.criteria],
        }
        for r in requirements
    ]


def tool_start_verification(
    service: VerificationService, requirement_id: str, setup_id: str | None = None
) -> dict[str, str]:
    try:
        owner, req = service.resolve_requirement(requirement_id, setup_id)
        run_ids = service.verify(owner, [req.id])
    except UnknownSetup as exc:
        raise ToolError(ERR_UNKNOWN_SETUP, str(exc))
    except UnknownRequirement as exc:
        raise ToolError(ERR_UNKNOWN_REQUIREMENT, str(exc))
    except AlreadyRunning as exc:
        raise ToolError(ERR_ALREADY_RUNNING, str(exc))
    return {"run_id": run_ids[0]}


def tool_get_feedback(
    service: VerificationService, requirement_id: str, setup_id: str | None = None
) -> dict[str, Any]:
    try:
        return service.feedback_for(requirement_id, setup_id)
    except UnknownSetup as exc:
        raise ToolError(ERR_UNKNOWN_SETUP, str(exc))
    except UnknownRequirement as exc:
        raise ToolError(ERR_UNKNOWN_REQUIREMENT, str(exc))
    except NeverVerified as exc:
        raise ToolError(ERR_NEVER_VERIFIED, str(exc))


class ToolServer:
    """Dispatches JSON-RPC requests to the tool functions."""

    def __init__(self, service: VerificationService):
        self.service = service
        self._methods: dict[str, Callable[..., Any]] = {
            "list_requirements": lambda **p: tool_list_requirements(self.service, **p),
            "start_verification": lambda **p: tool_start_verification(self.service, **p),
            "get_feedback": lambda **p: tool_get_feedback(self.service, **p),
            "tools/list": lambda **p: self.describe_tools(),
        }

    def describe_tools(self) -> list[dict[str, Any]]:
        return [
            {"name": name, "description": spec["description"], "params_schema": spec["params"]}
            for name, spec in sorted(TOOL_SCHEMAS.items())
        ]

    def handle_request(self, request: Any) -> dict[str, Any] | None:
        if not isinstance(request, dict) or request.get("jsonrpc") != "2.0" or "method" not in request:
            return _error_response(request.get("id") if isinstance(request, dict) else None,
                                   INVALID_REQUEST, "not a JSON-RPC 2.0 request")
        request_id = request.get("id")
        method = request["method"]
        params = request.get("params") or {}
        if not isinstance(params, dict):
            return _error_response(request_id, INVALID_PARAMS, "params must be an object")

        handler = self._methods.get(method)
        if handler is None:
            result: dict[str, Any] | None = _error_response(
                request_id, METHOD_NOT_FOUND, f"unknown method {method!r}"
            )
        else:
            try:
                result = {"jsonrpc": "2.0", "id": request_id, "result": handler(**params)}
            except ToolError as exc:
                result = _error_response(request_id, exc.code, str(exc))
            except TypeError as exc:
                result = _error_response(request_id, INVALID_PARAMS, str(exc))
            except ValueError as exc:
                result = _error_response(request_id, INVALID_PARAMS, str(exc))
        # notifications (no id) get no response
        return result if request_id is not None else None

    def handle_line(self, line: str) -> str | None:
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            return json.dumps(_error_response(None, PARSE_ERROR, f"invalid JSON: {exc}"))
        response = self.handle_request(request)
        return json.dumps(response) if response is not None else None

    def serve_stdio(self, stdin: TextIO = sys.stdin, stdout: TextIO = sys.stdout) -> None:
        for line in stdin:
            line = line.strip()
            if not line:
                continue
            response = self.handle_line(line)
            if response is not None:
                stdout.write(response + "\n")
                stdout.flush()


def _error_response(request_id: Any, code: int, message: str) -> dict[str, Any]:
    return {"jsonrpc": "2.0", "id": request_id, "error": {"code": code, "message": message}}


# -- autonomous implementation-verification loop ------------------------------

Fixer = Callable[[dict[str, Any]], None]


@dataclass
class RequirementLoopResult:
    requirement_id: str
    verifications: int
    final_state: str
    max_iters_exceeded: bool = False


@dataclass
class LoopReport:
    setup_id: str
    results: list[RequirementLoopResult] = field(default_factory=list)
    fixer_calls: int = 0

    def result_for(self, requirement_id: str) -> RequirementLoopResult:
        for result in self.results:
            if result.requirement_id == requirement_id:
                return result
        raise KeyError(requirement_id)


_loop_locks: dict[int, dict[str, threading.Lock]] = {}
_loop_locks_guard = threading.Lock()


def _setup_lock(service: VerificationService, setup_id: str) -> threading.Lock:
    with _loop_locks_guard:
        per_service = _loop_locks.setdefault(id(service), {})
        return per_service.setdefault(setup_id, threading.Lock())


def autonomy_loop(
    service: VerificationService,
    setup_id: str,
    fixer: Fixer,
    max_iters: int = 3,
    run_timeout: float = 60.0,
) -> LoopReport:
    """Verify each requirement in order, fixing and re-verifying failures.

    The fixer is an external callback receiving the feedback payload; it
    is expected to change the application under test. A requirement gets
    at most ``max_iters`` fixer calls, so at most ``max_iters + 1``
    verification runs.
    """
    lock = _setup_lock(service, setup_id)
    if not lock.acquire(blocking=False):
        raise AlreadyRunning(f"autonomy loop already active for {setup_id}")
    try:
        report = LoopReport(setup_id=setup_id)
        _, requirements = service.store.get_setup(setup_id)
        for req in requirements:
            if req.state is RequirementState.MET:
                report.results.append(
                    RequirementLoopResult(req.id, verifications=0, final_state=req.state.value)
                )
                continue
            verifications = 0
            fixer_calls = 0
            while True:
                service.wait(service.verify(setup_id, [req.id]), timeout=run_timeout)
                verifications += 1
                current = _requirement_state(service, setup_id, req.id)
                if current is RequirementState.MET or fixer_calls >= max_iters:
                    break
                feedback = service.feedback_for(req.id, setup_id)
                fixer(feedback)
                fixer_calls += 1
                report.fixer_calls += 1
            report.results.append(
                RequirementLoopResult(
                    req.id,
                    verifications=verifications,
                    final_state=current.value,
                    max_iters_exceeded=current is not RequirementState.MET,
                )
            )
        return report
    finally:
        lock.release()


def _requirement_state(
    service: VerificationService, setup_id: str, requirement_id: str
) -> RequirementState:
    _, requirements = service.store.get_setup(setup_id)
    for req in requirements:
        if req.id == requirement_id:
            return req.state
    raise UnknownRequirement(requirement_id)
