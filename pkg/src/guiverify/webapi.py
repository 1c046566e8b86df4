"""HTTP surface consumed by the dashboard and external tools.

JSON over HTTP; ids are opaque strings; timestamps ISO-8601 UTC. Status
is polled, never pushed. The JSON-RPC tool endpoint is mounted at /mcp
on the same app.
"""

from __future__ import annotations

import math
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .requirements import MalformedBlock
from .runner import UnknownRequirement
from .service import AlreadyRunning, VerificationService
from .store import UnknownRun, UnknownSetup


class CreateSetupBody(BaseModel):
    app_ref: str
    requirements: str


class VerifyBody(BaseModel):
    requirement_ids: list[str] = Field(min_length=1)
    parallelism: int = Field(default=1, ge=1)


def create_app(service: VerificationService, frontend_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="guiverify", docs_url=None, redoc_url=None)

    @app.get("/api/setups")
    def list_setups():
        return [
            {
                "id": s.id,
                "app_ref": s.app_ref,
                "created_at": s.created_at,
                "requirement_count": len(s.requirement_ids),
            }
            for s in service.store.list_setups()
        ]

    @app.post("/api/setups", status_code=201)
    def create_setup(body: CreateSetupBody):
        try:
            setup = service.create_setup(body.app_ref, body.requirements)
        except MalformedBlock as exc:
            return JSONResponse(status_code=422, content={"detail": str(exc)})
        return setup.to_dict()

    @app.get("/api/setups/{setup_id}/requirements")
    def list_requirements(setup_id: str):
        try:
            requirements = service.list_requirements(setup_id)
        except UnknownSetup:
            raise HTTPException(status_code=404, detail=f"unknown setup {setup_id}")
        return [r.to_dict() for r in requirements]

    @app.post("/api/setups/{setup_id}/verify", status_code=202)
    def verify(setup_id: str, body: VerifyBody):
        try:
            run_ids = service.verify(setup_id, body.requirement_ids, body.parallelism)
        except UnknownSetup:
            raise HTTPException(status_code=404, detail=f"unknown setup {setup_id}")
        except UnknownRequirement as exc:
            raise HTTPException(status_code=404, detail=f"unknown requirement {exc}")
        except AlreadyRunning as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {"run_ids": run_ids}

    @app.get("/api/runs/{run_id}")
    def get_run(run_id: str):
        try:
            run = service.get_run(run_id)
        except UnknownRun:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id}")
        payload = run.meta_dict()
        payload["status"] = service.observable_status(run).value
        payload["summary"] = run.summary.to_dict() if run.summary else None
        return payload

    @app.get("/api/runs/{run_id}/status")
    def run_status(run_id: str):
        try:
            return service.run_status(run_id)
        except UnknownRun:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id}")

    @app.get("/api/runs/{run_id}/trajectory")
    def trajectory(run_id: str, page: int = 1, page_size: int = 20):
        if page < 1 or page_size < 1:
            raise HTTPException(status_code=422, detail="page and page_size must be >= 1")
        try:
            run = service.get_run(run_id)
        except UnknownRun:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id}")
        steps = [s.to_dict() for s in run.trajectory]
        total = len(steps)
        start = (page - 1) * page_size
        return {
            "run_id": run_id,
            "page": page,
            "page_size": page_size,
            "total_steps": total,
            "total_pages": max(1, math.ceil(total / page_size)),
            "steps": steps[start : start + page_size],
        }

    from .mcp import ToolServer

    tool_server = ToolServer(service)

    @app.post("/mcp")
    def mcp_endpoint(request: dict):
        response = tool_server.handle_request(request)
        return response if response is not None else JSONResponse(status_code=204, content=None)

    if frontend_dir is not None:
        frontend = Path(frontend_dir)
        if frontend.is_dir():
            index = frontend / "index.html"

            @app.get("/")
            def root():
                return FileResponse(index)

            app.mount("/", StaticFiles(directory=frontend), name="frontend")

    return app
