"""HTTP service over the job manager.

Routes (all JSON bodies; errors share the {code, stage, message} shape):

    POST /api/jobs                                  layout + overrides -> job id
    GET  /api/jobs/{id}                             job record
    GET  /api/jobs/{id}/image                       final scene PNG
    GET  /api/jobs/{id}/objects/{oid}/image         stage-1 object PNG
    POST /api/jobs/{id}/objects/{oid}/regenerate    {seed?} -> new job id
    GET  /api/health

An optional static directory (the built layout-editor UI) is mounted at
the root, after the API routes.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import __version__
from .errors import EngineError, ParseError, ValidationError
from .jobs import JobManager, error_payload


class JobSubmission(BaseModel):
    layout: dict
    overrides: dict[str, Any] | None = None


class RegenerateBody(BaseModel):
    seed: int | None = None


def _error(status: int, payload: dict) -> JSONResponse:
    return JSONResponse(status_code=status, content=payload)


def _not_found(what: str) -> JSONResponse:
    return _error(404, {"code": "not_found", "stage": "", "message": f"{what} not found"})


def create_app(manager: JobManager, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="layoutgen", version=__version__)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(EngineError)
    async def engine_error(request: Request, exc: EngineError):
        status = 400 if isinstance(exc, (ParseError, ValidationError)) else 500
        return _error(status, error_payload(exc))

    @app.get("/api/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/api/jobs", status_code=202)
    def submit(body: JobSubmission):
        job_id = manager.submit_layout(body.layout, overrides=body.overrides)
        return {"job_id": job_id}

    @app.get("/api/jobs/{job_id}")
    def job_record(job_id: str):
        try:
            return manager.get(job_id).to_dict()
        except KeyError:
            return _not_found(f"job {job_id!r}")

    def _serve_png(job_id: str, relative: str, what: str):
        try:
            record = manager.get(job_id)
        except KeyError:
            return _not_found(f"job {job_id!r}")
        if record.state == "failed":
            return _error(409, record.error or error_payload(EngineError("job failed")))
        if record.state != "done":
            return _error(
                409,
                {"code": "not_ready", "stage": record.state, "message": f"job is {record.state}"},
            )
        path = Path(record.job_dir) / relative
        if not path.is_file():
            return _not_found(what)
        return FileResponse(path, media_type="image/png")

    @app.get("/api/jobs/{job_id}/image")
    def scene_image(job_id: str):
        return _serve_png(job_id, "scene.png", "scene image")

    @app.get("/api/jobs/{job_id}/objects/{object_id}/image")
    def object_image(job_id: str, object_id: str):
        return _serve_png(job_id, f"objects/{object_id}/image.png", f"object {object_id!r}")

    @app.post("/api/jobs/{job_id}/objects/{object_id}/regenerate", status_code=202)
    def regenerate(job_id: str, object_id: str, body: RegenerateBody | None = None):
        seed = body.seed if body is not None else None
        try:
            new_id = manager.regenerate(job_id, object_id, seed=seed)
        except KeyError as exc:
            return _not_found(str(exc.args[0]))
        return {"job_id": new_id}

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
