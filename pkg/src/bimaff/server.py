"""HTTP backend for the browser annotation tool.

Endpoints:
  GET  /tasks                     annotation queue (summaries)
  GET  /tasks/{id}                one task with its current mask layers
  PUT  /tasks/{id}/annotation     optimistic write: 409 on version conflict,
                                  400 on malformed masks, 404 on unknown id
  POST /tasks/{id}/skip           audited skip event
  GET  /export                    benchmark manifest of annotated tasks
  GET  /images/{path}             image files referenced by tasks
  /                               static UI files when a directory is given
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Union

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .annotation_store import (
    AnnotationStore,
    MalformedMaskError,
    UnknownTaskError,
    VersionConflictError,
)


class AnnotationUpload(BaseModel):
    left: Optional[dict] = None
    right: Optional[dict] = None
    version: int
    annotator: str = ""


class SkipUpload(BaseModel):
    annotator: str = ""
    reason: str = ""


def create_app(
    store: AnnotationStore,
    static_dir: Optional[Union[str, Path]] = None,
    images_root: Optional[Union[str, Path]] = None,
) -> FastAPI:
    app = FastAPI(title="affordance annotation backend")

    @app.get("/tasks")
    def list_tasks():
        return {"tasks": store.list_tasks()}

    @app.get("/tasks/{task_id}")
    def get_task(task_id: str):
        try:
            return store.get_task(task_id)
        except UnknownTaskError:
            raise HTTPException(status_code=404, detail=f"unknown task {task_id!r}")

    @app.put("/tasks/{task_id}/annotation")
    def put_annotation(task_id: str, upload: AnnotationUpload):
        try:
            version = store.put_annotation(
                task_id, upload.left, upload.right, upload.version, upload.annotator)
        except UnknownTaskError:
            raise HTTPException(status_code=404, detail=f"unknown task {task_id!r}")
        except VersionConflictError as exc:
            return JSONResponse(
                status_code=409,
                content={"detail": str(exc), "current_version": exc.current_version})
        except MalformedMaskError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"version": version}

    @app.post("/tasks/{task_id}/skip")
    def skip_task(task_id: str, upload: SkipUpload):
        try:
            store.record_skip(task_id, upload.annotator, upload.reason)
        except UnknownTaskError:
            raise HTTPException(status_code=404, detail=f"unknown task {task_id!r}")
        return {"ok": True}

    @app.get("/export")
    def export():
        entries = store.export_entries()
        return {"entries": [e.to_json_obj() for e in entries]}

    if images_root is not None:
        images_root = Path(images_root)

        @app.get("/images/{path:path}")
        def get_image(path: str):
            resolved = (images_root / path).resolve()
            if images_root.resolve() not in resolved.parents and resolved != images_root.resolve():
                raise HTTPException(status_code=404, detail="outside image root")
            if not resolved.is_file():
                raise HTTPException(status_code=404, detail=f"no such image {path!r}")
            return FileResponse(resolved)

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app


def serve(store: AnnotationStore, host: str, port: int,
          static_dir: Optional[Union[str, Path]] = None,
          images_root: Optional[Union[str, Path]] = None) -> None:
    import uvicorn

    uvicorn.run(create_app(store, static_dir, images_root), host=host, port=port)
