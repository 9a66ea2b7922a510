"""HTTP boundary: thin adapters mapping routes onto session commands.

Handlers contain no business logic; every response body is derived from one
session-manager call, and core errors map onto status codes by class.
"""

from __future__ import annotations

import logging
from typing import Optional

from fastapi import Body, FastAPI, File, Form, Request, Response, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import errors, ingest
from .store import SessionManager, export_to_json

logger = logging.getLogger(__name__)

_BAD_REQUEST = (
    errors.LimitExceeded,
    errors.RaggedRow,
    errors.DuplicateColumn,
    errors.DecodeError,
    errors.EmptyDataset,
    errors.OutOfBounds,
    errors.EmptySelection,
    errors.EmptyAnnotationText,
    errors.NonNumericColumn,
    errors.EmptyColumn,
    errors.NoAnnotations,
    errors.BudgetTooSmall,
)
_NOT_FOUND = (errors.UnknownSession, errors.UnknownQuestion, errors.NotDisplayed)
_CONFLICT = (errors.PreconditionNotMet, errors.SequenceConflict)


def _status_for(exc: errors.TacitError) -> int:
    if isinstance(exc, _NOT_FOUND):
        return 404
    if isinstance(exc, _CONFLICT):
        return 409
    if isinstance(exc, errors.ProviderError):
        return 502
    if isinstance(exc, _BAD_REQUEST):
        return 400
    return 500


def _error_body(exc: errors.TacitError) -> dict:
    if isinstance(exc, errors.PreconditionNotMet):
        # the refill gate reports its literal reason, e.g. refill_not_enabled
        return {"error": str(exc), "detail": str(exc)}
    body = {"error": type(exc).__name__, "detail": str(exc)}
    if isinstance(exc, errors.ProviderError):
        body["error"] = "ProviderError"
        body["retryable"] = True
    return body


def create_app(
    manager: SessionManager,
    auth_token: Optional[str] = None,
    frontend_dir: Optional[str] = None,
) -> FastAPI:
    app = FastAPI(title="tacit", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.middleware("http")
    async def shared_token_guard(request: Request, call_next):
        guarded = request.url.path.startswith("/sessions")
        if auth_token and guarded and request.headers.get("Authorization") != f"Bearer {auth_token}":
            return JSONResponse({"error": "unauthorized"}, status_code=401)
        return await call_next(request)

    @app.exception_handler(errors.TacitError)
    async def tacit_error_handler(_request: Request, exc: errors.TacitError):
        status = _status_for(exc)
        if status >= 500:
            logger.warning("request failed: %s", exc)
        return JSONResponse(_error_body(exc), status_code=status)

    @app.exception_handler(ValueError)
    async def value_error_handler(_request: Request, exc: ValueError):
        # malformed request shapes (bad selection kind, unpaired indices, ...)
        return JSONResponse({"error": "InvalidRequest", "detail": str(exc)}, status_code=400)

    @app.post("/sessions", status_code=201)
    async def create_session(
        file: UploadFile = File(...),
        seed: Optional[int] = Form(default=None),
    ):
        data = await file.read()
        session_id = manager.create_session(data, filename=file.filename or "dataset.csv", seed=seed)
        return {"session_id": session_id}

    @app.get("/sessions/{session_id}/board")
    def get_board(session_id: str, request: Request, response: Response):
        payload = manager.board_payload(session_id)
        etag = str(payload["board_version"])
        if request.headers.get("If-None-Match") == etag:
            return Response(status_code=304)
        response.headers["ETag"] = etag
        return payload

    @app.post("/sessions/{session_id}/board/refill")
    def refill(session_id: str):
        return manager.refill_board(session_id)

    @app.delete("/sessions/{session_id}/questions/{question_id}")
    def remove_question(session_id: str, question_id: str):
        return manager.remove_question(session_id, question_id)

    @app.post("/sessions/{session_id}/questions/{question_id}/answer")
    def answer(session_id: str, question_id: str, body: dict = Body(...)):
        result, annotation = manager.submit_answer(session_id, question_id, body.get("text", ""))
        payload = {"verdict": result.verdict, "feedback": result.feedback, "stage": result.stage}
        if annotation is not None:
            payload["annotation"] = annotation.to_dict()
        return payload

    @app.post("/sessions/{session_id}/annotations", status_code=201)
    def annotate(session_id: str, body: dict = Body(...)):
        annotation = manager.commit_annotation(
            session_id, body.get("selection") or {}, body.get("text", "")
        )
        return annotation.to_dict()

    @app.get("/sessions/{session_id}/annotations")
    def list_annotations(session_id: str):
        return {"annotations": manager.annotations_payload(session_id)}

    @app.get("/sessions/{session_id}/export")
    def export(session_id: str):
        doc = manager.export_session(session_id)
        return Response(
            content=export_to_json(doc),
            media_type="application/json",
            headers={"Content-Disposition": 'attachment; filename="annotations.json"'},
        )

    @app.post("/sessions/{session_id}/report")
    def report(session_id: str):
        return {"report": manager.report(session_id)}

    # read-only data endpoints backing the spreadsheet and the linked views

    @app.get("/sessions/{session_id}/dataset")
    def dataset(session_id: str):
        state = manager.state_snapshot(session_id)
        ds = state.dataset
        return {
            "name": ds.name,
            "row_count": ds.row_count,
            "column_count": ds.column_count,
            "columns": [
                {"name": c.name, "inferred_type": c.inferred_type, "null_count": c.null_count}
                for c in ds.columns
            ],
            "rows": [[cell.raw for cell in row] for row in ds.cells],
        }

    @app.get("/sessions/{session_id}/columns/{column_index}/histogram")
    def column_histogram(session_id: str, column_index: int, bins: Optional[int] = None):
        state = manager.state_snapshot(session_id)
        bin_count = bins or ingest.default_bin_count(state.dataset, column_index)
        return ingest.histogram(state.dataset, column_index, bin_count).to_dict()

    @app.get("/sessions/{session_id}/scatter")
    def scatter(session_id: str, x: int, y: int):
        state = manager.state_snapshot(session_id)
        points = ingest.scatter_points(state.dataset, x, y)
        return {"points": [[r, px, py] for r, px, py in points]}

    @app.get("/sessions/{session_id}/rows-in-range")
    def rows_in_range(session_id: str, column: int, low: float, high: float):
        state = manager.state_snapshot(session_id)
        ids = ingest.rows_in_range(state.dataset, column, low, high)
        return {"row_ids": sorted(ids)}

    @app.get("/sessions/{session_id}/themes")
    def themes(session_id: str):
        return {"themes": manager.theme_payload(session_id)}

    if frontend_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="frontend")

    return app
