"""HTTP service exposing run state, approvals, reviews, and trajectories.

Read endpoints serve the persisted artifacts (canonical bytes, ETag =
content hash) so the web UI renders exactly what is on disk. Mutations are
queued to files the pipeline's single writer consumes: topic decisions
append to a replayable log, aborts set a flag checked at checkpoints.
"""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .jsonutil import canonical_bytes, load_json
from .runstate import Phase
from .topics import Decision, TopicSet, apply_user_decision

logger = logging.getLogger(__name__)

READ = "read"
APPROVE = "approve"
ABORT = "abort"


def _etag_response(data: bytes, request: Request, status_code: int = 200) -> Response:
    etag = '"' + hashlib.sha256(data).hexdigest()[:32] + '"'
    if request.headers.get("if-none-match") == etag:
        return Response(status_code=304, headers={"ETag": etag})
    return Response(
        content=data,
        status_code=status_code,
        media_type="application/json",
        headers={"ETag": etag},
    )


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def create_app(
    run_root: Path | str,
    admin_token: str | None = None,
    read_token: str | None = None,
    ui_dir: Path | str | None = None,
) -> FastAPI:
    """Build the service over a directory of run directories.

    ``admin_token`` grants read+approve+abort; ``read_token`` grants read.
    With no read token configured, reads are open (single-operator tool).
    """
    run_root = Path(run_root)
    app = FastAPI(title="survey-engine service", docs_url=None, redoc_url=None)

    def capabilities(request: Request) -> set[str]:
        auth = request.headers.get("authorization", "")
        token = auth.removeprefix("Bearer ").strip() if auth.startswith("Bearer ") else None
        caps: set[str] = set()
        if read_token is None:
            caps.add(READ)
        if token and read_token is not None and token == read_token:
            caps.add(READ)
        if token and admin_token is not None and token == admin_token:
            caps.update({READ, APPROVE, ABORT})
        return caps

    def run_dir(run_id: str) -> Path | None:
        candidate = run_root / run_id
        if (candidate / "manifest.json").exists():
            return candidate
        return None

    def manifest(run_id: str) -> dict | None:
        directory = run_dir(run_id)
        if directory is None:
            return None
        try:
            return load_json(directory / "manifest.json")
        except (OSError, json.JSONDecodeError):
            return None

    @app.get("/runs")
    def list_runs(request: Request):
        if READ not in capabilities(request):
            return _error(401, "read capability required")
        runs = []
        for manifest_path in sorted(run_root.glob("*/manifest.json")):
            try:
                data = load_json(manifest_path)
            except (OSError, json.JSONDecodeError):
                continue
            runs.append(
                {
                    "run_id": data["run_id"],
                    "dir": manifest_path.parent.name,
                    "phase": data["state"]["phase"],
                    "round_t": data["state"]["round_t"],
                }
            )
        return _etag_response(canonical_bytes(runs), request)

    @app.get("/runs/{run_id}/state")
    def run_state(run_id: str, request: Request):
        if READ not in capabilities(request):
            return _error(401, "read capability required")
        directory = run_dir(run_id)
        if directory is None:
            return _error(404, f"unknown run {run_id}")
        return _etag_response((directory / "manifest.json").read_bytes(), request)

    @app.get("/runs/{run_id}/trajectory")
    def trajectory(run_id: str, request: Request):
        if READ not in capabilities(request):
            return _error(401, "read capability required")
        directory = run_dir(run_id)
        if directory is None:
            return _error(404, f"unknown run {run_id}")
        path = directory / "trajectory.json"
        if path.exists():
            return _etag_response(path.read_bytes(), request)
        data = manifest(run_id)
        tau = data["config"]["threshold_tau"] if data else None
        return _etag_response(canonical_bytes({"tau": tau, "points": []}), request)

    @app.get("/runs/{run_id}/rounds/{round_t}/reviews")
    def round_reviews(run_id: str, round_t: int, request: Request):
        if READ not in capabilities(request):
            return _error(401, "read capability required")
        directory = run_dir(run_id)
        if directory is None:
            return _error(404, f"unknown run {run_id}")
        reviews_dir = directory / "rounds" / f"round_{round_t}" / "reviews"
        if not reviews_dir.is_dir():
            return _error(404, f"no reviews for round {round_t}")
        reviews = [load_json(p) for p in sorted(reviews_dir.glob("*.json"))]
        scores_path = directory / "rounds" / f"round_{round_t}" / "scores.json"
        payload = {
            "reviews": reviews,
            "scores": load_json(scores_path) if scores_path.exists() else None,
        }
        return _etag_response(canonical_bytes(payload), request)

    @app.get("/runs/{run_id}/topics")
    def topics_snapshot(run_id: str, request: Request):
        if READ not in capabilities(request):
            return _error(401, "read capability required")
        directory = run_dir(run_id)
        if directory is None:
            return _error(404, f"unknown run {run_id}")
        path = directory / "phase_scoping" / "topics.json"
        if not path.exists():
            return _error(404, "no topic snapshot yet")
        return _etag_response(path.read_bytes(), request)

    @app.post("/runs/{run_id}/topics/decision")
    async def post_decision(run_id: str, request: Request):
        if APPROVE not in capabilities(request):
            return _error(401, "approve capability required")
        data = manifest(run_id)
        if data is None:
            return _error(404, f"unknown run {run_id}")
        if data["state"]["phase"] != Phase.Scoping.value:
            return _error(409, f"run is in phase {data['state']['phase']}, not scoping")
        try:
            decision = Decision.from_dict(await request.json())
        except (ValueError, json.JSONDecodeError) as exc:
            return _error(422, f"bad decision payload: {exc}")

        directory = run_dir(run_id)
        snapshot_path = directory / "phase_scoping" / "topics.json"
        queue = directory / "phase_scoping" / "decisions.jsonl"
        if snapshot_path.exists():
            # Validate against the committed snapshot plus any decisions the
            # pipeline has queued but not applied yet (one log entry per
            # applied decision, so the log length is the applied count).
            working = TopicSet.from_dict(load_json(snapshot_path))
            if queue.exists():
                lines = queue.read_text(encoding="utf-8").splitlines()
                for raw in lines[len(working.revision_log):]:
                    try:
                        working = apply_user_decision(
                            working, Decision.from_dict(json.loads(raw)), now="pending"
                        )
                    except Exception:  # an invalid pending decision is skipped downstream too
                        continue
            try:
                apply_user_decision(working, decision, now="validation")
            except Exception as exc:
                return _error(409, f"decision rejected: {exc}")
        queue.parent.mkdir(parents=True, exist_ok=True)
        with open(queue, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(decision.to_dict(), sort_keys=True) + "\n")
        return JSONResponse(status_code=202, content={"status": "queued"})

    @app.post("/runs/{run_id}/abort")
    def post_abort(run_id: str, request: Request):
        if ABORT not in capabilities(request):
            return _error(401, "abort capability required")
        data = manifest(run_id)
        if data is None:
            return _error(404, f"unknown run {run_id}")
        if data["state"]["phase"] in (Phase.Done.value, Phase.Failed.value):
            return _error(409, "run already terminal")
        (run_dir(run_id) / "abort.flag").touch()
        return JSONResponse(status_code=202, content={"status": "abort requested"})

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
