"""Local curation API: review candidates, pick winners, regenerate, poll
progress. JSON over HTTP; candidate images served as static files. The API
is the complete curated-mode surface — the browser UI is just a client.
"""

import os
import threading

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import curation
from .backends import Gateway
from .config import PipelineConfig
from .errors import InvalidSelectionError, StageError
from .store import STAGES, ProjectStore


class SelectionBody(BaseModel):
    index: int


class RegenerateBody(BaseModel):
    count: int = 5


def create_app(store: ProjectStore, config: PipelineConfig,
               gateway: Gateway | None = None, ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="storyreel curation")
    gw = gateway or Gateway(config.endpoints, store, parallelism=config.parallelism)
    # Single-writer rule: every manifest mutation goes through this lock.
    write_lock = threading.Lock()

    @app.get("/api/project")
    def project_summary():
        m = store.manifest
        return {
            "request": m["request"],
            "story": m["story"],
            "scene_count": len(m["scenes"]),
            "stage_status": m["stage_status"],
        }

    @app.get("/api/scenes")
    def scenes():
        m = store.manifest
        state = curation.curation_state(m)
        story = m.get("story") or {"sentences": []}
        sentences = {s["index"]: s["text"] for s in story["sentences"]}
        out = []
        for i in sorted(state):
            scene = dict(state[i])
            scene["sentence_text"] = sentences.get(scene["sentence_index"], "")
            desc = m["scenes"][i].get("description")
            scene["description"] = desc["description_text"] if desc else None
            scene["candidates"] = [_candidate_view(c) for c in scene["candidates"]]
            out.append(scene)
        return {"scenes": out}

    @app.get("/api/scenes/{scene_index}/candidates")
    def scene_candidates(scene_index: int):
        m = store.manifest
        if not 0 <= scene_index < len(m["scenes"]):
            raise HTTPException(status_code=404, detail=f"no scene {scene_index}")
        scene = m["scenes"][scene_index]
        return {
            "scene_index": scene_index,
            "selected_index": scene.get("selected_index"),
            "status": scene.get("status"),
            "candidates": [_candidate_view(c) for c in scene.get("candidates", [])],
        }

    @app.post("/api/scenes/{scene_index}/selection")
    def post_selection(scene_index: int, body: SelectionBody):
        with write_lock:
            try:
                state = curation.select_candidate(store, scene_index, body.index)
            except InvalidSelectionError as exc:
                raise HTTPException(status_code=400, detail=str(exc))
        return {"scene_index": scene_index, "selected_index": state["selected_index"],
                "status": state["status"]}

    @app.post("/api/scenes/{scene_index}/regenerate")
    def post_regenerate(scene_index: int, body: RegenerateBody):
        m = store.manifest
        if not 0 <= scene_index < len(m["scenes"]):
            raise HTTPException(status_code=404, detail=f"no scene {scene_index}")
        if body.count < 1:
            raise HTTPException(status_code=400, detail="count must be >= 1")
        with write_lock:
            try:
                curation.generate_candidates(
                    store, gw, scene_index, body.count,
                    config.compose.image_width, config.compose.image_height,
                    parallelism=config.parallelism)
            except StageError as exc:
                raise HTTPException(status_code=502, detail=str(exc))
        return scene_candidates(scene_index)

    @app.get("/api/status")
    def status():
        m = store.manifest
        scenes = m["scenes"]
        selected = sum(1 for s in scenes if s.get("selected_index") is not None)
        return {
            "stages": {stage: m["stage_status"][stage]["state"] for stage in STAGES},
            "scene_count": len(scenes),
            "scenes_selected": selected,
            "all_selected": curation.all_selected(m) if scenes else False,
        }

    @app.get("/assets/{subpath:path}")
    def asset_file(subpath: str):
        relpath = os.path.join("assets", subpath)
        full = os.path.abspath(store.abspath(relpath))
        if not full.startswith(os.path.abspath(store.assets_dir) + os.sep):
            raise HTTPException(status_code=404, detail="not found")
        if not os.path.isfile(full):
            raise HTTPException(status_code=404, detail="not found")
        return FileResponse(full)

    if ui_dir and os.path.isdir(ui_dir):
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def _candidate_view(candidate: dict) -> dict:
    return {**candidate, "url": "/" + candidate["path"].replace(os.sep, "/")}
