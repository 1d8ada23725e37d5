"""Candidate generation and selection: the human-curated mode, plus the
fully automated mode as the degenerate policy of taking the first candidate.

All state lives in the manifest's scene entries:

    status: pending -> generating -> awaiting_selection -> selected

Candidates are immutable once generated: regeneration appends a new batch
with fresh seeds, so earlier selections stay referentially valid.
"""

import logging
from concurrent.futures import ThreadPoolExecutor

from .assets import ImageAsset
from .errors import InvalidSelectionError, StageError
from .store import ProjectStore

logger = logging.getLogger("storyreel.curation")

SCENE_SEED_STRIDE = 10_000
REQUEST_SEED_STRIDE = 1_000_000


def scene_seed_base(request_seed: int, sentence_index: int) -> int:
    """Per-scene base seed; candidate seeds are sequential from here."""
    return request_seed * REQUEST_SEED_STRIDE + sentence_index * SCENE_SEED_STRIDE


def generate_candidates(store: ProjectStore, gateway, scene_index: int, n: int,
                        width: int, height: int, parallelism: int = 4) -> list[ImageAsset]:
    """Generate n candidate images for one scene and persist them.

    Seeds continue from the scene's persisted offset so repeated calls never
    reuse a seed. Partial backend failures keep the successful subset and are
    recorded on the scene; zero successes raise a stage error.
    """
    if n < 1:
        raise InvalidSelectionError("candidate count must be >= 1")
    manifest = store.manifest
    scene = manifest["scenes"][scene_index]
    if not scene.get("description"):
        raise StageError("candidates", InvalidSelectionError(
            f"scene {scene_index} has no description yet"))
    prompt = scene["description"]["augmented_prompt"]
    base = scene_seed_base(manifest["request"]["seed"], scene["sentence_index"])
    offset = scene.get("next_seed_offset", 0)
    seeds = [base + offset + i for i in range(n)]

    scene["status"] = "generating"
    store.save_manifest()

    failures: list[dict] = []
    results: list[ImageAsset | None] = [None] * n

    def one(i_seed):
        i, seed = i_seed
        try:
            results[i] = gateway.generate_image(prompt, seed, width, height)
        except Exception as exc:  # recorded per-seed, surfaced if all fail
            failures.append({"seed": seed, "error": str(exc)})

    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        list(pool.map(one, enumerate(seeds)))

    generated = [a for a in results if a is not None]
    scene["next_seed_offset"] = offset + n
    scene.setdefault("batches", []).append(
        {"offset": offset, "count": n, "failures": sorted(failures, key=lambda f: f["seed"])})
    scene["candidates"].extend(a.to_dict() for a in generated)
    if scene.get("selected_index") is None:
        scene["status"] = "awaiting_selection" if scene["candidates"] else "pending"
    else:
        scene["status"] = "selected"
    store.save_manifest()

    if not generated:
        raise StageError("candidates", InvalidSelectionError(
            f"all {n} candidate generations failed for scene {scene_index}: "
            f"{failures[0]['error'] if failures else 'unknown error'}"))
    if failures:
        logger.warning("scene %d: %d of %d candidate generations failed",
                       scene_index, len(failures), n)
    return generated


def select_candidate(store: ProjectStore, scene_index: int, candidate_index: int) -> dict:
    """Record a selection; a changed selection invalidates that scene's render."""
    manifest = store.manifest
    if not 0 <= scene_index < len(manifest["scenes"]):
        raise InvalidSelectionError(f"no scene {scene_index}")
    scene = manifest["scenes"][scene_index]
    candidates = scene.get("candidates", [])
    if not candidates:
        raise InvalidSelectionError(f"scene {scene_index} has no candidates to select")
    if not 0 <= candidate_index < len(candidates):
        raise InvalidSelectionError(
            f"candidate index {candidate_index} out of range "
            f"(scene {scene_index} has {len(candidates)} candidates)")

    previous = scene.get("selected_index")
    if previous == candidate_index:
        return curation_state(manifest)[scene_index]  # idempotent no-op

    scene["selected_index"] = candidate_index
    scene["status"] = "selected"
    if previous is not None and scene.get("rendered"):
        scene["rendered"] = None
        scene["source_image_hash"] = None
        store.mark_stage_pending("scenes")
        store.mark_stage_pending("render")
        manifest["final"] = None
    _refresh_selection_stage(store)
    store.save_manifest()
    return curation_state(manifest)[scene_index]


def auto_select(store: ProjectStore, policy: str) -> dict:
    """Automated selection policy.

    ``first`` selects candidate 0 on every scene still awaiting a choice
    (existing human selections are left alone); ``none`` changes nothing and
    is the curated-mode gate. Scenes without candidates raise a stage error.
    """
    if policy not in ("first", "none"):
        raise InvalidSelectionError(f"unknown selection policy {policy!r}")
    manifest = store.manifest
    if policy == "first":
        for scene in manifest["scenes"]:
            if not scene.get("candidates"):
                raise StageError("selection", InvalidSelectionError(
                    f"scene {scene['sentence_index']} has no candidates"))
            if scene.get("selected_index") is None:
                scene["selected_index"] = 0
                scene["status"] = "selected"
        _refresh_selection_stage(store)
        store.save_manifest()
    return curation_state(manifest)


def _refresh_selection_stage(store: ProjectStore):
    if all_selected(store.manifest):
        store.mark_stage_done("selection")


def all_selected(manifest: dict) -> bool:
    scenes = manifest["scenes"]
    return bool(scenes) and all(s.get("selected_index") is not None for s in scenes)


def selected_image(manifest: dict, scene_index: int) -> ImageAsset:
    scene = manifest["scenes"][scene_index]
    idx = scene.get("selected_index")
    if idx is None:
        raise InvalidSelectionError(f"scene {scene_index} has no selection yet")
    return ImageAsset.from_dict(scene["candidates"][idx])


def curation_state(manifest: dict) -> dict[int, dict]:
    """Scene-indexed view of the curation state."""
    out = {}
    for i, scene in enumerate(manifest["scenes"]):
        out[i] = {
            "scene_index": i,
            "sentence_index": scene["sentence_index"],
            "status": scene.get("status", "pending"),
            "candidates": list(scene.get("candidates", [])),
            "selected_index": scene.get("selected_index"),
        }
    return out
