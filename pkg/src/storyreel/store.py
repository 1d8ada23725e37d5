"""On-disk project layout, manifest persistence and stage-resume logic.

Layout under the project root:

    manifest.json                  canonical JSON, atomic writes
    project.lock                   single-writer lock, holds the owner pid
    assets/<hh>/<hash>.<ext>       content-addressed artifacts
    cache/<request_hash>.json      backend request cache index
    renders/final.mp4, final.srt   the deliverables
    logs/

The manifest is the single source of truth for resume: a stage is trusted
only if its recorded section hash still matches and every asset it references
re-hashes cleanly from disk.
"""

import json
import logging
import os
import tempfile

from .canonical import hash_obj, sha256_hex
from .errors import ContractViolationError, CorruptAssetError, InvalidRequestError

logger = logging.getLogger("storyreel.store")

STAGES = ("story", "descriptions", "candidates", "selection", "speech",
          "music", "scenes", "mix", "render")

MANIFEST_NAME = "manifest.json"
LOCK_NAME = "project.lock"


def new_manifest(request: dict, config: dict, fingerprints: dict) -> dict:
    return {
        "format_version": 1,
        "request": request,
        "config": config,
        "backend_fingerprints": fingerprints,
        "story": None,
        "scenes": [],
        "speech": [],
        "timeline": None,
        "music": None,
        "mix": None,
        "final": None,
        "stage_status": {stage: {"state": "pending"} for stage in STAGES},
        "transcripts": [],
    }


def manifest_to_json(manifest: dict) -> str:
    return json.dumps(manifest, indent=2, sort_keys=True, ensure_ascii=True) + "\n"


def _stage_section(manifest: dict, stage: str) -> dict:
    """The manifest slice a stage's done-hash covers."""
    scenes = manifest.get("scenes", [])
    if stage == "story":
        return {"story": manifest.get("story")}
    if stage == "descriptions":
        return {"descriptions": [s.get("description") for s in scenes]}
    if stage == "candidates":
        return {"candidates": [{"candidates": s.get("candidates", []),
                                "next_seed_offset": s.get("next_seed_offset", 0)}
                               for s in scenes]}
    if stage == "selection":
        return {"selection": [{"selected_index": s.get("selected_index"),
                               "status": s.get("status")} for s in scenes]}
    if stage == "speech":
        return {"speech": manifest.get("speech")}
    if stage == "music":
        return {"music": manifest.get("music")}
    if stage == "scenes":
        return {"scenes": [{"camera_path": s.get("camera_path"),
                            "duration": s.get("duration"),
                            "frame_count": s.get("frame_count"),
                            "rendered": s.get("rendered"),
                            "source_image_hash": s.get("source_image_hash")}
                           for s in scenes]}
    if stage == "mix":
        return {"mix": manifest.get("mix"), "timeline": manifest.get("timeline")}
    if stage == "render":
        return {"final": manifest.get("final")}
    raise ContractViolationError(f"unknown stage {stage!r}")


def _stage_assets(manifest: dict, stage: str) -> list[dict]:
    """Asset dicts whose bytes must verify for the stage to stay done."""
    scenes = manifest.get("scenes", [])
    if stage == "candidates":
        return [a for s in scenes for a in s.get("candidates", [])]
    if stage == "speech":
        return [seg["audio"] for seg in manifest.get("speech", [])]
    if stage == "music":
        music = manifest.get("music") or {}
        return [a for a in music.values() if a]
    if stage == "scenes":
        return [s["rendered"] for s in scenes if s.get("rendered")]
    if stage == "mix":
        return [manifest["mix"]] if manifest.get("mix") else []
    if stage == "render":
        final = manifest.get("final") or {}
        return [final["video"]] if final.get("video") else []
    return []


class ProjectStore:
    """One project directory: manifest, assets, cache, lock."""

    def __init__(self, root: str):
        self.root = os.path.abspath(root)
        self.manifest: dict | None = None
        self._locked = False

    # -- paths ---------------------------------------------------------------

    @property
    def manifest_path(self) -> str:
        return os.path.join(self.root, MANIFEST_NAME)

    @property
    def assets_dir(self) -> str:
        return os.path.join(self.root, "assets")

    @property
    def cache_dir(self) -> str:
        return os.path.join(self.root, "cache")

    @property
    def renders_dir(self) -> str:
        return os.path.join(self.root, "renders")

    def abspath(self, relpath: str) -> str:
        return os.path.join(self.root, relpath)

    # -- lifecycle -------------------------------------------------------------

    @classmethod
    def init_project(cls, root: str, request: dict, config: dict,
                     fingerprints: dict, force: bool = False) -> "ProjectStore":
        """Create the directory layout and the initial manifest."""
        root = os.path.abspath(root)
        if os.path.exists(root) and os.listdir(root):
            if not force and os.path.exists(os.path.join(root, MANIFEST_NAME)):
                raise InvalidRequestError(
                    f"project already exists at {root} (use force to reinitialize)")
            if not force:
                raise InvalidRequestError(f"refusing to initialize non-empty directory {root}")
        store = cls(root)
        for sub in ("assets", "cache", "renders", "logs"):
            os.makedirs(os.path.join(root, sub), exist_ok=True)
        store.manifest = new_manifest(request, config, fingerprints)
        store.save_manifest()
        return store

    @classmethod
    def load(cls, root: str) -> "ProjectStore":
        store = cls(root)
        if not os.path.exists(store.manifest_path):
            raise InvalidRequestError(f"no project manifest at {store.manifest_path}")
        with open(store.manifest_path, "r", encoding="utf-8") as f:
            store.manifest = json.load(f)
        return store

    def save_manifest(self):
        """Atomic write: temp file in the same directory, then rename."""
        assert self.manifest is not None
        data = manifest_to_json(self.manifest)
        fd, tmp = tempfile.mkstemp(dir=self.root, prefix=".manifest-", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as f:
                f.write(data)
            os.replace(tmp, self.manifest_path)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)

    # -- single-writer lock ----------------------------------------------------

    def acquire_lock(self):
        lock_path = os.path.join(self.root, LOCK_NAME)
        if os.path.exists(lock_path):
            try:
                holder = int(open(lock_path).read().strip() or "0")
            except ValueError:
                holder = 0
            if holder and holder != os.getpid() and _pid_alive(holder):
                raise ContractViolationError(
                    f"project is locked by running process {holder}")
            if holder and holder != os.getpid():
                logger.warning("removing stale project lock held by dead pid %d", holder)
        with open(lock_path, "w") as f:
            f.write(str(os.getpid()))
        self._locked = True

    def release_lock(self):
        lock_path = os.path.join(self.root, LOCK_NAME)
        if self._locked and os.path.exists(lock_path):
            os.unlink(lock_path)
        self._locked = False

    def __enter__(self):
        self.acquire_lock()
        return self

    def __exit__(self, *exc):
        self.release_lock()

    # -- content-addressed asset storage ---------------------------------------

    def _asset_relpath(self, content_hash: str, ext: str) -> str:
        return os.path.join("assets", content_hash[:2], content_hash + ext)

    def store_bytes(self, data: bytes, ext: str) -> tuple[str, str]:
        """Store bytes once, addressed by their hash. Returns (hash, relpath)."""
        chash = sha256_hex(data)
        relpath = self._asset_relpath(chash, ext)
        path = self.abspath(relpath)
        if not os.path.exists(path):
            os.makedirs(os.path.dirname(path), exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path), suffix=".tmp")
            with os.fdopen(fd, "wb") as f:
                f.write(data)
            os.replace(tmp, path)
        return chash, relpath

    def store_file(self, src_path: str, ext: str) -> tuple[str, str]:
        with open(src_path, "rb") as f:
            data = f.read()
        return self.store_bytes(data, ext)

    def read_asset(self, relpath: str) -> bytes:
        path = self.abspath(relpath)
        if not os.path.exists(path):
            raise CorruptAssetError(f"asset missing from disk: {relpath}")
        with open(path, "rb") as f:
            return f.read()

    def verify_asset(self, asset_dict: dict) -> bool:
        path = self.abspath(asset_dict["path"])
        if not os.path.exists(path):
            return False
        with open(path, "rb") as f:
            return sha256_hex(f.read()) == asset_dict["content_hash"]

    # -- backend request cache --------------------------------------------------

    def _cache_path(self, request_hash: str) -> str:
        return os.path.join(self.cache_dir, request_hash + ".json")

    def cache_lookup(self, request_hash: str) -> dict | None:
        """Verified cache entry payload, or None. Corrupt entries are discarded."""
        path = self._cache_path(request_hash)
        if not os.path.exists(path):
            return None
        try:
            with open(path, "r", encoding="utf-8") as f:
                entry = json.load(f)
            result = entry["result"]
        except (ValueError, KeyError) as exc:
            logger.warning("discarding unreadable cache entry %s: %s", request_hash, exc)
            os.unlink(path)
            return None
        for asset in _entry_assets(result):
            if not self.verify_asset(asset):
                logger.warning("cache entry %s references tampered or missing asset %s; "
                               "treating as miss", request_hash, asset["path"])
                os.unlink(path)
                return None
        return result

    def cache_store(self, request_hash: str, request, result: dict):
        os.makedirs(self.cache_dir, exist_ok=True)
        entry = {"kind": request.kind, "payload": request.payload,
                 "fingerprint": request.fingerprint, "result": result}
        data = json.dumps(entry, indent=2, sort_keys=True) + "\n"
        fd, tmp = tempfile.mkstemp(dir=self.cache_dir, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(data)
        os.replace(tmp, self._cache_path(request_hash))

    # -- stage status and resume --------------------------------------------------

    def stage_state(self, stage: str) -> str:
        return self.manifest["stage_status"][stage]["state"]

    def mark_stage_done(self, stage: str):
        section_hash = hash_obj(_stage_section(self.manifest, stage))
        self.manifest["stage_status"][stage] = {"state": "done", "hash": section_hash}

    def mark_stage_failed(self, stage: str, reason: str):
        self.manifest["stage_status"][stage] = {"state": "failed", "reason": reason}

    def mark_stage_pending(self, stage: str):
        self.manifest["stage_status"][stage] = {"state": "pending"}

    def verify_stage(self, stage: str) -> bool:
        """True if a done stage's section hash and asset bytes still check out."""
        status = self.manifest["stage_status"][stage]
        if status["state"] != "done":
            return False
        if hash_obj(_stage_section(self.manifest, stage)) != status.get("hash"):
            return False
        return all(self.verify_asset(a) for a in _stage_assets(self.manifest, stage))

    def resume_point(self) -> str | None:
        """First stage that must run, demoting done stages that fail verification."""
        for stage in STAGES:
            if self.stage_state(stage) == "done":
                if self.verify_stage(stage):
                    continue
                logger.warning("stage %r failed verification; demoting to pending", stage)
                self.mark_stage_pending(stage)
                self.save_manifest()
            return stage
        return None


def _entry_assets(result: dict) -> list[dict]:
    t = result.get("type")
    if t == "asset":
        return [result["asset"]]
    if t == "asset_pair":
        return [result["vocals"], result["instruments"]]
    return []


def _pid_alive(pid: int) -> bool:
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        return True
    return True
