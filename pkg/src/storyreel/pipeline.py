"""Stage orchestration: the end-to-end flow and individual stage runners.

Stages run in a fixed order (story, descriptions, candidates, selection,
speech, music, scenes, mix, render). Resume trusts a done stage only after
its section hash and asset bytes verify; each run appends a transcript entry
with the stages it executed and the backend calls it made.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone

import numpy as np

from . import audio_io, compose, curation, render, timeline
from .assets import AudioAsset, VideoAsset
from .backends import Gateway
from .camera import CameraPath, default_camera_path
from .config import PipelineConfig
from .errors import DependencyError, StageError, StoryReelError
from .store import STAGES, ProjectStore
from .story import (Story, StoryRequest, generate_all_descriptions, generate_story)

logger = logging.getLogger("storyreel.pipeline")


class Pipeline:
    def __init__(self, store: ProjectStore, config: PipelineConfig,
                 gateway: Gateway | None = None, selection_policy: str = "first",
                 candidates_per_scene: int | None = None):
        self.store = store
        self.config = config
        self.gateway = gateway or Gateway(config.endpoints, store,
                                          parallelism=config.parallelism)
        self.selection_policy = selection_policy
        self.candidates_per_scene = (candidates_per_scene if candidates_per_scene
                                     else config.candidates)
        self.engine_commands: list = []

    # -- run drivers ----------------------------------------------------------

    def run_stage(self, stage: str, command: str | None = None):
        """Run one stage, enforcing that all earlier stages are done."""
        idx = STAGES.index(stage)
        for earlier in STAGES[:idx]:
            if self.store.stage_state(earlier) != "done":
                raise DependencyError(stage, earlier)
        self._run_with_transcript([stage], command or stage)

    def run_pending(self, command: str = "auto") -> str | None:
        """Resume: run every stage from the first unverified one onward."""
        start = self.store.resume_point()
        if start is None:
            self._append_transcript(command, [], started=_now(), finished=_now())
            final = self.store.manifest.get("final") or {}
            return (final.get("video") or {}).get("path")
        stages = []
        for stage in STAGES[STAGES.index(start):]:
            if self.store.stage_state(stage) == "done":
                if self.store.verify_stage(stage):
                    continue
                logger.warning("stage %r failed verification; demoting to pending", stage)
                self.store.mark_stage_pending(stage)
                self.store.save_manifest()
            stages.append(stage)
        self._run_with_transcript(stages, command)
        final = self.store.manifest.get("final") or {}
        return (final.get("video") or {}).get("path")

    def _run_with_transcript(self, stages: list[str], command: str):
        started = _now()
        self.engine_commands = []
        executed = []
        try:
            for stage in stages:
                runner = getattr(self, f"stage_{stage}")
                try:
                    runner()
                except Exception as exc:
                    self.store.mark_stage_failed(stage, str(exc))
                    self.store.save_manifest()
                    if isinstance(exc, StageError):
                        raise
                    raise StageError(stage, exc) from exc
                executed.append(stage)
                self.store.mark_stage_done(stage)
                self.store.save_manifest()
        finally:
            self._append_transcript(command, executed, started, _now())

    def _append_transcript(self, command, executed, started, finished):
        self.store.manifest["transcripts"].append({
            "command": command,
            "stages_run": executed,
            "backend_calls": self.gateway.snapshot_counts(reset=True),
            "engine_commands": self.engine_commands,
            "started_at": started,
            "finished_at": finished,
        })
        self.store.save_manifest()

    # -- stage implementations -------------------------------------------------

    def stage_story(self):
        manifest = self.store.manifest
        req = StoryRequest.from_dict(manifest["request"])
        story = generate_story(req, self.gateway,
                               max_tokens=self.config.textgen.story_max_tokens)
        manifest["story"] = story.to_dict()
        manifest["scenes"] = [_new_scene(s.index) for s in story.sentences]

    def stage_descriptions(self):
        manifest = self.store.manifest
        story = Story.from_dict(manifest["story"])
        req = StoryRequest.from_dict(manifest["request"])
        descriptions = generate_all_descriptions(
            story, self.gateway, self.config.style, req.seed,
            parallelism=self.config.parallelism,
            max_tokens=self.config.textgen.description_max_tokens)
        for scene, desc in zip(manifest["scenes"], descriptions):
            scene["description"] = desc.to_dict()

    def stage_candidates(self):
        cfg = self.config
        for i, scene in enumerate(self.store.manifest["scenes"]):
            if scene.get("candidates"):
                continue  # crash-resume: batch already persisted
            curation.generate_candidates(
                self.store, self.gateway, i, self.candidates_per_scene,
                cfg.compose.image_width, cfg.compose.image_height,
                parallelism=cfg.parallelism)

    def stage_selection(self):
        curation.auto_select(self.store, self.selection_policy)
        if not curation.all_selected(self.store.manifest):
            missing = [i for i, s in enumerate(self.store.manifest["scenes"])
                       if s.get("selected_index") is None]
            raise StageError("selection", StoryReelError(
                f"scenes {missing} are awaiting selection; choose candidates via "
                f"the curation API (storyreel serve) or rerun with --policy first"))

    def stage_speech(self):
        manifest = self.store.manifest
        story = Story.from_dict(manifest["story"])
        tts = self.config.tts
        seed = manifest["request"]["seed"]
        if tts.per_sentence:
            def synth(sentence):
                return self.gateway.synthesize_speech(sentence.text, tts.voice,
                                                      tts.length_scale, seed=seed)
            with ThreadPoolExecutor(max_workers=max(1, self.config.parallelism)) as pool:
                clips = list(pool.map(synth, story.sentences))
        else:
            clips = [self.gateway.synthesize_speech(story.full_text, tts.voice,
                                                    tts.length_scale, seed=seed)]
        segments, total = timeline.layout_speech(clips, self.config.mix)
        manifest["speech"] = [seg.to_dict() for seg in segments]
        manifest["timeline"] = {"total_duration": total}

    def stage_music(self):
        manifest = self.store.manifest
        req = manifest["request"]
        cfg = self.config.music
        raw = self.gateway.generate_music(cfg.preset, cfg.target_duration,
                                          seed=req["seed"])
        entry = {"raw": raw.to_dict(), "vocals": None, "instruments": None}
        if cfg.separate_vocals:
            vocals, instruments = self.gateway.separate_vocals(raw)
            entry["vocals"] = vocals.to_dict()
            entry["instruments"] = instruments.to_dict()
        manifest["music"] = entry

    def stage_scenes(self):
        manifest = self.store.manifest
        segments = [timeline.SpeechSegment.from_dict(d) for d in manifest["speech"]]
        durations = scene_durations(segments, self.config.mix,
                                    per_sentence=self.config.tts.per_sentence,
                                    n_scenes=len(manifest["scenes"]))
        frames = allocate_frames(durations, self.config.compose.fps)
        ccfg, rcfg = self.config.compose, self.config.render

        def render_one(i):
            scene = manifest["scenes"][i]
            if scene.get("rendered"):
                return None
            image = curation.selected_image(manifest, i)
            path = CameraPath.from_dict(scene["camera_path"])
            asset, descriptor = compose.compose_scene(
                self.store, image, path, durations[i], ccfg.fps, ccfg.mode,
                ccfg, rcfg, gateway=self.gateway, frame_count=frames[i])
            return i, image, asset, descriptor

        with ThreadPoolExecutor(max_workers=max(1, self.config.parallelism)) as pool:
            results = list(pool.map(render_one, range(len(manifest["scenes"]))))
        for i, scene in enumerate(manifest["scenes"]):
            scene["duration"] = durations[i]
            scene["frame_count"] = frames[i]
        for result in results:
            if result is None:
                continue
            i, image, asset, descriptor = result
            scene = manifest["scenes"][i]
            scene["rendered"] = asset.to_dict()
            scene["source_image_hash"] = image.content_hash
            self.engine_commands.append({"scene": i, **descriptor})

    def stage_mix(self):
        manifest = self.store.manifest
        segments = [timeline.SpeechSegment.from_dict(d) for d in manifest["speech"]]
        total = manifest["timeline"]["total_duration"]
        music_entry = manifest["music"]
        bed = music_entry["instruments"] or music_entry["raw"]
        music_samples, music_rate = audio_io.read_wav_file(
            self.store.abspath(bed["path"]))
        fitted = timeline.fit_music(audio_io.to_mono(music_samples), music_rate,
                                    total, self.config.mix)
        envelope = timeline.duck_envelope(segments, total, self.config.mix)
        if self.config.mix.dump_envelope:
            csv_path = os.path.join(self.store.root, "logs", "envelope.csv")
            os.makedirs(os.path.dirname(csv_path), exist_ok=True)
            with open(csv_path, "w", encoding="utf-8") as f:
                f.write(timeline.envelope_csv(envelope))
        speech_samples = {
            seg.sentence_index: audio_io.read_wav_file(self.store.abspath(seg.audio.path))
            for seg in segments}
        mixed = timeline.render_mix(segments, speech_samples, fitted, music_rate,
                                    envelope, total, self.config.mix)
        wav = timeline.mix_to_wav(mixed, self.config.mix)
        chash, relpath = self.store.store_bytes(wav, ".wav")
        manifest["mix"] = AudioAsset(chash, relpath, timeline.MIX_RATE,
                                     self.config.mix.channels,
                                     len(mixed) / timeline.MIX_RATE).to_dict()

    def stage_render(self):
        manifest = self.store.manifest
        for i, scene in enumerate(manifest["scenes"]):
            if scene.get("selected_index") is None:
                raise StageError("render", StoryReelError(
                    f"scene {i} has no selected candidate"))
            if not scene.get("rendered"):
                raise StageError("render", StoryReelError(
                    f"scene {i} has no rendered clip"))
        scenes = [VideoAsset.from_dict(s["rendered"]) for s in manifest["scenes"]]
        audio = AudioAsset.from_dict(manifest["mix"])
        out_path = os.path.join(self.store.renders_dir, "final.mp4")
        asset, descriptor = render.render_video(self.store, scenes, audio, out_path,
                                                self.config.render)
        story = Story.from_dict(manifest["story"])
        segments = [timeline.SpeechSegment.from_dict(d) for d in manifest["speech"]]
        srt_path = os.path.join(self.store.renders_dir, "final.srt")
        render.emit_subtitles(story, segments, srt_path)
        manifest["final"] = {"video": asset.to_dict(),
                             "subtitles": os.path.relpath(srt_path, self.store.root)}
        self.engine_commands.append({"stage": "render", **descriptor})


def _new_scene(sentence_index: int) -> dict:
    return {
        "sentence_index": sentence_index,
        "description": None,
        "candidates": [],
        "batches": [],
        "next_seed_offset": 0,
        "selected_index": None,
        "status": "pending",
        "camera_path": default_camera_path(sentence_index).to_dict(),
        "duration": None,
        "frame_count": None,
        "rendered": None,
        "source_image_hash": None,
    }


def scene_durations(segments: list[timeline.SpeechSegment], mix_cfg,
                    per_sentence: bool = True, n_scenes: int | None = None) -> list[float]:
    """Per-scene display time: each sentence's narration plus the pause that
    follows it; the first scene absorbs the lead-in, the last the tail. Sums
    exactly to the timeline total."""
    if per_sentence and (n_scenes is None or n_scenes == len(segments)):
        durs = [seg.duration for seg in segments]
        n = len(durs)
        if n == 1:
            return [mix_cfg.lead_in + durs[0] + mix_cfg.tail]
        out = []
        for i, d in enumerate(durs):
            if i == 0:
                out.append(mix_cfg.lead_in + d + mix_cfg.inter_sentence_pause)
            elif i == n - 1:
                out.append(d + mix_cfg.tail)
            else:
                out.append(d + mix_cfg.inter_sentence_pause)
        return out
    # Whole-story narration: no per-sentence alignment exists, split evenly.
    total = segments[-1].end + mix_cfg.tail
    assert n_scenes and n_scenes > 0
    return [total / n_scenes] * n_scenes


def allocate_frames(durations: list[float], fps: float) -> list[int]:
    """Cumulative rounding so total frames == round(total duration * fps)."""
    frames = []
    acc = 0.0
    prev_boundary = 0
    for d in durations:
        acc += d
        boundary = int(np.floor(acc * fps + 0.5))
        frames.append(max(1, boundary - prev_boundary))
        prev_boundary = boundary
    return frames


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()
