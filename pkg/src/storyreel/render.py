"""Final assembly: concatenate scene clips, bind the mixed audio, emit SRT.

The builtin engine decodes every scene clip in order, re-encodes one MP4
video stream, and splices the mix in as a PCM track via the mp4 module. The
ffmpeg engine drives an external binary with the concat demuxer; its exact
command line is returned for the manifest either way.
"""

import os
import tempfile

import cv2
import numpy as np

from . import audio_io, mp4
from .assets import AudioAsset, VideoAsset, file_hash, probe_asset, probe_video_file
from .errors import ContractViolationError, RenderToolError
from .story import Story
from .timeline import SpeechSegment

FINAL_FOURCC = "mp4v"
AUDIO_SYNC_TOLERANCE = 0.5


def _check_scene_contract(scenes: list[VideoAsset], audio: AudioAsset):
    if not scenes:
        raise ContractViolationError("no scene clips to assemble")
    w, h, fps = scenes[0].width, scenes[0].height, scenes[0].fps
    for s in scenes[1:]:
        if (s.width, s.height) != (w, h):
            raise ContractViolationError(
                f"scene frame sizes differ: {w}x{h} vs {s.width}x{s.height}")
        if abs(s.fps - fps) > 0.01:
            raise ContractViolationError(f"scene fps differ: {fps} vs {s.fps}")
    total = sum(s.duration for s in scenes)
    if abs(audio.duration - total) > AUDIO_SYNC_TOLERANCE:
        raise ContractViolationError(
            f"audio duration {audio.duration:.2f}s is more than "
            f"{AUDIO_SYNC_TOLERANCE}s away from total scene duration {total:.2f}s")


def render_video_builtin(store, scenes: list[VideoAsset], audio: AudioAsset,
                         out_path: str) -> tuple[VideoAsset, dict]:
    """Hard-cut concatenation plus PCM audio track, all in-process."""
    _check_scene_contract(scenes, audio)
    w, h, fps = scenes[0].width, scenes[0].height, scenes[0].fps

    samples, rate = audio_io.read_wav_file(store.abspath(audio.path))
    mono = audio_io.to_mono(samples)

    with tempfile.TemporaryDirectory(prefix="storyreel-final-") as tmp:
        video_only = os.path.join(tmp, "video.mp4")
        writer = cv2.VideoWriter(video_only, cv2.VideoWriter_fourcc(*FINAL_FOURCC),
                                 fps, (w, h))
        if not writer.isOpened():
            raise RenderToolError("final video writer failed to open")
        frames_written = 0
        last_frame = None
        try:
            for scene in scenes:
                cap = cv2.VideoCapture(store.abspath(scene.path))
                try:
                    while True:
                        ok, frame = cap.read()
                        if not ok:
                            break
                        writer.write(frame)
                        last_frame = frame
                        frames_written += 1
                finally:
                    cap.release()
            # Output lasts max(video, audio): pad with the last frame if the
            # mix runs past the video by more than half a frame.
            audio_frames = int(np.floor(audio.duration * fps + 0.5))
            while frames_written < audio_frames and last_frame is not None:
                writer.write(last_frame)
                frames_written += 1
        finally:
            writer.release()
        with open(video_only, "rb") as f:
            video_bytes = f.read()

    muxed = mp4.mux_pcm_audio(video_bytes, mono, rate)
    _atomic_write(out_path, muxed)

    width, height, real_fps, duration, frames = probe_video_file(out_path)
    asset = VideoAsset(file_hash(out_path), _relpath_in_project(store, out_path),
                       width, height, real_fps, duration)
    descriptor = {"engine": "builtin", "codec": FINAL_FOURCC,
                  "audio": "pcm-s16le", "frames": frames, "fps": fps}
    return asset, descriptor


def build_ffmpeg_concat_command(render_cfg, list_path: str, audio_path: str,
                                out_path: str) -> list[str]:
    return [render_cfg.ffmpeg_path, "-y", "-f", "concat", "-safe", "0",
            "-i", list_path, "-i", audio_path,
            "-c:v", render_cfg.video_codec, "-crf", str(render_cfg.crf),
            "-preset", render_cfg.preset, "-pix_fmt", "yuv420p",
            "-c:a", render_cfg.audio_codec, "-b:a", render_cfg.audio_bitrate,
            out_path]


def concat_list_file(scene_paths: list[str]) -> str:
    """Concat-demuxer file body; single quotes in paths are shell-escaped."""
    lines = []
    for p in scene_paths:
        escaped = p.replace("'", r"'\''")
        lines.append(f"file '{escaped}'")
    return "\n".join(lines) + "\n"


def render_video_ffmpeg(store, scenes: list[VideoAsset], audio: AudioAsset,
                        out_path: str, render_cfg) -> tuple[VideoAsset, dict]:
    import subprocess

    _check_scene_contract(scenes, audio)
    with tempfile.TemporaryDirectory(prefix="storyreel-concat-") as tmp:
        list_path = os.path.join(tmp, "scenes.txt")
        with open(list_path, "w", encoding="utf-8") as f:
            f.write(concat_list_file([store.abspath(s.path) for s in scenes]))
        cmd = build_ffmpeg_concat_command(render_cfg, list_path,
                                          store.abspath(audio.path), out_path)
        try:
            proc = subprocess.run(cmd, capture_output=True)
        except OSError as exc:
            raise RenderToolError(f"cannot run {render_cfg.ffmpeg_path}: {exc}") from exc
        if proc.returncode != 0:
            raise RenderToolError(
                f"{render_cfg.ffmpeg_path} exited {proc.returncode}",
                diagnostics=proc.stderr.decode("utf-8", "replace")[-2000:])
    width, height, real_fps, duration, frames = probe_video_file(out_path)
    asset = VideoAsset(file_hash(out_path), _relpath_in_project(store, out_path),
                       width, height, real_fps, duration)
    return asset, {"engine": "ffmpeg", "command": cmd}


def render_video(store, scenes: list[VideoAsset], audio: AudioAsset,
                 out_path: str, render_cfg) -> tuple[VideoAsset, dict]:
    if render_cfg.engine == "ffmpeg":
        return render_video_ffmpeg(store, scenes, audio, out_path, render_cfg)
    return render_video_builtin(store, scenes, audio, out_path)


def _srt_time(seconds: float) -> str:
    ms = int(np.floor(seconds * 1000 + 0.5))
    h, rem = divmod(ms, 3600_000)
    m, rem = divmod(rem, 60_000)
    s, ms = divmod(rem, 1000)
    return f"{h:02d}:{m:02d}:{s:02d},{ms:03d}"


def emit_subtitles(story: Story | None, segments: list[SpeechSegment],
                   out_path: str) -> str:
    """One SRT cue per sentence spanning its speech segment."""
    cues = []
    if story is not None:
        sentences = {s.index: s.text for s in story.sentences}
        for n, seg in enumerate(segments, start=1):
            text = sentences.get(seg.sentence_index, "")
            cues.append(f"{n}\n{_srt_time(seg.start)} --> {_srt_time(seg.end)}\n{text}\n")
    body = "\n".join(cues)
    _atomic_write(out_path, body.encode("utf-8"))
    return out_path


def _atomic_write(path: str, data: bytes):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    with os.fdopen(fd, "wb") as f:
        f.write(data)
    os.replace(tmp, path)


def _relpath_in_project(store, path: str) -> str:
    try:
        rel = os.path.relpath(os.path.abspath(path), store.root)
        if not rel.startswith(".."):
            return rel
    except ValueError:
        pass
    return path


probe = probe_asset  # renderer-facing alias; see assets.probe_asset
