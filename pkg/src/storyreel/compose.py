"""Scene rendering: a still image animated along a camera path.

Two engines produce the per-scene clip:

  builtin  - per-frame crop/scale in-process (OpenCV), written as lossless
             FFV1/AVI so downstream contracts (frame equality, dedup) are
             exact. Default, has no external dependencies.
  ffmpeg   - the same frames piped as PNGs to an external ffmpeg binary.
             Selected via render.engine config when a binary is available.

Whichever engine runs, its exact invocation descriptor is returned so the
pipeline can record it in the manifest.
"""

import os
import subprocess
import tempfile

import cv2
import numpy as np

from .assets import ImageAsset, VideoAsset, probe_video_file
from .camera import CameraPath, crop_rect, interpolate_camera
from .errors import BackendError, ContractViolationError, RenderToolError

SCENE_CLIP_EXT = ".avi"
SCENE_FOURCC = "FFV1"


def frame_count_for(duration: float, fps: float) -> int:
    return max(1, int(np.floor(duration * fps + 0.5)))


def scene_frames(image_bgr: np.ndarray, path: CameraPath, n_frames: int,
                 out_w: int, out_h: int):
    """Yield the n output frames for one scene.

    Each frame crops the source at the interpolated camera state, rotates if
    requested, and letterboxes the crop into the output size so the full crop
    is always visible.
    """
    src_h, src_w = image_bgr.shape[:2]
    for i in range(n_frames):
        t = i / (n_frames - 1) if n_frames > 1 else 0.0
        kf = interpolate_camera(path, t)
        x, y, w, h = crop_rect(src_w, src_h, kf)
        if abs(kf.rotation) > 1e-9:
            m = cv2.getRotationMatrix2D((x + w / 2.0, y + h / 2.0), kf.rotation, 1.0)
            rotated = cv2.warpAffine(image_bgr, m, (src_w, src_h),
                                     flags=cv2.INTER_LINEAR)
            crop = rotated[y:y + h, x:x + w]
        else:
            crop = image_bgr[y:y + h, x:x + w]
        yield letterbox(crop, out_w, out_h)


def letterbox(frame: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Scale to fit inside (out_w, out_h), pad the rest with black."""
    h, w = frame.shape[:2]
    scale = min(out_w / w, out_h / h)
    new_w = max(2, int(w * scale + 0.5))
    new_h = max(2, int(h * scale + 0.5))
    interp = cv2.INTER_AREA if scale < 1.0 else cv2.INTER_LINEAR
    resized = cv2.resize(frame, (new_w, new_h), interpolation=interp)
    canvas = np.zeros((out_h, out_w, 3), dtype=np.uint8)
    y0 = (out_h - new_h) // 2
    x0 = (out_w - new_w) // 2
    canvas[y0:y0 + new_h, x0:x0 + new_w] = resized
    return canvas


def crop_filter_expression(image_w: int, image_h: int, path: CameraPath,
                           n_frames: int, out_w: int, out_h: int) -> str:
    """Deterministic crop/scale expression describing the render, recorded in
    the manifest for reproducibility (ffmpeg crop=w:h:x:y per-frame family)."""
    parts = []
    step = max(1, n_frames // 8)
    for i in range(0, n_frames, step):
        t = i / (n_frames - 1) if n_frames > 1 else 0.0
        x, y, w, h = crop_rect(image_w, image_h, interpolate_camera(path, t))
        parts.append(f"f{i}:crop={w}:{h}:{x}:{y}")
    return ";".join(parts) + f";scale={out_w}:{out_h}:force_original_aspect_ratio=decrease"


def render_scene_builtin(image_path: str, path: CameraPath, n_frames: int,
                         fps: float, out_w: int, out_h: int, out_file: str) -> dict:
    """Render a scene clip with the in-process engine. Returns the manifest
    command descriptor."""
    image = cv2.imread(image_path, cv2.IMREAD_COLOR)
    if image is None:
        raise ContractViolationError(f"cannot read scene image {image_path}")
    writer = cv2.VideoWriter(out_file, cv2.VideoWriter_fourcc(*SCENE_FOURCC),
                             fps, (out_w, out_h))
    if not writer.isOpened():
        raise RenderToolError(f"video writer failed to open for {out_file}")
    try:
        for frame in scene_frames(image, path, n_frames, out_w, out_h):
            writer.write(frame)
    finally:
        writer.release()
    src_h, src_w = image.shape[:2]
    return {
        "engine": "builtin",
        "codec": SCENE_FOURCC,
        "fps": fps,
        "frames": n_frames,
        "filter": crop_filter_expression(src_w, src_h, path, n_frames, out_w, out_h),
    }


def build_ffmpeg_scene_command(ffmpeg_path: str, frames_pattern: str, fps: float,
                               codec: str, crf: int, preset: str, out_file: str) -> list[str]:
    return [ffmpeg_path, "-y", "-framerate", f"{fps:g}", "-i", frames_pattern,
            "-c:v", codec, "-crf", str(crf), "-preset", preset,
            "-pix_fmt", "yuv420p", out_file]


def render_scene_ffmpeg(image_path: str, path: CameraPath, n_frames: int, fps: float,
                        out_w: int, out_h: int, out_file: str, render_cfg) -> dict:
    """Render via an external ffmpeg binary: frames are generated by the same
    camera math and handed over as PNGs."""
    image = cv2.imread(image_path, cv2.IMREAD_COLOR)
    if image is None:
        raise ContractViolationError(f"cannot read scene image {image_path}")
    with tempfile.TemporaryDirectory(prefix="storyreel-frames-") as tmp:
        for i, frame in enumerate(scene_frames(image, path, n_frames, out_w, out_h)):
            cv2.imwrite(os.path.join(tmp, f"frame{i:06d}.png"), frame)
        cmd = build_ffmpeg_scene_command(
            render_cfg.ffmpeg_path, os.path.join(tmp, "frame%06d.png"), fps,
            render_cfg.video_codec, render_cfg.crf, render_cfg.preset, out_file)
        _run_tool(cmd)
    return {"engine": "ffmpeg", "command": cmd, "frames": n_frames, "fps": fps}


def _run_tool(cmd: list[str]):
    try:
        proc = subprocess.run(cmd, capture_output=True)
    except OSError as exc:
        raise RenderToolError(f"cannot run {cmd[0]}: {exc}") from exc
    if proc.returncode != 0:
        raise RenderToolError(f"{cmd[0]} exited {proc.returncode}",
                              diagnostics=proc.stderr.decode("utf-8", "replace")[-2000:])


def compose_scene(store, image: ImageAsset, path: CameraPath, duration: float,
                  fps: float, mode: str, compose_cfg, render_cfg,
                  gateway=None, frame_count: int | None = None) -> tuple[VideoAsset, dict]:
    """Produce the clip for one scene; returns (asset, command descriptor).

    native_2d renders locally; depth_backend goes through the gateway's
    depth-effect endpoint (the mock transport delegates straight back to the
    native renderer) and falls back to native on backend failure when
    enabled. Output clip length is round(duration * fps) +- 1 frame.
    """
    if duration <= 0:
        raise ContractViolationError("scene duration must be > 0")
    if not 10 <= fps <= 60:
        raise ContractViolationError(f"fps {fps} outside [10, 60]")
    n_frames = frame_count if frame_count is not None else frame_count_for(duration, fps)
    if abs(n_frames - duration * fps) > 1.0:
        raise ContractViolationError(
            f"frame count {n_frames} disagrees with duration {duration}s at {fps}fps")
    out_w, out_h = compose_cfg.frame_width, compose_cfg.frame_height

    def native(img: ImageAsset, cam: CameraPath, dur: float, f: float) -> VideoAsset:
        frames = frame_count if frame_count is not None else frame_count_for(dur, f)
        with tempfile.TemporaryDirectory(prefix="storyreel-scene-") as tmp:
            out_file = os.path.join(tmp, "scene" + SCENE_CLIP_EXT)
            if render_cfg.engine == "ffmpeg":
                descriptor = render_scene_ffmpeg(store.abspath(img.path), cam, frames,
                                                 f, out_w, out_h, out_file, render_cfg)
            else:
                descriptor = render_scene_builtin(store.abspath(img.path), cam, frames,
                                                  f, out_w, out_h, out_file)
            chash, relpath = store.store_file(out_file, SCENE_CLIP_EXT)
        native.descriptor = descriptor
        w, h, real_fps, clip_duration, _ = probe_video_file(store.abspath(relpath))
        return VideoAsset(chash, relpath, w, h, real_fps, clip_duration)

    native.descriptor = {}

    if mode == "native_2d":
        asset = native(image, path, duration, fps)
        return asset, native.descriptor
    if mode != "depth_backend":
        raise ContractViolationError(f"unknown compose mode {mode!r}")
    if gateway is None:
        raise ContractViolationError("depth_backend mode requires a gateway")
    try:
        asset = gateway.apply_depth_effect(image, path, duration, fps, native)
    except BackendError:
        if not compose_cfg.fallback_to_native:
            raise
        asset = native(image, path, duration, fps)
        descriptor = dict(native.descriptor)
        descriptor["fallback_from"] = "depth_backend"
        return asset, descriptor
    descriptor = native.descriptor or {"engine": "depth_backend"}
    expected = frame_count if frame_count is not None else frame_count_for(duration, fps)
    actual = int(round(asset.duration * asset.fps))
    if abs(actual - expected) > 1:
        asset = conform_clip(store, asset, expected, fps, (out_w, out_h))
        descriptor = dict(descriptor)
        descriptor["conformed_to_frames"] = expected
    return asset, descriptor


def conform_clip(store, clip: VideoAsset, target_frames: int, fps: float,
                 size: tuple[int, int]) -> VideoAsset:
    """Trim or pad (repeating the last frame) a clip to the target length."""
    cap = cv2.VideoCapture(store.abspath(clip.path))
    frames = []
    while len(frames) < target_frames:
        ok, frame = cap.read()
        if not ok:
            break
        if (frame.shape[1], frame.shape[0]) != size:
            frame = letterbox(frame, size[0], size[1])
        frames.append(frame)
    cap.release()
    if not frames:
        raise RenderToolError(f"clip {clip.path} has no decodable frames")
    while len(frames) < target_frames:
        frames.append(frames[-1].copy())
    with tempfile.TemporaryDirectory(prefix="storyreel-conform-") as tmp:
        out_file = os.path.join(tmp, "conformed" + SCENE_CLIP_EXT)
        writer = cv2.VideoWriter(out_file, cv2.VideoWriter_fourcc(*SCENE_FOURCC),
                                 fps, size)
        for frame in frames:
            writer.write(frame)
        writer.release()
        chash, relpath = store.store_file(out_file, SCENE_CLIP_EXT)
    w, h, real_fps, duration, _ = probe_video_file(store.abspath(relpath))
    return VideoAsset(chash, relpath, w, h, real_fps, duration)
