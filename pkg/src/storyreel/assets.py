"""Media asset records and probing.

An asset is bytes on disk addressed by content hash plus the metadata probed
from those bytes. Probing is the source of truth: every duration/dimension
contract in the pipeline is enforced against re-probed values, never against
what a backend claimed.
"""

import io
import os
import wave
from dataclasses import dataclass

from PIL import Image

from .canonical import sha256_hex
from .errors import CorruptAssetError


@dataclass(frozen=True)
class ImageAsset:
    content_hash: str
    path: str  # project-relative
    width: int
    height: int
    nsfw_flagged: bool = False

    def to_dict(self) -> dict:
        return {
            "kind": "image",
            "content_hash": self.content_hash,
            "path": self.path,
            "width": self.width,
            "height": self.height,
            "nsfw_flagged": self.nsfw_flagged,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ImageAsset":
        return cls(d["content_hash"], d["path"], d["width"], d["height"],
                   d.get("nsfw_flagged", False))


@dataclass(frozen=True)
class AudioAsset:
    content_hash: str
    path: str
    sample_rate: int
    channels: int
    duration: float

    def to_dict(self) -> dict:
        return {
            "kind": "audio",
            "content_hash": self.content_hash,
            "path": self.path,
            "sample_rate": self.sample_rate,
            "channels": self.channels,
            "duration": self.duration,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AudioAsset":
        return cls(d["content_hash"], d["path"], d["sample_rate"], d["channels"],
                   d["duration"])


@dataclass(frozen=True)
class VideoAsset:
    content_hash: str
    path: str
    width: int
    height: int
    fps: float
    duration: float

    def to_dict(self) -> dict:
        return {
            "kind": "video",
            "content_hash": self.content_hash,
            "path": self.path,
            "width": self.width,
            "height": self.height,
            "fps": self.fps,
            "duration": self.duration,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VideoAsset":
        return cls(d["content_hash"], d["path"], d["width"], d["height"],
                   d["fps"], d["duration"])


def asset_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "image":
        return ImageAsset.from_dict(d)
    if kind == "audio":
        return AudioAsset.from_dict(d)
    if kind == "video":
        return VideoAsset.from_dict(d)
    raise CorruptAssetError(f"unknown asset kind in manifest: {kind!r}")


def probe_image_bytes(data: bytes) -> tuple[int, int]:
    """(width, height) of encoded image bytes; raises CorruptAssetError."""
    try:
        with Image.open(io.BytesIO(data)) as im:
            im.verify()
        with Image.open(io.BytesIO(data)) as im:
            return im.size
    except Exception as exc:
        raise CorruptAssetError(f"invalid image bytes: {exc}") from exc


def probe_wav_bytes(data: bytes) -> tuple[int, int, float]:
    """(sample_rate, channels, duration) of WAV bytes; raises CorruptAssetError."""
    try:
        with wave.open(io.BytesIO(data), "rb") as w:
            rate = w.getframerate()
            channels = w.getnchannels()
            frames = w.getnframes()
    except Exception as exc:
        raise CorruptAssetError(f"invalid WAV bytes: {exc}") from exc
    if rate <= 0 or frames <= 0:
        raise CorruptAssetError("WAV has no audio frames")
    return rate, channels, frames / float(rate)


def probe_video_file(path: str) -> tuple[int, int, float, float, int]:
    """(width, height, fps, duration, frame_count) of a video file.

    Uses the container's stream header; raises CorruptAssetError for files
    the decoder cannot open or that contain no frames.
    """
    import cv2

    cap = cv2.VideoCapture(path)
    try:
        if not cap.isOpened():
            raise CorruptAssetError(f"cannot open video: {path}")
        width = int(cap.get(cv2.CAP_PROP_FRAME_WIDTH))
        height = int(cap.get(cv2.CAP_PROP_FRAME_HEIGHT))
        fps = float(cap.get(cv2.CAP_PROP_FPS))
        frames = int(cap.get(cv2.CAP_PROP_FRAME_COUNT))
    finally:
        cap.release()
    if width <= 0 or height <= 0 or fps <= 0 or frames <= 0:
        raise CorruptAssetError(f"no decodable video stream in {path}")
    return width, height, fps, frames / fps, frames


def probe_asset(path: str) -> dict:
    """Probe any supported media file into a metadata dict.

    Dispatches on extension: .png -> image, .wav -> audio, .mp4/.avi/.mkv ->
    video. Unparseable or unsupported files raise CorruptAssetError.
    """
    if not os.path.exists(path):
        raise CorruptAssetError(f"no such file: {path}")
    ext = os.path.splitext(path)[1].lower()
    if ext == ".png":
        with open(path, "rb") as f:
            data = f.read()
        w, h = probe_image_bytes(data)
        return {"kind": "image", "width": w, "height": h}
    if ext == ".wav":
        with open(path, "rb") as f:
            data = f.read()
        rate, channels, duration = probe_wav_bytes(data)
        return {"kind": "audio", "sample_rate": rate, "channels": channels,
                "duration": duration}
    if ext in (".mp4", ".avi", ".mkv"):
        w, h, fps, duration, frames = probe_video_file(path)
        return {"kind": "video", "width": w, "height": h, "fps": fps,
                "duration": duration, "frame_count": frames}
    raise CorruptAssetError(f"unsupported media type: {path}")


def file_hash(path: str) -> str:
    with open(path, "rb") as f:
        return sha256_hex(f.read())
