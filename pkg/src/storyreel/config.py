"""Pipeline configuration: defaults, YAML config file, CLI flag overrides.

Precedence is flag > file > default, and the fully resolved config is
recorded in the project manifest so any run can be reproduced from it.
"""

import os
from dataclasses import dataclass, field

import yaml

from .backends.endpoints import BACKEND_KINDS, BackendEndpoint, default_mock_endpoints
from .errors import InvalidRequestError
from .story import StyleConfig
from .timeline import MixConfig


@dataclass(frozen=True)
class TextGenConfig:
    story_max_tokens: int = 1024
    description_max_tokens: int = 256

    def to_dict(self) -> dict:
        return {"story_max_tokens": self.story_max_tokens,
                "description_max_tokens": self.description_max_tokens}


@dataclass(frozen=True)
class TtsConfig:
    voice: str = "en_US/vctk_low"
    length_scale: float = 2.1  # duration multiplier; >1 slows narration down
    per_sentence: bool = True  # False: one whole-story synthesis call

    def to_dict(self) -> dict:
        return {"voice": self.voice, "length_scale": self.length_scale,
                "per_sentence": self.per_sentence}


@dataclass(frozen=True)
class MusicConfig:
    preset: str | None = "raffi"
    target_duration: float = 60.0
    separate_vocals: bool = True  # applied to waveform backends only

    def to_dict(self) -> dict:
        return {"preset": self.preset, "target_duration": self.target_duration,
                "separate_vocals": self.separate_vocals}


@dataclass(frozen=True)
class ComposeConfig:
    frame_width: int = 1280
    frame_height: int = 720
    fps: int = 25
    mode: str = "native_2d"  # or "depth_backend"
    fallback_to_native: bool = True
    image_width: int = 512
    image_height: int = 512

    def to_dict(self) -> dict:
        return {"frame_width": self.frame_width, "frame_height": self.frame_height,
                "fps": self.fps, "mode": self.mode,
                "fallback_to_native": self.fallback_to_native,
                "image_width": self.image_width, "image_height": self.image_height}


@dataclass(frozen=True)
class RenderConfig:
    engine: str = "builtin"  # or "ffmpeg"
    ffmpeg_path: str = "ffmpeg"
    ffprobe_path: str = "ffprobe"
    video_codec: str = "libx264"
    crf: int = 20
    preset: str = "medium"
    audio_codec: str = "aac"
    audio_bitrate: str = "192k"

    def to_dict(self) -> dict:
        return {"engine": self.engine, "ffmpeg_path": self.ffmpeg_path,
                "ffprobe_path": self.ffprobe_path, "video_codec": self.video_codec,
                "crf": self.crf, "preset": self.preset,
                "audio_codec": self.audio_codec, "audio_bitrate": self.audio_bitrate}


@dataclass(frozen=True)
class PipelineConfig:
    backends: str = "mock"  # or "live"
    seed: int = 0           # request seed when the --seed flag is absent
    parallelism: int = 4
    candidates: int = 1          # automated mode; curated workflows pass more
    curated_candidates: int = 100
    style: StyleConfig = field(default_factory=StyleConfig)
    mix: MixConfig = field(default_factory=MixConfig)
    textgen: TextGenConfig = field(default_factory=TextGenConfig)
    tts: TtsConfig = field(default_factory=TtsConfig)
    music: MusicConfig = field(default_factory=MusicConfig)
    compose: ComposeConfig = field(default_factory=ComposeConfig)
    render: RenderConfig = field(default_factory=RenderConfig)
    endpoints: dict = field(default_factory=default_mock_endpoints)

    def to_dict(self) -> dict:
        return {
            "backends": self.backends,
            "seed": self.seed,
            "parallelism": self.parallelism,
            "candidates": self.candidates,
            "curated_candidates": self.curated_candidates,
            "style": self.style.to_dict(),
            "mix": self.mix.to_dict(),
            "textgen": self.textgen.to_dict(),
            "tts": self.tts.to_dict(),
            "music": self.music.to_dict(),
            "compose": self.compose.to_dict(),
            "render": self.render.to_dict(),
            "endpoints": {k: v.to_dict() for k, v in sorted(self.endpoints.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        endpoints = {k: BackendEndpoint.from_dict({"kind": k, **v})
                     for k, v in d.get("endpoints", {}).items()}
        for kind in BACKEND_KINDS:
            endpoints.setdefault(kind, BackendEndpoint(kind=kind, transport="mock"))
        return cls(
            backends=d.get("backends", "mock"),
            seed=int(d.get("seed", 0)),
            parallelism=int(d.get("parallelism", 4)),
            candidates=int(d.get("candidates", 1)),
            curated_candidates=int(d.get("curated_candidates", 100)),
            style=StyleConfig.from_dict(d.get("style", {})) if d.get("style") else StyleConfig(),
            mix=MixConfig.from_dict(d["mix"]) if d.get("mix") else MixConfig(),
            textgen=TextGenConfig(**d["textgen"]) if d.get("textgen") else TextGenConfig(),
            tts=TtsConfig(**d["tts"]) if d.get("tts") else TtsConfig(),
            music=MusicConfig(**d["music"]) if d.get("music") else MusicConfig(),
            compose=ComposeConfig(**d["compose"]) if d.get("compose") else ComposeConfig(),
            render=RenderConfig(**d["render"]) if d.get("render") else RenderConfig(),
            endpoints=endpoints,
        )


def load_config_file(path: str) -> dict:
    if not os.path.exists(path):
        raise InvalidRequestError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise InvalidRequestError(f"config file must be a mapping: {path}")
    return data


def resolve_config(config_path: str | None = None, **flag_overrides) -> PipelineConfig:
    """Merge defaults <- config file <- CLI flags (None flags are unset)."""
    merged: dict = {}
    if config_path:
        merged.update(load_config_file(config_path))
    for key, value in flag_overrides.items():
        if value is None:
            continue
        if key == "fps":
            merged.setdefault("compose", {})
            merged["compose"] = {**merged.get("compose", {}), "fps": int(value)}
        else:
            merged[key] = value
    cfg = PipelineConfig.from_dict(merged)
    if cfg.backends not in ("mock", "live"):
        raise InvalidRequestError(f"backends must be 'mock' or 'live', got {cfg.backends!r}")
    if cfg.backends == "mock":
        # Mock selection forces every endpoint onto the mock transport so a
        # config file with live URLs can still be dry-run safely.
        endpoints = {k: BackendEndpoint(
            kind=k, transport="mock", timeout=ep.timeout,
            max_retries=ep.max_retries, backoff_base_ms=ep.backoff_base_ms)
            for k, ep in cfg.endpoints.items()}
        object.__setattr__(cfg, "endpoints", endpoints)
    return cfg
