"""Uniform gateway over all generative backends.

One gateway instance serves a whole pipeline run. Every operation goes
through the same funnel: build a canonical request, check the
content-addressed cache, otherwise invoke the adapter with retries and
single-flight coalescing, validate the returned bytes, persist them, and
record the result under the request hash.
"""

import logging
import threading
import time
from collections import Counter

from ..assets import AudioAsset, ImageAsset, VideoAsset, probe_image_bytes, probe_wav_bytes
from ..errors import (BackendError, BackendTimeoutError, ContractViolationError,
                      CorruptAssetError, TransientBackendError)
from . import mock, process, remote
from .endpoints import BackendEndpoint, GenerationRequest

logger = logging.getLogger("storyreel.gateway")

VALID_IMAGE_SIZES = (256, 512, 768, 1024)
SEPARATION_DURATION_TOLERANCE = 0.050


class Gateway:
    """Dispatch, cache, retry and instrument all backend calls."""

    def __init__(self, endpoints: dict[str, BackendEndpoint], store,
                 parallelism: int = 4, adapters: dict | None = None):
        self.endpoints = endpoints
        self.store = store
        self.call_counts: Counter = Counter()
        self.attempts: dict[str, int] = {}
        self._adapters = adapters or {}
        self._counts_lock = threading.Lock()
        self._flights_guard = threading.Lock()
        self._flights: dict[str, threading.Lock] = {}
        self._process_slots = threading.Semaphore(max(1, parallelism))

    # -- plumbing -----------------------------------------------------------

    def endpoint(self, kind: str) -> BackendEndpoint:
        try:
            return self.endpoints[kind]
        except KeyError:
            raise ContractViolationError(f"no endpoint configured for kind {kind!r}")

    def _flight_lock(self, request_hash: str) -> threading.Lock:
        with self._flights_guard:
            return self._flights.setdefault(request_hash, threading.Lock())

    def _record_call(self, kind: str):
        with self._counts_lock:
            self.call_counts[kind] += 1

    def snapshot_counts(self, reset: bool = False) -> dict[str, int]:
        with self._counts_lock:
            snap = dict(self.call_counts)
            if reset:
                self.call_counts.clear()
        return snap

    def _with_retries(self, request: GenerationRequest, fn):
        """Run ``fn`` with the endpoint's retry policy.

        Transient failures and timeouts retry with exponential backoff
        (delays non-decreasing); auth and malformed-response errors do not.
        Total attempts never exceed max_retries + 1.
        """
        ep = self.endpoint(request.kind)
        rhash = request.request_hash
        attempts = 0
        last: BackendError | None = None
        for attempt in range(ep.max_retries + 1):
            attempts = attempt + 1
            try:
                result = fn()
                self.attempts[rhash] = attempts
                return result
            except (TransientBackendError, BackendTimeoutError) as exc:
                exc.request_hash = rhash
                last = exc
                if attempt < ep.max_retries:
                    delay = ep.backoff_base_ms * (2 ** attempt) / 1000.0
                    if delay > 0:
                        time.sleep(delay)
            except BackendError as exc:
                exc.request_hash = rhash
                self.attempts[rhash] = attempts
                raise
        self.attempts[rhash] = attempts
        assert last is not None
        raise last

    def _cached_or_generate(self, request: GenerationRequest, generate):
        """Single-flight cache funnel: at most one live call per request hash."""
        rhash = request.request_hash
        with self._flight_lock(rhash):
            hit = self.store.cache_lookup(rhash)
            if hit is not None:
                return hit
            entry = generate()
            self.store.cache_store(rhash, request, entry)
            return entry

    # -- operations ---------------------------------------------------------

    def complete_text(self, prompt: str, params: dict | None = None, *,
                      seed: int = 0) -> str:
        ep = self.endpoint("text")
        payload = {"prompt": prompt, "seed": seed, **(params or {})}
        request = GenerationRequest("text", payload, ep.fingerprint)

        def generate():
            def call():
                self._record_call("text")
                if "text" in self._adapters:
                    return self._adapters["text"](payload)
                if ep.transport == "mock":
                    return mock.mock_complete_text(payload)
                if ep.transport == "remote_service":
                    return remote.remote_complete_text(payload, ep)
                with self._process_slots:
                    out = process.run_process_adapter(
                        ep, prompt.encode("utf-8"), seed, ".txt", ".txt")
                return out.decode("utf-8")

            return {"type": "text", "text": self._with_retries(request, call)}

        return self._cached_or_generate(request, generate)["text"]

    def generate_image(self, prompt: str, seed: int, width: int, height: int) -> ImageAsset:
        if width not in VALID_IMAGE_SIZES or height not in VALID_IMAGE_SIZES:
            raise ContractViolationError(
                f"image size {width}x{height} not in {VALID_IMAGE_SIZES}")
        ep = self.endpoint("image")
        payload = {"prompt": prompt, "seed": seed, "width": width, "height": height}
        request = GenerationRequest("image", payload, ep.fingerprint)

        def generate():
            def call():
                self._record_call("image")
                if "image" in self._adapters:
                    return self._adapters["image"](payload)
                if ep.transport == "mock":
                    return mock.mock_generate_image(payload)
                if ep.transport == "remote_service":
                    return remote.remote_generate_image(payload, ep)
                with self._process_slots:
                    return process.run_process_adapter(
                        ep, prompt.encode("utf-8"), seed, ".txt", ".png"), False

            png, nsfw = self._with_retries(request, call)
            w, h = probe_image_bytes(png)
            if (w, h) != (width, height):
                raise CorruptAssetError(
                    f"image backend returned {w}x{h}, requested {width}x{height}")
            chash, relpath = self.store.store_bytes(png, ".png")
            asset = ImageAsset(chash, relpath, w, h, nsfw_flagged=nsfw)
            return {"type": "asset", "asset": asset.to_dict()}

        entry = self._cached_or_generate(request, generate)
        return ImageAsset.from_dict(entry["asset"])

    def synthesize_speech(self, text: str, voice: str, length_scale: float, *,
                          seed: int = 0) -> AudioAsset:
        if not text:
            raise ContractViolationError("tts text must be nonempty")
        if not 0.5 <= length_scale <= 3.0:
            raise ContractViolationError(
                f"length_scale {length_scale} outside [0.5, 3.0]")
        ep = self.endpoint("tts")
        payload = {"text": text, "voice": voice, "length_scale": length_scale,
                   "seed": seed}
        request = GenerationRequest("tts", payload, ep.fingerprint)

        def generate():
            def call():
                self._record_call("tts")
                if "tts" in self._adapters:
                    return self._adapters["tts"](payload)
                if ep.transport == "mock":
                    return mock.mock_synthesize_speech(payload)
                if ep.transport == "remote_service":
                    return remote.remote_synthesize_speech(payload, ep)
                with self._process_slots:
                    return process.run_process_adapter(
                        ep, text.encode("utf-8"), 0, ".txt", ".wav")

            wav = self._with_retries(request, call)
            return {"type": "asset", "asset": self._store_wav(wav).to_dict()}

        entry = self._cached_or_generate(request, generate)
        return AudioAsset.from_dict(entry["asset"])

    def generate_music(self, preset: str | None, target_duration: float, *,
                       seed: int = 0) -> AudioAsset:
        if not 10.0 <= target_duration <= 600.0:
            raise ContractViolationError(
                f"music target_duration {target_duration} outside [10, 600]")
        ep = self.endpoint("music")
        payload = {"preset": preset, "target_duration": target_duration, "seed": seed}
        request = GenerationRequest("music", payload, ep.fingerprint)

        def generate():
            def call():
                self._record_call("music")
                if "music" in self._adapters:
                    return self._adapters["music"](payload)
                if ep.transport == "mock":
                    return mock.mock_generate_music(payload)
                if ep.transport == "remote_service":
                    return remote.remote_generate_music(payload, ep)
                with self._process_slots:
                    return process.run_process_adapter(ep, None, seed, ".txt", ".wav")

            wav = self._with_retries(request, call)
            asset = self._store_wav(wav)
            if asset.duration < min(target_duration, 60.0) - 0.5:
                logger.warning("music backend returned %.1fs for a %.1fs request; "
                               "fit_music will loop it", asset.duration, target_duration)
            return {"type": "asset", "asset": asset.to_dict()}

        entry = self._cached_or_generate(request, generate)
        return AudioAsset.from_dict(entry["asset"])

    def separate_vocals(self, music: AudioAsset) -> tuple[AudioAsset, AudioAsset]:
        ep = self.endpoint("vocal_separation")
        payload = {"input_hash": music.content_hash}
        request = GenerationRequest("vocal_separation", payload, ep.fingerprint)
        input_wav = self.store.read_asset(music.path)

        def generate():
            def call():
                self._record_call("vocal_separation")
                if "vocal_separation" in self._adapters:
                    return self._adapters["vocal_separation"](payload, input_wav)
                if ep.transport == "mock":
                    return mock.mock_separate_vocals(payload, input_wav)
                with self._process_slots:
                    # Tool contract: song in, instruments stem out. The vocals
                    # stem is synthesized as silence; only instruments are
                    # consumed downstream.
                    instruments = process.run_process_adapter(
                        ep, input_wav, 0, ".wav", ".wav")
                return mock.mock_separate_vocals(payload, instruments)

            vocals_wav, instruments_wav = self._with_retries(request, call)
            vocals = self._store_wav(vocals_wav)
            instruments = self._store_wav(instruments_wav)
            for stem in (vocals, instruments):
                if abs(stem.duration - music.duration) > SEPARATION_DURATION_TOLERANCE:
                    raise CorruptAssetError(
                        f"separated stem duration {stem.duration:.3f}s differs from "
                        f"input {music.duration:.3f}s by more than 50 ms")
            return {"type": "asset_pair", "vocals": vocals.to_dict(),
                    "instruments": instruments.to_dict()}

        entry = self._cached_or_generate(request, generate)
        return (AudioAsset.from_dict(entry["vocals"]),
                AudioAsset.from_dict(entry["instruments"]))

    def apply_depth_effect(self, image: ImageAsset, camera_path, duration: float,
                           fps: float, native_renderer) -> VideoAsset:
        """Depth-effect scene render.

        The mock transport delegates to the caller's native 2D renderer
        (byte-identical output by construction). Remote/process transports
        receive the source image and return an encoded clip.
        """
        ep = self.endpoint("depth_effect")
        payload = {"image_hash": image.content_hash, "camera_path": camera_path.to_dict(),
                   "duration": duration, "fps": fps}
        request = GenerationRequest("depth_effect", payload, ep.fingerprint)

        def generate():
            def call():
                self._record_call("depth_effect")
                if "depth_effect" in self._adapters:
                    return self._adapters["depth_effect"](payload)
                if ep.transport == "mock":
                    return native_renderer(image, camera_path, duration, fps)
                with self._process_slots:
                    return process.run_process_adapter(
                        ep, self.store.read_asset(image.path), 0, ".png", ".mp4")

            result = self._with_retries(request, call)
            if isinstance(result, VideoAsset):
                return {"type": "asset", "asset": result.to_dict()}
            return {"type": "asset", "asset": self._store_video_bytes(result).to_dict()}

        entry = self._cached_or_generate(request, generate)
        return VideoAsset.from_dict(entry["asset"])

    # -- storage helpers ----------------------------------------------------

    def _store_wav(self, wav: bytes) -> AudioAsset:
        rate, channels, duration = probe_wav_bytes(wav)
        chash, relpath = self.store.store_bytes(wav, ".wav")
        return AudioAsset(chash, relpath, rate, channels, duration)

    def _store_video_bytes(self, data: bytes) -> VideoAsset:
        from ..assets import probe_video_file
        chash, relpath = self.store.store_bytes(data, ".mp4")
        w, h, fps, duration, _ = probe_video_file(self.store.abspath(relpath))
        return VideoAsset(chash, relpath, w, h, fps, duration)
