"""Narration layout, music fitting, ducking and the final mix.

All sample math runs on float64 arrays in [-1, 1]; the mix is rendered at a
fixed 44100 Hz and written as 16-bit PCM. Sample counts are exact: the mixed
output always has round(total_duration * 44100) samples.
"""

from dataclasses import dataclass

import numpy as np

from . import audio_io
from .assets import AudioAsset
from .errors import ContractViolationError

MIX_RATE = 44100


@dataclass(frozen=True)
class MixConfig:
    inter_sentence_pause: float = 0.7
    lead_in: float = 0.5
    tail: float = 1.0
    music_gain_db: float = -12.0
    duck_extra_db: float = -8.0
    duck_attack_release_ms: float = 250.0
    fade_out: float = 2.0
    channels: int = 1
    dump_envelope: bool = False  # write logs/envelope.csv during the mix stage

    def __post_init__(self):
        for name in ("inter_sentence_pause", "lead_in", "tail",
                     "duck_attack_release_ms", "fade_out"):
            if getattr(self, name) < 0:
                raise ContractViolationError(f"mix config {name} must be >= 0")
        if self.music_gain_db > 0 or self.duck_extra_db > 0:
            raise ContractViolationError("gains must be <= 0 dB")
        if self.channels not in (1, 2):
            raise ContractViolationError("channels must be 1 or 2")

    def to_dict(self) -> dict:
        return {
            "inter_sentence_pause": self.inter_sentence_pause,
            "lead_in": self.lead_in,
            "tail": self.tail,
            "music_gain_db": self.music_gain_db,
            "duck_extra_db": self.duck_extra_db,
            "duck_attack_release_ms": self.duck_attack_release_ms,
            "fade_out": self.fade_out,
            "channels": self.channels,
            "dump_envelope": self.dump_envelope,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MixConfig":
        return cls(**d)


@dataclass(frozen=True)
class SpeechSegment:
    sentence_index: int
    audio: AudioAsset
    start: float

    @property
    def duration(self) -> float:
        return self.audio.duration

    @property
    def end(self) -> float:
        return self.start + self.audio.duration

    def to_dict(self) -> dict:
        return {"sentence_index": self.sentence_index,
                "audio": self.audio.to_dict(), "start": self.start}

    @classmethod
    def from_dict(cls, d: dict) -> "SpeechSegment":
        return cls(d["sentence_index"], AudioAsset.from_dict(d["audio"]), d["start"])


def _round_samples(seconds: float, rate: int) -> int:
    return int(np.floor(seconds * rate + 0.5))


def layout_speech(clips: list[AudioAsset], cfg: MixConfig) -> tuple[list[SpeechSegment], float]:
    """Place narration clips on the global timeline.

    First clip starts at lead_in; each next clip starts after the previous
    plus the inter-sentence pause; total duration adds the tail after the
    last clip's end.
    """
    if not clips:
        raise ContractViolationError("layout_speech needs at least one clip")
    segments: list[SpeechSegment] = []
    cursor = cfg.lead_in
    for i, clip in enumerate(clips):
        segments.append(SpeechSegment(sentence_index=i, audio=clip, start=cursor))
        cursor += clip.duration + cfg.inter_sentence_pause
    total = segments[-1].end + cfg.tail
    return segments, total


def fit_music(music: np.ndarray, music_rate: int, total_duration: float,
              cfg: MixConfig) -> np.ndarray:
    """Loop or trim mono music samples to exactly round(total * rate) samples,
    then apply a linear fade over the final fade_out seconds."""
    if len(music) == 0:
        raise ContractViolationError("music has no samples")
    n_out = _round_samples(total_duration, music_rate)
    reps = int(np.ceil(n_out / len(music)))
    fitted = np.tile(music, max(reps, 1))[:n_out].astype(np.float64, copy=True)
    n_fade = min(_round_samples(cfg.fade_out, music_rate), n_out)
    if n_fade > 0:
        # Ramp hits exactly zero on the final sample.
        fitted[n_out - n_fade:] *= np.linspace(1.0, 0.0, n_fade)
    return fitted


def duck_envelope(segments: list[SpeechSegment], total_duration: float,
                  cfg: MixConfig, rate: int = MIX_RATE) -> np.ndarray:
    """Per-sample music gain multiplier.

    Bed level 10^(music_gain_db/20) outside speech, ducked by a further
    duck_extra_db inside each speech span. Linear ramps of the configured
    attack/release length sit just before each span start and just after each
    span end, so the span itself is fully ducked. Overlapping constraints
    take the deeper (smaller) gain.
    """
    n = _round_samples(total_duration, rate)
    bed = 10.0 ** (cfg.music_gain_db / 20.0)
    ducked = 10.0 ** ((cfg.music_gain_db + cfg.duck_extra_db) / 20.0)
    env = np.full(n, bed, dtype=np.float64)
    ramp_n = _round_samples(cfg.duck_attack_release_ms / 1000.0, rate)
    for seg in segments:
        s = _round_samples(seg.start, rate)
        e = _round_samples(seg.end, rate)
        if ramp_n > 0:
            # Attack over [s - ramp_n, s): reaches the ducked level at span start.
            ramp = np.linspace(bed, ducked, ramp_n, endpoint=False)
            lo, hi = max(s - ramp_n, 0), min(s, n)
            if hi > lo:
                off = lo - (s - ramp_n)
                env[lo:hi] = np.minimum(env[lo:hi], ramp[off:off + hi - lo])
        lo, hi = max(s, 0), min(e, n)
        if hi > lo:
            env[lo:hi] = ducked
        if ramp_n > 0:
            # Release over [e, e + ramp_n): back at bed level after the ramp.
            ramp = np.linspace(ducked, bed, ramp_n + 1)[1:]
            lo, hi = max(e, 0), min(e + ramp_n, n)
            if hi > lo:
                off = lo - e
                env[lo:hi] = np.minimum(env[lo:hi], ramp[off:off + hi - lo])
    return env


def render_mix(segments: list[SpeechSegment], speech_samples: dict[int, tuple[np.ndarray, int]],
               fitted_music: np.ndarray, music_rate: int, envelope: np.ndarray,
               total_duration: float, cfg: MixConfig) -> np.ndarray:
    """Sum narration over enveloped music, clamped to [-1, 1].

    ``speech_samples`` maps sentence_index to (mono samples, sample rate).
    Output is mono float64 at 44100 Hz with exactly round(total * 44100)
    samples; stereo duplication happens at WAV-write time.
    """
    n = _round_samples(total_duration, MIX_RATE)
    out = np.zeros(n, dtype=np.float64)

    music = audio_io.resample_linear(fitted_music, music_rate, MIX_RATE)
    if len(music) > n:
        music = music[:n]
    if len(envelope) != n:
        raise ContractViolationError(
            f"envelope length {len(envelope)} != mix length {n}")
    out[:len(music)] += music * envelope[:len(music)]

    for seg in segments:
        samples, rate = speech_samples[seg.sentence_index]
        samples = audio_io.resample_linear(audio_io.to_mono(samples), rate, MIX_RATE)
        start = _round_samples(seg.start, MIX_RATE)
        end = start + len(samples)
        # 3-sample slack absorbs start/resample rounding, nothing more.
        if end > n + 3:
            raise ContractViolationError(
                f"speech segment {seg.sentence_index} ends at {end / MIX_RATE:.3f}s, "
                f"beyond total {total_duration:.3f}s")
        end = min(end, n)
        out[start:end] += samples[:end - start]

    np.clip(out, -1.0, 1.0, out=out)
    return out


def mix_to_wav(mix: np.ndarray, cfg: MixConfig) -> bytes:
    """Encode the rendered mix as 16-bit PCM WAV at the mix rate."""
    if cfg.channels == 2:
        mix = np.stack([mix, mix], axis=1)
    return audio_io.write_wav_bytes(mix, MIX_RATE)


def envelope_csv(envelope: np.ndarray, rate: int = MIX_RATE, step_ms: float = 10.0) -> str:
    """Debug dump of the duck envelope, one (time, multiplier) row per step."""
    step = max(1, _round_samples(step_ms / 1000.0, rate))
    lines = ["time,multiplier"]
    for i in range(0, len(envelope), step):
        lines.append(f"{i / rate:.4f},{envelope[i]:.6f}")
    return "\n".join(lines) + "\n"
