"""Deterministic mock backends.

Every mock output is a pure function of (payload, seed). The rules here are
load-bearing: tests and the cache-discipline checks assert against them.

  text   - story prompts get a fixed 8-sentence tale with the subjects
           substituted; description prompts get "illustration of: <sentence>"
  image  - flat background whose hue derives from hash(prompt, seed), with
           the digest written into a corner pixel block so distinct requests
           always produce distinct bytes
  tts    - silence with a short beep; duration_ms = 60 * chars * length_scale
  music  - looped four-note sine motif seeded by the preset hash, exactly
           the requested duration
  vocal_separation - vocals: silence, instruments: passthrough
"""

import colorsys
import hashlib
import io
import re

import numpy as np
from PIL import Image

from .. import audio_io

TTS_MOCK_RATE = 22050
TTS_MS_PER_CHAR = 60.0
MUSIC_MOCK_RATE = 22050

STORY_SUBJECT_RE = re.compile(r"about a (.+?) and a (.+?):")
DESCRIPTION_MARKER = ", here is what the picture looks like:"
SENTENCE_MARKER = "From the sentence "

MOCK_STORY_SENTENCES = (
    "Once upon a time, a {x} lived at the edge of a sunny meadow.",
    "Every morning the {x} walked down to the old wooden fence.",
    "One day a gentle {y} appeared on the other side of the fence!",
    "The {x} and the {y} soon became the best of friends.",
    "Together they explored the green hills and splashed across the shallow stream.",
    "When a storm rolled in, the {y} led the {x} safely home.",
    "Do you know what the {x} dreamed about that night?",
    "The {x} dreamed of new adventures with the {y}, and they lived happily ever after.",
)


def _digest(*parts) -> bytes:
    h = hashlib.sha256()
    for p in parts:
        h.update(str(p).encode("utf-8"))
        h.update(b"\x1f")
    return h.digest()


def mock_complete_text(payload: dict) -> str:
    prompt = payload["prompt"]
    marker_at = prompt.rfind(DESCRIPTION_MARKER)
    if marker_at != -1:
        sent_at = prompt.rfind(SENTENCE_MARKER, 0, marker_at)
        if sent_at != -1:
            sentence = prompt[sent_at + len(SENTENCE_MARKER):marker_at]
            return f"illustration of: {sentence}"
    m = STORY_SUBJECT_RE.search(prompt)
    if m:
        x, y = m.group(1), m.group(2)
        return " ".join(s.format(x=x, y=y) for s in MOCK_STORY_SENTENCES)
    return f"Mock completion {_digest(prompt, payload.get('seed', 0)).hex()[:12]}."


def mock_generate_image(payload: dict) -> tuple[bytes, bool]:
    width, height = payload["width"], payload["height"]
    digest = _digest(payload["prompt"], payload["seed"])
    hue = int.from_bytes(digest[:4], "big") % 360
    r, g, b = colorsys.hsv_to_rgb(hue / 360.0, 0.55, 0.9)
    img = Image.new("RGB", (width, height), (int(r * 255), int(g * 255), int(b * 255)))
    # Stamp the digest into an 8x4 pixel block: distinct (prompt, seed) pairs
    # are guaranteed distinct image bytes, not just distinct hues.
    px = img.load()
    for i, byte in enumerate(digest):
        px[i % 8, i // 8] = (byte, 255 - byte, (byte * 7) % 256)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue(), False


def mock_synthesize_speech(payload: dict) -> bytes:
    text = payload["text"]
    length_scale = payload["length_scale"]
    duration_ms = TTS_MS_PER_CHAR * len(text) * length_scale
    n = int(np.floor(duration_ms / 1000.0 * TTS_MOCK_RATE + 0.5))
    samples = np.zeros(n, dtype=np.float64)
    beep_n = min(n, int(0.1 * TTS_MOCK_RATE))
    if beep_n > 0:
        t = np.arange(beep_n) / TTS_MOCK_RATE
        samples[:beep_n] = 0.3 * np.sin(2 * np.pi * 440.0 * t)
    return audio_io.write_wav_bytes(samples, TTS_MOCK_RATE)


MOTIF_FREQS = (220.0, 262.0, 294.0, 330.0, 392.0, 440.0, 494.0, 523.0)


def mock_generate_music(payload: dict) -> bytes:
    digest = _digest(payload.get("preset") or "unconditional", payload.get("seed", 0))
    notes = [MOTIF_FREQS[b % len(MOTIF_FREQS)] for b in digest[:4]]
    note_n = int(0.5 * MUSIC_MOCK_RATE)
    t = np.arange(note_n) / MUSIC_MOCK_RATE
    motif = np.concatenate([0.35 * np.sin(2 * np.pi * f * t) for f in notes])
    n_out = int(np.floor(payload["target_duration"] * MUSIC_MOCK_RATE + 0.5))
    reps = int(np.ceil(n_out / len(motif)))
    samples = np.tile(motif, max(1, reps))[:n_out]
    return audio_io.write_wav_bytes(samples, MUSIC_MOCK_RATE)


def mock_separate_vocals(payload: dict, input_wav: bytes) -> tuple[bytes, bytes]:
    samples, rate = audio_io.read_wav_bytes(input_wav)
    vocals = audio_io.write_wav_bytes(np.zeros_like(audio_io.to_mono(samples)), rate)
    return vocals, input_wav
